"""Command-line entry point: ``active-handover {run,suite,trace,oracle-check}``.

Every flag can also come from the environment with the ``ACTIVE_HANDOVER_``
prefix (``ACTIVE_HANDOVER_CONFIG``, ``_OUT``, ``_SEED``, ``_JOBS``,
``_VERBOSE``); explicit flags win.

Exit codes: 0 clean completion (whatever the episode labels), 2 invalid
configuration, 3 numerical divergence, 4 oracle disagreement.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

from . import __version__, oracle
from .io import (
    BAND_COLUMNS,
    ConfigError,
    config_hash,
    episode_from_dict,
    load_json,
    provenance,
    suite_from_dict,
    to_jsonable,
    write_csv,
    write_jsonl,
    write_suite_tables,
    write_trace_csv,
)
from .sim.bands import Z95, model_at, predictive_band, window_samples
from .sim.episode import SimulationDiverged, run_episode
from .sim.scenarios import SCENARIOS
from .sim.suite import run_suite

ENV_PREFIX = "ACTIVE_HANDOVER_"
EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_ORACLE = 0, 2, 3, 4
COMMANDS = ("run", "suite", "trace", "oracle-check")

log = logging.getLogger("active_handover")


@dataclass
class RunManifest:
    command: str
    config: Path | None
    out: Path
    seed: int | None
    jobs: int
    verbose: bool


def _env(name: str) -> str | None:
    value = os.environ.get(ENV_PREFIX + name)
    return value if value not in (None, "") else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="active-handover",
        description="Simulate active-sensing handovers, scenario suites and oracle checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "run one episode; writes trace.csv and summary.jsonl",
        "suite": "run a scenario matrix; writes suite.csv, suite.json and episodes.jsonl",
        "trace": "export (u, f) samples and the predictive band as band.csv",
        "oracle-check": "compare closed forms against brute-force and batch oracles",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", type=Path, default=None, help="JSON configuration file")
        p.add_argument("--out", type=Path, default=None, help="output directory (created if missing)")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--jobs", type=int, default=None, help="worker processes for suites")
        p.add_argument("--verbose", action="store_true", default=None, help="log progress to stderr")
    return parser


def parse_manifest(argv: Sequence[str] | None = None) -> RunManifest:
    args = build_parser().parse_args(argv)
    config = args.config if args.config is not None else _env("CONFIG")
    out = args.out if args.out is not None else (_env("OUT") or "out")
    seed = args.seed
    jobs = args.jobs
    try:
        if seed is None and _env("SEED") is not None:
            seed = int(_env("SEED"))
        if jobs is None:
            jobs = int(_env("JOBS") or 1)
    except ValueError as exc:
        raise ConfigError(f"bad environment override: {exc}") from None
    verbose = args.verbose if args.verbose is not None else (
        (_env("VERBOSE") or "").lower() in ("1", "true", "yes", "on"))
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    return RunManifest(args.command, Path(config) if config else None, Path(out), seed, jobs,
                       verbose)


def _load(manifest: RunManifest, required: bool) -> dict[str, Any]:
    if manifest.config is None:
        if required:
            raise ConfigError(f"'{manifest.command}' needs --config")
        return {}
    data = load_json(manifest.config)
    if not isinstance(data, dict):
        raise ConfigError("top-level JSON value must be an object", path="<root>")
    return data


def _prepare_out(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc.strerror}") from None
    return path


# --------------------------------------------------------------- commands

def cmd_run(manifest: RunManifest) -> int:
    data = _load(manifest, required=True)
    cfg = episode_from_dict(data)
    if manifest.seed is not None:
        cfg = replace(cfg, seed=manifest.seed)
    meta = provenance(cfg.seed, config_hash(cfg))
    out = _prepare_out(manifest.out)
    log.info("running %s / %s, L=%g N, seed %d", cfg.policy.value, cfg.receiver.kind,
             cfg.object.weight, cfg.seed)
    result = run_episode(cfg)
    write_trace_csv(out / "trace.csv", result, meta)
    write_jsonl(out / "summary.jsonl", [{**result.summary(), **meta}])
    print(json.dumps({**result.summary(), **meta}, sort_keys=True))
    return EXIT_OK


def cmd_suite(manifest: RunManifest) -> int:
    data = _load(manifest, required=False)
    configs, base_seed = suite_from_dict(data, manifest.seed)
    meta = provenance(base_seed, config_hash([to_jsonable(c) for c in configs]))
    out = _prepare_out(manifest.out)
    log.info("suite of %d episodes with %d job(s)", len(configs), manifest.jobs)

    def progress(i: int, rec: dict[str, Any]) -> None:
        log.info("[%d/%d] %s %s L=%g -> %s", i + 1, len(configs), rec["policy"],
                 rec["receiver"], rec["weight"], rec["label"])

    result = run_suite(configs, jobs=manifest.jobs, progress=progress)
    write_suite_tables(out, result, meta)
    print(f"{'policy':<11} {'n':>4} {'success':>8} {'rate':>6}  95% CI")
    for row in result.table:
        print(f"{row.policy:<11} {row.episodes:>4} {row.successes:>8} {row.rate:>6.3f}"
              f"  [{row.ci_low:.3f}, {row.ci_high:.3f}]")
    return EXIT_OK


def _trace_config(data: dict[str, Any]):
    data = dict(data)
    band = data.pop("band", {}) or {}
    if not isinstance(band, dict):
        raise ConfigError("expected a JSON object", path="band")
    if "scenario" in data:
        name = data.pop("scenario")
        if name not in SCENARIOS:
            raise ConfigError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}",
                              path="scenario")
        kwargs = {k: data.pop(k) for k in ("weight", "seed") if k in data}
        if data:
            raise ConfigError(f"unknown field(s) {', '.join(sorted(data))}", path="<root>")
        try:
            cfg = SCENARIOS[name](**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), path="<root>") from None
    else:
        cfg = episode_from_dict(data)
    unknown = sorted(set(band) - {"at", "points"})
    if unknown:
        raise ConfigError(f"unknown field(s) {', '.join(unknown)}", path="band")
    at = band.get("at", "end")
    if not (at in ("end", "probing+1") or isinstance(at, (int, float))):
        raise ConfigError("'at' must be 'end', 'probing+1' or a time in seconds", path="band.at")
    points = band.get("points", 41)
    if not isinstance(points, int) or points < 2:
        raise ConfigError("'points' must be an integer >= 2", path="band.points")
    return cfg, at, points


def cmd_trace(manifest: RunManifest) -> int:
    data = _load(manifest, required=True)
    cfg, at, points = _trace_config(data)
    if manifest.seed is not None:
        cfg = replace(cfg, seed=manifest.seed)
    meta = provenance(cfg.seed, config_hash({"episode": cfg, "band": {"at": at, "points": points}}))
    out = _prepare_out(manifest.out)
    result = run_episode(cfg)
    end = float(result.trace[-1, 0])
    if at == "end":
        t_band = end
    elif at == "probing+1":
        t_band = end if result.probing_onset is None else min(end, result.probing_onset + 1.0)
    else:
        t_band = min(end, float(at))
    samples = window_samples(result, t_band)
    model = model_at(result, t_band)
    v_max = cfg.planner.v_max
    band = predictive_band(model, v_max, points)
    rows = [("sample", u, f, "", "", "") for u, f in samples]
    rows += [("band", u, "", m, lo, hi)
             for u, m, lo, hi in zip(band.us, band.mean, band.lower, band.upper)]
    write_csv(out / "band.csv", BAND_COLUMNS, rows, meta)
    hw_pos = float(band.half_width[-1])
    hw_neg = float(band.half_width[0])
    summary = {**result.summary(), **meta, "band_time": round(t_band, 6),
               "band_half_width_pos": hw_pos, "band_half_width_neg": hw_neg,
               "band_ratio": hw_pos / hw_neg if hw_neg > 0 else None, "band_z": Z95,
               "model_mean": model.mean.tolist()}
    write_jsonl(out / "summary.jsonl", [summary])
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_oracle_check(manifest: RunManifest) -> int:
    data = _load(manifest, required=False)
    allowed = {"instances", "sequences", "length", "seed"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown field(s) {', '.join(unknown)}", path="<root>")
    params = {"instances": 1000, "sequences": 20, "length": 1000, "seed": 0, **data}
    if manifest.seed is not None:
        params["seed"] = manifest.seed
    for key in ("instances", "sequences", "length", "seed"):
        if not isinstance(params[key], int) or params[key] < 0:
            raise ConfigError("must be a nonnegative integer", path=key)
    meta = provenance(params["seed"], config_hash(params))
    out = _prepare_out(manifest.out)
    firm = oracle.firmness_oracle(params["instances"], params["seed"])
    contact = oracle.contact_oracle(params["sequences"], params["length"], params["seed"])
    contact_ok = contact.max_error < 1e-8
    report = {**meta, "firmness": firm.as_dict(), "contact_model": contact.as_dict(),
              "ok": firm.ok and contact_ok}
    (out / "oracle.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    print(json.dumps(report, sort_keys=True))
    if report["ok"]:
        return EXIT_OK
    failures = {**meta, "firmness": firm.disagreements,
                "contact_model": None if contact_ok else contact.as_dict()}
    path = out / "oracle_failures.json"
    path.write_text(json.dumps(failures, sort_keys=True, indent=2) + "\n")
    print(f"oracle disagreement; failing instances written to {path}", file=sys.stderr)
    return EXIT_ORACLE


HANDLERS = {"run": cmd_run, "suite": cmd_suite, "trace": cmd_trace,
            "oracle-check": cmd_oracle_check}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        manifest = parse_manifest(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if manifest.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return HANDLERS[manifest.command](manifest)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationDiverged as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
