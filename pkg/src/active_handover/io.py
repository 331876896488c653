"""JSON configuration parsing and deterministic output writers.

Configs are plain JSON.  A single episode looks like::

    {"receiver": {"kind": "FirmGrasp", "stiffness": 600},
     "object": {"weight": 3.0},
     "policy": "ACTIVE", "seed": 7}

Nested ``rates``, ``planner``, ``prior`` and ``sim`` objects override the
corresponding defaults field by field.  A suite is either an explicit
``{"episodes": [...]}`` list or a generated matrix::

    {"seed": 0,
     "suite": {"policies": ["ACTIVE", "WEIGHT_THR"],
               "weights": [0.3, 3.0],
               "receivers": [{"kind": "FirmGrasp"}],
               "template": {"timeout": 10}}}

Every writer emits the seed, a SHA-256 hash of the canonical resolved
config and the package version, and never a timestamp, so reruns are
byte-identical.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .contact_model import Prior
from .planner import PlannerConfig
from .sim.episode import TRACE_COLUMNS, EpisodeConfig, EpisodeResult, ObjectSpec, Rates, SimParams
from .sim.policies import ReleasePolicy
from .sim.receivers import FirmGrasp, IncidentalTouch, LateHesitantGrasp, NoContact, UpwardPull
from .sim.suite import DEFAULT_WEIGHTS, SuiteResult, build_matrix

RECEIVERS = {cls.kind: cls for cls in (NoContact, IncidentalTouch, FirmGrasp, UpwardPull,
                                       LateHesitantGrasp)}
SUITE_COLUMNS = ("policy", "episodes", "successes", "premature", "timeouts", "rate",
                 "ci_low", "ci_high", "seed", "config_hash", "version")
BAND_COLUMNS = ("kind", "u", "f", "mean", "lower", "upper")


class ConfigError(ValueError):
    """Invalid configuration; carries a JSON position or key path when known."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None,
                 path: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.path = path
        where = ""
        if line is not None:
            where = f"line {line}, column {col}: "
        elif path:
            where = f"{path}: "
        super().__init__(where + message)


# ---------------------------------------------------------------- parsing

def parse_json(text: str, source: str = "<config>") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: {exc.msg}", exc.lineno, exc.colno) from None


def load_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_json(text, str(path))


def _expect_dict(d: Any, path: str) -> dict:
    if not isinstance(d, dict):
        raise ConfigError("expected a JSON object", path=path or "<root>")
    return d


def _build(cls, d: Any, path: str, **extra):
    d = dict(_expect_dict(d, path))
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"unknown field(s) {', '.join(unknown)}", path=path)
    d.update(extra)
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path=path) from None


def receiver_from_dict(d: Any, path: str = "receiver"):
    d = dict(_expect_dict(d, path))
    kind = d.pop("kind", None)
    if kind not in RECEIVERS:
        raise ConfigError(f"unknown receiver kind {kind!r}; expected one of "
                          f"{', '.join(RECEIVERS)}", path=f"{path}.kind")
    cls = RECEIVERS[kind]
    if cls is LateHesitantGrasp and "touch" in d:
        d["touch"] = _build(IncidentalTouch, d["touch"], f"{path}.touch")
    if cls in (LateHesitantGrasp, UpwardPull) and d.get("grasp") is not None:
        d["grasp"] = _build(FirmGrasp, d["grasp"], f"{path}.grasp")
    return _build(cls, d, path)


_NESTED = {"rates": Rates, "planner": PlannerConfig, "prior": Prior, "sim": SimParams}


def episode_from_dict(d: Any, path: str = "", defaults: dict | None = None) -> EpisodeConfig:
    """Build an :class:`EpisodeConfig`; ``defaults`` supplies missing top-level keys."""
    d = dict(_expect_dict(d, path))
    if defaults:
        d = {**defaults, **d}
    prefix = f"{path}." if path else ""
    if "receiver" not in d:
        raise ConfigError("missing 'receiver'", path=path or "<root>")
    if "object" not in d:
        raise ConfigError("missing 'object'", path=path or "<root>")
    d["receiver"] = receiver_from_dict(d["receiver"], f"{prefix}receiver")
    d["object"] = _build(ObjectSpec, d["object"], f"{prefix}object")
    if "policy" in d:
        try:
            d["policy"] = ReleasePolicy(d["policy"])
        except ValueError:
            raise ConfigError(f"unknown policy {d['policy']!r}", path=f"{prefix}policy") from None
    for key, cls in _NESTED.items():
        if key in d:
            d[key] = _build(cls, d[key], f"{prefix}{key}")
    return _build(EpisodeConfig, d, path or "<root>")


def suite_from_dict(d: Any, seed: int | None = None) -> tuple[list[EpisodeConfig], int]:
    """Scenario matrix and base seed from a suite config (``{}`` = default suite)."""
    d = dict(_expect_dict(d, ""))
    configured = d.pop("seed", 0)
    if not isinstance(configured, int) or isinstance(configured, bool):
        raise ConfigError("seed must be an integer", path="seed")
    base = int(configured if seed is None else seed)
    if "episodes" in d:
        items = d.pop("episodes")
        if d:
            raise ConfigError(f"unknown field(s) {', '.join(sorted(d))}", path="<root>")
        if not isinstance(items, list):
            raise ConfigError("expected a list", path="episodes")
        configs = [episode_from_dict(item, f"episodes[{i}]", {"seed": base + i})
                   for i, item in enumerate(items)]
    else:
        spec = dict(_expect_dict(d.pop("suite", {}), "suite"))
        if d:
            raise ConfigError(f"unknown field(s) {', '.join(sorted(d))}", path="<root>")
        allowed = {"policies", "weights", "receivers", "template"}
        unknown = sorted(set(spec) - allowed)
        if unknown:
            raise ConfigError(f"unknown field(s) {', '.join(unknown)}", path="suite")
        try:
            policies = [ReleasePolicy(p) for p in spec.get("policies", list(ReleasePolicy))]
        except ValueError as exc:
            raise ConfigError(str(exc), path="suite.policies") from None
        weights = spec.get("weights", list(DEFAULT_WEIGHTS))
        receivers = None
        if "receivers" in spec:
            receivers = [receiver_from_dict(r, f"suite.receivers[{i}]")
                         for i, r in enumerate(spec["receivers"])]
        template = None
        if "template" in spec:
            tmpl = dict(_expect_dict(spec["template"], "suite.template"))
            tmpl.setdefault("receiver", {"kind": "NoContact"})
            tmpl.setdefault("object", {"weight": 1.0})
            template = episode_from_dict(tmpl, "suite.template")
        try:
            configs = build_matrix(base, policies, receivers, [float(w) for w in weights], template)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), path="suite") from None
    if not configs:
        raise ConfigError("the scenario matrix is empty", path="<root>")
    return configs, base


# ---------------------------------------------------------- serialization

def to_jsonable(obj: Any) -> Any:
    """Plain JSON types for configs, receivers, enums and arrays."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {}
        kind = getattr(type(obj), "kind", None)
        if isinstance(kind, str):
            out["kind"] = kind
        for f in dataclasses.fields(obj):
            if f.init:
                out[f.name] = to_jsonable(getattr(obj, f.name))
        return out
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def canonical_json(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def provenance(seed: int, cfg_hash: str) -> dict[str, Any]:
    return {"seed": int(seed), "config_hash": cfg_hash, "version": __version__}


def _fmt(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def _header_comment(meta: dict[str, Any]) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n"


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[Any]],
              meta: dict[str, Any] | None = None) -> Path:
    """CSV with a fixed header; ``meta`` goes in one leading ``#`` comment line."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        if meta:
            fh.write(_header_comment(meta))
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path


def write_jsonl(path: str | Path, records: Iterable[dict[str, Any]]) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(to_jsonable(rec), sort_keys=True, allow_nan=False) + "\n")
    return path


def write_trace_csv(path: str | Path, result: EpisodeResult, meta: dict[str, Any]) -> Path:
    rows = (tuple(float(x) for x in row) for row in result.trace)
    return write_csv(path, TRACE_COLUMNS, rows, meta)


def write_suite_tables(out_dir: str | Path, result: SuiteResult, meta: dict[str, Any]) -> dict[str, Path]:
    """``suite.csv``, ``suite.json`` and ``episodes.jsonl`` under ``out_dir``."""
    out_dir = Path(out_dir)
    rows = [{**row.as_dict(), **meta} for row in result.table]
    csv_path = write_csv(out_dir / "suite.csv", SUITE_COLUMNS,
                         ([r[c] for c in SUITE_COLUMNS] for r in rows))
    json_path = out_dir / "suite.json"
    json_path.write_text(json.dumps({**meta, "table": [row.as_dict() for row in result.table]},
                                    sort_keys=True, indent=2) + "\n")
    episodes = write_jsonl(out_dir / "episodes.jsonl",
                           ({**rec, "suite_seed": meta["seed"], "config_hash": meta["config_hash"],
                             "version": meta["version"]} for rec in result.episodes))
    return {"csv": csv_path, "json": json_path, "episodes": episodes}
