"""Scenario matrices and per-policy success statistics."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy.stats import binomtest

from .episode import EpisodeConfig, Label, ObjectSpec, run_episode
from .policies import ReleasePolicy
from .receivers import FirmGrasp, IncidentalTouch, LateHesitantGrasp, ReceiverPolicy, UpwardPull

DEFAULT_WEIGHTS = (0.3, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 15.0)


def default_receivers() -> list[ReceiverPolicy]:
    """One receiver of each scripted kind, touches from both sides."""
    return [
        FirmGrasp(),
        IncidentalTouch(normal=1),
        IncidentalTouch(normal=-1),
        UpwardPull(grasp_onset=5.0),
        LateHesitantGrasp(),
    ]


def cell_seed(base_seed: int, cell: int) -> int:
    """Seed shared by every policy run on the same (receiver, weight) cell."""
    return int(np.random.SeedSequence([int(base_seed), int(cell)]).generate_state(1)[0])


def build_matrix(seed: int = 0,
                 policies: Iterable[ReleasePolicy | str] = tuple(ReleasePolicy),
                 receivers: Sequence[ReceiverPolicy] | None = None,
                 weights: Sequence[float] = DEFAULT_WEIGHTS,
                 template: EpisodeConfig | None = None) -> list[EpisodeConfig]:
    """Cross product of policies, receivers and weights.

    Policies share seeds cell by cell, so all three methods face the same
    sensor noise and hand-detection error.  Non-matrix fields come from
    ``template``.
    """
    receivers = default_receivers() if receivers is None else list(receivers)
    policies = [ReleasePolicy(p) for p in policies]
    configs = []
    cell = 0
    for receiver in receivers:
        for weight in weights:
            s = cell_seed(seed, cell)
            obj = ObjectSpec(float(weight), name=f"L{weight:g}")
            for policy in policies:
                if template is None:
                    cfg = EpisodeConfig(receiver=receiver, object=obj, policy=policy, seed=s)
                else:
                    cfg = replace(template, receiver=receiver, object=obj, policy=policy, seed=s)
                configs.append(cfg)
            cell += 1
    return configs


@dataclass(frozen=True)
class PolicyMetrics:
    policy: str
    episodes: int
    successes: int
    premature: int
    timeouts: int
    rate: float
    ci_low: float
    ci_high: float

    def as_dict(self) -> dict[str, Any]:
        return {
            "policy": self.policy,
            "episodes": self.episodes,
            "successes": self.successes,
            "premature": self.premature,
            "timeouts": self.timeouts,
            "rate": round(self.rate, 6),
            "ci_low": round(self.ci_low, 6),
            "ci_high": round(self.ci_high, 6),
        }


def success_rate(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float, float]:
    """Success rate with an exact (Clopper-Pearson) binomial interval."""
    if n <= 0:
        raise ValueError("need at least one episode")
    if not 0 <= successes <= n:
        raise ValueError("successes must lie in [0, n]")
    ci = binomtest(int(successes), int(n)).proportion_ci(confidence, method="exact")
    return successes / n, float(ci.low), float(ci.high)


def policy_metrics(records: Sequence[dict[str, Any]], confidence: float = 0.95) -> list[PolicyMetrics]:
    """One row per policy, in the fixed policy order, from episode summaries."""
    rows = []
    for policy in ReleasePolicy:
        mine = [r for r in records if r["policy"] == policy.value]
        if not mine:
            continue
        labels = [r["label"] for r in mine]
        k = labels.count(Label.SUCCESS.value)
        rate, lo, hi = success_rate(k, len(mine), confidence)
        rows.append(PolicyMetrics(policy.value, len(mine), k,
                                  labels.count(Label.PREMATURE_RELEASE.value),
                                  labels.count(Label.NO_RELEASE_TIMEOUT.value), rate, lo, hi))
    return rows


def _run_one(cfg: EpisodeConfig) -> dict[str, Any]:
    record = run_episode(cfg).summary()
    if hasattr(cfg.receiver, "normal"):
        record["normal"] = cfg.receiver.normal
    return record


@dataclass
class SuiteResult:
    episodes: list[dict[str, Any]]
    table: list[PolicyMetrics]

    def rate(self, policy: ReleasePolicy | str) -> float:
        policy = ReleasePolicy(policy).value
        return next(row.rate for row in self.table if row.policy == policy)


def run_suite(configs: Sequence[EpisodeConfig], jobs: int = 1,
              progress: Callable[[int, dict[str, Any]], None] | None = None) -> SuiteResult:
    """Run every episode and aggregate per-policy success rates.

    With ``jobs > 1`` episodes run in a process pool; results are collected
    in input order, so the output does not depend on scheduling.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("the scenario matrix is empty")
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    records: list[dict[str, Any]] = []
    if jobs == 1:
        results: Iterable[dict[str, Any]] = map(_run_one, configs)
        for i, rec in enumerate(results):
            records.append(rec)
            if progress is not None:
                progress(i, rec)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, rec in enumerate(pool.map(_run_one, configs)):
                records.append(rec)
                if progress is not None:
                    progress(i, rec)
    return SuiteResult(records, policy_metrics(records))
