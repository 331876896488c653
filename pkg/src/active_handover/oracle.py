"""Randomized agreement checks against brute-force and batch references.

Two checks are offered:

* firmness: the closed-form robust LP verdict against a dense grid over the
  velocity partition and the unit circle of the confidence ellipsoid;
* contact model: the sliding-window recursive posterior against a direct
  batch solve over the same window, after every update.

The closed form is looked up on the :mod:`firmness` module at call time, so
a patched implementation is what gets checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import firmness
from .contact_model import ContactModel, Prior, Sample, SampleWindow, feature_matrix

BOUNDARY_MARGIN = 1e-6


def random_firmness_instance(rng: np.random.Generator) -> dict[str, Any]:
    """One ``(m, S, v_max, f_target, c)`` draw.

    Targets are scaled to the forces reachable at ``v_max`` so that both
    verdicts are common and many instances sit close to the boundary.
    """
    mean = rng.normal(0.0, 30.0, size=2)
    a = rng.normal(size=(2, 2)) * math.exp(rng.uniform(math.log(0.05), math.log(2.0)))
    cov = a @ a.T + 1e-3 * np.eye(2)
    v_max = float(rng.uniform(0.05, 0.15))
    confidence = float(rng.uniform(0.5, 0.999))
    reach = (float(np.abs(mean).max()) + math.sqrt(float(np.trace(cov)))) * v_max
    f_target = float(rng.uniform(-1.5, 1.5) * reach)
    return {"mean": mean.tolist(), "cov": cov.tolist(), "v_max": v_max,
            "f_target": f_target, "confidence": confidence}


def _ellipsoid(instance: dict[str, Any]) -> firmness.ConfidenceEllipsoid:
    model = ContactModel(np.array(instance["mean"]), np.array(instance["cov"]))
    return firmness.ellipsoid_from(model, instance["confidence"])


@dataclass
class FirmnessReport:
    seed: int
    instances: int
    checks: int = 0
    boundary: int = 0
    disagreements: list[dict[str, Any]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.disagreements

    def as_dict(self) -> dict[str, Any]:
        return {"seed": self.seed, "instances": self.instances, "checks": self.checks,
                "boundary_skipped": self.boundary,
                "disagreements": len(self.disagreements)}


def check_firmness_instance(instance: dict[str, Any], margin: float = BOUNDARY_MARGIN,
                            n_u: int = 201, n_z: int = 3600) -> tuple[int, int, list[dict]]:
    """Compare every (partition, sense) LP of one instance.

    Returns ``(checks, boundary_skipped, disagreements)``.
    """
    ell = _ellipsoid(instance)
    checks = skipped = 0
    bad = []
    for part in firmness.partitions(instance["v_max"]):
        for sense in firmness.Sense:
            grid = firmness.brute_force_slack(ell, part, instance["f_target"], sense, n_u, n_z)
            if abs(grid) <= margin:
                skipped += 1
                continue
            checks += 1
            closed = bool(firmness.robust_lp_feasible(ell, part, instance["f_target"], sense))
            if closed != (grid >= 0.0):
                bad.append({**instance, "partition": part.tag, "sense": sense.name,
                            "closed_form": closed, "grid_slack": grid})
    return checks, skipped, bad


def firmness_oracle(n: int = 1000, seed: int = 0, margin: float = BOUNDARY_MARGIN) -> FirmnessReport:
    rng = np.random.default_rng(seed)
    report = FirmnessReport(seed=seed, instances=n)
    for i in range(n):
        inst = random_firmness_instance(rng)
        checks, skipped, bad = check_firmness_instance(inst, margin)
        report.checks += checks
        report.boundary += skipped
        report.disagreements.extend({"index": i, **b} for b in bad)
    return report


def reference_posterior(prior: Prior, us, fs) -> tuple[np.ndarray, np.ndarray]:
    """Direct batch solve of the Gaussian posterior (mean, covariance)."""
    phi = feature_matrix(us)
    fs = np.asarray(fs, dtype=float)
    s0_inv = np.linalg.inv(prior.cov)
    precision = s0_inv + phi.T @ phi / prior.noise_var
    cov = np.linalg.inv(precision)
    mean = cov @ (s0_inv @ prior.mean + phi.T @ fs / prior.noise_var)
    return mean, cov


@dataclass
class ContactReport:
    seed: int
    sequences: int
    length: int
    max_error: float

    def as_dict(self) -> dict[str, Any]:
        return {"seed": self.seed, "sequences": self.sequences, "length": self.length,
                "max_error": self.max_error}


def windowed_reference_posteriors(prior: Prior, us, fs, capacity: int):
    """Batch posteriors of every prefix window ``[max(0, k+1-capacity), k]``.

    Window sums come from prefix sums over the whole sequence, so each
    posterior is solved from scratch without any recursion.
    """
    phi = feature_matrix(us)
    fs = np.asarray(fs, dtype=float)
    outer = np.einsum("ni,nj->nij", phi, phi)
    cross = phi * fs[:, None]
    zero_o = np.zeros((1, 2, 2))
    zero_c = np.zeros((1, 2))
    c_outer = np.concatenate([zero_o, np.cumsum(outer, axis=0)])
    c_cross = np.concatenate([zero_c, np.cumsum(cross, axis=0)])
    hi = np.arange(1, len(phi) + 1)
    lo = np.maximum(0, hi - capacity)
    s0_inv = np.linalg.inv(prior.cov)
    precision = s0_inv + (c_outer[hi] - c_outer[lo]) / prior.noise_var
    info = s0_inv @ prior.mean + (c_cross[hi] - c_cross[lo]) / prior.noise_var
    cov = np.linalg.inv(precision)
    mean = np.einsum("nij,nj->ni", cov, info)
    return mean, cov


def contact_oracle(sequences: int = 100, length: int = 1000, seed: int = 0,
                   capacity: int = 200, v_max: float = 0.1) -> ContactReport:
    """Worst element-wise gap between recursive and batch posteriors,
    compared after every single update."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(sequences):
        prior = Prior()
        window = SampleWindow(prior, capacity=capacity)
        w = rng.normal(0.0, 50.0, size=2)
        us = rng.uniform(-v_max, v_max, size=length)
        us[rng.random(length) < 0.1] = 0.0
        fs = feature_matrix(us) @ w + rng.normal(0.0, 0.5, size=length)
        means = np.empty((length, 2))
        covs = np.empty((length, 2, 2))
        for k in range(length):
            window.update(Sample(float(us[k]), float(fs[k]), float(k)))
            model = window.model()
            means[k] = model.mean
            covs[k] = model.cov
        ref_mean, ref_cov = windowed_reference_posteriors(prior, us, fs, capacity)
        worst = max(worst, float(np.max(np.abs(means - ref_mean))),
                    float(np.max(np.abs(covs - ref_cov))))
    return ContactReport(seed, sequences, length, worst)
