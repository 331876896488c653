"""Firm-grasp detection by robust feasibility of target forces.

A target force is c-feasible when every weight vector in the c-confidence
ellipsoid of the contact model can produce it with some admissible
velocity.  Inside each sign partition of the velocity range the model is
linear, so the check reduces to two robust LPs per partition.  Because the
worst case over the ellipsoid is ``E m u + |u| ||E P||`` and that expression
is linear in ``u`` on a fixed-sign interval, both LPs are decided exactly by
looking at the interval endpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .contact_model import ContactModel

TOL = 1e-9


def chi2_quantile_2dof(c: float) -> float:
    """Quantile of the chi-square distribution with two degrees of freedom."""
    if not 0.0 < c < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {c!r}")
    return -2.0 * math.log1p(-c)


@dataclass(frozen=True)
class ConfidenceEllipsoid:
    """The set ``{center + shape @ z : ||z|| <= 1}``."""

    center: np.ndarray
    shape: np.ndarray

    def contains(self, w) -> np.ndarray:
        w = np.atleast_2d(np.asarray(w, dtype=float))
        z = np.linalg.solve(self.shape, (w - self.center).T)
        return np.sum(z * z, axis=0) <= 1.0


def ellipsoid_from(model: ContactModel, c: float) -> ConfidenceEllipsoid:
    """Confidence ellipsoid of ``N(m, S)`` at level ``c``.

    The shape matrix is the lower Cholesky factor of ``S`` scaled by the
    square root of the 2-dof chi-square quantile.
    """
    try:
        chol = np.linalg.cholesky(model.cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("model covariance is not positive definite") from exc
    return ConfidenceEllipsoid(model.mean.copy(), math.sqrt(chi2_quantile_2dof(c)) * chol)


class Sense(Enum):
    LESS = "less"
    GREATER = "greater"


@dataclass(frozen=True)
class InputPartition:
    """One sign piece of the velocity range together with its weight selector."""

    tag: str
    lo: float
    hi: float
    selector: int

    @classmethod
    def pos(cls, v_max: float) -> "InputPartition":
        return cls("POS", 0.0, float(v_max), 0)

    @classmethod
    def neg(cls, v_max: float) -> "InputPartition":
        return cls("NEG", -float(v_max), 0.0, 1)


def partitions(v_max: float) -> tuple[InputPartition, InputPartition]:
    if not v_max > 0:
        raise ValueError("v_max must be positive")
    return InputPartition.pos(v_max), InputPartition.neg(v_max)


def robust_slack(ell: ConfidenceEllipsoid, part: InputPartition, f_target: float,
                 sense: Sense) -> float:
    """Best constraint slack over the partition; the LP is feasible iff it is >= 0."""
    wm = float(ell.center[part.selector])
    spread = float(np.linalg.norm(ell.shape[part.selector]))
    best = -math.inf
    for u in (part.lo, part.hi):
        if sense is Sense.LESS:
            slack = f_target - (wm * u + abs(u) * spread)
        else:
            slack = (wm * u - abs(u) * spread) - f_target
        best = max(best, slack)
    return best


def robust_lp_feasible(ell: ConfidenceEllipsoid, part: InputPartition, f_target: float,
                       sense: Sense, tol: float = TOL) -> bool:
    """Whether some ``u`` in the partition keeps the output on the ``sense``
    side of ``f_target`` for every weight in the ellipsoid."""
    return robust_slack(ell, part, f_target, sense) >= -tol


def brute_force_slack(ell: ConfidenceEllipsoid, part: InputPartition, f_target: float,
                      sense: Sense, n_u: int = 201, n_z: int = 3600) -> float:
    """Grid oracle for :func:`robust_slack`.

    Evaluates the robust constraint directly on a velocity grid over the
    partition and a set of directions on the unit circle.  Only boundary
    points of the disk are needed since the constraint is linear in ``z``.
    """
    us = np.linspace(part.lo, part.hi, n_u)
    theta = 2.0 * np.pi * np.arange(n_z) / n_z
    zs = np.stack([np.cos(theta), np.sin(theta)])
    ws = ell.center[part.selector] + ell.shape[part.selector] @ zs
    out = np.outer(us, ws)
    if sense is Sense.LESS:
        return float(np.max(f_target - out.max(axis=1)))
    return float(np.max(out.min(axis=1) - f_target))


def brute_force_feasible(ell: ConfidenceEllipsoid, part: InputPartition, f_target: float,
                         sense: Sense, n_u: int = 201, n_z: int = 3600,
                         tol: float = TOL) -> bool:
    return brute_force_slack(ell, part, f_target, sense, n_u, n_z) >= -tol


@dataclass
class FirmnessConfig:
    """Parameters of the firm-grasp test.

    ``targets`` defaults to ``(0.5 * weight, 0.5, -0.5)`` newtons.
    """

    weight: float
    confidence: float = 0.99
    v_max: float = 0.1
    targets: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError("object weight must be positive")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        if not self.v_max > 0:
            raise ValueError("v_max must be positive")
        if self.targets is None:
            self.targets = (0.5 * self.weight, 0.5, -0.5)
        else:
            self.targets = tuple(float(t) for t in self.targets)


def target_feasible(ell: ConfidenceEllipsoid, cfg: FirmnessConfig, f_target: float) -> bool:
    return any(
        robust_lp_feasible(ell, part, f_target, Sense.LESS)
        and robust_lp_feasible(ell, part, f_target, Sense.GREATER)
        for part in partitions(cfg.v_max)
    )


@dataclass
class FeasibilityVerdict:
    """Robust LP outcomes indexed ``[target, partition]`` (partitions POS, NEG)."""

    targets: tuple[float, ...]
    less: np.ndarray
    greater: np.ndarray
    firm: bool = field(init=False)

    def __post_init__(self):
        self.firm = bool(np.all(np.any(self.less & self.greater, axis=1)))

    @property
    def feasible(self) -> np.ndarray:
        return np.any(self.less & self.greater, axis=1)


def is_firm_grasp(model: ContactModel, cfg: FirmnessConfig) -> FeasibilityVerdict:
    """Check every target force for c-feasibility under ``model``."""
    ell = ellipsoid_from(model, cfg.confidence)
    parts = partitions(cfg.v_max)
    less = np.zeros((len(cfg.targets), len(parts)), dtype=bool)
    greater = np.zeros_like(less)
    for i, target in enumerate(cfg.targets):
        for j, part in enumerate(parts):
            less[i, j] = robust_lp_feasible(ell, part, target, Sense.LESS)
            greater[i, j] = robust_lp_feasible(ell, part, target, Sense.GREATER)
    return FeasibilityVerdict(tuple(cfg.targets), less, greater)
