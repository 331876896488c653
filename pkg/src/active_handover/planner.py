"""Information-gain planning of probing motions.

Candidate reference positions are scored by how much they would shrink the
entropy of the contact-model weights.  For each candidate the closed-loop
gripper (velocity-saturated tracking of a low-pass filtered reference, with
the human force predicted by the current posterior mean) is rolled out over
a short horizon; the desired velocities sampled along the rollout are the
future regression inputs, and since the posterior covariance depends on the
inputs alone the predicted covariance follows without knowing the forces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contact_model import ContactModel, SampleWindow, feature_matrix

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class PlannerConfig:
    """Rollout dynamics and grid-search settings.

    ``damping`` and ``mass`` are the diagonals of D and M.  ``force_sign``
    multiplies the predicted human force term; +1 adds ``m^T phi(u)`` along
    +z as written in the gripper model.  With ``evict`` the predicted samples
    displace the oldest buffered ones when computing the future covariance.
    Each prediction sample is integrated in ``substeps`` Euler steps; the
    default keeps the terminal rollout position within 1e-5 m of a rollout
    at half the step size.
    """

    horizon: float = 0.25
    sample_rate: float = 200.0
    gain: float = 10.0
    filter_rate: float = 2.0 * math.pi * 10.0
    damping: tuple[float, float, float] = (100.0, 100.0, 100.0)
    mass: tuple[float, float, float] = (1.5, 1.5, 1.5)
    v_max: float = 0.1
    reg_weight: float = 20.0
    n_candidates: int = 11
    span: float = 0.02
    force_sign: float = 1.0
    evict: bool = False
    substeps: int = 8

    def __post_init__(self):
        self.damping = tuple(float(x) for x in self.damping)
        self.mass = tuple(float(x) for x in self.mass)
        positive = [self.horizon, self.sample_rate, self.gain, self.filter_rate,
                    self.v_max, self.reg_weight, self.span, *self.damping, *self.mass]
        if not all(x > 0 and math.isfinite(x) for x in positive):
            raise ValueError("planner parameters must be positive and finite")
        if self.n_candidates < 1 or self.n_candidates % 2 == 0:
            raise ValueError("n_candidates must be odd so the grid is symmetric about 0")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def n_samples(self) -> int:
        return int(round(self.horizon * self.sample_rate))

    def offsets(self) -> np.ndarray:
        return np.linspace(-self.span, self.span, self.n_candidates)


@dataclass
class GripperState:
    q: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    r: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("q", "v", "r"):
            arr = np.array(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"gripper state {name} must be finite")
            setattr(self, name, arr)

    def copy(self) -> "GripperState":
        return GripperState(self.q.copy(), self.v.copy(), self.r.copy())


@dataclass
class CandidateEvaluation:
    reference: np.ndarray
    offset: float
    cov: np.ndarray
    info_gain: float
    penalty: float
    score: float


def entropy(cov) -> float:
    """Differential entropy (nats) of a Gaussian with covariance ``cov``."""
    cov = np.asarray(cov, dtype=float)
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise ValueError("covariance must be positive definite")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValueError("covariance must be positive definite") from None
    d = cov.shape[0]
    return 0.5 * d * (1.0 + LOG_2PI) + 0.5 * logdet


def information_gain(cov, cov_next) -> float:
    return entropy(cov) - entropy(cov_next)


def saturate_velocity(u_raw, v_max: float) -> np.ndarray:
    """Scale ``u_raw`` back onto the ball of radius ``v_max`` if it leaves it."""
    u_raw = np.asarray(u_raw, dtype=float)
    norm = float(np.linalg.norm(u_raw))
    if norm <= v_max:
        return u_raw.copy()
    return (v_max / norm) * u_raw


def reference_filter_step(r, r_desired, alpha: float, dt: float):
    """Exact step of ``r' = alpha (r_desired - r)`` for constant ``r_desired``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    r = np.asarray(r, dtype=float)
    r_desired = np.asarray(r_desired, dtype=float)
    return r_desired + (r - r_desired) * math.exp(-alpha * dt)


def _saturate_rows(u_raw: np.ndarray, v_max: float) -> np.ndarray:
    norm = np.sqrt(np.sum(u_raw * u_raw, axis=-1, keepdims=True))
    scale = np.where(norm > v_max, v_max / np.where(norm > 0, norm, 1.0), 1.0)
    return u_raw * scale


def _step_batch(q, v, r, r_d, weights, cfg: PlannerConfig, dt: float, decay: float):
    """Semi-implicit Euler step for a stack of gripper states (rows)."""
    u = _saturate_rows(cfg.gain * (r - q), cfg.v_max)
    uz = u[:, 2]
    force = cfg.force_sign * (weights[0] * np.maximum(uz, 0.0) + weights[1] * np.minimum(uz, 0.0))
    acc = np.asarray(cfg.damping) * (u - v)
    acc[:, 2] += force / cfg.mass[2]
    v = v + acc * dt
    q = q + v * dt
    r = r_d + (r - r_d) * decay
    return q, v, r


def gripper_step(state: GripperState, model_mean, cfg: PlannerConfig, dt: float,
                 r_desired=None) -> GripperState:
    """One step of the approximate closed-loop gripper dynamics.

    The reference ``r`` relaxes toward ``r_desired`` (held constant over the
    step); without one it is held where it is.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    r_d = state.r if r_desired is None else np.asarray(r_desired, dtype=float)
    weights = np.asarray(model_mean, dtype=float)
    q, v, r = _step_batch(state.q[None], state.v[None], state.r[None], r_d[None],
                          weights, cfg, dt, math.exp(-cfg.filter_rate * dt))
    return GripperState(q[0], v[0], r[0])


def rollout_batch(state: GripperState, references, model_mean, cfg: PlannerConfig) -> np.ndarray:
    """Predicted vertical desired velocities for each candidate reference.

    Returns an array of shape ``(n_candidates, n_samples)``; column ``i``
    holds the velocity commanded ``(i + 1) / sample_rate`` seconds ahead.
    """
    return rollout_with_terminal(state, references, model_mean, cfg)[0]


def rollout_with_terminal(state: GripperState, references, model_mean,
                          cfg: PlannerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Like :func:`rollout_batch`, also returning the final positions (rows)."""
    refs = np.atleast_2d(np.asarray(references, dtype=float))
    n = refs.shape[0]
    q = np.repeat(state.q[None], n, axis=0)
    v = np.repeat(state.v[None], n, axis=0)
    r = np.repeat(state.r[None], n, axis=0)
    weights = np.asarray(model_mean, dtype=float)
    h = cfg.dt / cfg.substeps
    decay = math.exp(-cfg.filter_rate * h)
    out = np.empty((n, cfg.n_samples))
    for i in range(cfg.n_samples):
        for _ in range(cfg.substeps):
            q, v, r = _step_batch(q, v, r, refs, weights, cfg, h, decay)
        u = _saturate_rows(cfg.gain * (r - q), cfg.v_max)
        out[:, i] = u[:, 2]
    return out, q


def rollout_predicted_inputs(state: GripperState, r_desired, model: ContactModel | np.ndarray,
                             cfg: PlannerConfig) -> np.ndarray:
    mean = model.mean if isinstance(model, ContactModel) else model
    return rollout_batch(state, np.asarray(r_desired, dtype=float)[None], mean, cfg)[0]


def predicted_precision(window: SampleWindow, predicted_inputs, evict: bool = False) -> np.ndarray:
    """Precision after adding the predicted inputs (and optionally evicting)."""
    beta = window.prior.noise_var
    phi = feature_matrix(predicted_inputs)
    precision = window.precision + phi.T @ phi / beta
    if evict:
        n_out = max(0, len(window) + len(phi) - window.capacity)
        if n_out:
            old = feature_matrix([s.u for s in list(window)[:n_out]])
            precision = precision - old.T @ old / beta
    return 0.5 * (precision + precision.T)


def predict_covariance(window: SampleWindow, predicted_inputs, evict: bool = False) -> np.ndarray:
    return np.linalg.inv(predicted_precision(window, predicted_inputs, evict))


def evaluate_candidates(state: GripperState, window: SampleWindow, model: ContactModel,
                        cfg: PlannerConfig) -> list[CandidateEvaluation]:
    offsets = cfg.offsets()
    refs = np.repeat(state.q[None], len(offsets), axis=0)
    refs[:, 2] += offsets
    inputs = rollout_batch(state, refs, model.mean, cfg)
    _, logdet_now = np.linalg.slogdet(window.precision)
    evals = []
    for ref, delta, u_pred in zip(refs, offsets, inputs):
        prec = predicted_precision(window, u_pred, cfg.evict)
        _, logdet_next = np.linalg.slogdet(prec)
        # H(S) - H(S') = 0.5 (log det Lambda' - log det Lambda)
        ig = 0.5 * (logdet_next - logdet_now)
        penalty = cfg.reg_weight * float(np.linalg.norm(ref - state.q))
        evals.append(CandidateEvaluation(ref, float(delta), np.linalg.inv(prec), float(ig),
                                         penalty, float(ig - penalty)))
    return evals


def select(evals: list[CandidateEvaluation], atol: float = 1e-9) -> CandidateEvaluation:
    """Argmax of the scores; ties go to the smallest |offset|, then the negative one."""
    best = max(e.score for e in evals)
    tied = [e for e in evals if e.score >= best - atol]
    return min(tied, key=lambda e: (abs(e.offset), e.offset))


def plan(state: GripperState, window: SampleWindow, model: ContactModel,
         cfg: PlannerConfig) -> np.ndarray:
    """Reference position maximizing information gain minus a distance penalty."""
    return select(evaluate_candidates(state, window, model, cfg)).reference.copy()
