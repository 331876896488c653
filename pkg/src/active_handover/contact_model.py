"""Bayesian piecewise-linear model of the hand-object contact state.

The contact state maps the vertical desired gripper velocity ``u`` to the
vertical force ``f`` the human applies on the object through

    f = w^T phi(u) + noise,    phi(u) = [relu(u), -relu(-u)]

with a Gaussian prior on ``w``.  The two weights act as separate linear
impedances for upward (``u > 0``) and downward (``u < 0``) motion.

Online estimation keeps the posterior in precision form over a sliding
window of the most recent samples so that appending and evicting a sample
are exact rank-one operations.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np

DIM = 2


class Sample(NamedTuple):
    """One (desired velocity, interaction force) pair."""

    u: float
    f: float
    t: float = 0.0


class Predictive(NamedTuple):
    mean: float
    var: float


def relu_features(u: float) -> np.ndarray:
    """Feature vector ``[relu(u), -relu(-u)]`` of a scalar velocity."""
    u = float(u)
    if not math.isfinite(u):
        raise ValueError(f"velocity must be finite, got {u!r}")
    return np.array([max(u, 0.0), min(u, 0.0)])


def feature_matrix(us) -> np.ndarray:
    """Stack the features of many velocities into an ``(n, 2)`` array."""
    us = np.asarray(us, dtype=float).reshape(-1)
    if not np.all(np.isfinite(us)):
        raise ValueError("velocities must be finite")
    return np.column_stack([np.maximum(us, 0.0), np.minimum(us, 0.0)])


def _as_spd(a, name: str) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.shape != (DIM, DIM):
        raise ValueError(f"{name} must be {DIM}x{DIM}, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=1e-10, rtol=0.0):
        raise ValueError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} must be positive definite") from None
    return a


@dataclass(frozen=True)
class Prior:
    """Gaussian prior on the weights and the measurement noise variance.

    Defaults: zero mean, ``100 I`` covariance ((N s/m)^2) and ``beta = 0.25``
    N^2, i.e. a 0.5 N noise standard deviation.
    """

    mean: np.ndarray = field(default_factory=lambda: np.zeros(DIM))
    cov: np.ndarray = field(default_factory=lambda: 100.0 * np.eye(DIM))
    noise_var: float = 0.25

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        if mean.shape != (DIM,) or not np.all(np.isfinite(mean)):
            raise ValueError("prior mean must be a finite 2-vector")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", _as_spd(self.cov, "prior covariance"))
        if not (self.noise_var > 0 and math.isfinite(self.noise_var)):
            raise ValueError("noise variance must be positive")
        precision = np.linalg.inv(self.cov)
        object.__setattr__(self, "_precision", 0.5 * (precision + precision.T))

    @property
    def precision(self) -> np.ndarray:
        return self._precision.copy()

    @property
    def info(self) -> np.ndarray:
        return self._precision @ self.mean


@dataclass(frozen=True)
class ContactModel:
    """Gaussian posterior ``N(mean, cov)`` over the two impedance weights."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        if mean.shape != (DIM,):
            raise ValueError("model mean must be a 2-vector")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", _as_spd(self.cov, "model covariance"))

    @classmethod
    def _trusted(cls, mean: np.ndarray, cov: np.ndarray) -> "ContactModel":
        obj = object.__new__(cls)
        object.__setattr__(obj, "mean", mean)
        object.__setattr__(obj, "cov", cov)
        return obj

    @classmethod
    def from_precision(cls, precision: np.ndarray, info: np.ndarray) -> "ContactModel":
        """Posterior from its precision matrix and information vector.

        Raises :class:`numpy.linalg.LinAlgError` unless the precision is
        positive definite.
        """
        (a, b), (c, d) = np.asarray(precision, dtype=float)
        b = c = 0.5 * (b + c)
        det = a * d - b * c
        if not (a > 0.0 and det > 0.0 and math.isfinite(det)):
            raise np.linalg.LinAlgError("precision matrix is not positive definite")
        cov = np.array([[d, -b], [-c, a]]) / det
        return cls._trusted(cov @ np.asarray(info, dtype=float), cov)

    def predict(self, u: float) -> Predictive:
        return predict(self, u)

    def band(self, us, z: float = 1.96) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Posterior mean line and symmetric ``z``-sigma band over ``us``."""
        phi = feature_matrix(us)
        mean = phi @ self.mean
        std = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", phi, self.cov, phi), 0.0))
        return mean, mean - z * std, mean + z * std


def predict(model: ContactModel, u: float) -> Predictive:
    """Predictive distribution of the force at velocity ``u``.

    The variance is ``phi^T S phi`` only; observation noise is not added.
    """
    phi = relu_features(u)
    var = float(phi @ model.cov @ phi)
    return Predictive(float(model.mean @ phi), max(var, 0.0))


def _unpack(data: Iterable) -> tuple[np.ndarray, np.ndarray]:
    rows = [(s[0], s[1]) for s in data]
    if not rows:
        return np.zeros(0), np.zeros(0)
    arr = np.asarray(rows, dtype=float)
    return arr[:, 0], arr[:, 1]


def sufficient_statistics(prior: Prior, data: Iterable) -> tuple[np.ndarray, np.ndarray]:
    """Precision matrix and information vector after observing ``data``."""
    us, fs = _unpack(data)
    if not np.all(np.isfinite(fs)):
        raise ValueError("forces must be finite")
    phi = feature_matrix(us)
    precision = prior.precision + phi.T @ phi / prior.noise_var
    info = prior.info + phi.T @ fs / prior.noise_var
    return precision, info


def batch_posterior(prior: Prior, data: Iterable) -> ContactModel:
    """Posterior over the weights given a dataset of ``(u, f)`` pairs.

    An empty dataset returns the prior itself.
    """
    data = list(data)
    if not data:
        return ContactModel(prior.mean.copy(), prior.cov.copy())
    precision, info = sufficient_statistics(prior, data)
    try:
        return ContactModel.from_precision(precision, info)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("posterior precision is numerically singular") from exc


def _is_spd2(a: np.ndarray) -> bool:
    return a[0, 0] > 0.0 and a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0] > 0.0


class SampleWindow:
    """Sliding window of samples with a cached precision-form posterior.

    Every :meth:`update` adds the new sample as a rank-one term and, once the
    window is full, subtracts the evicted oldest one.  The cache is rebuilt
    from the buffer every ``recompute_every`` updates, and immediately if a
    downdate leaves the precision matrix indefinite.
    """

    def __init__(self, prior: Prior | None = None, capacity: int = 200,
                 recompute_every: int = 1000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if recompute_every < 1:
            raise ValueError("recompute_every must be positive")
        self.prior = prior if prior is not None else Prior()
        self.capacity = int(capacity)
        self.recompute_every = int(recompute_every)
        self._buffer: deque[Sample] = deque()
        self.precision = self.prior.precision
        self.info = self.prior.info
        self.n_updates = 0
        self.n_rebuilds = 0

    def __len__(self) -> int:
        return len(self._buffer)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self._buffer)

    @property
    def samples(self) -> list[Sample]:
        return list(self._buffer)

    @property
    def full(self) -> bool:
        return len(self._buffer) >= self.capacity

    def copy(self) -> "SampleWindow":
        other = SampleWindow(self.prior, self.capacity, self.recompute_every)
        other._buffer = deque(self._buffer)
        other.precision = self.precision.copy()
        other.info = self.info.copy()
        other.n_updates = self.n_updates
        other.n_rebuilds = self.n_rebuilds
        return other

    def _accumulate(self, s: Sample, sign: float) -> None:
        # phi has a single nonzero entry, so the outer product is one diagonal term
        scale = sign / self.prior.noise_var
        k = 0 if s.u > 0.0 else 1
        self.precision[k, k] += scale * s.u * s.u
        self.info[k] += scale * s.f * s.u

    def update(self, sample) -> "SampleWindow":
        """Append one sample, evicting the oldest if the window is full."""
        s = Sample(*sample) if not isinstance(sample, Sample) else sample
        if not (math.isfinite(s.u) and math.isfinite(s.f)):
            raise ValueError("sample values must be finite")
        if self._buffer and s.t < self._buffer[-1].t:
            raise ValueError("sample timestamps must be nondecreasing")
        if len(self._buffer) >= self.capacity:
            self._accumulate(self._buffer.popleft(), -1.0)
        self._buffer.append(s)
        self._accumulate(s, 1.0)
        self.n_updates += 1
        if self.n_updates % self.recompute_every == 0 or not _is_spd2(self.precision):
            self.rebuild()
        return self

    def extend(self, samples: Iterable) -> "SampleWindow":
        for s in samples:
            self.update(s)
        return self

    def rebuild(self) -> None:
        """Recompute the cached statistics from the buffer contents."""
        self.precision, self.info = sufficient_statistics(self.prior, self._buffer)
        self.n_rebuilds += 1

    def model(self) -> ContactModel:
        """Current posterior ``(m, S)`` with ``S`` symmetrized."""
        return ContactModel.from_precision(self.precision, self.info)


def recursive_update(window: SampleWindow, sample) -> SampleWindow:
    return window.update(sample)


def current_model(window: SampleWindow) -> ContactModel:
    return window.model()
