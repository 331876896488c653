"""Contact-model snapshots and predictive bands recovered from episode traces.

The trace stores the ``(u_z, f_z)`` pair fed to the model at every model
tick, so the sliding-window posterior at any time can be rebuilt exactly
with the batch formula.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..contact_model import ContactModel, Sample, batch_posterior
from .episode import EpisodeResult

Z95 = 1.959963984540054


@dataclass
class Band:
    us: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)


def window_samples(result: EpisodeResult, t: float | None = None) -> np.ndarray:
    """``(n, 2)`` array of the ``(u, f)`` samples in the window at time ``t``."""
    cfg = result.config
    if cfg is None:
        raise ValueError("result carries no config")
    ticks = result.model_ticks
    ticks = ticks[ticks < len(result.trace)]
    times = result.trace[ticks, 0]
    if t is not None:
        ticks = ticks[times <= t + 1e-12]
    ticks = ticks[-cfg.sim.window_capacity:]
    return np.column_stack([result.column("u_z")[ticks], result.column("f_z")[ticks]])


def model_at(result: EpisodeResult, t: float | None = None) -> ContactModel:
    """Posterior over the window at time ``t`` (end of the episode by default)."""
    samples = window_samples(result, t)
    return batch_posterior(result.config.prior, [Sample(u, f) for u, f in samples])


def predictive_band(model: ContactModel, v_max: float, n_points: int = 41,
                    z: float = Z95) -> Band:
    us = np.linspace(-v_max, v_max, n_points)
    mean, lower, upper = model.band(us, z)
    return Band(us, mean, lower, upper)


def half_width(model: ContactModel, u: float, z: float = Z95) -> float:
    var = model.predict(u).var
    return float(z * np.sqrt(max(var, 0.0)))


def band_ratio(model: ContactModel, v_max: float, z: float = Z95) -> float:
    """Band width at ``u = +v_max`` over the width at ``u = -v_max``."""
    return half_width(model, v_max, z) / half_width(model, -v_max, z)
