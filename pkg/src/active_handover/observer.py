"""Momentum-residual estimate of the external wrench on the gripper.

The gripper is a single rigid body

    I V' + C V + g = F_ft + F_ext

and the residual

    r(t) = K [ int_0^t (-C^T V + g - F_ft - r) ds + p(t) - p(0) ],  p = I V

obeys ``r' = K (F_ext - r)`` whenever the body model is exact.  The integral
is discretized with the trapezoidal rule, which makes the update implicit in
``r``; for the diagonal-or-full gain used here that is one linear solve.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

GRAVITY = 9.81


@dataclass(frozen=True)
class RigidBodyModel:
    inertia: np.ndarray
    gravity: np.ndarray
    coriolis: np.ndarray = field(default_factory=lambda: np.zeros((6, 6)))

    def __post_init__(self):
        inertia = np.array(self.inertia, dtype=float)
        if inertia.shape != (6, 6):
            raise ValueError("inertia must be 6x6")
        try:
            np.linalg.cholesky(0.5 * (inertia + inertia.T))
        except np.linalg.LinAlgError:
            raise ValueError("inertia must be positive definite") from None
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "gravity", np.array(self.gravity, dtype=float).reshape(6))
        object.__setattr__(self, "coriolis", np.array(self.coriolis, dtype=float).reshape(6, 6))

    @classmethod
    def desk_scale(cls, mass: float = 1.5, rot_inertia: float = 0.01,
                   g: float = GRAVITY) -> "RigidBodyModel":
        """Block-diagonal body with Coriolis terms dropped (near-rest speeds)."""
        inertia = np.diag([mass] * 3 + [rot_inertia] * 3)
        gravity = np.array([0.0, 0.0, mass * g, 0.0, 0.0, 0.0])
        return cls(inertia, gravity)

    def momentum(self, twist) -> np.ndarray:
        return self.inertia @ np.asarray(twist, dtype=float)


@dataclass(frozen=True)
class ObserverState:
    """Residual, running integral and the last integrand sample.

    ``gain`` is stored as a full 6x6 matrix.
    """

    residual: np.ndarray
    integral: np.ndarray
    gain: np.ndarray
    integrand: np.ndarray
    momentum0: np.ndarray

    @classmethod
    def initial(cls, body: RigidBodyModel, measured_wrench, twist=None,
                gain=100.0) -> "ObserverState":
        gain = np.asarray(gain, dtype=float)
        if gain.ndim == 0:
            gain = float(gain) * np.eye(6)
        elif gain.ndim == 1:
            gain = np.diag(gain)
        if gain.shape != (6, 6):
            raise ValueError("gain must be scalar, a 6-vector or 6x6")
        try:
            np.linalg.cholesky(0.5 * (gain + gain.T))
        except np.linalg.LinAlgError:
            raise ValueError("observer gain must be positive definite") from None
        twist = np.zeros(6) if twist is None else np.asarray(twist, dtype=float)
        return cls(
            residual=np.zeros(6),
            integral=np.zeros(6),
            gain=gain,
            integrand=_integrand(body, measured_wrench, twist),
            momentum0=body.momentum(twist),
        )


def _integrand(body: RigidBodyModel, measured_wrench, twist) -> np.ndarray:
    return (-body.coriolis.T @ twist + body.gravity
            - np.asarray(measured_wrench, dtype=float))


def observer_step(state: ObserverState, measured_wrench, twist, body: RigidBodyModel,
                  dt: float) -> ObserverState:
    """Advance the residual by one sample of length ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    twist = np.asarray(twist, dtype=float)
    a_next = _integrand(body, measured_wrench, twist)
    p_rel = body.momentum(twist) - state.momentum0
    half = 0.5 * dt
    rhs = state.gain @ (state.integral + half * (state.integrand - state.residual + a_next) + p_rel)
    residual = np.linalg.solve(np.eye(6) + half * state.gain, rhs)
    integral = state.integral + half * (state.integrand - state.residual + a_next - residual)
    return replace(state, residual=residual, integral=integral, integrand=a_next)


def extract_interaction_force(state: ObserverState) -> np.ndarray:
    """Translational part of the residual wrench."""
    return state.residual[:3].copy()


class MomentumObserver:
    """Stateful convenience wrapper used by the simulator loop."""

    def __init__(self, body: RigidBodyModel, measured_wrench, twist=None, gain=100.0):
        self.body = body
        self.state = ObserverState.initial(body, measured_wrench, twist, gain)
        # K is constant, so the implicit solve reduces to a fixed matrix.
        self._dt = None
        self._solve = None

    def step(self, measured_wrench, twist, dt: float) -> np.ndarray:
        if dt != self._dt:
            self._dt = dt
            self._solve = np.linalg.inv(np.eye(6) + 0.5 * dt * self.state.gain) @ self.state.gain
        s = self.state
        body = self.body
        twist = np.asarray(twist, dtype=float)
        a_next = _integrand(body, measured_wrench, twist)
        p_rel = body.inertia @ twist - s.momentum0
        half = 0.5 * dt
        base = s.integral + half * (s.integrand - s.residual + a_next)
        residual = self._solve @ (base + p_rel)
        integral = base - half * residual
        self.state = ObserverState(residual, integral, s.gain, a_next, s.momentum0)
        return residual

    @property
    def residual(self) -> np.ndarray:
        return self.state.residual

    @property
    def force(self) -> np.ndarray:
        return extract_interaction_force(self.state)
