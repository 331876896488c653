"""Scripted human receivers.

Each receiver is a small frozen dataclass describing when and how the hand
touches the object.  Forces are those the hand applies to the object,
expressed in the world frame with +z up.  Contact geometry that depends on
where the object happens to be when the hand arrives (grasp anchor, touch
surface) may be left as ``None`` and is latched by :class:`ScriptedReceiver`
at the onset time.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

_ZERO = np.zeros(3)


@dataclass(frozen=True)
class NoContact:
    kind = "NoContact"


@dataclass(frozen=True)
class IncidentalTouch:
    """Unilateral spring contact along ``normal`` (+1 pushes up, -1 pushes down).

    The touched surface sits ``preload`` metres inside the object position at
    onset, so the touch starts with a force of ``stiffness * preload``.
    """

    normal: int = 1
    stiffness: float = 300.0
    onset: float = 2.5
    preload: float = 0.005
    surface: float | None = None
    kind = "IncidentalTouch"

    def __post_init__(self):
        if self.normal not in (1, -1):
            raise ValueError("normal must be +1 or -1")
        if self.stiffness < 0 or self.onset < 0 or self.preload < 0:
            raise ValueError("stiffness, onset and preload must be nonnegative")


@dataclass(frozen=True)
class FirmGrasp:
    """Bilateral spring-damper about the grasp anchor plus weight support.

    The supported fraction of the object weight ramps in linearly over
    ``ramp`` seconds after onset.
    """

    stiffness: float = 900.0
    damping: float = 60.0
    onset: float = 2.5
    anchor: float | None = None
    support: float = 1.0
    ramp: float = 0.3
    kind = "FirmGrasp"

    def __post_init__(self):
        if min(self.stiffness, self.damping, self.onset, self.support) < 0 or self.ramp <= 0:
            raise ValueError("invalid FirmGrasp parameters")


@dataclass(frozen=True)
class UpwardPull:
    """Constant upward force from ``onset``; optionally a firm grasp later."""

    force: float = 1.5
    onset: float = 2.5
    grasp_onset: float | None = None
    grasp: FirmGrasp | None = None
    kind = "UpwardPull"

    def __post_init__(self):
        if self.force < 0 or self.onset < 0:
            raise ValueError("invalid UpwardPull parameters")
        if self.grasp_onset is not None and self.grasp_onset < self.onset:
            raise ValueError("grasp_onset must not precede the pull onset")


@dataclass(frozen=True)
class LateHesitantGrasp:
    """An incidental touch that turns into a firm grasp at ``grasp_onset``."""

    touch: IncidentalTouch = IncidentalTouch()
    grasp_onset: float = 5.0
    grasp: FirmGrasp | None = None
    kind = "LateHesitantGrasp"

    def __post_init__(self):
        if self.grasp_onset < self.touch.onset:
            raise ValueError("grasp_onset must not precede the touch onset")


ReceiverPolicy = Union[NoContact, IncidentalTouch, FirmGrasp, UpwardPull, LateHesitantGrasp]


def _grasp_of(policy) -> FirmGrasp:
    onset = policy.grasp_onset
    base = policy.grasp if policy.grasp is not None else FirmGrasp()
    return replace(base, onset=onset)


def firm_onset(policy: ReceiverPolicy) -> float | None:
    """Time from which the receiver holds the object firmly, if ever."""
    if isinstance(policy, FirmGrasp):
        return policy.onset
    if isinstance(policy, (UpwardPull, LateHesitantGrasp)):
        return policy.grasp_onset
    return None


def is_firm(policy: ReceiverPolicy, t: float) -> bool:
    onset = firm_onset(policy)
    return onset is not None and t >= onset


def contact_onset(policy: ReceiverPolicy) -> float | None:
    if isinstance(policy, NoContact):
        return None
    if isinstance(policy, LateHesitantGrasp):
        return policy.touch.onset
    return policy.onset


def _touch_force(p: IncidentalTouch, z: float) -> float:
    if p.surface is None:
        raise ValueError("touch surface has not been latched")
    penetration = p.normal * (p.surface - z)
    return p.normal * p.stiffness * max(0.0, penetration)


def _grasp_force(p: FirmGrasp, z: float, vz: float, t: float, weight: float) -> float:
    if p.anchor is None:
        raise ValueError("grasp anchor has not been latched")
    held = min(1.0, max(0.0, (t - p.onset) / p.ramp))
    return -p.stiffness * (z - p.anchor) - p.damping * vz + p.support * weight * held


def receiver_force(policy: ReceiverPolicy, position, velocity, t: float,
                   weight: float) -> np.ndarray:
    """Force the scripted hand applies to the object at time ``t``."""
    z = float(position[2])
    vz = float(velocity[2])
    fz = 0.0
    if isinstance(policy, NoContact):
        return _ZERO.copy()
    if isinstance(policy, IncidentalTouch):
        if t >= policy.onset:
            fz = _touch_force(policy, z)
    elif isinstance(policy, FirmGrasp):
        if t >= policy.onset:
            fz = _grasp_force(policy, z, vz, t, weight)
    elif isinstance(policy, UpwardPull):
        if policy.grasp_onset is not None and t >= policy.grasp_onset:
            fz = _grasp_force(_grasp_of(policy), z, vz, t, weight)
        elif t >= policy.onset:
            fz = policy.force
    elif isinstance(policy, LateHesitantGrasp):
        if t >= policy.grasp_onset:
            fz = _grasp_force(_grasp_of(policy), z, vz, t, weight)
        elif t >= policy.touch.onset:
            fz = _touch_force(policy.touch, z)
    else:
        raise TypeError(f"unknown receiver policy {policy!r}")
    return np.array([0.0, 0.0, fz])


class ScriptedReceiver:
    """Receiver with contact geometry latched from the object position."""

    def __init__(self, policy: ReceiverPolicy, weight: float):
        self.policy = policy
        self.weight = float(weight)

    def _latch(self, z: float, t: float) -> None:
        p = self.policy
        if isinstance(p, IncidentalTouch) and p.surface is None and t >= p.onset:
            self.policy = replace(p, surface=z + p.normal * p.preload)
        elif isinstance(p, FirmGrasp) and p.anchor is None and t >= p.onset:
            self.policy = replace(p, anchor=z)
        elif isinstance(p, LateHesitantGrasp):
            if p.touch.surface is None and t >= p.touch.onset:
                touch = replace(p.touch, surface=z + p.touch.normal * p.touch.preload)
                self.policy = p = replace(p, touch=touch)
            if t >= p.grasp_onset and (p.grasp is None or p.grasp.anchor is None):
                self.policy = replace(p, grasp=replace(_grasp_of(p), anchor=z))
        elif isinstance(p, UpwardPull) and p.grasp_onset is not None and t >= p.grasp_onset:
            if p.grasp is None or p.grasp.anchor is None:
                self.policy = replace(p, grasp=replace(_grasp_of(p), anchor=z))

    def force(self, t: float, position, velocity) -> np.ndarray:
        self._latch(float(position[2]), t)
        return receiver_force(self.policy, position, velocity, t, self.weight)

    def is_firm(self, t: float) -> bool:
        return is_firm(self.policy, t)
