"""Closed-loop handover episodes.

One episode runs a fixed-step loop at the physics rate.  Slower processes
fire on integer divisions of the physics tick:

* physics (every tick): reference filter, saturated velocity command,
  compliant gripper dynamics under the scripted human force, FT measurement
  and the momentum observer;
* contact model (every ``physics / model`` ticks): one ``(u_z, f_z)`` sample;
* release check (every ``physics / firmness`` ticks);
* reference selection (every ``physics / planner`` ticks).

The episode opens by holding still to weigh the object from the observer
residual; no release decision is taken before the weight is known.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from ..contact_model import Prior, Sample, SampleWindow
from ..firmness import FirmnessConfig, is_firm_grasp
from ..observer import GRAVITY, MomentumObserver, RigidBodyModel
from ..planner import GripperState, PlannerConfig, evaluate_candidates, select
from .policies import (
    ReleasePolicy,
    contact_detected,
    release_decision_force_thr,
    release_decision_weight_thr,
)
from .receivers import ReceiverPolicy, ScriptedReceiver, contact_onset, firm_onset


class SimulationDiverged(RuntimeError):
    pass


class Label(str, Enum):
    SUCCESS = "SUCCESS"
    PREMATURE_RELEASE = "PREMATURE_RELEASE"
    NO_RELEASE_TIMEOUT = "NO_RELEASE_TIMEOUT"


class Phase(int, Enum):
    WEIGH = 0
    APPROACH = 1
    CONTACT = 2


@dataclass
class ObjectSpec:
    weight: float
    name: str = "object"
    initial_position: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError("object weight must be positive")
        self.initial_position = tuple(float(x) for x in self.initial_position)


@dataclass
class Rates:
    physics: int = 1000
    model: int = 200
    firmness: int = 50
    planner: int = 10

    def __post_init__(self):
        for name in ("model", "firmness", "planner"):
            rate = getattr(self, name)
            if rate <= 0 or self.physics % rate:
                raise ValueError(f"{name} rate {rate} must divide the physics rate {self.physics}")

    def ticks(self) -> tuple[int, int, int]:
        return (self.physics // self.model, self.physics // self.firmness,
                self.physics // self.planner)


@dataclass
class SimParams:
    """Plant, sensor and bookkeeping constants of the simulator."""

    ft_noise_std: float = 0.3
    torque_noise_std: float = 0.02
    observer_gain: float = 100.0
    body_mass: float = 1.5
    rot_inertia: float = 0.01
    weigh_settle: float = 0.1
    weigh_duration: float = 0.5
    speed_cap: float = 10.0
    window_capacity: int = 200


@dataclass
class EpisodeConfig:
    receiver: ReceiverPolicy
    object: ObjectSpec
    policy: ReleasePolicy = ReleasePolicy.ACTIVE
    timeout: float = 20.0
    seed: int = 0
    hand_position: tuple[float, float, float] = (0.10, 0.0, -0.05)
    hand_noise_std: float = 0.005
    confidence: float = 0.99
    debounce: int = 1
    probe: bool = True
    release_enabled: bool = True
    rates: Rates = field(default_factory=Rates)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    prior: Prior = field(default_factory=Prior)
    sim: SimParams = field(default_factory=SimParams)

    def __post_init__(self):
        self.policy = ReleasePolicy(self.policy)
        self.hand_position = tuple(float(x) for x in self.hand_position)
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")
        if self.debounce < 1:
            raise ValueError("debounce must be at least 1")
        if self.hand_noise_std < 0:
            raise ValueError("hand noise must be nonnegative")
        weigh_end = self.sim.weigh_settle + self.sim.weigh_duration
        if self.timeout <= weigh_end:
            raise ValueError("timeout must exceed the weighing phase")


TRACE_COLUMNS = (
    "t", "q_x", "q_y", "q_z", "v_x", "v_y", "v_z", "u_x", "u_y", "u_z",
    "rd_x", "rd_y", "rd_z", "f_x", "f_y", "f_z", "f_true_z",
    "m_pos", "m_neg", "s_pos", "s_neg", "phase", "contact", "firm",
)


@dataclass
class EpisodeResult:
    released: bool
    release_time: float | None
    label: Label
    trace: np.ndarray
    measured_weight: float
    peak_contact_force: float
    probing_onset: float | None
    model_ticks: np.ndarray
    firmness_ticks: np.ndarray
    planner_ticks: np.ndarray
    info_gains: np.ndarray
    max_command_speed: float
    config: EpisodeConfig | None = None
    columns: tuple[str, ...] = TRACE_COLUMNS

    def column(self, name: str) -> np.ndarray:
        return self.trace[:, self.columns.index(name)]

    def summary(self) -> dict[str, Any]:
        cfg = self.config
        out: dict[str, Any] = {
            "label": self.label.value,
            "released": self.released,
            "release_time": None if self.release_time is None else round(self.release_time, 6),
            "measured_weight": round(self.measured_weight, 6),
            "peak_contact_force": round(self.peak_contact_force, 6),
            "probing_onset": None if self.probing_onset is None else round(self.probing_onset, 6),
            "min_info_gain": (round(float(self.info_gains.min()), 12)
                              if len(self.info_gains) else None),
            "max_command_speed": round(self.max_command_speed, 9),
        }
        if cfg is not None:
            out = {
                "policy": cfg.policy.value,
                "receiver": cfg.receiver.kind,
                "object": cfg.object.name,
                "weight": cfg.object.weight,
                "seed": cfg.seed,
                **out,
            }
        return out


def label_outcome(policy: ReceiverPolicy, released: bool, release_time: float | None,
                  timeout: float) -> Label:
    """Ground-truth outcome from the scripted receiver phase.

    A receiver that never becomes firm before the timeout is handled
    correctly by not releasing, which counts as a success.
    """
    onset = firm_onset(policy)
    if released:
        return Label.SUCCESS if onset is not None and release_time >= onset else Label.PREMATURE_RELEASE
    if onset is not None and onset <= timeout:
        return Label.NO_RELEASE_TIMEOUT
    return Label.SUCCESS


def run_episode(cfg: EpisodeConfig) -> EpisodeResult:
    """Simulate one handover and label its outcome."""
    pc = cfg.planner
    sp = cfg.sim
    rates = cfg.rates
    dt = 1.0 / rates.physics
    every_model, every_firm, every_plan = rates.ticks()
    n_ticks = int(round(cfg.timeout * rates.physics))
    weight = cfg.object.weight

    ft_seed, hand_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    ft_rng = np.random.default_rng(ft_seed)
    hand_rng = np.random.default_rng(hand_seed)
    noise_std = np.array([sp.ft_noise_std] * 3 + [sp.torque_noise_std] * 3)
    ft_noise = ft_rng.standard_normal((n_ticks, 6)) * noise_std

    receiver = ScriptedReceiver(cfg.receiver, weight)
    body = RigidBodyModel.desk_scale(sp.body_mass, sp.rot_inertia)
    mass_diag = np.diag(body.inertia)[:3]
    load = np.array([0.0, 0.0, weight])

    start = np.array(cfg.object.initial_position)
    # the hand is localized once, with a fixed detection error per episode
    hand = np.array(cfg.hand_position) + hand_rng.standard_normal(3) * cfg.hand_noise_std
    q = start.copy()
    v = np.zeros(3)
    r = start.copy()
    r_d = start.copy()
    damping = np.array(pc.damping)
    plant_mass = np.array(pc.mass)
    decay = math.exp(-pc.filter_rate * dt)
    twist = np.zeros(6)
    wrench = body.gravity.copy()
    wrench[:3] += load
    observer = MomentumObserver(body, wrench, twist, sp.observer_gain)

    window = SampleWindow(cfg.prior, capacity=sp.window_capacity)
    model = window.model()
    firm_cfg = None
    weigh_start = int(round(sp.weigh_settle * rates.physics))
    weigh_end = weigh_start + int(round(sp.weigh_duration * rates.physics))
    weigh_acc = 0.0
    measured = 0.0

    trace = np.zeros((n_ticks, len(TRACE_COLUMNS)))
    model_ticks, firm_ticks, plan_ticks, gains = [], [], [], []
    phase = Phase.WEIGH
    contact = False
    engaged = False
    firm_streak = 0
    firm_flag = False
    released = False
    release_time = None
    probing_onset = None
    peak_force = 0.0
    max_speed = 0.0
    n_done = 0

    for n in range(n_ticks):
        t = n * dt
        f_obs = observer.residual[:3].copy()
        f_obs[2] += measured
        raw = pc.gain * (r - q)
        norm = math.sqrt(float(raw @ raw))
        u = raw * (pc.v_max / norm) if norm > pc.v_max else raw
        max_speed = max(max_speed, math.sqrt(float(u @ u)))
        weighing = n < weigh_end

        if n % every_model == 0:
            window.update(Sample(float(u[2]), float(f_obs[2]), t))
            model = window.model()
            model_ticks.append(n)

        if n % every_firm == 0 and not weighing:
            firm_ticks.append(n)
            if cfg.policy is ReleasePolicy.ACTIVE:
                firm_flag = is_firm_grasp(model, firm_cfg).firm
            elif cfg.policy is ReleasePolicy.FORCE_THR:
                firm_flag = release_decision_force_thr(f_obs)
            else:
                firm_flag = release_decision_weight_thr(float(f_obs[2]), measured)
            firm_streak = firm_streak + 1 if firm_flag else 0
            if cfg.release_enabled and firm_streak >= cfg.debounce:
                released = True
                release_time = t

        if n % every_plan == 0 and not released:
            plan_ticks.append(n)
            if weighing:
                r_d = start.copy()
            else:
                contact = contact_detected(f_obs)
                # baselines hold position for good once the hand has touched
                engaged = engaged or (contact and cfg.policy is not ReleasePolicy.ACTIVE)
                if not (contact or engaged):
                    phase = Phase.APPROACH
                    r_d = hand.copy()
                else:
                    phase = Phase.CONTACT
                    if cfg.policy is not ReleasePolicy.ACTIVE:
                        r_d = q.copy()
                    elif cfg.probe:
                        if probing_onset is None:
                            probing_onset = t
                        evals = evaluate_candidates(GripperState(q, v, r), window, model, pc)
                        gains.extend(e.info_gain for e in evals)
                        r_d = select(evals).reference.copy()
                    else:
                        r_d = hand.copy()

        f_true = receiver.force(t, q, v)
        peak_force = max(peak_force, math.sqrt(float(f_true @ f_true)))
        trace[n] = (t, *q, *v, *u, *r_d, *f_obs, f_true[2], *model.mean,
                    model.cov[0, 0], model.cov[1, 1], phase, contact, firm_flag)
        n_done = n + 1
        if released:
            break

        acc = damping * (u - v) + f_true / plant_mass
        v = v + acc * dt
        q = q + v * dt
        r = r_d + (r - r_d) * decay
        if not math.isfinite(v[0] + v[1] + v[2]) or float(v @ v) > sp.speed_cap ** 2:
            raise SimulationDiverged(f"gripper speed exceeded {sp.speed_cap} m/s at t={t:.3f} s")

        twist[:3] = v
        # wrench through the sensor plate; the payload weight is part of F_ext
        wrench[:3] = mass_diag * acc + body.gravity[:3] - (f_true - load)
        wrench[3:] = body.gravity[3:]
        observer.step(wrench + ft_noise[n], twist, dt)

        if weigh_start <= n < weigh_end:
            weigh_acc += -observer.residual[2]
        if n + 1 == weigh_end:
            measured = weigh_acc / (weigh_end - weigh_start)
            if not measured > 0:
                raise SimulationDiverged(f"measured a non-positive object weight {measured:.4g} N")
            firm_cfg = FirmnessConfig(weight=measured, confidence=cfg.confidence, v_max=pc.v_max)

    label = label_outcome(receiver.policy, released, release_time, cfg.timeout)
    return EpisodeResult(
        released=released,
        release_time=release_time,
        label=label,
        trace=trace[:n_done],
        measured_weight=measured,
        peak_contact_force=peak_force,
        probing_onset=probing_onset,
        model_ticks=np.asarray(model_ticks, dtype=int),
        firmness_ticks=np.asarray(firm_ticks, dtype=int),
        planner_ticks=np.asarray(plan_ticks, dtype=int),
        info_gains=np.asarray(gains, dtype=float),
        max_command_speed=max_speed,
        config=cfg,
    )


def has_contact(cfg: EpisodeConfig) -> bool:
    return contact_onset(cfg.receiver) is not None


__all__ = [
    "EpisodeConfig", "EpisodeResult", "Label", "ObjectSpec", "Phase", "Rates", "SimParams",
    "SimulationDiverged", "TRACE_COLUMNS", "label_outcome", "run_episode", "GRAVITY",
]
