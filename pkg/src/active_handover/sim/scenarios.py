"""Ready-made single-episode scenarios for the contact-model band plots."""
from __future__ import annotations

from .episode import EpisodeConfig, ObjectSpec
from .policies import ReleasePolicy
from .receivers import FirmGrasp


def passive_downward(weight: float = 3.0, seed: int = 0) -> EpisodeConfig:
    """Passive sensing: the gripper keeps pushing down toward a hand that
    grasped the object mid-approach, so only ``u <= 0`` is ever observed."""
    return EpisodeConfig(
        receiver=FirmGrasp(onset=1.0),
        object=ObjectSpec(weight, name="passive"),
        policy=ReleasePolicy.ACTIVE,
        hand_position=(0.0, 0.0, -0.25),
        probe=False,
        release_enabled=False,
        timeout=4.0,
        seed=seed,
    )


def active_bidirectional(weight: float = 3.0, seed: int = 0) -> EpisodeConfig:
    """Active sensing against a firm grasp, with release disabled so the
    posterior can be inspected after probing has run for a while."""
    return EpisodeConfig(
        receiver=FirmGrasp(),
        object=ObjectSpec(weight, name="active"),
        policy=ReleasePolicy.ACTIVE,
        release_enabled=False,
        timeout=4.5,
        seed=seed,
    )


SCENARIOS = {
    "passive-downward": passive_downward,
    "active-bidirectional": active_bidirectional,
}
