"""Release rules and the contact gate shared by all methods."""
from __future__ import annotations

from enum import Enum

import numpy as np

CONTACT_THRESHOLD = 0.5
FORCE_THRESHOLD = 1.0


class ReleasePolicy(str, Enum):
    ACTIVE = "ACTIVE"
    FORCE_THR = "FORCE_THR"
    WEIGHT_THR = "WEIGHT_THR"


def contact_detected(f) -> bool:
    """Human is touching the object: ``||f|| >= 0.5`` N."""
    return float(np.linalg.norm(f)) >= CONTACT_THRESHOLD


def release_decision_force_thr(f) -> bool:
    """Force-threshold baseline: release once ``||f||`` exceeds 1 N."""
    return float(np.linalg.norm(f)) > FORCE_THRESHOLD


def release_decision_weight_thr(f_z: float, weight: float) -> bool:
    """Load-threshold baseline: release when the hand carries 80% of the
    weight, or pulls up noticeably on a light object."""
    if not weight > 0:
        raise ValueError("object weight must be positive")
    return f_z >= max(0.8 * weight, 0.5)
