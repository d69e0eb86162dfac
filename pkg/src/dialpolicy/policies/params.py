"""Parameter counting and the large-scale configurations sized against reference counts."""
from __future__ import annotations

from ..core import ActionSpace
from .base import Policy
from .checkpoint import build_policy

# Reference totals for state dim 553 and 166 atoms.
REFERENCE_COUNTS = {"diaseq": 251_000, "multiclass": 184_000, "multidense": 133_000}
REFERENCE_STATE_DIM = 553
REFERENCE_ATOMS = 166

# Hidden sizes are not published; these were fitted to the reference totals.
PAPER_SCALE_CONFIGS = {
    "multiclass": {"hidden": (200, 200)},
    "multidense": {"hidden": 200, "features": 40},
    "diaseq": {"hidden": 360, "state_features": 50, "embedding": 30},
}


def count_params(policy: Policy) -> int:
    """Exact number of scalar parameters, biases included."""
    return policy.num_params()


def paper_scale_policy(kind: str) -> Policy:
    space = ActionSpace(tuple(f"d{i // 50}-act{i % 50}-s" for i in range(REFERENCE_ATOMS)))
    return build_policy(kind, REFERENCE_STATE_DIM, space, PAPER_SCALE_CONFIGS[kind])
