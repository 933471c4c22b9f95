"""Small helpers shared by the test modules."""

import math

from ratelab.channels import make_channel, stokes_to_choi


def h(p: float) -> float:
    """Binary entropy for expected values."""
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def choi_of(kind: str, **params):
    return stokes_to_choi(make_channel(kind, **params))


def slightly_unphysical_channel() -> dict:
    """Amplitude damping at p = 0.2 with t_z pushed up, leaving a Choi eigenvalue near -1e-6."""
    r = math.sqrt(0.8)
    return {"kind": "raw", "R": [[0.8, 0, 0], [0, r, 0], [0, 0, r]], "t": [0.2 + 4e-6, 0, 0]}
