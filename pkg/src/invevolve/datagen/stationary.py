"""I.i.d. integer demand laws with mean about 5, used by the CBS benchmark."""
from __future__ import annotations

import math

import numpy as np

DISTRIBUTIONS = ("geometric", "poisson", "binomial", "gamma", "halfnormal", "uniform")

# folded mean of |N(0, sigma^2)| is sigma * sqrt(2/pi)
HALFNORMAL_SIGMA = 5.0 * math.sqrt(math.pi / 2.0)


def stationary_sampler(name: str, horizon: int, seed) -> np.ndarray:
    """Draw ``horizon`` i.i.d. non-negative integer demands from ``name``.

    Geometric counts failures before the first success (support starts at 0),
    so p = 1/6 gives mean 5 exactly.
    """
    if horizon < 1:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng(seed)
    key = name.lower()
    if key == "geometric":
        x = rng.geometric(1.0 / 6.0, size=horizon) - 1
    elif key == "poisson":
        x = rng.poisson(5.0, size=horizon)
    elif key == "binomial":
        x = rng.binomial(10, 0.5, size=horizon)
    elif key == "gamma":
        x = np.rint(rng.gamma(2.0, 2.5, size=horizon))
    elif key == "halfnormal":
        x = np.rint(np.abs(rng.normal(0.0, HALFNORMAL_SIGMA, size=horizon)))
    elif key == "uniform":
        x = rng.integers(0, 11, size=horizon)
    else:
        raise ValueError(f"unknown distribution {name!r}; expected one of {DISTRIBUTIONS}")
    return x.astype(float)
