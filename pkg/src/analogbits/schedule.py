"""Continuous-time cosine noise schedule and the forward corruption process.

Time runs in [0, 1]. The signal fraction gamma(t) decreases from ~1 at
t=0 to ~0 at t=1, and the corrupted state is

    x_t = sqrt(gamma(t)) * x_0 + sqrt(1 - gamma(t)) * noise

with standard normal noise. Noise is always an explicit argument; there
is no hidden RNG in this module.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Schedule:
    """Shape parameters of the cosine schedule.

    ``ns`` nudges t=0 away from the exact cosine peak and ``ds`` stretches
    the argument so gamma(1) stays strictly positive.
    """

    ns: float = 0.0002
    ds: float = 0.00025

    def __post_init__(self):
        if self.ns < 0 or self.ds < 0:
            raise ConfigError("schedule parameters must be non-negative")
        # ns > ds would push the cosine argument past pi/2 at t=1, breaking
        # monotonicity of gamma.
        if self.ns > self.ds:
            raise ConfigError("ns must not exceed ds")


def gamma(t, sched: Schedule = Schedule()):
    """Signal fraction at time t: cos(((t + ns) / (1 + ds)) * pi / 2) ** 2.

    Accepts scalars or arrays; t must lie in [0, 1]. The result is clamped
    to [0, 1] so sqrt(1 - gamma) never sees a negative argument.
    """
    ta = np.asarray(t, dtype=np.float64)
    if ta.size and (ta.min() < 0.0 or ta.max() > 1.0):
        raise ValueError("t must lie in [0, 1]")
    g = np.cos(((ta + sched.ns) / (1.0 + sched.ds)) * (np.pi / 2.0)) ** 2
    g = np.clip(g, 0.0, 1.0)
    return float(g) if np.isscalar(t) or ta.ndim == 0 else g


def forward_diffuse(x0, t, noise, sched: Schedule = Schedule()) -> np.ndarray:
    """Corrupt x0 to time t: sqrt(gamma) * x0 + sqrt(1 - gamma) * noise.

    ``t`` is a scalar or a per-row vector (one time per batch element);
    ``noise`` must have the same shape as ``x0``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != x0.shape:
        raise ValueError(f"noise shape {noise.shape} does not match x0 shape {x0.shape}")
    g = np.asarray(gamma(t, sched))
    if g.ndim == 1:
        if g.shape[0] != x0.shape[0]:
            raise ValueError(
                f"per-row t has {g.shape[0]} entries for batch of {x0.shape[0]}"
            )
        g = g.reshape((-1,) + (1,) * (x0.ndim - 1))
    return np.sqrt(g) * x0 + np.sqrt(1.0 - g) * noise
