"""Power-transform distance curves and the metric <-> normalized bijection.

A single parameter ``lam`` sweeps a family of monotone curves with unit
slope at the origin: linear (lam=1), logarithmic (lam=0), inverse
(lam=-1), and saturating/growing exponentials at lam=-inf/+inf.  A
``DistanceMap`` anchors such a curve to a ray's near/far range so metric
distance t maps bijectively onto normalized distance s in [0, 1].
"""

import math
from dataclasses import dataclass, field

import numpy as np

# Radius around the removable singularities at lam = 0 and lam = 1 inside
# which the generic branch loses ~1/|lam - lam0| digits to cancellation;
# switch to the exact limit forms there.
SINGULARITY_RADIUS = 1e-3

# |lam| at or beyond which the exponential limit branches are used.  At
# lam = +1e3 the generic branch still differs from exp(x)-1 by ~2.6e-3
# relative (x=3), so the crossover sits exactly at 1e3.
INFINITY_THRESHOLD = 1e3


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise ValueError("power_transform input contains NaN")
    if np.any(x < 0):
        raise ValueError("power_transform domain is x >= 0")
    return x


def power_transform(x, lam):
    """Monotone power curve with unit slope at the origin.

    Branches: lam=1 -> x; lam=0 -> log(1+x); lam=+inf -> exp(x)-1;
    lam=-inf -> 1-exp(-x); otherwise
    (|lam-1|/lam) * ((x/|lam-1| + 1)**lam - 1).
    For lam < 0 the output is bounded above by (lam-1)/lam.
    """
    x = _check_x(x)
    if math.isnan(lam):
        raise ValueError("lam is NaN")
    if abs(lam - 1.0) < SINGULARITY_RADIUS:
        out = x.copy()
    elif abs(lam) < SINGULARITY_RADIUS:
        out = np.log1p(x)
    elif lam >= INFINITY_THRESHOLD:
        out = np.expm1(x)
    elif lam <= -INFINITY_THRESHOLD:
        out = -np.expm1(-x)
    else:
        a = abs(lam - 1.0)
        # (x/a + 1)**lam - 1 via expm1/log1p keeps precision near x = 0.
        out = (a / lam) * np.expm1(lam * np.log1p(x / a))
    return out if out.ndim else float(out)


def power_transform_inverse(y, lam):
    """Inverse of :func:`power_transform` in x for fixed lam.

    Raises ValueError when y lies outside the transform's range (e.g.
    y >= (lam-1)/lam for lam < 0, or y >= 1 for lam = -inf).
    """
    y = np.asarray(y, dtype=float)
    if np.any(np.isnan(y)):
        raise ValueError("power_transform_inverse input contains NaN")
    if math.isnan(lam):
        raise ValueError("lam is NaN")
    if np.any(y < 0):
        raise ValueError("power_transform range is y >= 0")
    if abs(lam - 1.0) < SINGULARITY_RADIUS:
        out = y.copy()
    elif abs(lam) < SINGULARITY_RADIUS:
        out = np.expm1(y)
    elif lam >= INFINITY_THRESHOLD:
        out = np.log1p(y)
    elif lam <= -INFINITY_THRESHOLD:
        if np.any(y >= 1.0):
            raise ValueError("y >= 1 is outside the range of the lam=-inf branch")
        out = -np.log1p(-y)
    else:
        a = abs(lam - 1.0)
        u = 1.0 + y * (lam / a)
        if np.any(u <= 0.0):
            raise ValueError(f"y outside the range of the lam={lam} branch")
        out = a * np.expm1(np.log(u) / lam)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PowerParams:
    """Curve parameters: shape lam and a multiplicative input scale."""

    lam: float = -1.5
    input_scale: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.input_scale) and self.input_scale > 0):
            raise ValueError("input_scale must be finite and positive")

    def curve(self, t):
        return power_transform(np.asarray(t, dtype=float) * self.input_scale, self.lam)

    def curve_inverse(self, y):
        return power_transform_inverse(y, self.lam) / self.input_scale


@dataclass(frozen=True)
class DistanceMap:
    """Strictly monotone bijection [t_near, t_far] -> [0, 1].

    Normalization is affine in curve space:
    s = (g(t) - g(t_near)) / (g(t_far) - g(t_near)) with
    g(t) = power_transform(input_scale * t, lam).  The affine anchoring is
    what pins s(t_far) = 1; the raw curve alone is bounded by (lam-1)/lam
    for negative lam (5/3 at the default lam = -1.5).
    """

    params: PowerParams = field(default_factory=PowerParams)
    t_near: float = 0.0
    t_far: float = 1.0

    def __post_init__(self):
        if not (self.t_near >= 0 and self.t_far > self.t_near):
            raise ValueError("need 0 <= t_near < t_far")

    @property
    def _g_near(self):
        return self.params.curve(self.t_near)

    @property
    def _g_far(self):
        return self.params.curve(self.t_far)


def to_normalized(dmap, t):
    """Map metric distance t to normalized s in [0, 1].

    Returns ``(s, clamped)``; ``clamped`` flags inputs that fell outside
    [t_near, t_far] and were clamped to the boundary.
    """
    t = np.asarray(t, dtype=float)
    clamped = (t < dmap.t_near) | (t > dmap.t_far)
    t_in = np.clip(t, dmap.t_near, dmap.t_far)
    g = dmap.params.curve(t_in)
    s = (g - dmap._g_near) / (dmap._g_far - dmap._g_near)
    s = np.clip(s, 0.0, 1.0)
    if s.ndim == 0:
        return float(s), bool(clamped)
    return s, clamped


def to_metric(dmap, s):
    """Map normalized s in [0, 1] back to metric distance t."""
    s = np.asarray(s, dtype=float)
    if np.any((s < 0) | (s > 1)):
        raise ValueError("normalized distance must lie in [0, 1]")
    y = dmap._g_near + s * (dmap._g_far - dmap._g_near)
    t = dmap.params.curve_inverse(y)
    t = np.clip(t, dmap.t_near, dmap.t_far)
    return float(t) if t.ndim == 0 else t
