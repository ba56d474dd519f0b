"""Minimal volume rendering and hierarchical interval sampling.

Just enough machinery to compose the histogram losses into a training
step: alpha compositing of per-interval densities into histogram weights,
inverse-CDF stratified placement of the next round's intervals, and the
bookkeeping that sums the per-round losses.
"""

from dataclasses import dataclass, field

import numpy as np

from . import stepfun
from .distance import to_metric
from .gridfield import normalized_weight_decay
from .stepfun import Histogram

# Uniform probability mass mixed into a proposal before inverse-CDF
# sampling so no region becomes unsampleable.
DEFAULT_PADDING = 1e-2


@dataclass(frozen=True)
class RaySamples:
    """Sorted interval endpoints (normalized and metric) with per-interval
    densities and colors."""

    s: np.ndarray  # (k+1,) normalized endpoints
    t: np.ndarray  # (k+1,) metric endpoints
    densities: np.ndarray  # (k,) >= 0
    colors: np.ndarray  # (k, c)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        t = np.asarray(self.t, dtype=float)
        tau = np.asarray(self.densities, dtype=float)
        colors = np.atleast_2d(np.asarray(self.colors, dtype=float))
        k = s.size - 1
        if t.shape != s.shape or tau.shape != (k,) or colors.shape[0] != k:
            raise ValueError("inconsistent RaySamples shapes")
        if not (np.all(np.diff(s) > 0) and np.all(np.diff(t) > 0)):
            raise ValueError("endpoints must be strictly increasing")
        if np.any(tau < 0) or not np.all(np.isfinite(tau)):
            raise ValueError("densities must be finite and >= 0")
        for name, val in (("s", s), ("t", t), ("densities", tau), ("colors", colors)):
            object.__setattr__(self, name, val)


@dataclass(frozen=True)
class SamplingConfig:
    """Round structure and loss multipliers for hierarchical sampling.

    Two proposal rounds of 64 samples feed a final 32-sample render
    round; the interlevel loss uses pulse radii 0.03 then 0.003 with
    multiplier 0.01, distortion 0.005, normalized weight decay 0.1.
    Proposal pyramids are truncated (max resolutions 512 and 2048) and
    carry a single channel, since they only predict density.
    """

    rounds: tuple = (64, 64, 32)
    pulse_radii: tuple = (0.03, 0.003)
    interlevel_mult: float = 0.01
    distortion_mult: float = 0.005
    weight_decay_mult: float = 0.1
    proposal_padding: float = DEFAULT_PADDING
    prop_max_resolutions: tuple = (512, 2048)
    prop_channels: int = 1

    def __post_init__(self):
        if any(k < 2 for k in self.rounds):
            raise ValueError("every round needs at least 2 samples")
        if any(r <= 0 for r in self.pulse_radii):
            raise ValueError("pulse radii must be positive")


def compositing_weights(samples):
    """Alpha-composite densities into a histogram of visibility weights.

    w_i = T_i * (1 - exp(-tau_i * dt_i)) with T_i the transmittance
    through all earlier intervals.  Returns (Histogram(s, w), remainder)
    where remainder = 1 - sum(w) is the transmittance left after the last
    interval, reported separately so callers choose their own background.
    """
    dt = np.diff(samples.t)
    optical = samples.densities * dt
    trans = np.exp(-np.concatenate([[0.0], np.cumsum(optical[:-1])]))
    alpha = -np.expm1(-optical)
    w = trans * alpha
    remainder = float(np.exp(-np.sum(optical)))
    return Histogram(samples.s, w), remainder


def composite_color(weights, colors, background=0.0, remainder=None):
    """Weighted color sum with an optional background fill."""
    w = weights.weights if isinstance(weights, Histogram) else np.asarray(weights)
    colors = np.atleast_2d(np.asarray(colors, dtype=float))
    out = (w[:, None] * colors).sum(axis=0)
    if remainder is not None:
        out = out + remainder * background
    return out


def _padded_cdf(prop, padding):
    w = prop.weights.astype(float)
    span = prop.endpoints[-1] - prop.endpoints[0]
    if padding > 0:
        w = w + padding * prop.interval_sizes / span
    total = w.sum()
    if total <= 0:
        return None
    cdf = np.concatenate([[0.0], np.cumsum(w)]) / total
    cdf[-1] = 1.0
    return cdf


def sample_intervals(prop, count, rng=None, padding=DEFAULT_PADDING):
    """Draw count+1 sorted endpoints from a proposal histogram.

    Inverse-CDF sampling of the padding-smoothed proposal at stratified
    positions: strata midpoints when ``rng`` is None (bit-reproducible),
    jittered within each stratum otherwise.  A zero-mass proposal falls
    back to uniformly spaced endpoints.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    n = count + 1
    if rng is None:
        u = (np.arange(n) + 0.5) / n
    else:
        u = (np.arange(n) + rng.uniform(size=n)) / n
    cdf = _padded_cdf(prop, padding)
    if cdf is None:
        lo, hi = prop.endpoints[0], prop.endpoints[-1]
        return lo + (hi - lo) * u
    return np.interp(u, cdf, prop.endpoints)


def training_losses(nerf_hist, prop_hists, pyramids, rendered_color, target_color,
                    config=None, dmap=None):
    """Assemble the per-term training losses for one ray.

    Returns a dict with ``data`` (mean squared color error),
    ``interlevel`` (sum over supervised rounds of the anti-aliased loss at
    that round's pulse radius, scaled by the interlevel multiplier),
    ``distortion`` (on the nerf histogram mapped to metric distance via
    ``dmap`` when given), ``weight_decay`` (normalized decay summed over
    pyramids), and their ``total``.
    """
    config = config or SamplingConfig()
    rendered = np.atleast_1d(np.asarray(rendered_color, dtype=float))
    target = np.atleast_1d(np.asarray(target_color, dtype=float))
    data = float(np.mean((rendered - target) ** 2))

    if len(prop_hists) > len(config.pulse_radii):
        raise ValueError("need one pulse radius per supervised proposal round")
    interlevel = config.interlevel_mult * sum(
        stepfun.antialiased_interlevel_loss(nerf_hist, prop, r)
        for prop, r in zip(prop_hists, config.pulse_radii)
    )

    if dmap is not None:
        metric_hist = Histogram(to_metric(dmap, nerf_hist.endpoints), nerf_hist.weights)
    else:
        metric_hist = nerf_hist
    distortion = config.distortion_mult * stepfun.distortion_loss(metric_hist)

    weight_decay = config.weight_decay_mult * sum(
        normalized_weight_decay(p) for p in pyramids
    )

    losses = {
        "data": data,
        "interlevel": float(interlevel),
        "distortion": float(distortion),
        "weight_decay": float(weight_decay),
    }
    losses["total"] = float(sum(losses.values()))
    return losses
