"""Continuous step-function machinery.

Step functions with arbitrary real endpoints are blurred exactly (not by
rasterizing) by a unit-mass rectangular pulse, resampled through a
piecewise-quadratic CDF onto new endpoints, and compared by the losses
used to supervise proposal histograms along a ray.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .distance import PowerParams

# Guard added to denominators when a proposal bin carries zero weight;
# keeps the losses finite without hiding real violations.
DENOM_EPS = 1e-7

WEIGHT_SUM_SLACK = 1e-6


def _check_endpoints(t, name="endpoints"):
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError(f"{name} must be a 1-D vector of length >= 2")
    if not np.all(np.isfinite(t)):
        raise ValueError(f"{name} must be finite")
    if not np.all(np.diff(t) > 0):
        raise ValueError(f"{name} must be strictly increasing")
    return t


@dataclass(frozen=True)
class StepFunction:
    """Sorted endpoints (k+1) with one value per interval (k)."""

    endpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = _check_endpoints(self.endpoints)
        y = np.asarray(self.values, dtype=float)
        if y.shape != (t.size - 1,):
            raise ValueError("values must be one shorter than endpoints")
        if not np.all(np.isfinite(y)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "endpoints", t)
        object.__setattr__(self, "values", y)


@dataclass(frozen=True)
class Histogram:
    """A step function of non-negative weights summing to at most 1.

    Endpoints are normally normalized distances in [0, 1]; the distortion
    loss also consumes histograms over metric distance, so no range check
    is applied to the endpoints themselves.
    """

    endpoints: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        t = _check_endpoints(self.endpoints)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (t.size - 1,):
            raise ValueError("weights must be one shorter than endpoints")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and >= 0")
        if w.sum() > 1.0 + WEIGHT_SUM_SLACK:
            raise ValueError(f"weights sum to {w.sum()} > 1 + {WEIGHT_SUM_SLACK}")
        object.__setattr__(self, "endpoints", t)
        object.__setattr__(self, "weights", w)

    @property
    def interval_sizes(self):
        return np.diff(self.endpoints)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function; zero outside its knot span."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = _check_endpoints(self.knots, "knots")
        y = np.asarray(self.values, dtype=float)
        if y.shape != x.shape:
            raise ValueError("knots and values must have equal length")
        if not np.all(np.isfinite(y)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "knots", x)
        object.__setattr__(self, "values", y)

    def __call__(self, x):
        return np.interp(x, self.knots, self.values, left=0.0, right=0.0)

    def integral(self):
        return float(np.sum(np.diff(self.knots) * (self.values[:-1] + self.values[1:]) * 0.5))


def blur_stepfun(f, r):
    """Convolve a step function with the unit-mass pulse [|t| < r] / (2r).

    Exact: every endpoint emits a pair of signed slope deltas at t -+ r
    (proportional to the adjacent value change), the two pre-sorted delta
    trains are merged (coincident positions summed), and a double
    cumulative integration turns them back into knot values.
    """
    if not r > 0:
        raise ValueError("pulse radius r must be positive")
    t, y = f.endpoints, f.values
    dy = np.diff(y, prepend=0.0, append=0.0) / (2.0 * r)

    pos = np.concatenate([t - r, t + r])
    delta = np.concatenate([dy, -dy])
    order = np.argsort(pos, kind="stable")
    pos, delta = pos[order], delta[order]

    # Coincident deltas (e.g. intervals exactly 2r wide) merge by summing.
    knots, inverse = np.unique(pos, return_inverse=True)
    merged = np.zeros(knots.size)
    np.add.at(merged, inverse, delta)

    slopes = np.cumsum(merged[:-1])
    vals = np.concatenate([[0.0], np.cumsum(np.diff(knots) * slopes)])
    return PiecewiseLinear(knots=knots, values=vals)


def _quadratic_cdf(pl):
    """Cumulative integral of a PiecewiseLinear as per-segment quadratics.

    Returns (knots, cum, lin, quad): on segment i the integral is
    cum[i] + lin[i]*(x - knots[i]) + quad[i]*(x - knots[i])**2.
    """
    x, y = pl.knots, pl.values
    dx = np.diff(x)
    areas = 0.5 * (y[:-1] + y[1:]) * dx
    cum = np.concatenate([[0.0], np.cumsum(areas)])
    lin = y[:-1]
    quad = 0.5 * np.diff(y) / dx
    return x, cum, lin, quad


def _eval_quadratic_cdf(cdf, q):
    x, cum, lin, quad = cdf
    q = np.asarray(q, dtype=float)
    qc = np.clip(q, x[0], x[-1])
    idx = np.clip(np.searchsorted(x, qc, side="right") - 1, 0, x.size - 2)
    tau = qc - x[idx]
    return cum[idx] + lin[idx] * tau + quad[idx] * tau**2


def _overlap_fractions(src_endpoints, dst_endpoints):
    """Fraction of each source interval covered by each target interval.

    Returns an (n_dst, n_src) matrix; a source interval fully inside a
    target interval contributes fraction exactly 1.
    """
    src_lo, src_hi = src_endpoints[:-1], src_endpoints[1:]
    dst_lo, dst_hi = dst_endpoints[:-1, None], dst_endpoints[1:, None]
    overlap = np.minimum(src_hi, dst_hi) - np.maximum(src_lo, dst_lo)
    return np.clip(overlap / (src_hi - src_lo), 0.0, 1.0)


def resample_histogram(h, r, target_endpoints):
    """Resample a histogram's mass onto new endpoints, optionally blurred.

    The histogram becomes a piecewise-constant PDF (weights divided by
    interval sizes; renormalized only if their sum exceeds 1), is blurred
    by the radius-r pulse (skipped for r = 0), integrated to a
    piecewise-quadratic CDF, queried at the target endpoints, and
    differenced.  With r = 0 the mass transfer is computed by exact
    interval overlap, so resampling onto the original endpoints returns
    the original weights bit-for-bit.
    """
    if r < 0:
        raise ValueError("pulse radius r must be >= 0")
    s_new = _check_endpoints(np.asarray(target_endpoints, dtype=float), "target_endpoints")

    if r == 0:
        frac = _overlap_fractions(h.endpoints, s_new)
        return frac @ h.weights

    wsum = h.weights.sum()
    scale = 1.0 / wsum if wsum > 1.0 else 1.0
    pdf = StepFunction(h.endpoints, scale * h.weights / h.interval_sizes)
    blurred = blur_stepfun(pdf, r)
    cdf_at = _eval_quadratic_cdf(_quadratic_cdf(blurred), s_new)
    return np.diff(cdf_at) / scale


def antialiased_interlevel_loss(nerf, prop, r, eps=DENOM_EPS):
    """Half-quadratic penalty on resampled mass exceeding proposal weights.

    The nerf histogram is blurred by radius r and resampled onto the
    proposal endpoints; each proposal bin then pays
    max(0, w_resampled - w_prop)**2 / (w_prop + eps).  The resampled
    weights are treated as constants by the gradient (see
    :func:`antialiased_interlevel_loss_grad`); gradients are likewise
    blocked through the proposal endpoints.
    """
    w_rs = resample_histogram(nerf, r, prop.endpoints)
    excess = np.maximum(0.0, w_rs - prop.weights)
    return float(np.sum(excess**2 / (prop.weights + eps)))


def antialiased_interlevel_loss_grad(nerf, prop, r, eps=DENOM_EPS):
    """d(loss)/d(proposal weights); resampled nerf weights held constant."""
    w_rs = resample_histogram(nerf, r, prop.endpoints)
    denom = prop.weights + eps
    excess = np.maximum(0.0, w_rs - prop.weights)
    return -2.0 * excess / denom - excess**2 / denom**2


def _overlap_bounds(nerf_endpoints, prop):
    """Per nerf interval: total proposal weight with any overlap, plus the
    half-open index range [lo, hi) of the overlapping proposal bins."""
    upper = prop.endpoints[1:]
    lower = prop.endpoints[:-1]
    lo = np.searchsorted(upper, nerf_endpoints[:-1], side="right")
    hi = np.searchsorted(lower, nerf_endpoints[1:], side="left")
    hi = np.maximum(hi, lo)
    # Direct range sums: a nerf bin overlapped by exactly one proposal bin
    # must see that bin's weight bit-for-bit (so identical histograms cost 0).
    bound = np.array([prop.weights[a:b].sum() for a, b in zip(lo, hi)])
    return bound, lo, hi


def baseline_interlevel_loss(nerf, prop, eps=DENOM_EPS):
    """Overlap-bound penalty: each nerf bin pays
    max(0, w - bound)**2 / (bound + eps) where bound sums the proposal
    weights of every overlapping bin, whether the overlap is partial or
    complete.  Constant under translations that keep the overlap set
    fixed, hence piecewise constant along the ray."""
    bound, _, _ = _overlap_bounds(nerf.endpoints, prop)
    excess = np.maximum(0.0, nerf.weights - bound)
    return float(np.sum(excess**2 / (bound + eps)))


def baseline_interlevel_loss_grad(nerf, prop, eps=DENOM_EPS):
    """d(loss)/d(proposal weights); nerf weights held constant."""
    bound, lo, hi = _overlap_bounds(nerf.endpoints, prop)
    denom = bound + eps
    excess = np.maximum(0.0, nerf.weights - bound)
    dl_dbound = -2.0 * excess / denom - excess**2 / denom**2
    grad = np.zeros_like(prop.weights)
    for i in range(nerf.weights.size):
        grad[lo[i] : hi[i]] += dl_dbound[i]
    return grad


DISTORTION_CURVE = PowerParams(lam=-0.25, input_scale=10000.0)


def distortion_loss(h, curve=DISTORTION_CURVE):
    """Self-repulsion of histogram mass on curve-transformed distances.

    With u = curve(t) at the endpoints:
    sum_ij w_i w_j |mid(u_i) - mid(u_j)| + (1/3) sum_i w_i**2 size(u_i).
    The pairwise term is evaluated with the O(k) cumulative identity for
    sorted midpoints.
    """
    u = curve.curve(h.endpoints) if curve is not None else h.endpoints
    mids = 0.5 * (u[:-1] + u[1:])
    sizes = np.diff(u)
    w = h.weights
    cw = np.cumsum(w)
    cwm = np.cumsum(w * mids)
    # sum_ij w_i w_j |m_i - m_j| = 2 sum_i w_i (m_i W_{<i} - S_{<i}).
    pair = 2.0 * np.sum(w * (mids * (cw - w) - (cwm - w * mids)))
    return float(pair + np.sum(w**2 * sizes) / 3.0)


def distortion_loss_grad(h, curve=DISTORTION_CURVE):
    """d(distortion)/d(weights) at fixed endpoints."""
    u = curve.curve(h.endpoints) if curve is not None else h.endpoints
    mids = 0.5 * (u[:-1] + u[1:])
    sizes = np.diff(u)
    w = h.weights
    below_w = np.cumsum(w) - w
    below_s = np.cumsum(w * mids) - w * mids
    total_w, total_s = w.sum(), np.sum(w * mids)
    above_w = total_w - below_w - w
    above_s = total_s - below_s - w * mids
    pair = 2.0 * (mids * below_w - below_s + above_s - mids * above_w)
    return pair + (2.0 / 3.0) * w * sizes


def save_histogram_csv(h, path):
    """Write columns ``endpoint,weight``; the final row's weight is empty."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["endpoint", "weight"])
        for e, w in zip(h.endpoints[:-1], h.weights):
            writer.writerow([repr(float(e)), repr(float(w))])
        writer.writerow([repr(float(h.endpoints[-1])), ""])


def load_histogram_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["endpoint", "weight"]:
        raise ValueError(f"{path}: expected header 'endpoint,weight'")
    endpoints = [float(r[0]) for r in rows[1:]]
    weights = [float(r[1]) for r in rows[1:-1]]
    if rows[-1][1] != "":
        raise ValueError(f"{path}: final row must leave the weight empty")
    return Histogram(np.array(endpoints), np.array(weights))
