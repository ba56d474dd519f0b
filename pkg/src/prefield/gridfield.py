"""Multi-level dense/hashed feature grids with scale-aware interpolation.

A pyramid holds one feature grid per resolution level.  Queries are
isotropic Gaussians (mean, sigma): each level's d-linearly interpolated
feature is multiplied by the fraction of the Gaussian's mass that fits
inside one grid cell, so content finer than the query scale fades toward
the grids' zero mean instead of aliasing.
"""

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import erf as _scipy_erf

# Per-axis hashing primes; the first axis is left unmultiplied so 1-D
# levels degrade to plain modular indexing.
HASH_PRIMES = (1, 2654435761, 805459861)

DEFAULT_TABLE_SIZE = 128**3
DEFAULT_G_INIT = 1e-4

_DOMAINS = {1: (0.0, 1.0), 2: (0.0, 1.0), 3: (-2.0, 2.0)}


def fast_erf(x):
    """Cheap erf approximation sign(x) * sqrt(1 - exp(-(4/pi) x^2)).

    Max absolute error below 0.01 on the real line; exact at 0 and +-inf.
    """
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.sqrt(-np.expm1(-(4.0 / np.pi) * x * x))
    return float(out) if out.ndim == 0 else out


def downweight(sigma, n, use_fast_erf=False):
    """Fraction of an isotropic Gaussian's mass inside one cell of an
    n-cells-per-axis grid over the unit domain: erf(1 / sqrt(8 sigma^2 n^2)).

    sigma = 0 maps to 1.  Monotone decreasing in sigma * n.
    """
    sigma = np.asarray(sigma, dtype=float)
    erf_fn = fast_erf if use_fast_erf else _scipy_erf
    with np.errstate(divide="ignore"):
        arg = np.where(sigma > 0, 1.0 / np.sqrt(8.0 * sigma**2 * float(n) ** 2), np.inf)
    out = np.where(np.isinf(arg), 1.0, erf_fn(np.where(np.isinf(arg), 1.0, arg)))
    return float(out) if out.ndim == 0 else out


@dataclass
class Level:
    """One grid level: n cells per axis, (n+1)^d vertices, c channels.

    ``kind`` is "dense" (vertices stored individually) or "hashed"
    (vertices share a table of ``table_size`` rows; the mapping is 1:1
    whenever the vertex count fits, so small hashed levels match dense
    ones bit for bit).
    """

    resolution: int
    channels: int
    dim: int
    kind: str
    table_size: int
    values: np.ndarray  # (rows, channels) float32

    @property
    def vertex_count(self):
        return (self.resolution + 1) ** self.dim

    @property
    def rows(self):
        if self.kind == "dense":
            return self.vertex_count
        return min(self.table_size, self.vertex_count)


def make_level(resolution, channels, dim, kind="auto", table_size=DEFAULT_TABLE_SIZE,
               rng=None, g_init=DEFAULT_G_INIT):
    """Allocate a level; ``kind="auto"`` hashes only when n^d > table_size."""
    if channels < 1:
        raise ValueError("channels must be >= 1")
    if dim not in (1, 2, 3):
        raise ValueError("dim must be 1, 2, or 3")
    if kind == "auto":
        kind = "hashed" if resolution**dim > table_size else "dense"
    if kind not in ("dense", "hashed"):
        raise ValueError(f"unknown storage kind {kind!r}")
    level = Level(resolution=int(resolution), channels=int(channels), dim=dim,
                  kind=kind, table_size=int(table_size),
                  values=np.empty((0, channels), dtype=np.float32))
    if rng is None:
        values = np.zeros((level.rows, channels), dtype=np.float32)
    else:
        values = rng.uniform(-g_init, g_init, size=(level.rows, channels)).astype(np.float32)
    level.values = values
    return level


def _vertex_rows(level, idx):
    """Map integer vertex coordinates (..., d) to storage rows."""
    n_verts = level.resolution + 1
    if level.kind == "dense" or level.vertex_count <= level.table_size:
        strides = n_verts ** np.arange(level.dim)
        return (idx * strides).sum(axis=-1)
    hashed = np.zeros(idx.shape[:-1], dtype=np.uint64)
    for axis in range(level.dim):
        hashed ^= idx[..., axis].astype(np.uint64) * np.uint64(HASH_PRIMES[axis])
    return (hashed % np.uint64(level.table_size)).astype(np.int64)


def interpolate(level, x):
    """d-linear interpolation at normalized coordinates x in [0, 1]^d.

    Accepts (..., d) arrays; out-of-domain coordinates clamp to the
    boundary cell.  Returns (..., channels) float64.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != level.dim:
        if level.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        else:
            raise ValueError(f"expected coordinates with last axis {level.dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("coordinates must be finite")
    n = level.resolution
    u = np.clip(x, 0.0, 1.0) * n
    base = np.minimum(u.astype(np.int64), n - 1)
    frac = u - base

    out = np.zeros(x.shape[:-1] + (level.channels,))
    vals = level.values.astype(np.float64)
    for corner in np.ndindex(*(2,) * level.dim):
        offset = np.array(corner)
        weight = np.prod(np.where(offset, frac, 1.0 - frac), axis=-1)
        rows = _vertex_rows(level, base + offset)
        out += weight[..., None] * vals[rows]
    return out


@dataclass
class GridPyramid:
    """Ordered levels with strictly increasing resolutions over one domain.

    ``lo``/``hi`` give the (isotropic) coordinate domain; 3-D pyramids
    default to the contracted ball's bounding box [-2, 2]^3 and lower
    dimensions to [0, 1]^d.
    """

    levels: list
    dim: int
    g_init: float
    lo: float
    hi: float

    @property
    def resolutions(self):
        return [lvl.resolution for lvl in self.levels]

    @property
    def width(self):
        return self.hi - self.lo

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.lo) / self.width


def make_pyramid(resolutions, channels=4, dim=3, domain=None, seed=0,
                 table_size=DEFAULT_TABLE_SIZE, g_init=DEFAULT_G_INIT, kind="auto"):
    """Build a pyramid with per-level uniform [-g_init, g_init] features.

    ``channels`` may be an int (shared) or one count per level; ``seed``
    of None zero-initializes instead of drawing random features.  The
    default 3-D configuration elsewhere in this package is 10 levels with
    resolutions 16 * 2**l up to 8192 and 4 channels.
    """
    resolutions = [int(r) for r in resolutions]
    if any(b <= a for a, b in zip(resolutions, resolutions[1:])):
        raise ValueError("level resolutions must be strictly increasing")
    if isinstance(channels, int):
        channels = [channels] * len(resolutions)
    if len(channels) != len(resolutions):
        raise ValueError("need one channel count per level")
    lo, hi = domain if domain is not None else _DOMAINS[dim]
    rng = None if seed is None else np.random.default_rng(seed)
    levels = [
        make_level(r, c, dim, kind=kind, table_size=table_size, rng=rng, g_init=g_init)
        for r, c in zip(resolutions, channels)
    ]
    return GridPyramid(levels=levels, dim=dim, g_init=float(g_init), lo=float(lo), hi=float(hi))


def default_pyramid(seed=0):
    """10 levels, powers of 2 from 16 to 8192, 4 channels, 128^3 hash."""
    return make_pyramid([16 * 2**i for i in range(10)], channels=4, dim=3, seed=seed)


def _as_samples(samples):
    if hasattr(samples, "means") and hasattr(samples, "sigmas"):
        return np.asarray(samples.means, dtype=float), np.asarray(samples.sigmas, dtype=float)
    if isinstance(samples, tuple) and len(samples) == 2:
        return np.asarray(samples[0], dtype=float), np.asarray(samples[1], dtype=float)
    means = np.asarray([m for m, _ in samples], dtype=float)
    sigmas = np.asarray([s for _, s in samples], dtype=float)
    return means, sigmas


def aggregate_features(pyramid, samples, use_fast_erf=False):
    """Pool a query's multisamples into one feature vector.

    Per level: the mean over samples of (downweight * interpolated
    feature), followed by one scale feature per level,
    (2 * mean(downweight) - 1) * sqrt(g_init^2 + mean(V^2)), appended
    after all feature channels.  The mean(V^2) term is a constant as far
    as any gradient computation is concerned (stop-gradient semantics;
    this library is forward-only).
    """
    means, sigmas = _as_samples(samples)
    if means.size == 0:
        raise ValueError("empty sample set")
    means = means.reshape(-1, pyramid.dim)
    sigmas = np.broadcast_to(np.atleast_1d(sigmas), (means.shape[0],))
    x = pyramid.normalize(means)
    sigma_norm = sigmas / pyramid.width

    feats, scale_feats = [], []
    for level in pyramid.levels:
        omega = downweight(sigma_norm, level.resolution, use_fast_erf=use_fast_erf)
        interp = interpolate(level, x)
        feats.append(np.mean(omega[:, None] * interp, axis=0))
        v_ms = float(np.mean(level.values.astype(np.float64) ** 2))
        scale_feats.append((2.0 * float(np.mean(omega)) - 1.0)
                           * math.sqrt(pyramid.g_init**2 + v_ms))
    return np.concatenate(feats + [np.asarray(scale_feats)])


def normalized_weight_decay(pyramid):
    """Sum over levels of the mean squared stored feature value."""
    return float(sum(np.mean(lvl.values.astype(np.float64) ** 2) for lvl in pyramid.levels))


def _gauss_legendre_nodes():
    return np.polynomial.legendre.leggauss(8)


def convolve_oracle_1d(level, mean, sigma, min_points=1024):
    """Ground-truth scale-aware feature: the level's piecewise-linear
    feature function integrated against a Gaussian PDF.

    Dense quadrature over mean +- 5 sigma: the window splits at every
    grid vertex, each piece is subdivided to at most sigma/2 and
    integrated with 8-point Gauss-Legendre (at least ``min_points`` nodes
    in total), and the result is normalized by the quadrature mass.
    """
    if level.dim != 1:
        raise ValueError("the convolution oracle is 1-D only")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return interpolate(level, np.asarray([float(mean)]))

    lo, hi = mean - 5.0 * sigma, mean + 5.0 * sigma
    verts = np.arange(level.resolution + 1) / level.resolution
    cuts = verts[(verts > lo) & (verts < hi)]
    edges = np.concatenate([[lo], cuts, [hi]])

    pieces = []
    max_len = sigma / 2.0
    for a, b in zip(edges[:-1], edges[1:]):
        splits = max(1, math.ceil((b - a) / max_len))
        pieces.append(np.linspace(a, b, splits + 1))
    bounds = np.unique(np.concatenate(pieces))
    nodes_per = 8
    while (bounds.size - 1) * nodes_per < min_points:
        nodes_per *= 2
    gx, gw = np.polynomial.legendre.leggauss(nodes_per)

    a, b = bounds[:-1], bounds[1:]
    half = 0.5 * (b - a)
    xs = 0.5 * (a + b)[:, None] + half[:, None] * gx
    pdf = np.exp(-0.5 * ((xs - mean) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    fx = interpolate(level, xs[..., None])
    num = np.sum((half[:, None] * gw)[..., None] * pdf[..., None] * fx, axis=(0, 1))
    den = np.sum(half[:, None] * gw * pdf)
    return num / den


# Binary pyramid format: little-endian int32 header
# [dim, level_count, (resolution, channels, kind, table_size) per level],
# one float64 (g_init), then each level's float32 rows in level order.
_KIND_CODES = {"dense": 0, "hashed": 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


def save_pyramid(pyramid, path):
    with open(path, "wb") as fh:
        header = [pyramid.dim, len(pyramid.levels)]
        for lvl in pyramid.levels:
            header += [lvl.resolution, lvl.channels, _KIND_CODES[lvl.kind], lvl.table_size]
        fh.write(np.asarray(header, dtype="<i4").tobytes())
        fh.write(struct.pack("<d", pyramid.g_init))
        for lvl in pyramid.levels:
            fh.write(np.ascontiguousarray(lvl.values, dtype="<f4").tobytes())


def load_pyramid(path, domain=None):
    with open(path, "rb") as fh:
        dim, count = np.frombuffer(fh.read(8), dtype="<i4")
        per_level = np.frombuffer(fh.read(16 * count), dtype="<i4").reshape(count, 4)
        (g_init,) = struct.unpack("<d", fh.read(8))
        levels = []
        for res, channels, kind_code, table_size in per_level:
            lvl = Level(resolution=int(res), channels=int(channels), dim=int(dim),
                        kind=_KIND_NAMES[int(kind_code)], table_size=int(table_size),
                        values=np.empty((0, int(channels)), dtype=np.float32))
            raw = fh.read(4 * lvl.rows * lvl.channels)
            lvl.values = np.frombuffer(raw, dtype="<f4").reshape(lvl.rows, lvl.channels).copy()
            levels.append(lvl)
    lo, hi = domain if domain is not None else _DOMAINS[int(dim)]
    return GridPyramid(levels=levels, dim=int(dim), g_init=float(g_init),
                       lo=float(lo), hi=float(hi))
