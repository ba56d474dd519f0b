"""Moment-matched multisample patterns for conical frustums.

A pixel's ray carries a cone of half-width slope ``radius_slope``; the
stretch between two distances t0 < t1 is a conical frustum.  Each frustum
is summarized by six isotropic Gaussians placed on a hexagonal pattern
whose sample mean, along-ray variance, and total perpendicular variance
equal the frustum's own (volume-uniform) moments exactly.
"""

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Ray:
    """Origin + unit direction + pixel cone radius per unit distance."""

    origin: np.ndarray
    direction: np.ndarray
    radius_slope: float = 0.0

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float)
        direction = np.asarray(self.direction, dtype=float)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction)
        if origin.shape != (3,) or direction.shape != (3,):
            raise ValueError("origin and direction must be 3-vectors")
        if not (np.all(np.isfinite(origin)) and np.all(np.isfinite(direction))):
            raise ValueError("ray must be finite")
        norm = np.linalg.norm(direction)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"direction must be unit-norm (got |d| = {norm})")
        if not self.radius_slope >= 0:
            raise ValueError("radius_slope must be >= 0")


@dataclass(frozen=True)
class ConicalFrustum:
    """The section of a ray's cone between distances t0 and t1."""

    ray: Ray
    t0: float
    t1: float

    def __post_init__(self):
        if not (0 <= self.t0 < self.t1):
            raise ValueError("need 0 <= t0 < t1 (zero-width intervals rejected)")

    @property
    def t_mu(self):
        return 0.5 * (self.t0 + self.t1)

    @property
    def t_delta(self):
        return 0.5 * (self.t1 - self.t0)


@dataclass(frozen=True)
class MultisampleSet:
    """Six isotropic Gaussians (means, scales) standing in for a frustum."""

    means: np.ndarray  # (6, 3)
    sigmas: np.ndarray  # (6,)

    def __post_init__(self):
        if self.means.shape != (6, 3) or self.sigmas.shape != (6,):
            raise ValueError("expected 6 means (6, 3) and 6 sigmas (6,)")


@dataclass(frozen=True)
class TrainRandom:
    """Training mode: pattern rotation and flip drawn from ``rng``."""

    rng: np.random.Generator


@dataclass(frozen=True)
class RenderDeterministic:
    """Rendering mode: every other pattern (odd parity) rotated 30 degrees
    and flipped, bit-reproducibly."""

    parity: int = 0


def train_rng(seed, ray_id=0, round_index=0):
    """Counter-based per-(ray, round) random stream for TrainRandom mode."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(ray_id), int(round_index)))
    return np.random.Generator(np.random.Philox(seq))


def hex_angles():
    """The six pattern angles: uniform over the circle, ordered as two
    interleaved triangles offset by 60 degrees."""
    return np.array([0.0, 2.0, 4.0, 3.0, 5.0, 1.0]) * np.pi / 3.0


def cylinder_pattern(n=6):
    """Unit-cylinder pattern [cos(a)/sqrt(3), sin(a)/sqrt(3), centered ramp].

    Only n = 6 is supported: that is the unique small count (with uniform
    angles) for which the pattern's mean is the zero vector and its
    scatter sum(x x^T) is the 3x3 identity.
    """
    if n != 6:
        raise ValueError("only the 6-point pattern has the required moments")
    angles = hex_angles()
    j = np.arange(n, dtype=float)
    z = (j - (n - 1) / 2.0) / math.sqrt(n * (n**2 - 1) / 12.0)
    return np.stack(
        [np.cos(angles) / math.sqrt(3.0), np.sin(angles) / math.sqrt(3.0), z], axis=-1
    )


def frustum_t_values(frustum):
    """Six distances along the ray, linearly spaced and scaled so their
    sample mean and variance equal the frustum's distance marginal.

    The spacing can poke slightly past [t0, t1) for very wide frustums;
    values are deliberately not clamped, which would break the moment
    match.
    """
    t0, t1 = frustum.t0, frustum.t1
    tm, td = frustum.t_mu, frustum.t_delta
    j = np.arange(6, dtype=float)
    spread = (3.0 / math.sqrt(7.0)) * (2.0 * j / 5.0 - 1.0)
    disc = math.sqrt((td**2 - tm**2) ** 2 + 4.0 * tm**4)
    return t0 + td * (t1**2 + 2.0 * tm**2 + spread * disc) / (td**2 + 3.0 * tm**2)


def orthonormal_frame(direction):
    """Right-handed orthonormal basis whose third column is ``direction``.

    Branchless construction; any other perpendicular frame differs only by
    a rotation about the axis, which the sampling modes randomize anyway.
    """
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ValueError("direction must be unit-norm")
    x, y, z = d
    s = math.copysign(1.0, z)
    a = -1.0 / (s + z)
    b = x * y * a
    u = np.array([1.0 + s * x * x * a, s * b, -s * x])
    v = np.array([b, s + y * y * a, -y])
    return np.stack([u, v, d], axis=-1)


def multisample(frustum, mode, sigma_scale=0.5, frame=None):
    """Place the six-point pattern on a frustum and orient it in world space.

    Ray-relative coordinates are
    [r' t_j cos(a_j)/sqrt(2), r' t_j sin(a_j)/sqrt(2), t_j]; the pattern
    is rotated about the ray axis and flipped along it (randomly in
    TrainRandom mode, alternately in RenderDeterministic mode), rotated
    into world coordinates, and shifted by the ray origin.  Each point
    becomes an isotropic Gaussian of scale
    sigma_j = sigma_scale * r' * t_j / sqrt(2).

    ``frame`` optionally fixes the perpendicular frame (orthonormal, third
    column equal to the ray direction); by default a canonical frame is
    built from the direction.
    """
    ray = frustum.ray
    t = frustum_t_values(frustum)
    angles = hex_angles()

    if isinstance(mode, TrainRandom):
        phi = mode.rng.uniform(0.0, 2.0 * np.pi)
        flip = bool(mode.rng.integers(0, 2))
    elif isinstance(mode, RenderDeterministic):
        odd = mode.parity % 2 == 1
        phi = np.pi / 6.0 if odd else 0.0
        flip = odd
    else:
        raise TypeError(f"unsupported pattern mode: {mode!r}")

    # Flipping mirrors the pattern along the ray: the angle sequence is
    # reversed relative to the (fixed, increasing) t values.
    if flip:
        angles = angles[::-1]
    angles = angles + phi

    if frame is None:
        frame = orthonormal_frame(ray.direction)
    else:
        frame = np.asarray(frame, dtype=float)
        if frame.shape != (3, 3) or not np.allclose(frame.T @ frame, np.eye(3), atol=1e-9):
            raise ValueError("frame must be a 3x3 orthonormal matrix")
        if not np.allclose(frame[:, 2], ray.direction, atol=1e-9):
            raise ValueError("frame's third column must equal the ray direction")

    radial = ray.radius_slope * t / SQRT2
    local = np.stack([radial * np.cos(angles), radial * np.sin(angles), t], axis=-1)
    means = local @ frame.T + ray.origin
    sigmas = sigma_scale * ray.radius_slope * t / SQRT2
    return MultisampleSet(means=means, sigmas=sigmas)
