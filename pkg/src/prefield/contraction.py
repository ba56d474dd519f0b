"""Unbounded-scene spatial contraction and isotropic scale propagation.

Points inside the unit ball are left alone; outside, x maps to
(2 - 1/|x|) * x/|x|, so all of space lands in the open ball of radius 2.
An isotropic Gaussian's scale rides along via the cube root of the
contraction's Jacobian determinant (the geometric mean of its
eigenvalues), for which this specific contraction admits a closed form.
"""

from dataclasses import dataclass

import numpy as np


def _check_finite(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError("expected 3-vectors in the last axis")
    if not np.all(np.isfinite(x)):
        raise ValueError("contraction input must be finite")
    return x


def contract(x):
    """Contract world points into the radius-2 ball; identity inside radius 1."""
    x = _check_finite(x)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    # At |x| <= 1 (boundary included) both branches agree; use identity.
    safe = np.maximum(norm, 1.0)
    out = np.where(norm <= 1.0, x, (2.0 - 1.0 / safe) * (x / safe))
    return out


def contract_det_root(x):
    """Cube root of |det J| of the contraction at x.

    Equals (cbrt(2*max(1,|x|) - 1) / max(1,|x|))**2; exactly 1 inside the
    unit ball and depends only on |x|.
    """
    x = _check_finite(x)
    norm = np.maximum(np.linalg.norm(x, axis=-1), 1.0)
    out = (np.cbrt(2.0 * norm - 1.0) / norm) ** 2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ContractedSample:
    """An isotropic Gaussian expressed in contracted coordinates."""

    mean_c: np.ndarray
    sigma_c: float

    def __post_init__(self):
        if np.linalg.norm(self.mean_c) > 2.0:
            raise ValueError("contracted mean must lie inside the radius-2 ball")
        if not np.isfinite(self.sigma_c):
            raise ValueError("contracted sigma must be finite")


def contract_sample(mean, sigma):
    """Contract one isotropic Gaussian (mean, sigma) -> ContractedSample."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    mean = np.asarray(mean, dtype=float)
    return ContractedSample(contract(mean), float(sigma) * contract_det_root(mean))


def contract_multisamples(means, sigmas):
    """Contract a batch of isotropic Gaussians; returns (means_c, sigmas_c)."""
    means = _check_finite(means)
    sigmas = np.asarray(sigmas, dtype=float)
    return contract(means), sigmas * contract_det_root(means)
