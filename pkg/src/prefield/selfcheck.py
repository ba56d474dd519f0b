"""Built-in oracle suite: quick brute-force cross-checks of the library.

Each check recomputes a quantity by an independent method (Monte Carlo,
finite differences, window overlaps, trapezoid quadrature) and compares.
Smaller sample budgets than the full test suite; meant as a fast smoke
screen behind the ``selfcheck`` CLI subcommand.
"""

import numpy as np
from scipy.special import erf

from .contraction import contract, contract_det_root, contract_sample
from .distance import power_transform, power_transform_inverse
from .geometry import ConicalFrustum, Ray, RenderDeterministic, multisample
from .gridfield import fast_erf
from .stepfun import Histogram, StepFunction, blur_stepfun, resample_histogram


def _check_multisample_moments():
    rng = np.random.default_rng(0)
    n = 200_000
    worst = 0.0
    for t0, t1, rdot in [(0.5, 1.5, 0.05), (2.0, 2.2, 0.2)]:
        u_t = (np.arange(n) + rng.uniform(size=n)) / n
        t = np.cbrt(t0**3 + u_t * (t1**3 - t0**3))
        rad = rdot * t * np.sqrt((rng.permutation(n) + rng.uniform(size=n)) / n)
        ang = 2 * np.pi * (rng.permutation(n) + rng.uniform(size=n)) / n
        x, y = rad * np.cos(ang), rad * np.sin(ang)

        fr = ConicalFrustum(Ray(np.zeros(3), np.array([0.0, 0.0, 1.0]), rdot), t0, t1)
        ms = multisample(fr, RenderDeterministic(0))
        worst = max(
            worst,
            abs(ms.means[:, 2].mean() - t.mean()) / t.mean(),
            abs(ms.means[:, 2].var() - t.var()) / t.var(),
            abs((ms.means[:, :2] ** 2).sum(1).mean() - (x**2 + y**2).mean())
            / (x**2 + y**2).mean(),
        )
    return worst <= 2e-3, f"worst relative moment gap {worst:.2e} (tol 2e-3)"


def _check_blur():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(20):
        k = int(rng.integers(3, 30))
        t = np.sort(rng.uniform(0, 1, k + 1))
        while np.any(np.diff(t) <= 1e-5):
            t = np.sort(rng.uniform(0, 1, k + 1))
        y = rng.uniform(-1, 2, k)
        r = float(rng.uniform(1e-3, 0.2))
        out = blur_stepfun(StepFunction(t, y), r)
        lo, hi = out.knots[:, None] - r, out.knots[:, None] + r
        overlap = np.clip(np.minimum(hi, t[1:]) - np.maximum(lo, t[:-1]), 0, None)
        want = (overlap * y).sum(axis=1) / (2 * r)
        worst = max(worst, np.abs(out.values - want).max())
    return worst <= 1e-4, f"max |blur - window average| {worst:.2e} (tol 1e-4)"


def _check_resample():
    rng = np.random.default_rng(2)
    h = Histogram(np.sort(rng.uniform(0, 1, 13)), rng.dirichlet(np.ones(12)) * 0.9)
    ident = resample_histogram(h, 0.0, h.endpoints)
    if not np.array_equal(ident, h.weights):
        return False, "identity resampling not exact"
    r = 0.05
    targets = np.linspace(h.endpoints[0] - r, h.endpoints[-1] + r, 21)
    out = resample_histogram(h, r, targets)
    mass_err = abs(out.sum() - h.weights.sum())
    # Trapezoid on the union of blurred-PDF knots is exact per target bin.
    pdf = h.weights / np.diff(h.endpoints)
    knots = np.unique(np.concatenate([h.endpoints - r, h.endpoints + r, targets]))
    worst = 0.0
    for i, (a, b) in enumerate(zip(targets[:-1], targets[1:])):
        xs = knots[(knots >= a) & (knots <= b)]
        lo, hi = xs[:, None] - r, xs[:, None] + r
        overlap = np.clip(np.minimum(hi, h.endpoints[1:]) - np.maximum(lo, h.endpoints[:-1]), 0, None)
        ys = (overlap * pdf).sum(axis=1) / (2 * r)
        worst = max(worst, abs(np.sum(0.5 * (ys[:-1] + ys[1:]) * np.diff(xs)) - out[i]))
    ok = mass_err <= 1e-9 and worst <= 1e-6
    return ok, f"mass error {mass_err:.2e} (tol 1e-9), per-bin error {worst:.2e} (tol 1e-6)"


def _check_contraction():
    rng = np.random.default_rng(3)
    dirs = rng.normal(size=(500, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.uniform(0.05, 4.0, 500)
    radii = np.where(np.abs(radii - 1) < 1e-3, 1.002, radii)
    pts = dirs * radii[:, None]
    step = 1e-5
    jac = np.zeros((500, 3, 3))
    for j in range(3):
        dx = np.zeros(3)
        dx[j] = step
        jac[:, :, j] = (contract(pts + dx) - contract(pts - dx)) / (2 * step)
    det_gap = np.abs(np.cbrt(np.abs(np.linalg.det(jac))) - contract_det_root(pts)).max()
    sigma = 0.05
    sig_gap = 0.0
    for i in range(50):
        cov = jac[i] @ (sigma**2 * np.eye(3)) @ jac[i].T
        sig_gap = max(sig_gap, abs(np.linalg.det(cov) ** (1 / 6) - contract_sample(pts[i], sigma).sigma_c))
    ok = det_gap <= 1e-6 and sig_gap <= 1e-8
    return ok, f"det-root gap {det_gap:.2e} (tol 1e-6), sigma gap {sig_gap:.2e} (tol 1e-8)"


def _check_power_transform():
    x = np.linspace(0, 100, 301)
    worst_rt = 0.0
    for lam in (-2.0, -1.5, -1.0, -0.25, 0.0, 0.5, 1.0, 2.0):
        back = power_transform_inverse(power_transform(x, lam), lam)
        worst_rt = max(worst_rt, np.abs(back - x).max())
    cont = max(
        np.abs(power_transform(x, lam0 + 1e-6) - power_transform(x, lam0)).max()
        for lam0 in (0.0, 1.0)
    )
    xs = np.linspace(0.1, 3, 30)
    lim = max(
        np.abs(power_transform(xs, 1e3) / np.expm1(xs) - 1).max(),
        np.abs(power_transform(xs, -1e3) / (-np.expm1(-xs)) - 1).max(),
    )
    ok = worst_rt <= 1e-9 and cont <= 1e-4 and lim <= 1e-3
    return ok, (f"roundtrip {worst_rt:.2e} (tol 1e-9), continuity {cont:.2e} (tol 1e-4), "
                f"limits {lim:.2e} (tol 1e-3)")


def _check_fast_erf():
    xs = np.linspace(-4, 4, 100_001)
    err = np.abs(fast_erf(xs) - erf(xs)).max()
    return err <= 0.01, f"max |fast_erf - erf| {err:.4f} (tol 0.01)"


CHECKS = [
    ("multisample moments vs Monte Carlo", _check_multisample_moments),
    ("interval blur vs window-average oracle", _check_blur),
    ("histogram resampling vs quadrature", _check_resample),
    ("contraction vs numerical Jacobian", _check_contraction),
    ("power transform round-trips/limits", _check_power_transform),
    ("fast erf approximation bound", _check_fast_erf),
]


def run_selfcheck():
    """Run every check; returns (all_ok, [(name, ok, detail), ...])."""
    results = []
    for name, fn in CHECKS:
        ok, detail = fn()
        results.append((name, ok, detail))
    return all(ok for _, ok, _ in results), results
