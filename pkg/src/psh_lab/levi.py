"""Eigenstructure of the Levi and gradient forms of sqrt(rho1 rho2), the
product identity linking them, the degeneracy variety of rho1*rho2, and the
negativity scan for the local model chi(x_1)|y|^2.

All checks are batched: ``points`` is an array of shape ``(N, 2n)``.
Residuals are relative, ``|M v - lam v| / max(1, |M| |v|)`` with spectral
norms and unit ``v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model
from .jets import (
    SmoothDomainError,
    apply_J,
    eigenvalues,
    grad_form_from_gradient,
    levi_from_hessian,
    levi_matrix,
    spectral_scale,
)
from .model import DEFAULT_TUBE


def _norm2(M):
    return np.linalg.norm(M, 2, axis=(-2, -1))


def _split(points, n):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[-1] != 2 * n:
        raise ValueError(f"expected points of length 2n = {2 * n}")
    return points, points[:, :n], points[:, n:]


def _rhos(x, y, k):
    a = np.sum(x**2, axis=-1)
    b = np.sum(x[:, :k] ** 2, axis=-1) + np.sum(y[:, k:] ** 2, axis=-1)
    return a, b


def _check_tube(a, b, tube):
    bad = (a < tube**2) | (b < tube**2)
    if np.any(bad):
        raise SmoothDomainError(
            f"{int(np.count_nonzero(bad))} point(s) within the {tube:g}-tube around L1 u L2"
        )


def random_points(n, k, count, rng, tube=DEFAULT_TUBE, scale=1.0):
    """Gaussian points of C^n kept outside the tube around L1 u L2."""
    out = np.empty((0, 2 * n))
    while len(out) < count:
        p = scale * rng.standard_normal((2 * count, 2 * n))
        a, b = _rhos(p[:, :n], p[:, n:], k)
        out = np.vstack([out, p[(a >= tube**2) & (b >= tube**2)]])
    return out[:count]


# ---------------------------------------------------------------------------
# Eigenvectors


def _mask_le(n, k):
    return np.arange(n) < k


def eigvectors_M0(points, n, k, tube=DEFAULT_TUBE):
    """``v0`` and ``w0 = -J v0`` at each point."""
    points, x, y = _split(points, n)
    a, b = _rhos(x, y, k)
    _check_tube(a, b, tube)
    le = _mask_le(n, k)
    vx = np.where(le, 0.0, a[:, None] * y)
    vy = (b[:, None] - np.where(le, a[:, None], 0.0)) * x
    v = np.concatenate([vx, vy], axis=-1)
    return v, -apply_J(v)


def eigvectors_M1(points, n, k, tube=DEFAULT_TUBE):
    """``v1`` and ``w1 = J v1`` at each point."""
    points, x, y = _split(points, n)
    a, b = _rhos(x, y, k)
    _check_tube(a, b, tube)
    le = _mask_le(n, k)
    vx = np.where(le, 0.0, a[:, None] * y)
    vy = -(b[:, None] + np.where(le, a[:, None], 0.0)) * x
    v = np.concatenate([vx, vy], axis=-1)
    return v, apply_J(v)


# ---------------------------------------------------------------------------
# Eigen claims


@dataclass
class EigenCheck:
    """Batched result of an invariant-subspace claim.

    ``degenerate`` marks points where the predicted eigenvector vanishes;
    there the two predicted eigenvalues coincide and the claim is checked on
    the whole space.
    """

    points: np.ndarray
    lam_span: np.ndarray
    lam_complement: np.ndarray
    residual_v: np.ndarray
    residual_w: np.ndarray
    residual_complement: np.ndarray
    degenerate: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        r = np.concatenate([self.residual_v, self.residual_w, self.residual_complement])
        return float(np.max(r)) if r.size else 0.0

    def worst_point(self):
        r = np.maximum(np.maximum(self.residual_v, self.residual_w), self.residual_complement)
        return self.points[int(np.argmax(r))]


def _subspace_check(M, v, w, lam_span, lam_comp, ref, degen_rel=1e-8):
    # ref: natural size of v (cubic in |p|), used to call v zero
    m = M.shape[-1]
    scale = np.maximum(1.0, _norm2(M))
    nv = np.linalg.norm(v, axis=-1)
    degenerate = nv <= degen_rel * ref
    safe = np.where(degenerate, 1.0, nv)
    vh = v / safe[:, None]
    wh = w / safe[:, None]
    eye = np.eye(m)
    rv = np.linalg.norm(np.einsum("...ij,...j->...i", M, vh) - lam_span[:, None] * vh, axis=-1)
    rw = np.linalg.norm(np.einsum("...ij,...j->...i", M, wh) - lam_span[:, None] * wh, axis=-1)
    rv = np.where(degenerate, 0.0, rv)
    rw = np.where(degenerate, 0.0, rw)
    P = eye - np.where(degenerate[:, None, None], 0.0, vh[:, :, None] * vh[:, None, :] + wh[:, :, None] * wh[:, None, :])
    R = (M - lam_comp[:, None, None] * eye) @ P
    rc = _norm2(R)
    return rv / scale, rw / scale, rc / scale, degenerate


def _vref(points, a, b):
    return (a + b) * np.linalg.norm(points, axis=-1)


def _sqrt_jet(points, n, k, tube):
    return model.sqrt_product_field(n, k, tube).jet(points)


def verify_lemma_M0(points, n, k, tube=DEFAULT_TUBE) -> EigenCheck:
    """Levi form of sqrt(rho1 rho2): ``2 sum_{i<=k} x_i^2 / sqrt(ab)`` on
    span{v0, w0} and ``(a + b) / sqrt(ab)`` on its orthogonal complement."""
    points, x, y = _split(points, n)
    v, w = eigvectors_M0(points, n, k, tube)
    a, b = _rhos(x, y, k)
    g = np.sqrt(a * b)
    M = levi_from_hessian(_sqrt_jet(points, n, k, tube).hess)
    lam_a = 2 * np.sum(x[:, :k] ** 2, axis=-1) / g
    lam_b = (a + b) / g
    rv, rw, rc, deg = _subspace_check(M, v, w, lam_a, lam_b, _vref(points, a, b))
    return EigenCheck(points, lam_a, lam_b, rv, rw, rc, deg)


def verify_lemma_M1(points, n, k, tube=DEFAULT_TUBE) -> EigenCheck:
    """Gradient form of sqrt(rho1 rho2): ``2 sum_{i<=k} x_i^2 + a + b`` on
    span{v1, w1} and zero on the complement.  ``extra['rank_residual']`` is
    the third largest eigenvalue relative to the norm."""
    points, x, y = _split(points, n)
    v, w = eigvectors_M1(points, n, k, tube)
    a, b = _rhos(x, y, k)
    M = grad_form_from_gradient(_sqrt_jet(points, n, k, tube).grad)
    lam = 2 * np.sum(x[:, :k] ** 2, axis=-1) + a + b
    rv, rw, rc, deg = _subspace_check(M, v, w, lam, np.zeros_like(lam), _vref(points, a, b))
    ev = eigenvalues(M)
    third = ev[:, -3] if M.shape[-1] >= 3 else np.zeros(len(ev))
    rank_res = np.abs(third) / np.maximum(1.0, _norm2(M))
    return EigenCheck(points, lam, np.zeros_like(lam), rv, rw, rc, deg, {"rank_residual": rank_res})


def verify_ddcf2(points, n, k, tube=DEFAULT_TUBE) -> np.ndarray:
    """Relative residual of ``Levi(ab) = 2 sqrt(ab) Levi(sqrt(ab)) + 2 M1``."""
    points, x, y = _split(points, n)
    L = levi_matrix(model.product_field(n, k), points)
    jet = _sqrt_jet(points, n, k, tube)
    M0 = levi_from_hessian(jet.hess)
    M1 = grad_form_from_gradient(jet.grad)
    R = L - 2 * jet.value[:, None, None] * M0 - 2 * M1
    return _norm2(R) / np.maximum(1.0, _norm2(L))


# ---------------------------------------------------------------------------
# The variety V


def variety_residuals(points, n, k):
    """``(max_{i<=k} |x_i|, |sum_{j>k} x_j y_j|, |a - b|)`` per point."""
    points, x, y = _split(points, n)
    a, b = _rhos(x, y, k)
    r0 = np.max(np.abs(x[:, :k]), axis=-1, initial=0.0)
    r1 = np.abs(np.sum(x[:, k:] * y[:, k:], axis=-1))
    r2 = np.abs(a - b)
    return np.stack([r0, r1, r2], axis=-1)


@dataclass
class VarietySamples:
    points: np.ndarray
    residuals: np.ndarray
    on_variety: np.ndarray
    source: list

    def __len__(self):
        return len(self.points)


def _variety_batch(points, n, k, source, tol=1e-10):
    res = variety_residuals(points, n, k)
    return VarietySamples(points, res, np.all(res <= tol, axis=-1), source)


def sample_variety_V(n, k, count, rng, planes: bool = True) -> VarietySamples:
    """Points of V by construction.

    For ``n - k >= 2`` the free block ``x_>`` is random, ``y_>`` is projected
    orthogonal to it and rescaled to equal length.  For ``n - k = 2`` and
    ``planes`` true, half the samples come from the two explicit planes of
    the union decomposition.  For ``n - k <= 1`` V is ``L1 n L2``.
    """
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    m = n - k
    pts = np.zeros((count, 2 * n))
    pts[:, n : n + k] = rng.standard_normal((count, k))  # y_{<=k} free
    source = ["L1nL2"] * count
    if m >= 2:
        xs = rng.standard_normal((count, m))
        ys = rng.standard_normal((count, m))
        ys -= (np.sum(xs * ys, axis=-1) / np.sum(xs * xs, axis=-1))[:, None] * xs
        ys *= (np.linalg.norm(xs, axis=-1) / np.linalg.norm(ys, axis=-1))[:, None]
        pts[:, k:n] = xs
        pts[:, n + k :] = ys
        source = ["generic"] * count
        if m == 2 and planes:
            half = count // 2
            u = rng.standard_normal((half, 2))
            sign = np.where(np.arange(half) % 2 == 0, 1.0, -1.0)
            # x_{n-1}, y_{n-1} free; x_n = s y_{n-1}, y_n = -s x_{n-1}
            pts[:half, k] = u[:, 0]
            pts[:half, n + k] = u[:, 1]
            pts[:half, k + 1] = sign * u[:, 1]
            pts[:half, n + k + 1] = -sign * u[:, 0]
            source[:half] = ["plane+" if s > 0 else "plane-" for s in sign]
    return _variety_batch(pts, n, k, source)


def sample_off_V(n, k, count, margin, rng, scale=1.0) -> VarietySamples:
    """Rejection samples with a residual of at least ``margin`` and distance
    at least ``margin`` from L1 and L2."""
    kept = []
    total = 0
    tries = 0
    while total < count:
        tries += 1
        if tries > 1000:
            raise RuntimeError("off-V rejection sampling did not converge")
        p = scale * rng.uniform(-1, 1, (4 * count, 2 * n))
        res = variety_residuals(p, n, k)
        x, y = p[:, :n], p[:, n:]
        a, b = _rhos(x, y, k)
        ok = (np.max(res, axis=-1) >= margin) & (a >= margin**2) & (b >= margin**2)
        kept.append(p[ok])
        total += int(ok.sum())
    pts = np.vstack(kept)[:count]
    return _variety_batch(pts, n, k, ["off"] * count)


@dataclass
class StrictPshReport:
    min_eig_sqrt: float
    min_eig_prod_grid: float
    max_small_eig_on_V: float
    min_eig_off_V: float
    witness_off_V: np.ndarray
    passed: bool


def _scaled_min(M):
    ev = eigenvalues(M)
    return ev[:, 0] / spectral_scale(M)


def verify_strict_psh_prod(n, k, grid, on_V: VarietySamples, off_V: VarietySamples, tube=DEFAULT_TUBE):
    """Weak psh of sqrt(ab) and ab on ``grid``; a near-zero eigenvalue of
    Levi(ab) on V; positive minimum eigenvalue off V (observed, not bounded)."""
    grid = np.atleast_2d(np.asarray(grid, float))
    prod = model.product_field(n, k)
    sq = model.sqrt_product_field(n, k, tube)
    g_ok = sq.in_domain(grid)
    weak_sqrt = float(np.min(_scaled_min(levi_matrix(sq, grid[g_ok])))) if g_ok.any() else np.inf
    weak_prod = float(np.min(_scaled_min(levi_matrix(prod, grid))))
    Lon = levi_matrix(prod, on_V.points)
    small = np.min(np.abs(eigenvalues(Lon)), axis=-1) / spectral_scale(Lon)
    Loff = levi_matrix(prod, off_V.points)
    off_min = eigenvalues(Loff)[:, 0]
    i = int(np.argmin(off_min))
    passed = (
        weak_sqrt >= -1e-9 and weak_prod >= -1e-9 and float(np.max(small)) <= 1e-8 and off_min[i] > 0
    )
    return StrictPshReport(weak_sqrt, weak_prod, float(np.max(small)), float(off_min[i]), off_V.points[i], bool(passed))


# ---------------------------------------------------------------------------
# chi(x_1)|y|^2


@dataclass
class CounterexampleResult:
    cutoff: str
    witness: np.ndarray
    min_eig: float
    deficiency_min: float
    deficiency_t: float
    slice_min_eig: float
    negative_found: bool
    deficiency_negative: bool


def counterexample_scan(cutoff=None, n_x=64, n_r=9, n_theta=16, x_range=(0.01, 0.99), y_range=(0.5, 1.5)):
    """Scan the Levi form of ``chi(x_1)|y|^2`` (n = 2) over
    ``x_1 in x_range`` and ``|y| in y_range`` with all directions of y, and
    the deficiency functional on the ``y = (0, 1)`` slice."""
    cutoff = cutoff or model.ExpCutoff()
    x1 = np.linspace(*x_range, n_x)
    if np.all(cutoff.derivatives(x1)[0] == 0):
        raise ValueError("cutoff vanishes identically on the scan grid")
    rad = np.linspace(*y_range, n_r)
    th = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    X, R, T = np.meshgrid(x1, rad, th, indexing="ij")
    pts = np.zeros(X.shape + (4,))
    pts[..., 0] = X
    pts[..., 2] = R * np.cos(T)
    pts[..., 3] = R * np.sin(T)
    pts = pts.reshape(-1, 4)
    f = model.abouzaid_field(2, cutoff)
    ev = eigenvalues(levi_matrix(f, pts))[:, 0]
    i = int(np.argmin(ev))

    sl = np.zeros((n_x, 4))
    sl[:, 0] = x1
    sl[:, 3] = 1.0
    slice_ev = eigenvalues(levi_matrix(f, sl))[:, 0]
    d = model.deficiency(cutoff, x1)
    j = int(np.argmin(d))
    return CounterexampleResult(
        cutoff=cutoff.name,
        witness=pts[i],
        min_eig=float(ev[i]),
        deficiency_min=float(d[j]),
        deficiency_t=float(x1[j]),
        slice_min_eig=float(np.min(slice_ev)),
        negative_found=bool(ev[i] <= -1e-6),
        deficiency_negative=bool(d[j] < 0),
    )
