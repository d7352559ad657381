"""Numerical realization of the interpolant construction: feasibility searches
for the interpolation fraction D and the Duval constant C0, and estimates of
the metric constants of the modified function h.

Grids
-----
All fields here depend on a point only through ``a = |x_{<=k}|``,
``b = |x_{>k}|``, ``c = |y_{>k}|`` and the angle ``theta`` between ``x_{>k}``
and ``y_{>k}``; the remaining directions are unitary symmetries (block
rotations, translation of ``y_{<=k}``) which leave Levi spectra unchanged.
:func:`model_grid` therefore samples the parameters ``(a, b, c, theta)`` and
embeds them as ``x_1 = a, x_{k+1} = b, y_{k+1} = c cos(theta),
y_{k+2} = c sin(theta)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import model
from .jets import eigenvalues, levi_from_hessian
from .model import DEFAULT_TUBE, ModelParams

CHUNK = 40000
PSD_TOL = 1e-9


# ---------------------------------------------------------------------------
# Grids


def _radii(rmax, N, floor_frac=1e-4):
    lin = np.linspace(0.0, rmax, N, endpoint=False)
    geo = np.geomspace(floor_frac * rmax, rmax, N, endpoint=False)
    return np.unique(np.concatenate([lin, geo]))


def _large(scale, box, N):
    # seam refinement around the transition of chi(rho / scale^2)
    lin = np.linspace(0.0, box, N)
    seam = np.linspace(0.45 * scale, 1.05 * scale, N)
    # chi(t) bends on 1/2 < t < 3/4
    band = np.linspace(np.sqrt(0.5) * scale, np.sqrt(0.75) * scale, 4 * N)
    return np.unique(np.concatenate([lin, seam, band]))


def _embed(n, k, a, b, c, th):
    a, b, c, th = np.broadcast_arrays(a, b, c, th)
    pts = np.zeros(a.shape + (2 * n,))
    if k > 0:
        pts[..., 0] = a
    if k < n:
        pts[..., k] = b
        pts[..., n + k] = c * np.cos(th)
        if n - k >= 2:
            pts[..., n + k + 1] = c * np.sin(th)
    return pts.reshape(-1, 2 * n)


def model_grid(n, k, D, scale=1.0, box=None, N=32, n_theta=8, tube=0.0):
    """Points of ``{rho1 < (D s)^2} u {rho2 < (D s)^2}`` (``s = scale``) in a
    box of radius ``box`` (default ``2 s``), dense near both planes and near
    the cutoff seams.  Points within ``tube * s`` of L1 u L2 are dropped."""
    box = 2.0 * scale if box is None else box
    rmax = D * scale
    rad = _radii(rmax, N)
    phi = np.linspace(0.0, 0.5 * np.pi, max(N // 2, 2) + 1)
    big = _large(scale, box, N)
    if n - k >= 2:
        th = np.linspace(0.0, np.pi, n_theta + 1)
    else:
        th = np.array([0.0, np.pi])

    pieces = []
    if k == n:
        pieces.append(_embed(n, k, rad, 0.0, 0.0, 0.0))
    else:
        zero = np.zeros(1)
        if k > 0:
            # (a, c) small, b large
            R, P, B, T = np.meshgrid(rad, phi, big, th, indexing="ij")
            pieces.append(_embed(n, k, R * np.cos(P), B, R * np.sin(P), T))
            # (a, b) small, c large
            R, P, C, T = np.meshgrid(rad, phi, big, th, indexing="ij")
            pieces.append(_embed(n, k, R * np.cos(P), R * np.sin(P), C, T))
        else:
            C, B, T = np.meshgrid(rad, big, th, indexing="ij")
            pieces.append(_embed(n, k, zero, B, C, T))
            Bs, C, T = np.meshgrid(rad, big, th, indexing="ij")
            pieces.append(_embed(n, k, zero, Bs, C, T))
    pts = np.unique(np.vstack(pieces), axis=0)
    if tube > 0:
        a, b = model._rhos_of_points(pts, k)
        t2 = (tube * scale) ** 2
        pts = pts[(a >= t2) & (b >= t2)]
    return pts


def _chunks(pts, size=CHUNK):
    for i in range(0, len(pts), size):
        yield pts[i : i + size]


def levi_spectrum(f, pts):
    """Ascending Levi eigenvalues of ``f`` over ``pts``, chunked."""
    out = [eigenvalues(levi_from_hessian(f.jet(c).hess)) for c in _chunks(pts)]
    return np.vstack(out) if out else np.zeros((0, 2 * f.n))


def _psd_margin(ev, tol=PSD_TOL):
    """Minimum eigenvalue over scale, per point; feasibility is ``>= -tol``."""
    scale = np.maximum(1.0, np.max(np.abs(ev), axis=-1))
    return ev[:, 0] / scale


# ---------------------------------------------------------------------------
# D


@dataclass
class DSearch:
    D_star: float
    schedule: list
    feasible: list
    min_margin: float
    monotone: bool
    n: int
    k: int
    r: float


def _D_feasible(n, k, D, r, N, n_theta, tol):
    f = model.beta_r_field(n, k, r)
    pts = model_grid(n, k, D, r, N=N, n_theta=n_theta)
    m = float(np.min(_psd_margin(levi_spectrum(f, pts))))
    return m >= -tol, m


def search_D(n, k, r=1.0, N=24, n_theta=8, tol=PSD_TOL, refine=6, floor=1e-3) -> DSearch:
    """Largest D with Levi(beta_r) PSD on the grid of V_{Dr}.

    Dyadic descent from 1/2, then ``refine`` bisection steps between the
    first feasible value and its double.
    """
    schedule, feas = [], []
    D = 0.5
    lo = None
    while D >= floor:
        ok, m = _D_feasible(n, k, D, r, N, n_theta, tol)
        schedule.append(D)
        feas.append(ok)
        if ok:
            lo = D
            lo_margin = m
            break
        D /= 2
    if lo is None:
        raise RuntimeError(f"no feasible D above {floor} for n={n}, k={k}")
    # feasibility must persist below the first feasible dyadic value
    below_ok = _D_feasible(n, k, lo / 2, r, N, n_theta, tol)[0] if lo / 2 >= floor else True
    hi = min(2 * lo, 0.5) if lo < 0.5 else None
    if hi is not None and hi > lo:
        for _ in range(refine):
            mid = math.sqrt(lo * hi)
            ok, m = _D_feasible(n, k, mid, r, N, n_theta, tol)
            schedule.append(mid)
            feas.append(ok)
            if ok:
                lo, lo_margin = mid, m
            else:
                hi = mid
    return DSearch(lo, schedule, feas, lo_margin, bool(below_ok), n, k, r)


def verify_beta_scaling(points, r, n, k) -> np.ndarray:
    """``|Levi(beta_r)(p) - Levi(beta_1)(p / r)| / max(1, |Levi(beta_1)(p / r)|)``."""
    points = np.atleast_2d(np.asarray(points, float))
    Lr = levi_from_hessian(model.beta_r_field(n, k, r).jet(points).hess)
    L1 = levi_from_hessian(model.beta_r_field(n, k, 1.0).jet(points / r).hess)
    nrm = np.linalg.norm(L1, 2, axis=(-2, -1))
    return np.linalg.norm(Lr - L1, 2, axis=(-2, -1)) / np.maximum(1.0, nrm)


# ---------------------------------------------------------------------------
# C0


@dataclass
class C0Search:
    C0_star: float
    feasible_cap: bool
    monotone: bool
    active_points: int
    witness: Optional[np.ndarray]
    n: int
    k: int
    r: float
    D: float


def _levi_pair(n, k, r, pts, tube):
    L0 = levi_from_hessian(model.sqrt_beta_r_field(n, k, r, tube).jet(pts).hess)
    L1 = levi_from_hessian(model.beta_r_field(n, k, r).jet(pts).hess)
    return L0, L1


def search_C0(r, D, n, k, N=24, n_theta=8, cap=1e3, tol=PSD_TOL, tube=DEFAULT_TUBE, rtol=1e-6) -> C0Search:
    """Smallest C0 in ``[0, cap]`` with ``sqrt(beta_r) + C0 beta_r / r`` weakly
    psh on the grid of V_{Dr} off the tube.

    The Levi form is affine in C0, so both Levi terms are computed once.
    Points where the C0 = 0 form is already PSD and Levi(beta_r) is PSD stay
    feasible for every C0 >= 0 and are dropped before bisecting.
    """
    pts = model_grid(n, k, D, r, N=N, n_theta=n_theta, tube=tube * 1.01)
    keep_L0, keep_L1, keep_p = [], [], []
    for c in _chunks(pts):
        L0, L1 = _levi_pair(n, k, r, c, tube)
        m0 = _psd_margin(eigenvalues(L0))
        m1 = _psd_margin(eigenvalues(L1))
        active = (m0 < -tol) | (m1 < -tol)
        keep_L0.append(L0[active])
        keep_L1.append(L1[active])
        keep_p.append(c[active])
    L0 = np.concatenate(keep_L0)
    L1 = np.concatenate(keep_L1)
    P = np.concatenate(keep_p)

    def margin(C):
        if len(L0) == 0:
            return np.zeros(0)
        return _psd_margin(eigenvalues(L0 + (C / r) * L1))

    def feasible(C):
        m = margin(C)
        return bool(np.all(m >= -tol))

    if feasible(0.0):
        return C0Search(0.0, True, True, len(P), None, n, k, r, D)
    if not feasible(cap):
        m = margin(cap)
        return C0Search(math.inf, False, False, len(P), P[int(np.argmin(m))], n, k, r, D)
    lo, hi = 0.0, cap
    while hi - lo > rtol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    witness = P[int(np.argmin(margin(lo)))]
    monotone = all(feasible(c) for c in (hi, 1.5 * hi, 3 * hi, cap))
    return C0Search(hi, True, monotone, len(P), witness, n, k, r, D)


def verify_C0_r_independence(r_list, D, n, k, **kw) -> dict:
    """``{r: C0_star(r)}`` plus the max/min ratio."""
    table = {float(r): search_C0(r, D, n, k, **kw).C0_star for r in r_list}
    vals = np.array(list(table.values()))
    pos = vals[vals > 0]
    ratio = float(pos.max() / pos.min()) if len(pos) == len(vals) else (1.0 if np.all(vals == 0) else math.inf)
    return {"C0_star": table, "ratio": ratio}


# ---------------------------------------------------------------------------
# Duval conditions


INFLATION = 1.1


@dataclass
class ConstantEstimates:
    D: float
    C0: float
    C1: float
    C2: float
    A1: float
    min_eig_sqrt_h: float
    min_eig_h_outside_B: float
    max_h_on_L: float
    conditions: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    vacuous: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.conditions.values())

    def to_dict(self):
        d = asdict(self)
        d["witnesses"] = {k: np.asarray(v).tolist() for k, v in self.witnesses.items()}
        d["passed"] = self.passed
        return d


def _plane_points(n, k, count, rng, params: ModelParams):
    """``count`` points on each of L1 and L2 inside U's box."""
    s = 2 * params.r
    p1 = np.zeros((count, 2 * n))
    p1[:, n:] = rng.uniform(-s, s, (count, n))
    p2 = np.zeros((count, 2 * n))
    p2[:, k:n] = rng.uniform(-s, s, (count, n - k))
    p2[:, n : n + k] = rng.uniform(-s, s, (count, k))
    return np.vstack([p1, p2])


def verify_duval_conditions(params: ModelParams, N=24, n_theta=8, tube=DEFAULT_TUBE, seed=0, tol=PSD_TOL) -> ConstantEstimates:
    """Check the five conditions for ``h = (sqrt(hpre) + C0 hpre / r)^2`` and
    estimate C1, C2, A1 as grid extrema inflated by 10%."""
    n, k, r = params.n, params.k, params.r
    rng = np.random.default_rng(seed)
    h = model.h_duval_field(params)
    sq = model.sqrt_h_field(params, tube)
    conds, wit, vacuous = {}, {}, []

    Lpts = _plane_points(n, k, 100, rng, params)
    hv = h.value(Lpts)
    max_h_L = float(np.max(np.abs(hv)))
    conds["1_vanishes_on_L"] = max_h_L <= 1e-12

    grid = model_grid(n, k, params.D, r, N=N, n_theta=n_theta)
    grid = grid[model.in_U(grid, params)]
    off_tube = grid[sq.in_domain(grid)]
    ev_sq = levi_spectrum(sq, off_tube)
    m_sq = _psd_margin(ev_sq)
    i = int(np.argmin(m_sq))
    min_sq = float(m_sq[i])
    wit["2a_sqrt_h"] = off_tube[i]
    conds["2a_sqrt_h_weakly_psh"] = min_sq >= -tol

    ev_h = levi_spectrum(h, grid)
    C1 = float(np.max(ev_h[:, -1])) / 2
    conds["3_domination"] = bool(np.isfinite(C1))

    outside = ~model.in_B(grid, r / 2, k)
    if not outside.any():
        # U lies inside B_r (k = n): conditions on U \ B_r hold vacuously
        vacuous += ["2b_h_strictly_psh_outside_B", "4_equivalence", "5_gradient"]
        min_h_out, C2, A1 = math.inf, 1.0, 0.0
        conds["2b_h_strictly_psh_outside_B"] = True
        conds["4_equivalence"] = True
        conds["5_gradient"] = True
    else:
        ev_o = ev_h[outside]
        go = grid[outside]
        j = int(np.argmin(ev_o[:, 0]))
        min_h_out = float(ev_o[j, 0])
        wit["2b_h_outside_B"] = go[j]
        conds["2b_h_strictly_psh_outside_B"] = min_h_out > 0
        with np.errstate(divide="ignore"):
            c2 = np.maximum(ev_o[:, -1] / 2, 2 / ev_o[:, 0])
        c2 = np.where(ev_o[:, 0] > 0, c2, math.inf)
        j = int(np.argmax(c2))
        C2 = float(c2[j])
        wit["4_equivalence"] = go[j]
        conds["4_equivalence"] = bool(np.isfinite(C2)) and C2 >= 1
        # gradient bound away from the zero set of h
        go_pos = go[h.value(go) > 0]
        ratios = []
        for c in _chunks(go_pos):
            jt = h.jet(c)
            ratios.append(np.linalg.norm(jt.grad, axis=-1) / np.sqrt(jt.value))
        ratios = np.concatenate(ratios)
        j = int(np.argmax(ratios))
        A1 = float(ratios[j])
        wit["5_gradient"] = go_pos[j]
        conds["5_gradient"] = bool(np.isfinite(A1))

    return ConstantEstimates(
        D=params.D,
        C0=params.C0,
        C1=INFLATION * C1,
        C2=INFLATION * C2,
        A1=INFLATION * A1,
        min_eig_sqrt_h=min_sq,
        min_eig_h_outside_B=min_h_out,
        max_h_on_L=max_h_L,
        conditions=conds,
        witnesses=wit,
        vacuous=vacuous,
    )


def verify_metric_domination_sqrt_model(r, D, C0, n, k, N=24, n_theta=8):
    """``(C1', C2')`` for ``(sqrt(beta_r) + C0 beta_r / r)^2``: C1' is half the
    largest Levi eigenvalue on V_r, C2' the equivalence constant on
    V_{Dr} \\ B_r (infinite if the form degenerates there)."""
    f = model.squared_sqrt_model_field(n, k, r, C0)
    pts = model_grid(n, k, 1.0, r, N=N, n_theta=n_theta)
    ev = levi_spectrum(f, pts)
    C1p = float(np.max(ev[:, -1])) / 2
    sub = model_grid(n, k, D, r, N=N, n_theta=n_theta)
    sub = sub[~model.in_B(sub, r / 2, k)]
    if len(sub) == 0:
        return C1p, 1.0
    ev2 = levi_spectrum(f, sub)
    if np.min(ev2[:, 0]) <= 0:
        return C1p, math.inf
    C2p = float(np.max(np.maximum(ev2[:, -1] / 2, 2 / ev2[:, 0])))
    return C1p, C2p
