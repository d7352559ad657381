"""Model functions on the flat chart C^n around L1 = {x = 0} and
L2 = {x_i = 0 (i <= k), y_j = 0 (j > k)}.

Every function is written once as a generic formula over coordinate lists and
wrapped as a :class:`~psh_lab.jets.ScalarField`.  Indices in code are 0-based,
so "i <= k" becomes ``i < k``.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .jets import Jet2, ScalarField, as_real, fd_stencil_points, power, sqrt, value_of, where

DEFAULT_TUBE = 1e-6


@dataclass(frozen=True)
class ModelParams:
    """Local model ``(n, k)`` with tube radius ``r``, interpolation fraction
    ``D``, Duval constant ``C0`` and neighborhood radius ``s``."""

    n: int
    k: int = 0
    r: float = 0.5
    D: float = 0.5
    C0: float = 0.0
    s: Optional[float] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be an integer >= 1, got {self.n}")
        if int(self.k) != self.k or not 0 <= self.k <= self.n:
            raise ValueError(f"k must satisfy 0 <= k <= n, got k={self.k}, n={self.n}")
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if not self.D > 0:
            raise ValueError(f"D must be positive, got {self.D}")
        if self.D > 0.5:
            warnings.warn(f"D={self.D} > 1/2 clamped to 1/2", stacklevel=3)
            object.__setattr__(self, "D", 0.5)
        if not self.C0 >= 0:
            raise ValueError(f"C0 must be >= 0, got {self.C0}")
        if self.s is None:
            object.__setattr__(self, "s", 0.5 * self.D * self.r)
        elif not 0 < self.s < self.D * self.r:
            raise ValueError(f"s must lie in (0, D*r) = (0, {self.D * self.r}), got {self.s}")

    def with_(self, **changes) -> "ModelParams":
        if ("D" in changes or "r" in changes) and "s" not in changes:
            changes["s"] = None
        return replace(self, **changes)

    @property
    def Dr(self) -> float:
        return self.D * self.r


# ---------------------------------------------------------------------------
# Cutoff


def _blend(u):
    """Flat-at-endpoints blend psi(u) on (0, 1) and its first two derivatives."""
    q = 1.0 / u - 1.0 / (1.0 - u)
    psi = np.exp(-np.logaddexp(0.0, q))
    one_minus = np.exp(-np.logaddexp(0.0, -q))
    pq = psi * one_minus
    w = 1.0 / u**2 + 1.0 / (1.0 - u) ** 2
    dw = -2.0 / u**3 + 2.0 / (1.0 - u) ** 3
    d1 = pq * w
    d2 = d1 * (1.0 - 2.0 * psi) * w + pq * dw
    return psi, d1, d2


def chi_derivatives(t):
    """``chi(t), chi'(t), chi''(t)``: identity below 1/2, one above 3/4."""
    t = as_real(t)
    if np.any(t < 0):
        raise ValueError("chi is defined for t >= 0")
    lo = t <= 0.5
    hi = t >= 0.75
    mid = ~(lo | hi)
    u = np.where(mid, 4.0 * (t - 0.5), 0.5)
    psi, p1, p2 = _blend(u)
    v = (1.0 - psi) * t + psi
    d1 = (1.0 - psi) + 4.0 * p1 * (1.0 - t)
    d2 = -8.0 * p1 + 16.0 * p2 * (1.0 - t)
    c = np.where(lo, t, np.where(hi, 1.0, v))
    c1 = np.where(lo, 1.0, np.where(hi, 0.0, d1))
    c2 = np.where(mid, d2, 0.0)
    return c, c1, c2


def _chi_value(t):
    t = as_real(t)
    if np.any(t < 0):
        raise ValueError("chi is defined for t >= 0")
    mid = (t > 0.5) & (t < 0.75)
    out = np.minimum(t, 1.0)
    out = np.where(t >= 0.75, 1.0, out)
    if np.any(mid):
        u = 4.0 * (t[mid] - 0.5)
        psi = np.exp(-np.logaddexp(0.0, 1.0 / u - 1.0 / (1.0 - u)))
        out[mid] = (1.0 - psi) * t[mid] + psi
    return out


def chi(t):
    if isinstance(t, Jet2):
        return t.compose(*chi_derivatives(t.value))
    return _chi_value(t)


# ---------------------------------------------------------------------------
# Distance functions and the interpolants


def rho1(x, y, k: int = 0):
    return sum((xi * xi for xi in x), 0.0)


def rho2(x, y, k: int = 0):
    return sum((x[i] * x[i] for i in range(k)), 0.0) + sum(
        (y[i] * y[i] for i in range(k, len(y))), 0.0
    )


def beta1(x, y, k: int = 0):
    return chi(rho1(x, y, k)) * chi(rho2(x, y, k))


def beta_r(x, y, k: int = 0, r: float = 1.0):
    r2 = r * r
    return r2 * (chi(rho1(x, y, k) / r2) * chi(rho2(x, y, k) / r2))


class RegionLabel(enum.IntEnum):
    CORE = 0
    COLLAR_L1 = 1
    COLLAR_L2 = 2
    INTERMEDIATE = 3
    OUTSIDE = 4


def _rhos_of_points(points, k):
    points = np.asarray(points, dtype=float)
    n = points.shape[-1] // 2
    x = [points[..., i] for i in range(n)]
    y = [points[..., n + i] for i in range(n)]
    return np.asarray(rho1(x, y, k)), np.asarray(rho2(x, y, k))


def _labels_from_rhos(a, b, params: ModelParams):
    r = params.r
    dr2 = params.Dr**2
    near1 = a < dr2
    near2 = b < dr2
    core = np.maximum(a, b) < (r / 2) ** 2
    lab = np.full(np.shape(a), int(RegionLabel.INTERMEDIATE))
    lab = np.where(near2 & (a >= r * r), int(RegionLabel.COLLAR_L2), lab)
    lab = np.where(near1 & (b >= r * r), int(RegionLabel.COLLAR_L1), lab)
    lab = np.where(core, int(RegionLabel.CORE), lab)
    lab = np.where(~(near1 | near2), int(RegionLabel.OUTSIDE), lab)
    return lab


def region_classify(points, params: ModelParams):
    """Region label(s); a single point gives a :class:`RegionLabel`."""
    a, b = _rhos_of_points(points, params.k)
    lab = _labels_from_rhos(a, b, params)
    if np.ndim(lab) == 0:
        return RegionLabel(int(lab))
    return lab


def in_U(points, params: ModelParams) -> np.ndarray:
    a, b = _rhos_of_points(points, params.k)
    return (a < params.Dr**2) | (b < params.Dr**2)


def in_B(points, radius: float, k: int) -> np.ndarray:
    """``max(sqrt(rho1), sqrt(rho2)) < radius``."""
    a, b = _rhos_of_points(points, k)
    return np.maximum(a, b) < radius**2


def hpre(x, y, params: ModelParams):
    """beta_r near the intersection, rho_i on the collar of L_i outside B_r."""
    a = rho1(x, y, params.k)
    b = rho2(x, y, params.k)
    lab = _labels_from_rhos(value_of(a), value_of(b), params)
    near = beta_r(x, y, params.k, params.r)
    return where(
        lab == RegionLabel.COLLAR_L2, b, where(lab == RegionLabel.COLLAR_L1, a, near)
    )


def h_duval(x, y, params: ModelParams):
    """``(sqrt(hpre) + C0 r^-1 hpre)^2``, expanded so it stays differentiable
    on L1 and L2."""
    hp = hpre(x, y, params)
    c = params.C0 / params.r
    return hp + (2.0 * c) * power(hp, 1.5) + (c * c) * (hp * hp)


def sqrt_h(x, y, params: ModelParams):
    hp = hpre(x, y, params)
    return sqrt(hp) + (params.C0 / params.r) * hp


def squared_sqrt_model(x, y, k: int, r: float, C0: float):
    """``(sqrt(beta_r) + C0 r^-1 beta_r)^2`` on the whole chart."""
    b = beta_r(x, y, k, r)
    c = C0 / r
    return b + (2.0 * c) * power(b, 1.5) + (c * c) * (b * b)


# ---------------------------------------------------------------------------
# Cutoffs for the flawed local model chi(x_1) |y|^2


class ExpCutoff:
    """``exp(-1/t)`` for ``t > 0`` and 0 otherwise."""

    name = "exp"

    def derivatives(self, t):
        t = as_real(t)
        pos = t > 0
        ts = np.where(pos, t, 1.0)
        c = np.where(pos, np.exp(-1.0 / ts), 0.0)
        c1 = c / ts**2
        c2 = c * (1.0 - 2.0 * ts) / ts**4
        return c, np.where(pos, c1, 0.0), np.where(pos, c2, 0.0)


class BlendCutoff:
    """The interpolation cutoff chi, extended linearly to ``t < 0``."""

    name = "chi"

    def derivatives(self, t):
        t = as_real(t)
        c, c1, c2 = chi_derivatives(np.maximum(t, 0.0))
        neg = t < 0
        return np.where(neg, t, c), np.where(neg, 1.0, c1), np.where(neg, 0.0, c2)


CUTOFFS = {"exp": ExpCutoff, "chi": BlendCutoff}


def apply_cutoff(cutoff, t):
    if isinstance(t, Jet2):
        return t.compose(*cutoff.derivatives(t.value))
    return cutoff.derivatives(t)[0]


def abouzaid_rho(x, y, cutoff=None):
    cutoff = cutoff or ExpCutoff()
    return apply_cutoff(cutoff, x[0]) * sum((yi * yi for yi in y), 0.0)


def deficiency(cutoff, t):
    """``2 chi^2 + chi chi'' - 2 chi'^2``, the y = (0, 1) restriction of the
    Levi determinant of ``chi(x_1)|y|^2`` (up to a factor 2)."""
    c, c1, c2 = cutoff.derivatives(t)
    return 2 * c * c + c * c2 - 2 * c1 * c1


# ---------------------------------------------------------------------------
# Fields


def _tube_domain(k, tube, extra=None):
    def domain(points):
        a, b = _rhos_of_points(points, k)
        ok = (a >= tube * tube) & (b >= tube * tube)
        if extra is not None:
            ok &= extra(points)
        return ok

    return domain


def rho1_field(n, k=0):
    return ScalarField("rho1", n, lambda x, y: rho1(x, y, k))


def rho2_field(n, k=0):
    return ScalarField("rho2", n, lambda x, y: rho2(x, y, k))


def product_field(n, k=0):
    return ScalarField("rho1*rho2", n, lambda x, y: rho1(x, y, k) * rho2(x, y, k))


def sqrt_product_field(n, k=0, tube=DEFAULT_TUBE):
    return ScalarField(
        "sqrt(rho1*rho2)",
        n,
        lambda x, y: sqrt(rho1(x, y, k) * rho2(x, y, k)),
        _tube_domain(k, tube),
    )


def beta1_field(n, k=0):
    return ScalarField("beta1", n, lambda x, y: beta1(x, y, k))


def beta_r_field(n, k=0, r=1.0):
    return ScalarField(f"beta_r(r={r})", n, lambda x, y: beta_r(x, y, k, r))


def sqrt_beta_r_field(n, k=0, r=1.0, tube=DEFAULT_TUBE):
    return ScalarField(
        f"sqrt(beta_r)(r={r})", n, lambda x, y: sqrt(beta_r(x, y, k, r)), _tube_domain(k, tube * r)
    )


def hpre_field(params: ModelParams):
    return ScalarField(
        "hpre", params.n, lambda x, y: hpre(x, y, params), lambda p: in_U(p, params)
    )


def h_duval_field(params: ModelParams):
    return ScalarField(
        "h", params.n, lambda x, y: h_duval(x, y, params), lambda p: in_U(p, params)
    )


def sqrt_h_field(params: ModelParams, tube=DEFAULT_TUBE):
    return ScalarField(
        "sqrt(h)",
        params.n,
        lambda x, y: sqrt_h(x, y, params),
        _tube_domain(params.k, tube * params.r, lambda p: in_U(p, params)),
    )


def squared_sqrt_model_field(n, k, r, C0):
    return ScalarField(
        "(sqrt(beta_r)+C0 beta_r/r)^2", n, lambda x, y: squared_sqrt_model(x, y, k, r, C0)
    )


def abouzaid_field(n=2, cutoff=None):
    cutoff = cutoff or ExpCutoff()
    return ScalarField(f"{cutoff.name}(x1)*|y|^2", n, lambda x, y: abouzaid_rho(x, y, cutoff))


def model_fields(params: ModelParams, tube=DEFAULT_TUBE) -> dict:
    """Every field of the model at the given parameters, keyed by name."""
    n, k, r = params.n, params.k, params.r
    fields = [
        rho1_field(n, k),
        rho2_field(n, k),
        product_field(n, k),
        sqrt_product_field(n, k, tube),
        beta1_field(n, k),
        beta_r_field(n, k, r),
        sqrt_beta_r_field(n, k, r, tube),
        hpre_field(params),
        h_duval_field(params),
        sqrt_h_field(params, tube),
        squared_sqrt_model_field(n, k, r, params.C0),
        abouzaid_field(n, ExpCutoff()),
        abouzaid_field(n, BlendCutoff()),
    ]
    return {f.name: f for f in fields}


def smooth_sample(f: ScalarField, params: ModelParams, count: int, rng, step: float = 1e-4,
                  richardson: int = 2, margin: float = 0.05, spread: float = 0.6, max_rounds: int = 50):
    """``count`` points where ``f`` and a whole finite-difference stencil lie
    in the smooth domain, inside one region label and at distance at least
    ``margin * r`` from both planes.

    A third of the candidates is drawn near each plane so that the fields
    supported on U are exercised.
    """
    n, k, r = params.n, params.k, params.r
    near2 = np.zeros(2 * n, bool)
    near2[:k] = True
    near2[n + k:] = True
    out, got = [], 0
    for _ in range(max_rounds):
        m = 4 * count
        P = rng.uniform(-1, 1, (m, 2 * n)) * spread * r
        src = rng.integers(0, 3, m)
        shrink = rng.uniform(0, 0.3, (m, 1))
        P[:, :n] = np.where((src == 1)[:, None], P[:, :n] * shrink, P[:, :n])
        P = np.where((src == 2)[:, None] & near2, P * shrink, P)
        a, b = _rhos_of_points(P, k)
        ok = np.minimum(a, b) >= (margin * r) ** 2
        ok &= f.in_domain(P)
        P = P[ok]
        S = fd_stencil_points(P, step, richardson)
        ok = f.in_domain(S).all(-1)
        lab = region_classify(S.reshape(-1, 2 * n), params).reshape(S.shape[:-1])
        ok &= (lab == lab[:, :1]).all(-1)
        out.append(P[ok])
        got += int(ok.sum())
        if got >= count:
            return np.concatenate(out)[:count]
    raise RuntimeError(f"{f.name}: found only {got} of {count} admissible points")
