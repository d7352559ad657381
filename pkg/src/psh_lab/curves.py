"""Holomorphic curves with boundary on the model planes, their g-areas and
lengths inside and outside model regions, the h-area of sublevel sets, and
the empirical reverse isoperimetric constant K.

Curves are explicit maps ``u: S -> C^n`` of a planar domain ``S``; areas are
integrated over the domain, so multiple covers count with multiplicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import model
from .jets import levi_from_hessian
from .model import ModelParams
from .quadrature import default_q_grid, line_integral_1d, region_integral

BOUNDARY_TOL = 1e-10
CR_TOL = 1e-10


# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True)
class BoundaryArc:
    """A boundary arc ``t -> z(t)`` for ``t in [t0, t1]``."""

    name: str
    z: Callable
    dz: Callable
    t0: float
    t1: float


@dataclass(frozen=True)
class DomainSpec:
    """Planar domain in parameter form ``z = z(s, q)``.

    ``sector``: polar ``s = angle in [start, start + angle]``, ``q = radius``;
    ``rectangle``: ``s = Re z in [0, width]``, ``q = Im z in [0, height]``.
    ``truncation`` excises ``q < truncation`` (a disk about the vertex for
    sectors).
    """

    shape: str
    radius: float = 1.0
    angle: float = 0.5 * math.pi
    start: float = 0.0
    width: float = 1.0
    height: float = 1.0
    truncation: float = 0.0

    def __post_init__(self):
        if self.shape not in ("sector", "rectangle"):
            raise ValueError(f"unknown domain shape {self.shape!r}")
        if self.shape == "sector" and not (self.radius > 0 and 0 < self.angle <= 2 * math.pi):
            raise ValueError("sector needs radius > 0 and 0 < angle <= 2 pi")
        if self.shape == "rectangle" and not (self.width > 0 and self.height > 0):
            raise ValueError("rectangle needs positive width and height")
        if not 0 <= self.truncation < self.diameter / 10:
            raise ValueError("truncation radius must be below a tenth of the diameter")

    @property
    def diameter(self) -> float:
        if self.shape == "sector":
            return 2 * self.radius if self.angle >= math.pi else max(
                self.radius, 2 * self.radius * math.sin(self.angle / 2)
            )
        return math.hypot(self.width, self.height)

    @property
    def outer(self):
        if self.shape == "sector":
            return self.start, self.start + self.angle
        return 0.0, self.width

    @property
    def inner(self):
        if self.shape == "sector":
            return self.truncation, self.radius
        return self.truncation, self.height

    def z(self, s, q):
        if self.shape == "sector":
            return q * np.exp(1j * s)
        return s + 1j * q

    def jacobian(self, s, q):
        return q if self.shape == "sector" else np.ones_like(q)

    def edges(self):
        """The straight boundary arcs (candidates for Lagrangian labels)."""
        if self.shape == "sector":
            out = []
            for name, ang in (("start", self.start), ("end", self.start + self.angle)):
                e = np.exp(1j * ang)
                out.append(
                    BoundaryArc(name, lambda t, e=e: t * e, lambda t, e=e: np.full(np.shape(t), e), self.truncation, self.radius)
                )
            return out
        return [
            BoundaryArc("bottom", lambda t: t + 0j, lambda t: np.ones(np.shape(t), complex), 0.0, self.width),
            BoundaryArc("left", lambda t: 1j * t, lambda t: np.full(np.shape(t), 1j), self.truncation, self.height),
        ]

    def interior_samples(self, count=64, margin=0.1):
        """Points well inside the domain for holomorphy checks."""
        u = np.linspace(margin, 1 - margin, int(math.sqrt(count)) + 1)
        S, Q = np.meshgrid(u, u, indexing="ij")
        s0, s1 = self.outer
        q0, q1 = self.inner
        return self.z(s0 + (s1 - s0) * S, q0 + (q1 - q0) * Q).ravel()


def quarter_disk(R=1.0):
    return DomainSpec("sector", radius=R, angle=0.5 * math.pi)


def upper_half_disk(R=1.0):
    return DomainSpec("sector", radius=R, angle=math.pi)


# ---------------------------------------------------------------------------
# Curves


def _rho_pair(u, k):
    """``rho1, rho2`` of complex points ``u`` of shape ``(..., n)``."""
    x, y = u.real, u.imag
    r1 = np.sum(x * x, axis=-1)
    r2 = np.sum(x[..., :k] ** 2, axis=-1) + np.sum(y[..., k:] ** 2, axis=-1)
    return r1, r2


def plane_distance(u, label, k=0):
    r1, r2 = _rho_pair(u, k)
    return np.sqrt(r1 if label == "L1" else r2)


@dataclass
class CurveSpec:
    """Holomorphic ``u: domain -> C^n`` with labelled boundary arcs.

    ``u`` and ``du`` take complex arrays and return shape ``(..., n)``.
    ``outer_breaks`` are outer-coordinate values where the image crosses a
    model plane along a whole line (kinks of sublevel integrands).
    """

    name: str
    n: int
    u: Callable
    du: Callable
    domain: DomainSpec
    arcs: list
    k: int = 0
    outer_breaks: tuple = ()
    notes: dict = field(default_factory=dict)

    def points(self, z) -> np.ndarray:
        """Real points ``(x, y)`` of ``u(z)``."""
        w = self.u(z)
        return np.concatenate([w.real, w.imag], axis=-1)


def _label_arcs(u, domain, k, samples=41):
    arcs = []
    for arc in domain.edges():
        t = np.linspace(arc.t0, arc.t1, samples)
        w = u(arc.z(t))
        res = {lab: float(np.max(plane_distance(w, lab, k))) for lab in ("L2", "L1")}
        lab = min(res, key=res.get)
        if res[lab] > BOUNDARY_TOL:
            raise ValueError(
                f"boundary arc {arc.name!r} does not map into a model plane "
                f"(residuals {res})"
            )
        arcs.append((arc, lab))
    return arcs


def boundary_residual(curve: CurveSpec, samples=101) -> float:
    worst = 0.0
    for arc, lab in curve.arcs:
        t = np.linspace(arc.t0, arc.t1, samples)
        worst = max(worst, float(np.max(plane_distance(curve.u(arc.z(t)), lab, curve.k))))
    return worst


def cauchy_riemann_residual(curve: CurveSpec, count=64) -> float:
    """Fourth-order central differences of ``u`` along x and y at interior
    points; returns the worst of ``|u_y - i u_x|`` and ``|u_x - u'|``
    relative to ``max(1, |u'|)``."""
    z = curve.domain.interior_samples(count)
    h = 1e-3 * np.maximum(np.abs(z), 1e-3)

    def d(direction):
        e = direction * h
        f = lambda w: curve.u(w)[..., 0] if curve.n == 1 else curve.u(w)
        num = -f(z + 2 * e) + 8 * f(z + e) - 8 * f(z - e) + f(z - 2 * e)
        return (num / (12 * h if curve.n == 1 else 12 * h[:, None]))

    ux = d(1.0)
    uy = d(1j)
    exact = curve.du(z)
    if curve.n == 1:
        exact = exact[..., 0]
    scale = np.maximum(1.0, np.abs(exact))
    r1 = np.abs(uy - 1j * ux) / scale
    r2 = np.abs(ux - exact) / scale
    return float(max(r1.max(), r2.max()))


def _validated(curve: CurveSpec) -> CurveSpec:
    cr = cauchy_riemann_residual(curve)
    if cr > CR_TOL:
        raise ValueError(f"{curve.name}: Cauchy-Riemann residual {cr:.3g} > {CR_TOL}")
    br = boundary_residual(curve)
    if br > BOUNDARY_TOL:
        raise ValueError(f"{curve.name}: boundary residual {br:.3g} > {BOUNDARY_TOL}")
    curve.notes.update(cr_residual=cr, boundary_residual=br)
    return curve


def _arg(z):
    # branch cut along the negative imaginary axis: arg in (-pi/2, 3pi/2]
    a = np.angle(z)
    return np.where(a <= -0.5 * np.pi, a + 2 * np.pi, a)


def make_sector_inclusion(R=1.0) -> CurveSpec:
    """``u(z) = z`` on the quarter disk of radius R."""
    dom = quarter_disk(R)
    u = lambda z: np.asarray(z, complex)[..., None]
    du = lambda z: np.ones(np.shape(z) + (1,), complex)
    return _validated(CurveSpec("sector", 1, u, du, dom, _label_arcs(u, dom, 0)))


def make_power_curve(m: int, c: float = 1.0, R: float = 1.0, domain: Optional[DomainSpec] = None, name=None) -> CurveSpec:
    """``u(z) = c z^(m/2)`` (principal branch on the closed upper half
    plane), by default on the upper half disk of radius R."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    dom = domain or upper_half_disk(R)
    p = 0.5 * m

    def u(z):
        z = np.asarray(z, complex)
        return (c * np.abs(z) ** p * np.exp(1j * p * _arg(z)))[..., None]

    def du(z):
        z = np.asarray(z, complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (c * p * np.abs(z) ** (p - 1) * np.exp(1j * (p - 1) * _arg(z)))[..., None]

    s0, s1 = dom.outer
    # lines where arg(u) is a multiple of pi/2
    breaks = tuple(j * math.pi / m for j in range(1, 4 * m) if s0 < j * math.pi / m < s1)
    nm = name or (f"z^{m // 2}" if m % 2 == 0 else f"z^({m}/2)")
    return _validated(CurveSpec(nm, 1, u, du, dom, _label_arcs(u, dom, 0), outer_breaks=breaks))


def make_reflected_polynomial(coeffs: Sequence[float], R: float = 1.0, name=None) -> CurveSpec:
    """Real polynomial ``sum_j a_j z^j`` on the quarter disk.  Real
    coefficients send the real axis to R; odd polynomials send the
    imaginary axis to iR."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1 or len(coeffs) < 2 or not np.any(coeffs[1:]):
        raise ValueError("need a non-constant real polynomial")
    dom = quarter_disk(R)
    P = np.polynomial.Polynomial(coeffs)
    dP = P.deriv()
    u = lambda z: P(np.asarray(z, complex))[..., None]
    du = lambda z: dP(np.asarray(z, complex))[..., None]
    nm = name or "poly(" + ",".join(f"{c:g}" for c in coeffs) + ")"
    return _validated(CurveSpec(nm, 1, u, du, dom, _label_arcs(u, dom, 0)))


def default_family(R: float = 1.0) -> list:
    """Sector inclusion, z^(1/2), z^(3/2), z^2 (quarter disk), z + 0.2 z^3."""
    return [
        make_sector_inclusion(R),
        make_power_curve(1, 1.0, R),
        make_power_curve(3, 1.0, R),
        make_power_curve(4, 1.0, R, domain=quarter_disk(R)),
        make_reflected_polynomial([0.0, 1.0, 0.0, 0.2], R, name="cubic"),
    ]


# ---------------------------------------------------------------------------
# Regions


@dataclass(frozen=True)
class RegionSpec:
    """``all``; ``U_s`` (``rho1 < s^2`` or ``rho2 < s^2``); ``B``
    (``max(rho1, rho2) < b^2``); ``sublevel`` (``h <= t^2`` inside U, with h
    taken as +inf outside U).  Membership is strict for U_s and B, so their
    boundaries count as outside."""

    kind: str
    radius: float = 0.0
    k: int = 0
    params: Optional[ModelParams] = None
    complement: bool = False

    def __post_init__(self):
        if self.kind not in ("all", "U_s", "B", "sublevel"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind == "sublevel" and self.params is None:
            raise ValueError("sublevel regions need model parameters")
        if self.kind != "all" and not self.radius > 0:
            raise ValueError("region radius must be positive")

    @property
    def has_levels(self) -> bool:
        return self.kind != "all"

    def _h(self, u):
        p = self.params
        pts = np.concatenate([u.real, u.imag], axis=-1)
        inside = model.in_U(pts, p)
        hv = model.h_duval_field(p).value(pts)
        return np.where(inside, hv, np.inf), inside

    def levels(self, u) -> np.ndarray:
        r1, r2 = _rho_pair(u, self.k)
        if self.kind in ("U_s", "B"):
            s2 = self.radius**2
            return np.stack([r1 - s2, r2 - s2], axis=-1)
        if self.kind == "sublevel":
            # the formula for h is smooth past the edge of U, so its level
            # set is located without a jump; U's edge has its own levels
            d2 = self.params.Dr**2
            pts = np.concatenate([u.real, u.imag], axis=-1)
            h = model.h_duval_field(self.params).value(pts)
            return np.stack([h - self.radius**2, r1 - d2, r2 - d2], axis=-1)
        raise ValueError("region has no level functions")

    def member(self, u) -> np.ndarray:
        if self.kind == "all":
            m = np.ones(u.shape[:-1], dtype=bool)
        elif self.kind == "U_s":
            r1, r2 = _rho_pair(u, self.k)
            m = (r1 < self.radius**2) | (r2 < self.radius**2)
        elif self.kind == "B":
            r1, r2 = _rho_pair(u, self.k)
            m = np.maximum(r1, r2) < self.radius**2
        else:
            h, inside = self._h(u)
            m = inside & (h <= self.radius**2)
        return ~m if self.complement else m


EVERYTHING = RegionSpec("all")


def U_s(s, k=0):
    return RegionSpec("U_s", s, k)


def B_region(b, k=0):
    return RegionSpec("B", b, k)


# ---------------------------------------------------------------------------
# Measures


def _region_integral(curve: CurveSpec, region: RegionSpec, integrand, tol, extra_levels=None, rtol=0.0, max_level=12):
    dom = curve.domain
    s0, s1 = dom.outer
    q0, q1 = dom.inner

    def U(S, Q):
        return curve.u(dom.z(S, Q))

    levels = None
    if region.has_levels or extra_levels is not None:
        def levels(S, Q):
            w = U(S, Q)
            parts = []
            if region.has_levels:
                parts.append(region.levels(w))
            if extra_levels is not None:
                parts.append(extra_levels(w))
            return np.concatenate(parts, axis=-1)

    def member(S, Q):
        return region.member(U(S, Q))

    def f(S, Q):
        return integrand(dom.z(S, Q)) * dom.jacobian(S, Q)

    return region_integral(
        f,
        levels,
        member,
        s0,
        s1,
        q0,
        q1,
        tol=tol,
        outer_breaks=curve.outer_breaks,
        q_grid=default_q_grid(q0, q1),
        rtol=rtol,
        max_level=max_level,
    )


def area_g(curve: CurveSpec, region: RegionSpec = EVERYTHING, tol=1e-9) -> float:
    """``int_{u^-1(region)} sum_j |u_j'|^2 dA`` over the domain."""
    integrand = lambda z: np.sum(np.abs(curve.du(z)) ** 2, axis=-1)
    return _region_integral(curve, region, integrand, tol)


def length_g(curve: CurveSpec, excluded: Optional[RegionSpec] = None, arcs=None, tol=1e-10) -> float:
    """g-length of the labelled boundary arcs outside ``excluded``."""
    total = 0.0
    for arc, _ in curve.arcs if arcs is None else arcs:
        dz = arc.dz
        integrand = lambda t, arc=arc: np.abs(dz(t)) * np.linalg.norm(curve.du(arc.z(t)), axis=-1)
        if excluded is None:
            levels = None
            member = lambda t: np.ones(np.shape(t), dtype=bool)
        else:
            levels = lambda t, arc=arc: excluded.levels(curve.u(arc.z(t)))
            member = lambda t, arc=arc: ~excluded.member(curve.u(arc.z(t)))
        total += line_integral_1d(integrand, levels, member, arc.t0, arc.t1, tol)
    return total


def _tangent_levi(curve: CurveSpec, params: ModelParams):
    field_h = model.h_duval_field(params)

    def integrand(z):
        shape = np.shape(z)
        zf = np.ravel(z)
        pts = curve.points(zf)
        d = curve.du(zf)
        v = np.concatenate([d.real, d.imag], axis=-1)
        L = levi_from_hessian(field_h.jet(pts).hess)
        return np.einsum("...i,...ij,...j->...", v, L, v).reshape(shape)

    return integrand


def area_h(curve: CurveSpec, t: float, params: ModelParams, tol=None, rtol=1e-8) -> float:
    """``int_{h(u) <= t^2} Levi(h)(du(d/dx)) dA``.  Zeros of the real and
    imaginary parts of u are added as breakpoints so the kink of h across
    the model planes never sits inside a quadrature panel; so are the edges
    of the cutoff's blend band, where h is smooth but not analytic."""
    if params.n != curve.n:
        raise ValueError("curve and model dimensions differ")
    region = RegionSpec("sublevel", t, params.k, params)
    r2 = params.r**2

    def extra(w):
        a, b = _rho_pair(w, params.k)
        band = [a - 0.5 * r2, a - 0.75 * r2, b - 0.5 * r2, b - 0.75 * r2]
        return np.concatenate([w.real, w.imag, np.stack(band, axis=-1)], axis=-1)
    # relative tolerance: the integrand near the domain edges carries
    # rounding noise relative to its own size
    if tol is None:
        tol = 1e-14 * t
    # sublevel sets of thin strips along an axis give outer integrands with
    # steep peaks next to the domain edge, hence the deeper refinement limit
    return _region_integral(
        curve, region, _tangent_levi(curve, params), tol, extra_levels=extra, rtol=rtol, max_level=40
    )


# ---------------------------------------------------------------------------
# Inequalities


@dataclass
class MonotonicityReport:
    curve: str
    t: list
    ratios: list
    passed: bool
    worst_drop: float


def verify_monotonicity(curve: CurveSpec, params: ModelParams, t_grid, slack=1e-6) -> MonotonicityReport:
    """``area_h(t) / t`` must be nondecreasing on ``t_grid`` up to an
    absolute ``slack``."""
    t_grid = np.asarray(t_grid, float)
    if np.any(np.diff(t_grid) <= 0) or t_grid[0] <= 0:
        raise ValueError("t grid must be positive and increasing")
    ratios = np.array([area_h(curve, t, params) / t for t in t_grid])
    drops = ratios[:-1] - ratios[1:]
    worst = float(np.max(drops)) if len(drops) else 0.0
    return MonotonicityReport(curve.name, t_grid.tolist(), ratios.tolist(), bool(worst <= slack), worst)


def default_t_grid(params: ModelParams, count=20):
    """``count`` values up to ``(D r)^2``; below that bound the sublevel set
    near the intersection stays inside U."""
    top = params.Dr**2
    return np.linspace(top / count, top, count)


@dataclass
class KRow:
    curve: str
    s: float
    length: float
    area: float
    K: float
    flagged: bool = False


@dataclass
class KTable:
    rows: list
    sup: float
    drift: dict
    b_radius: float

    def for_curve(self, name):
        return [r for r in self.rows if r.curve == name]


def estimate_K(curves, s_grid, b_radius, k=0, tol=1e-10) -> KTable:
    """``K(s, u) = s length_g(du outside B) / area_g(u in U_s)``.

    A curve whose image misses U_s gets ``K = 0`` and a flag.  ``drift`` is
    the largest relative change of K between consecutive s values per curve.
    """
    rows = []
    B = B_region(b_radius, k)
    for c in curves:
        L = length_g(c, B)
        for s in s_grid:
            A = area_g(c, U_s(s, k), tol=tol)
            if A <= 0:
                rows.append(KRow(c.name, float(s), L, A, 0.0, True))
            else:
                rows.append(KRow(c.name, float(s), L, A, s * L / A))
    sup = max((r.K for r in rows), default=0.0)
    drift = {}
    for c in curves:
        ks = [r.K for r in rows if r.curve == c.name]
        d = [abs(b / a - 1) for a, b in zip(ks[:-1], ks[1:]) if a > 0]
        drift[c.name] = max(d, default=0.0)
    return KTable(rows, sup, drift, b_radius)
