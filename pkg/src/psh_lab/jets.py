"""Second-order forward-mode jets on R^{2n} = C^n and the two bilinear forms
built from them.

Points are arrays of shape ``(..., 2n)`` laid out as ``(x_1..x_n, y_1..y_n)``.
A :class:`Jet2` carries value, gradient and Hessian for every point of a batch,
so a whole grid of points is differentiated in one pass.

The Levi form of ``f`` is represented by the real symmetric matrix
``H + J^T H J`` where ``H`` is the Hessian and ``J`` the standard complex
structure.  With this normalization the Levi form of ``|y|^2`` is ``2 Id``.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np


class SmoothDomainError(ValueError):
    """Raised when a field is evaluated where it is not twice differentiable."""


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


class Jet2:
    """Value, gradient and Hessian of a scalar field over a batch of points.

    Arrays may be broadcast views (coordinate seeds share a zero Hessian);
    arithmetic always returns freshly allocated arrays.
    """

    __slots__ = ("value", "grad", "hess")
    __array_priority__ = 100  # make ndarray <op> Jet2 defer to Jet2

    def __init__(self, value, grad, hess):
        self.value = np.asarray(value, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = np.asarray(hess, dtype=float)

    @property
    def dim(self) -> int:
        return self.grad.shape[-1]

    @classmethod
    def seed(cls, points) -> list["Jet2"]:
        """One jet per coordinate of ``points`` (shape ``(..., m)``)."""
        points = np.asarray(points, dtype=float)
        m = points.shape[-1]
        batch = points.shape[:-1]
        eye = np.eye(m)
        zero_h = np.broadcast_to(np.zeros((m, m)), batch + (m, m))
        return [
            cls(points[..., i], np.broadcast_to(eye[i], batch + (m,)), zero_h)
            for i in range(m)
        ]

    def _lift(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return other
        c = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(c.shape, self.value.shape)
        m = self.dim
        return Jet2(
            np.broadcast_to(c, shape),
            np.broadcast_to(np.zeros(m), shape + (m,)),
            np.broadcast_to(np.zeros((m, m)), shape + (m, m)),
        )

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value + other, self.grad + 0.0, self.hess + 0.0)
        return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.value, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            c = np.asarray(other, dtype=float)
            return Jet2(self.value * c, self.grad * c[..., None], self.hess * c[..., None, None])
        a, b = self, other
        value = a.value * b.value
        grad = a.value[..., None] * b.grad + b.value[..., None] * a.grad
        cross = _outer(a.grad, b.grad)
        hess = (
            a.value[..., None, None] * b.hess
            + b.value[..., None, None] * a.hess
            + cross
            + np.swapaxes(cross, -1, -2)
        )
        return Jet2(value, grad, hess)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        return power(self, p)

    def compose(self, f, f1, f2) -> "Jet2":
        """Chain rule for a scalar function with value ``f`` and derivatives
        ``f1``, ``f2`` already evaluated at ``self.value``."""
        f1 = np.asarray(f1, dtype=float)
        f2 = np.asarray(f2, dtype=float)
        grad = f1[..., None] * self.grad
        hess = f1[..., None, None] * self.hess + f2[..., None, None] * _outer(self.grad, self.grad)
        return Jet2(f, grad, hess)

    def reciprocal(self) -> "Jet2":
        v = self.value
        return self.compose(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def symmetrized(self) -> "Jet2":
        hess = 0.5 * (self.hess + np.swapaxes(self.hess, -1, -2))
        m = self.dim
        batch = self.value.shape
        return Jet2(self.value.copy(), np.broadcast_to(self.grad, batch + (m,)).copy(), hess)

    def __repr__(self):
        return f"Jet2(value={self.value!r}, dim={self.dim})"


# ---------------------------------------------------------------------------
# Elementary functions usable on plain arrays and on jets alike, so a field's
# formula is written once and evaluated both ways.


def sqrt(u):
    if not isinstance(u, Jet2):
        return np.sqrt(u)
    s = np.sqrt(u.value)
    with np.errstate(divide="ignore", invalid="ignore"):
        return u.compose(s, 0.5 / s, -0.25 / (s * u.value))


def exp(u):
    if not isinstance(u, Jet2):
        return np.exp(u)
    e = np.exp(u.value)
    return u.compose(e, e, e)


def power(u, p: float):
    """``u**p``; for ``p > 1`` derivative terms are set to zero where ``u == 0``
    (the field is then assumed to vanish to second order there)."""
    if not isinstance(u, Jet2):
        return as_real(u) ** p
    v = u.value
    with np.errstate(divide="ignore", invalid="ignore"):
        f = v**p
        f1 = p * v ** (p - 1)
        f2 = p * (p - 1) * v ** (p - 2)
    if p > 1:
        zero = v == 0
        f1 = np.where(zero, 0.0, f1)
        f2 = np.where(zero, 2.0 if p == 2 else 0.0, f2)
    return u.compose(f, f1, f2)


def where(cond, a, b):
    """Select between two fields branch-wise."""
    if not isinstance(a, Jet2) and not isinstance(b, Jet2):
        return np.where(cond, a, b)
    ref = a if isinstance(a, Jet2) else b
    a = ref._lift(a)
    b = ref._lift(b)
    cond = np.asarray(cond, dtype=bool)
    return Jet2(
        np.where(cond, a.value, b.value),
        np.where(cond[..., None], a.grad, b.grad),
        np.where(cond[..., None, None], a.hess, b.hess),
    )


def as_real(x) -> np.ndarray:
    """``x`` as a float array; extended-precision input stays extended."""
    a = np.asarray(x)
    return a if a.dtype == np.longdouble else a.astype(float, copy=False)


def value_of(u):
    return u.value if isinstance(u, Jet2) else as_real(u)


# ---------------------------------------------------------------------------
# Fields


Formula = Callable[[Sequence, Sequence], object]


class ScalarField:
    """A scalar field on C^n given by a generic ``formula(x, y)``.

    ``formula`` receives two lists of length ``n`` (coordinate arrays or
    coordinate jets) and must only use arithmetic and the helpers of this
    module.  ``domain`` is a predicate on point arrays marking where the
    field is twice differentiable; evaluation elsewhere raises
    :class:`SmoothDomainError`.
    """

    def __init__(
        self,
        name: str,
        n: int,
        formula: Formula,
        domain: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.name = name
        self.n = n
        self.formula = formula
        self.domain = domain

    def __repr__(self):
        return f"ScalarField({self.name!r}, n={self.n})"

    def _check_points(self, points) -> np.ndarray:
        points = as_real(points)
        if points.shape[-1] != 2 * self.n:
            raise ValueError(f"{self.name}: expected points with last axis 2n={2 * self.n}")
        return points

    def in_domain(self, points) -> np.ndarray:
        points = self._check_points(points)
        if self.domain is None:
            return np.ones(points.shape[:-1], dtype=bool)
        return np.asarray(self.domain(points), dtype=bool)

    def _require_domain(self, points):
        ok = self.in_domain(points)
        if not np.all(ok):
            pts = np.asarray(points)
            bad = pts[~ok] if ok.ndim else pts[None]
            raise SmoothDomainError(
                f"{self.name}: {int(ok.size - np.count_nonzero(ok))} point(s) outside "
                f"the smooth domain, e.g. {bad[0].tolist()}"
            )

    def value(self, points) -> np.ndarray:
        """Plain evaluation (no derivatives, no domain check)."""
        points = self._check_points(points)
        n = self.n
        x = [points[..., i] for i in range(n)]
        y = [points[..., n + i] for i in range(n)]
        return np.broadcast_to(value_of(self.formula(x, y)), points.shape[:-1]).copy()

    def jet(self, points) -> Jet2:
        points = self._check_points(points)
        self._require_domain(points)
        seeds = Jet2.seed(points)
        n = self.n
        out = self.formula(seeds[:n], seeds[n:])
        if not isinstance(out, Jet2):
            out = seeds[0]._lift(out)
        return out.symmetrized()

    __call__ = jet


def make_point(x, y) -> np.ndarray:
    """Concatenate real and imaginary parts into the ``(x, y)`` layout."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y must have equal length")
    return np.concatenate([x, y], axis=-1)


def split_point(p):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] % 2:
        raise ValueError("point arrays must have even length 2n")
    n = p.shape[-1] // 2
    return p[..., :n], p[..., n:]


# ---------------------------------------------------------------------------
# Complex structure and the bilinear forms


def apply_J(v) -> np.ndarray:
    """Multiplication by sqrt(-1): ``(v_x, v_y) -> (-v_y, v_x)``."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] % 2:
        raise ValueError("apply_J needs a vector of even length 2n")
    vx, vy = split_point(v)
    return np.concatenate([-vy, vx], axis=-1)


def J_matrix(n: int) -> np.ndarray:
    z = np.zeros((n, n))
    e = np.eye(n)
    return np.block([[z, -e], [e, z]])


def levi_from_hessian(H) -> np.ndarray:
    """``H + J^T H J`` computed blockwise."""
    H = np.asarray(H, dtype=float)
    n = H.shape[-1] // 2
    A = H[..., :n, :n]
    B = H[..., :n, n:]
    C = H[..., n:, n:]
    S = A + C
    K = B - np.swapaxes(B, -1, -2)
    L = np.concatenate(
        [np.concatenate([S, K], axis=-1), np.concatenate([-K, S], axis=-1)], axis=-2
    )
    return 0.5 * (L + np.swapaxes(L, -1, -2))


def grad_form_from_gradient(g) -> np.ndarray:
    """``g g^T + (Jg)(Jg)^T``: the form ``df ^ d^c f(., J.)``."""
    g = np.asarray(g, dtype=float)
    Jg = apply_J(g)
    return _outer(g, g) + _outer(Jg, Jg)


def levi_matrix(f: ScalarField, points) -> np.ndarray:
    return levi_from_hessian(f.jet(points).hess)


def grad_form_matrix(f: ScalarField, points) -> np.ndarray:
    return grad_form_from_gradient(f.jet(points).grad)


# ---------------------------------------------------------------------------
# Finite-difference oracle


def _fd_offsets(m: int, h: float) -> np.ndarray:
    # (m, m, 4, m): +i+j, +i-j, -i+j, -i-j
    eye = np.eye(m)
    ei = eye[:, None, :]
    ej = eye[None, :, :]
    return np.stack([ei + ej, ei - ej, -ei + ej, -ei - ej], axis=2) * h


def _fd_steps(step: float, richardson: int):
    if step <= 0:
        raise ValueError("step must be positive")
    if richardson < 0:
        raise ValueError("richardson must be >= 0")
    return [step / 2**i for i in range(richardson + 1)]


def fd_stencil_points(points, step: float = 1e-3, richardson: int = 2) -> np.ndarray:
    """Every point visited by :func:`fd_hessian`, shape ``(..., 4 m^2 (richardson + 1), m)``."""
    points = np.asarray(points, dtype=float)
    m = points.shape[-1]
    offs = np.concatenate([_fd_offsets(m, h).reshape(-1, m) for h in _fd_steps(step, richardson)])
    return points[..., None, :] + offs


def fd_hessian(f: ScalarField, points, step: float = 1e-3, richardson: int = 2) -> np.ndarray:
    """Central-difference Hessian refined by a Richardson table over the
    steps ``step, step/2, ..., step/2**richardson``.

    Uses only plain evaluations of ``f``; the truncation error is
    ``O(step**(2 richardson + 2))``.  Every stencil point must lie in the
    smooth domain.
    """
    steps = _fd_steps(step, richardson)
    points = np.asarray(points, dtype=float)
    m = points.shape[-1]
    if not np.all(f.in_domain(fd_stencil_points(points, step, richardson))):
        raise SmoothDomainError(f"{f.name}: finite-difference stencil leaves the smooth domain")

    # stencil values and differences in extended precision: the rounding
    # floor of double precision limits the step near the cutoff band edges
    ext = points.astype(np.longdouble)

    def central(h):
        offs = _fd_offsets(m, h).astype(np.longdouble)
        v = f.value(ext[..., None, None, None, :] + offs)
        return (v[..., 0] - v[..., 1] - v[..., 2] + v[..., 3]) / (4 * np.longdouble(h) ** 2)

    table = [central(h) for h in steps]
    for level in range(1, len(steps)):
        w = np.longdouble(4.0**level)
        table = [(w * table[i + 1] - table[i]) / (w - 1) for i in range(len(table) - 1)]
    H = table[0].astype(float)
    return 0.5 * (H + np.swapaxes(H, -1, -2))


def hessian_agreement(f: ScalarField, points, step: float = 1e-3, richardson: int = 2) -> np.ndarray:
    """Frobenius gap between the jet Hessian and :func:`fd_hessian`, relative
    to ``max(1, |H|)`` (the scale convention used for all PSD tolerances)."""
    H = f.jet(points).hess
    gap = np.linalg.norm(H - fd_hessian(f, points, step, richardson), axis=(-2, -1))
    return gap / np.maximum(1.0, np.linalg.norm(H, axis=(-2, -1)))


# ---------------------------------------------------------------------------
# Spectra


def _check_finite(M):
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def eigenvalues(M) -> np.ndarray:
    """Ascending eigenvalues of (a batch of) symmetric matrices."""
    return np.linalg.eigvalsh(_check_finite(M))


def min_eigenvalue(M) -> np.ndarray:
    return eigenvalues(M)[..., 0]


def spectral_scale(M) -> np.ndarray:
    """``max(1, spectral radius)``, the scale used for PSD tolerances."""
    ev = eigenvalues(M)
    return np.maximum(1.0, np.max(np.abs(ev), axis=-1))


def is_psd(M, tol: float = 1e-9):
    ev = eigenvalues(M)
    scale = np.maximum(1.0, np.max(np.abs(ev), axis=-1))
    return ev[..., 0] >= -tol * scale
