import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from psh_lab import jets
from psh_lab.jets import Jet2, ScalarField

finite = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)


def field(n, formula, domain=None):
    return ScalarField("f", n, formula, domain)


# ---------------------------------------------------------------------------
# hand-derived Levi forms


def test_levi_of_y_squared_is_twice_identity():
    for n in (1, 2, 3):
        f = field(n, lambda x, y: sum(yi * yi for yi in y))
        pts = np.random.default_rng(0).normal(size=(5, 2 * n))
        L = jets.levi_matrix(f, pts)
        np.testing.assert_allclose(L, np.broadcast_to(2 * np.eye(2 * n), L.shape), atol=1e-14)


def test_levi_of_pluriharmonic_xy_vanishes():
    f = field(1, lambda x, y: x[0] * y[0])
    L = jets.levi_matrix(f, np.random.default_rng(1).normal(size=(7, 2)))
    np.testing.assert_allclose(L, 0.0, atol=1e-14)


def test_levi_of_x2y2_at_one_one():
    # H = [[2, 4], [4, 2]] at (1, 1); H + J^T H J = 4 Id by hand
    f = field(1, lambda x, y: x[0] ** 2 * y[0] ** 2)
    L = jets.levi_matrix(f, np.array([[1.0, 1.0]]))[0]
    np.testing.assert_allclose(L, 4 * np.eye(2), atol=1e-14)


def test_gradient_form_of_linear_function():
    # f = x1: g = e_x1, J g = e_y1
    f = field(2, lambda x, y: x[0] + 0.0 * y[0])
    M = jets.grad_form_matrix(f, np.zeros((1, 4)))[0]
    np.testing.assert_allclose(M, np.diag([1.0, 0, 1.0, 0]), atol=1e-15)


# ---------------------------------------------------------------------------
# symbolic oracle


def test_hessian_matches_sympy():
    X, Y, Z, W = sp.symbols("x1 x2 y1 y2", real=True)
    expr = sp.sqrt(1 + X**2 + Y**2 * Z**2) * sp.exp(-W * X / 3) + (X * W - Z) ** 3 / (2 + Y**2)
    H_sym = sp.lambdify((X, Y, Z, W), sp.hessian(expr, (X, Y, Z, W)), "numpy")
    f = field(
        2,
        lambda x, y: jets.sqrt(1 + x[0] ** 2 + x[1] ** 2 * y[0] ** 2) * jets.exp(-y[1] * x[0] / 3)
        + (x[0] * y[1] - y[0]) ** 3 / (2 + x[1] ** 2),
    )
    pts = np.random.default_rng(2).uniform(-1.5, 1.5, (50, 4))
    got = f.jet(pts).hess
    for p, H in zip(pts, got):
        np.testing.assert_allclose(H, np.array(H_sym(*p), float), rtol=1e-12, atol=1e-12)


def test_power_and_division_match_sympy():
    X, Z = sp.symbols("x y", real=True)
    expr = (1 + X**2 + Z**4) ** sp.Rational(3, 2) / (3 + X * Z)
    grad = sp.lambdify((X, Z), [sp.diff(expr, v) for v in (X, Z)], "numpy")
    f = field(1, lambda x, y: jets.power(1 + x[0] ** 2 + y[0] ** 4, 1.5) / (3 + x[0] * y[0]))
    pts = np.random.default_rng(3).uniform(-1, 1, (20, 2))
    jet = f.jet(pts)
    np.testing.assert_allclose(jet.grad, np.array([grad(*p) for p in pts]), rtol=1e-12)
    np.testing.assert_allclose(jet.value, f.value(pts), rtol=1e-15)


# ---------------------------------------------------------------------------
# finite differences


def test_fd_hessian_polynomial_is_exact():
    f = field(1, lambda x, y: x[0] ** 3 * y[0] - 2 * y[0] ** 2)
    pts = np.random.default_rng(4).normal(size=(10, 2))
    np.testing.assert_allclose(jets.fd_hessian(f, pts), f.jet(pts).hess, atol=1e-7)


def test_fd_richardson_order():
    # each Richardson level removes one even power of the step
    f = field(1, lambda x, y: jets.exp(x[0] * y[0]) * jets.sqrt(2 + x[0]))
    p = np.array([[0.4, -0.7]])
    H = f.jet(p).hess
    e0 = np.abs(jets.fd_hessian(f, p, 0.05, richardson=0) - H).max()
    e2 = np.abs(jets.fd_hessian(f, p, 0.05, richardson=2) - H).max()
    assert e2 < 1e-3 * e0


def test_fd_stencil_outside_domain_raises():
    f = field(1, lambda x, y: jets.sqrt(x[0]), lambda p: p[..., 0] > 0)
    with pytest.raises(jets.SmoothDomainError):
        jets.fd_hessian(f, np.array([[1e-4, 0.0]]), step=1e-3)


def test_jet_outside_domain_raises():
    f = field(1, lambda x, y: jets.sqrt(x[0]), lambda p: p[..., 0] > 0)
    with pytest.raises(jets.SmoothDomainError, match="outside"):
        f.jet(np.array([[-1.0, 0.0]]))


def test_wrong_dimension_rejected():
    f = field(2, lambda x, y: x[0])
    with pytest.raises(ValueError):
        f.value(np.zeros((3, 3)))


def test_nonfinite_matrix_rejected():
    with pytest.raises(ValueError):
        jets.eigenvalues(np.array([[np.nan, 0], [0, 1.0]]))


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=60, deadline=None)
@given(arrays(float, (4, 4), elements=finite))
def test_levi_form_commutes_with_J(A):
    H = A + A.T
    L = jets.levi_from_hessian(H)
    J = jets.J_matrix(2)
    np.testing.assert_allclose(L, L.T, atol=1e-12)
    np.testing.assert_allclose(J.T @ L @ J, L, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (6,), elements=finite))
def test_gradient_form_is_psd_rank_two(g):
    M = jets.grad_form_from_gradient(g)
    ev = np.linalg.eigvalsh(M)
    s = max(1.0, ev.max())
    assert ev[0] >= -1e-12 * s
    assert np.all(np.abs(ev[:-2]) <= 1e-12 * s)
    np.testing.assert_allclose(ev[-2:], [g @ g, g @ g], atol=1e-12 * s)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), arrays(float, (2,), elements=finite), arrays(float, (2,), elements=finite))
def test_real_part_of_holomorphic_monomial_is_pluriharmonic(m, c, p):
    # Re(c z^m) has zero Levi form
    def formula(x, y):
        re, im = 1.0, 0.0
        for _ in range(m):
            re, im = re * x[0] - im * y[0], re * y[0] + im * x[0]
        return c[0] * re - c[1] * im

    L = jets.levi_matrix(field(1, formula), p[None])
    assert np.abs(L).max() <= 1e-10 * max(1.0, np.abs(p).max() ** m * np.abs(c).max())


@settings(max_examples=40, deadline=None)
@given(arrays(float, (3, 2), elements=st.floats(0.1, 2.0)))
def test_jet_arithmetic_product_rule(p):
    a = field(1, lambda x, y: x[0] * y[0] + 1)
    b = field(1, lambda x, y: jets.exp(x[0]) + y[0] ** 2)
    ab = field(1, lambda x, y: (x[0] * y[0] + 1) * (jets.exp(x[0]) + y[0] ** 2))
    ja, jb, jab = a.jet(p), b.jet(p), ab.jet(p)
    H = ja.hess * jb.value[:, None, None] + jb.hess * ja.value[:, None, None]
    H = H + ja.grad[:, :, None] * jb.grad[:, None, :] + jb.grad[:, :, None] * ja.grad[:, None, :]
    np.testing.assert_allclose(jab.hess, H, rtol=1e-12, atol=1e-12)


def test_seed_shapes():
    seeds = Jet2.seed(np.zeros((3, 4)))
    assert len(seeds) == 4
    assert seeds[2].grad.shape == (3, 4)
    assert seeds[2].hess.shape == (3, 4, 4)


def test_fd_hessian_uses_extended_precision():
    # at step 1e-5 double-precision differences of exp carry rounding errors
    # near 1e-6; extended precision keeps the stencil sums exact enough
    f = field(1, lambda x, y: jets.exp(3 * x[0]) * jets.sqrt(2 + y[0] ** 2))
    p = np.array([[0.7, 0.4]])
    H = f.jet(p).hess
    assert np.abs(jets.fd_hessian(f, p, 1e-5, richardson=1) - H).max() <= 1e-8 * np.abs(H).max()


def test_plain_values_keep_extended_precision():
    f = field(1, lambda x, y: jets.sqrt(1 + x[0] ** 2) * jets.power(2 + y[0] ** 2, 1.5))
    p = np.array([[0.3, 0.2]], dtype=np.longdouble)
    assert f.value(p).dtype == np.longdouble
    assert f.value(p.astype(float)).dtype == np.float64
