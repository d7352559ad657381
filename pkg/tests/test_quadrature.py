import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psh_lab import quadrature as Q
from psh_lab.quadrature import QuadratureError


# ---------------------------------------------------------------------------
# one-dimensional rules


def test_adaptive_gl_polynomial_and_sqrt_endpoint():
    assert Q.adaptive_gl(lambda x: x**5, 0.0, 1.0, 1e-14) == pytest.approx(1 / 6, abs=1e-14)
    # the smoothstep substitution absorbs square-root endpoints
    assert Q.adaptive_gl(np.sqrt, 0.0, 1.0, 1e-13) == pytest.approx(2 / 3, abs=1e-12)
    assert Q.adaptive_gl(lambda x: np.sqrt(1 - x), 0.0, 1.0, 1e-13) == pytest.approx(2 / 3, abs=1e-12)


def test_adaptive_gl_empty_interval():
    assert Q.adaptive_gl(np.exp, 1.0, 1.0, 1e-10) == 0.0


def test_adaptive_gl_stall_raises():
    jump = lambda x: np.where(x < 1 / 3, 0.0, 1.0)
    with pytest.raises(QuadratureError, match="stalled after 6 levels"):
        Q.adaptive_gl(jump, 0.0, 1.0, 1e-15, max_level=6)


def test_adaptive_gl_active_panel_cap():
    with pytest.raises(QuadratureError, match="active panels"):
        Q.adaptive_gl(lambda x: np.sin(400 * x), 0.0, 1.0, 1e-15, max_active=2)


def test_adaptive_gl_relative_floor_accepts_noisy_integrand():
    # relative noise of 1e-12 cannot meet an absolute 1e-16 target; the
    # relative floor stops refinement at the noise level
    rng = np.random.default_rng(0)
    noisy = lambda x: np.exp(x) * (1 + 1e-12 * rng.standard_normal(np.shape(x)))
    with pytest.raises(QuadratureError):
        Q.adaptive_gl(noisy, 0.0, 1.0, 1e-16, max_level=8)
    val = Q.adaptive_gl(noisy, 0.0, 1.0, 1e-16, max_level=8, rel_floor=1e-10)
    assert val == pytest.approx(math.e - 1, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3.0, 3.0), st.floats(0.01, 4.0))
def test_adaptive_gl_exponential(a, w):
    b = a + w
    want = math.exp(b) - math.exp(a)
    assert Q.adaptive_gl(np.exp, a, b, 1e-13) == pytest.approx(want, rel=1e-11, abs=1e-13)


def test_integrate_intervals_sums_per_owner():
    a = np.array([0.0, 1.0, 0.0])
    b = np.array([1.0, 2.0, math.pi])
    owner = np.array([0, 0, 1])
    out = Q.integrate_intervals(lambda x, idx: x * x, a, b, 1e-13, owner=owner)
    np.testing.assert_allclose(out, [8 / 3, math.pi**3 / 3], rtol=1e-13)


def test_integrate_intervals_stall_raises():
    jump = lambda x, idx: np.where(x < 1 / 3, 0.0, 1.0)
    with pytest.raises(QuadratureError, match="inner refinement stalled"):
        Q.integrate_intervals(jump, np.array([0.0]), np.array([1.0]), 1e-15, max_panels=16)


def test_integrate_intervals_chunks_large_batches(monkeypatch):
    monkeypatch.setattr(Q, "MAX_NODES", 64)
    sizes = []

    def f(x, idx):
        sizes.append(x.size)
        return np.cos(x)

    a = np.zeros(50)
    b = np.linspace(0.1, 2.0, 50)
    out = Q.integrate_intervals(f, a, b, 1e-13)
    assert out[0] == pytest.approx(np.sum(np.sin(b)), rel=1e-12)
    assert max(sizes) <= 64


# ---------------------------------------------------------------------------
# roots and kinks


def test_line_roots_simple_and_tangent():
    q_grid = np.linspace(0, 1, 65)
    # two roots 1e-3 apart inside one grid cell, from a shallow dip
    levels = lambda S, Qv: np.stack([Qv - S + 0 * Qv, (Qv - 0.5) ** 2 - 1e-6 + 0 * S], axis=-1)
    p, roots, counts = Q.line_roots(levels, np.array([0.25]), q_grid)
    np.testing.assert_allclose(np.sort(roots), [0.25, 0.499, 0.501], atol=1e-14)
    np.testing.assert_array_equal(counts, [[1, 2]])


def test_locate_kinks_finds_root_order_swap():
    # both levels keep one root each; only their order changes at s = 1/2
    levels = lambda S, Qv: np.stack([Qv - S + 0 * Qv, Qv - (1 - S) + 0 * Qv], axis=-1)
    kinks = Q.locate_kinks(levels, 0.0, 1.0, Q.default_q_grid(0.0, 1.0))
    assert len(kinks) == 1 and kinks[0] == pytest.approx(0.5, abs=1e-12)


def test_split_points_merges_near_duplicates():
    pts = Q.split_points(0.0, 1.0, [0.5, 0.5 + 1e-16, 2.0, -1.0])
    np.testing.assert_array_equal(pts, [0.0, 0.5, 1.0])


# ---------------------------------------------------------------------------
# regions


def test_region_integral_quarter_disk():
    levels = lambda S, Qv: (S * S + Qv * Qv - 1.0)[..., None]
    member = lambda S, Qv: S * S + Qv * Qv < 1.0
    one = lambda S, Qv: np.ones(np.broadcast_shapes(np.shape(S), np.shape(Qv)))
    area = Q.region_integral(one, levels, member, 0.0, 1.0, 0.0, 1.0, tol=1e-12)
    assert area == pytest.approx(math.pi / 4, abs=1e-11)


def test_region_integral_across_order_swap():
    # area between q = s and q = 1 - s over the unit square: int |1 - 2s| = 1/2
    levels = lambda S, Qv: np.stack([Qv - S + 0 * Qv, Qv - (1 - S) + 0 * Qv], axis=-1)
    member = lambda S, Qv: (Qv - S) * (Qv - (1 - S)) < 0
    one = lambda S, Qv: np.ones(np.broadcast_shapes(np.shape(S), np.shape(Qv)))
    val = Q.region_integral(one, levels, member, 0.0, 1.0, 0.0, 1.0, tol=1e-13)
    assert val == pytest.approx(0.5, abs=1e-12)


def test_region_integral_relative_tolerance():
    # a tiny integrand: an absolute tolerance alone would be meaningless
    levels = lambda S, Qv: (S * S + Qv * Qv - 1.0)[..., None]
    member = lambda S, Qv: S * S + Qv * Qv < 1.0
    tiny = lambda S, Qv: 1e-20 * (S + 0 * Qv)
    val = Q.region_integral(tiny, levels, member, 0.0, 1.0, 0.0, 1.0, tol=0.0, rtol=1e-10)
    assert val == pytest.approx(1e-20 / 3, rel=1e-9)


def test_line_integral_1d_indicator():
    val = Q.line_integral_1d(lambda x: x, lambda x: (x - 0.3)[..., None], lambda x: x < 0.3, 0.0, 1.0)
    assert val == pytest.approx(0.045, abs=1e-14)
