import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from psh_lab import jets, levi, model

PAIRS = [(n, k) for n in (1, 2, 3) for k in range(n + 1)]


def _predicted_spectra(p, n, k):
    x, y = p[:n], p[n:]
    a = float(np.sum(x * x))
    b = float(np.sum(x[:k] ** 2) + np.sum(y[k:] ** 2))
    g = np.sqrt(a * b)
    lam_a = 2 * np.sum(x[:k] ** 2) / g
    lam_b = (a + b) / g
    m0 = np.sort([lam_a, lam_a] + [lam_b] * (2 * n - 2))
    lam1 = 2 * np.sum(x[:k] ** 2) + a + b
    m1 = np.sort([0.0] * (2 * n - 2) + [lam1, lam1])
    return m0, m1


@pytest.mark.parametrize("n,k", PAIRS)
def test_levi_spectrum_matches_prediction(n, k):
    # independent route: the full eigenvalue multiset, no eigenvectors involved
    rng = np.random.default_rng([n, k])
    pts = levi.random_points(n, k, 50, rng)
    f = model.sqrt_product_field(n, k)
    L = jets.levi_matrix(f, pts)
    M1 = jets.grad_form_matrix(f, pts)
    for p, Lp, Mp in zip(pts, L, M1):
        m0, m1 = _predicted_spectra(p, n, k)
        s = max(1.0, np.abs(m0).max())
        np.testing.assert_allclose(np.linalg.eigvalsh(Lp), m0, atol=1e-9 * s)
        np.testing.assert_allclose(np.linalg.eigvalsh(Mp), m1, atol=1e-9 * max(1.0, m1.max()))


@pytest.mark.parametrize("n,k", PAIRS)
def test_eigenstructure_residuals(n, k):
    rng = np.random.default_rng([7, n, k])
    pts = levi.random_points(n, k, 500, rng)
    assert levi.verify_lemma_M0(pts, n, k).max_residual <= 1e-8
    m1 = levi.verify_lemma_M1(pts, n, k)
    assert m1.max_residual <= 1e-8
    assert m1.extra["rank_residual"].max() <= 1e-8
    assert levi.verify_ddcf2(pts, n, k).max() <= 1e-8


def test_eigenvectors_by_hand_n1():
    # n = 1, k = 0, point (x, y) = (1, 2): a = 1, b = 4, v0 = (a y, b x) = (2, 4)
    v, w = levi.eigvectors_M0(np.array([[1.0, 2.0]]), 1, 0)
    np.testing.assert_allclose(v[0], [2.0, 4.0])
    np.testing.assert_allclose(w[0], -jets.apply_J(v)[0])
    v1, _ = levi.eigvectors_M1(np.array([[1.0, 2.0]]), 1, 0)
    np.testing.assert_allclose(v1[0], [2.0, -4.0])


def test_gradient_eigvectors_span_gradient_plane():
    # M1 = g g^T + (Jg)(Jg)^T acts on span{g, Jg}; v1 must lie there
    n, k = 3, 1
    pts = levi.random_points(n, k, 20, np.random.default_rng(3))
    v1, w1 = levi.eigvectors_M1(pts, n, k)
    g = model.sqrt_product_field(n, k).jet(pts).grad
    for v, gp in zip(np.concatenate([v1, w1]), np.concatenate([g, g])):
        Q, _ = np.linalg.qr(np.stack([gp, jets.apply_J(gp)], axis=1))
        assert np.linalg.norm(v - Q @ (Q.T @ v)) <= 1e-10 * np.linalg.norm(v)


def test_points_inside_tube_rejected():
    with pytest.raises(ValueError, match="tube"):
        levi.verify_lemma_M0(np.array([[0.0, 0.0, 0.5, 0.5]]), 2, 0)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(PAIRS), st.data())
def test_lemma_residuals_at_random_points(pair, data):
    n, k = pair
    p = data.draw(arrays(float, (2 * n,), elements=st.floats(-3.0, 3.0)))
    a, b = model._rhos_of_points(p[None], k)
    assume(a[0] > 1e-4 and b[0] > 1e-4)
    assert levi.verify_lemma_M0(p[None], n, k).max_residual <= 1e-8
    assert levi.verify_lemma_M1(p[None], n, k).max_residual <= 1e-8
    assert levi.verify_ddcf2(p[None], n, k)[0] <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(PAIRS), st.floats(0.1, 10.0), st.integers(0, 2**31))
def test_sqrt_product_is_homogeneous(pair, lam, seed):
    # sqrt(ab) is 2-homogeneous, so its Levi form is scale invariant
    n, k = pair
    p = levi.random_points(n, k, 1, np.random.default_rng(seed))
    f = model.sqrt_product_field(n, k)
    np.testing.assert_allclose(jets.levi_matrix(f, lam * p), jets.levi_matrix(f, p), rtol=1e-9, atol=1e-9)


# ---------------------------------------------------------------------------
# the variety V


@pytest.mark.parametrize("n,k", PAIRS + [(4, 2)])
def test_variety_samples_lie_on_V(n, k):
    s = levi.sample_variety_V(n, k, 100, np.random.default_rng(0))
    assert s.on_variety.all()
    assert s.residuals.max() <= 1e-10
    if n - k == 2:
        assert any(src.startswith("plane") for src in s.source)


@pytest.mark.parametrize("n,k", [(2, 0), (3, 1), (3, 0), (4, 2)])
def test_product_degenerate_on_V_positive_off_V(n, k):
    rng = np.random.default_rng(5)
    on_v = levi.sample_variety_V(n, k, 100, rng)
    off_v = levi.sample_off_V(n, k, 100, 0.1, rng)
    grid = levi.random_points(n, k, 500, rng)
    rep = levi.verify_strict_psh_prod(n, k, grid, on_v, off_v)
    assert rep.passed, rep


def test_off_V_samples_respect_margin():
    s = levi.sample_off_V(2, 0, 50, 0.2, np.random.default_rng(1))
    assert s.residuals.max(axis=1).min() >= 0.2
    assert not s.on_variety.any()


def test_variety_rejects_bad_k():
    with pytest.raises(ValueError):
        levi.sample_variety_V(2, 3, 5, np.random.default_rng(0))


# ---------------------------------------------------------------------------
# counterexample


def test_counterexample_exp_cutoff():
    res = levi.counterexample_scan(model.ExpCutoff())
    assert res.negative_found and res.min_eig <= -1e-6
    assert res.deficiency_negative and res.slice_min_eig < 0
    assert 0 < res.witness[0] < 1 and 0.5 <= np.linalg.norm(res.witness[2:]) <= 1.5


def test_counterexample_slice_matches_deficiency_sign():
    # on y = (0, 1) the Levi determinant is twice the deficiency
    cut = model.ExpCutoff()
    f = model.abouzaid_field(2, cut)
    t = np.linspace(0.05, 0.95, 19)
    pts = np.zeros((len(t), 4))
    pts[:, 0] = t
    pts[:, 3] = 1.0
    L = jets.levi_matrix(f, pts)
    neg = jets.eigenvalues(L)[:, 0] < -1e-12
    np.testing.assert_array_equal(neg, model.deficiency(cut, t) < 0)


def test_counterexample_rejects_vanishing_cutoff():
    with pytest.raises(ValueError, match="vanishes"):
        levi.counterexample_scan(model.ExpCutoff(), x_range=(-1.0, -0.1))
