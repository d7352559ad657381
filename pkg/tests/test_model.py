import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psh_lab import jets, model
from psh_lab.model import ModelParams, RegionLabel


# ---------------------------------------------------------------------------
# cutoff


def test_chi_pieces():
    t = np.array([0.0, 0.1, 0.5, 0.75, 0.9, 3.0])
    np.testing.assert_array_equal(model.chi(t), [0.0, 0.1, 0.5, 1.0, 1.0, 1.0])


def test_chi_midpoint_value():
    # the blend equals 1/2 at the band midpoint: chi = (t + 1) / 2
    assert model.chi(np.array([0.625]))[0] == pytest.approx(0.8125, abs=1e-15)


def test_chi_fast_path_matches_derivatives():
    t = np.linspace(0, 1.2, 2001)
    np.testing.assert_array_equal(model.chi(t), model.chi_derivatives(t)[0])


def test_chi_derivatives_match_differences():
    t = np.linspace(0.51, 0.74, 200)
    c, c1, c2 = model.chi_derivatives(t)
    h = 1e-6
    np.testing.assert_allclose(c1, (model.chi(t + h) - model.chi(t - h)) / (2 * h), atol=1e-6)
    d1p = model.chi_derivatives(t + h)[1]
    d1m = model.chi_derivatives(t - h)[1]
    np.testing.assert_allclose(c2, (d1p - d1m) / (2 * h), atol=1e-4 * max(1, np.abs(c2).max()))


def test_chi_is_smooth_across_band_edges():
    for edge in (0.5, 0.75):
        lo = model.chi_derivatives(np.array([edge - 1e-3]))
        hi = model.chi_derivatives(np.array([edge + 1e-3]))
        for a, b in zip(lo, hi):
            assert abs(a[0] - b[0]) < 5e-3


@settings(max_examples=80, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_chi_nondecreasing_and_bounded(a, b):
    lo, hi = sorted((a, b))
    c_lo, c_hi = model.chi(np.array([lo, hi]))
    assert c_lo <= c_hi + 1e-15
    assert 0.0 <= c_lo <= 1.0
    assert model.chi_derivatives(np.array([a]))[1][0] >= 0.0


def test_chi_rejects_negative():
    with pytest.raises(ValueError):
        model.chi(np.array([-0.1]))


def test_exp_deficiency_closed_form():
    t = np.linspace(0.05, 0.99, 50)
    want = np.exp(-2 / t) * (2 - (1 + 2 * t) / t**4)
    np.testing.assert_allclose(model.deficiency(model.ExpCutoff(), t), want, rtol=1e-12)


def test_blend_deficiency_positive_below_half():
    # identity cutoff: 2 t^2 - 2 > ... stays negative only for t < 1
    t = np.linspace(0.01, 0.49, 20)
    np.testing.assert_allclose(model.deficiency(model.BlendCutoff(), t), 2 * t * t - 2, rtol=1e-14)


# ---------------------------------------------------------------------------
# parameters


def test_params_reject_k_above_n():
    with pytest.raises(ValueError, match="0 <= k <= n"):
        ModelParams(n=1, k=2)


@pytest.mark.parametrize("kw", [{"r": 0.0}, {"D": -1.0}, {"C0": -1.0}, {"n": 0}, {"n": 1.5}])
def test_params_reject_bad_values(kw):
    with pytest.raises(ValueError):
        ModelParams(**{"n": 1, **kw})


def test_params_clamp_D_with_warning():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        p = ModelParams(n=1, D=0.8)
    assert p.D == 0.5
    assert any("clamped" in str(x.message) for x in w)


def test_params_default_s_and_with():
    p = ModelParams(n=2, r=0.4, D=0.25)
    assert p.s == pytest.approx(0.5 * 0.25 * 0.4)
    q = p.with_(D=0.1)
    assert q.s == pytest.approx(0.5 * 0.1 * 0.4)
    with pytest.raises(ValueError):
        ModelParams(n=1, r=1.0, D=0.2, s=0.3)


# ---------------------------------------------------------------------------
# interpolants


def _pts(n, count, seed, scale=1.0):
    return np.random.default_rng(seed).normal(size=(count, 2 * n)) * scale


@pytest.mark.parametrize("n,k", [(1, 0), (2, 1), (3, 3)])
def test_beta1_is_product_near_origin(n, k):
    p = _pts(n, 200, 0, 0.2)
    a, b = model._rhos_of_points(p, k)
    keep = np.maximum(a, b) <= 0.5
    np.testing.assert_allclose(model.beta1_field(n, k).value(p[keep]), (a * b)[keep], rtol=1e-14)


def test_beta1_is_one_far_out():
    p = np.array([[2.0, 0.0, 0.0, 3.0]])
    assert model.beta1_field(2, 0).value(p)[0] == 1.0


@pytest.mark.parametrize("r", [0.3, 0.1, 0.03])
def test_beta_r_scaling(r):
    n, k = 2, 1
    p = _pts(n, 100, 1, 0.5)
    lhs = model.beta_r_field(n, k, r).value(r * p)
    rhs = r * r * model.beta1_field(n, k).value(p)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-13, atol=1e-18)


def test_rho2_uses_first_k_x_and_remaining_y():
    x = [np.array(1.0), np.array(2.0)]
    y = [np.array(3.0), np.array(4.0)]
    assert model.rho2(x, y, 1) == 1.0 + 16.0
    assert model.rho2(x, y, 0) == 9.0 + 16.0
    assert model.rho1(x, y, 1) == 5.0


def test_h_formula_is_squared_modification():
    p_ = ModelParams(n=1, k=0, r=0.5, D=0.2, C0=3.0)
    pts = np.array([[0.01, 0.05], [0.03, 0.2], [0.3, 0.02], [0.05, 0.05]])
    assert model.in_U(pts, p_).all()
    hp = model.hpre_field(p_).value(pts)
    c = p_.C0 / p_.r
    np.testing.assert_allclose(model.h_duval_field(p_).value(pts), (np.sqrt(hp) + c * hp) ** 2, rtol=1e-14)
    np.testing.assert_allclose(model.sqrt_h_field(p_).value(pts), np.sqrt(hp) + c * hp, rtol=1e-14)


def test_hpre_on_collars_is_distance_squared():
    p_ = ModelParams(n=1, k=0, r=0.5, D=0.2)
    on_l1_collar = np.array([[0.05, 0.9]])  # rho1 small, rho2 >= r^2
    on_l2_collar = np.array([[0.9, 0.05]])
    assert model.region_classify(on_l1_collar, p_)[0] == RegionLabel.COLLAR_L1
    assert model.region_classify(on_l2_collar, p_)[0] == RegionLabel.COLLAR_L2
    assert model.hpre_field(p_).value(on_l1_collar)[0] == pytest.approx(0.05**2)
    assert model.hpre_field(p_).value(on_l2_collar)[0] == pytest.approx(0.05**2)


def test_region_labels():
    p_ = ModelParams(n=1, k=0, r=0.5, D=0.2)
    pts = np.array([[0.0, 0.0], [0.2, 0.05], [0.6, 0.6], [0.3, 0.09]])
    labels = model.region_classify(pts, p_)
    assert labels[0] == RegionLabel.CORE
    assert labels[2] == RegionLabel.OUTSIDE
    assert labels[3] == RegionLabel.INTERMEDIATE
    assert model.region_classify(np.array([0.0, 0.0]), p_) == RegionLabel.CORE
    np.testing.assert_array_equal(model.in_U(pts, p_), labels != RegionLabel.OUTSIDE)


def test_fields_reject_points_outside_domain():
    p_ = ModelParams(n=1, k=0, r=0.5, D=0.2)
    with pytest.raises(jets.SmoothDomainError):
        model.h_duval_field(p_).jet(np.array([[0.6, 0.6]]))
    with pytest.raises(jets.SmoothDomainError):
        model.sqrt_product_field(1).jet(np.array([[0.0, 0.3]]))


def test_model_fields_registry():
    fields = model.model_fields(ModelParams(n=2, k=1))
    assert len(fields) == 13
    assert all(f.n == 2 for f in fields.values())


def test_abouzaid_exp_vanishes_for_nonpositive_x1():
    f = model.abouzaid_field(2, model.ExpCutoff())
    pts = np.array([[-0.3, 0.0, 0.2, 1.0], [0.0, 1.0, 1.0, 1.0]])
    np.testing.assert_array_equal(f.value(pts), 0.0)
    np.testing.assert_array_equal(f.jet(pts).hess, 0.0)
