import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orlicz_mp.errors import (
    DegenerateIndex,
    NoBracket,
    NonMonotoneDensity,
    OverflowDomain,
    ParamOutOfRange,
    UnknownModel,
)
from orlicz_mp.nfunction import (
    CATALOG_NAMES,
    Density,
    NFunction,
    build_nfunction,
    catalog,
    check_delta2,
    complementary,
    complementary_nfunction,
    default_grid,
    indices,
    midpoint_convex,
)

MODELS = {
    "power": {"p": 4},
    "powersum": {"p": 2, "q": 3},
    "genpower": {"alpha": 1.5},
    "plog": {"p": 2},
    "sinh": {"alpha": 0.5, "beta": 1.0},
    "exp": {},
    "loglinear": {},
}


@pytest.fixture(params=sorted(MODELS))
def model(request):
    return catalog(request.param, MODELS[request.param])


def test_catalog_covers_every_model():
    assert set(CATALOG_NAMES) == set(MODELS)


# -- build_nfunction ---------------------------------------------------------

def test_quadrature_quadratic_at_three():
    phi = build_nfunction(Density(lambda s: np.ones_like(s)))
    assert not phi.has_closed_form
    assert phi(3.0) == pytest.approx(4.5, rel=1e-12)


def test_zero_maps_to_zero(model):
    assert model(0.0) == 0.0
    assert build_nfunction(model.density)(0.0) == 0.0


def test_exponential_density_by_quadrature():
    phi = build_nfunction(Density(lambda s: np.exp(s * s), domain_hint=26.0))
    assert phi(1.0) == pytest.approx((math.e - 1) / 2, rel=1e-12)


def test_nonmonotone_density_rejected():
    # t * phi(t) = t exp(-t) decreases after t = 1
    with pytest.raises(NonMonotoneDensity):
        build_nfunction(Density(lambda s: np.exp(-s), domain_hint=50.0))


def test_overflow_beyond_domain_hint():
    phi = catalog("exp")
    with pytest.raises(OverflowDomain):
        phi(phi.domain_hint * 1.01)
    assert np.isfinite(phi(0.99 * phi.domain_hint))


def test_evenness_and_odd_derivative(model):
    t = np.geomspace(1e-3, min(10.0, model.domain_hint / 2), 50)
    np.testing.assert_array_equal(model(-t), model(t))
    np.testing.assert_array_equal(model.dphi_at(-t), -model.dphi_at(t))


@pytest.mark.parametrize("name", ["power", "powersum", "genpower", "plog", "exp", "loglinear"])
def test_closed_form_matches_quadrature(name):
    closed = catalog(name, MODELS[name])
    quad = build_nfunction(closed.density)
    grid = default_grid(closed)
    grid = grid[closed(grid) < 1e250]
    np.testing.assert_allclose(quad(grid), closed(grid), rtol=1e-9)


def test_nfunction_shape_conditions(model):
    grid = default_grid(model, 400, hi=model.domain_hint / 2)
    vals = model(grid)
    ratio = vals / grid
    assert ratio[0] < 1e-4
    assert ratio[-1] > 1e2
    assert midpoint_convex(model.phi_at, grid)


def test_derivatives_match_finite_differences(model):
    t = np.geomspace(1e-2, min(5.0, model.domain_hint / 4), 30)
    h = 1e-6 * t
    fd1 = (model(t + h) - model(t - h)) / (2 * h)
    fd2 = (model.dphi_at(t + h) - model.dphi_at(t - h)) / (2 * h)
    np.testing.assert_allclose(model.dphi_at(t), fd1, rtol=1e-6)
    np.testing.assert_allclose(model.d2phi_at(t), fd2, rtol=1e-5)


# -- catalog ----------------------------------------------------------------

def test_catalog_power():
    assert catalog("power", p=4)(2.0) == pytest.approx(4.0)


def test_catalog_exp():
    phi = catalog("exp")
    t = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(phi(t), np.expm1(t**2) / 2, rtol=1e-14)


def test_catalog_loglinear():
    phi = catalog("loglinear")
    t = np.array([0.1, 1.0, 7.0])
    np.testing.assert_allclose(phi(t), t * np.log1p(t), rtol=1e-14)


def test_unknown_model():
    with pytest.raises(UnknownModel):
        catalog("cosh")


@pytest.mark.parametrize(
    "name,params",
    [
        ("power", {"p": 1.0}),
        ("powersum", {"p": 3, "q": 2}),
        ("genpower", {"alpha": 1.0}),
        ("genpower", {"alpha": 3.5, "N": 3}),     # needs alpha < N/(N-2) = 3
        ("plog", {"p": 2.5, "N": 3}),              # needs p < N - 1
        ("powersum", {"p": 2, "q": 4, "N": 3}),   # needs q < N
        ("sinh", {"alpha": 1.5, "beta": 1.0}),
        ("power", {}),
        ("power", {"p": 2, "q": 3}),
    ],
)
def test_parameter_ranges(name, params):
    with pytest.raises(ParamOutOfRange):
        catalog(name, params)


# -- complementary ---------------------------------------------------------

def test_complementary_quadratic():
    val, t = complementary(catalog("power", p=2), 3.0)
    assert val == pytest.approx(4.5, rel=1e-12)
    assert t == pytest.approx(3.0, rel=1e-12)


def test_complementary_at_zero(model):
    assert complementary(model, 0.0) == (0.0, 0.0)


def test_complementary_cubic():
    val, t = complementary(catalog("power", p=3), 1.0)
    assert val == pytest.approx(2 / 3, rel=1e-12)
    assert t == pytest.approx(1.0, rel=1e-12)


def test_no_bracket_beyond_saturation():
    phi = catalog("exp")
    with pytest.raises(NoBracket):
        complementary(phi, 2 * float(phi.dphi_at(phi.domain_hint)))


def test_negative_dual_argument():
    with pytest.raises(ValueError):
        complementary(catalog("power", p=2), -1.0)


def test_complementary_type(model):
    tilde = complementary_nfunction(model)
    assert tilde.base is model
    s = model.dphi_at(np.geomspace(1e-3, 3.0, 40))
    np.testing.assert_allclose(tilde.tilde_at(s), complementary(model, s)[0], rtol=1e-13)
    assert tilde(0.0) == 0.0
    assert midpoint_convex(tilde.tilde_at, s)


def test_young_equality_at_conjugate_pairs(model):
    tilde = complementary_nfunction(model)
    s = model.dphi_at(np.geomspace(1e-4, min(20.0, model.domain_hint / 2), 200))
    t = tilde.argmax_at(s)
    np.testing.assert_allclose(s * t, model(t) + tilde(s), rtol=1e-10)


@given(st.floats(0.0, 8.0), st.floats(0.0, 8.0))
def test_young_inequality_power(s, t):
    phi = catalog("power", p=3)
    tilde = complementary_nfunction(phi)
    assert s * t <= phi(t) + tilde(s) + 1e-9 * (1 + s * t)


@given(st.floats(1e-6, 20.0))
def test_conjugate_identity_loglinear(t):
    phi = catalog("loglinear")
    s = phi.dphi_at(t)
    val, _ = complementary(phi, s)
    assert abs(s * t - (phi(t) + val)) <= 1e-9 * max(1.0, s * t)


def test_double_conjugation(model):
    tilde = complementary_nfunction(model)
    again = complementary_nfunction(tilde)
    t = np.geomspace(1e-3, min(10.0, model.domain_hint / 4), 60)
    np.testing.assert_allclose(again(t), model(t), rtol=1e-8)


def test_power_conjugate_closed_form():
    p = 4.0
    q = p / (p - 1)
    s = np.geomspace(1e-4, 1e4, 300)
    val, _ = complementary(catalog("power", p=p), s)
    np.testing.assert_allclose(val, s**q / q, rtol=1e-10)


# -- Delta2 ------------------------------------------------------------------

def test_delta2_quartic():
    res = check_delta2(catalog("power", p=4))
    assert res.satisfied
    assert res.sup_ratio == pytest.approx(16.0, rel=1e-10)


def test_delta2_exp_fails():
    res = check_delta2(catalog("exp"))
    assert not res.satisfied
    assert res.sup_ratio > 1e100


def test_delta2_quadratic():
    res = check_delta2(catalog("power", p=2))
    assert res.satisfied
    assert res.sup_ratio == pytest.approx(4.0, rel=1e-10)


def test_delta2_loglinear_pair():
    phi = catalog("loglinear")
    assert check_delta2(phi).satisfied
    assert not check_delta2(complementary_nfunction(phi)).satisfied


# -- indices ----------------------------------------------------------------

def test_indices_cubic_two_dims():
    rep = indices(catalog("power", p=3), N_dim=2)
    assert rep.l == pytest.approx(3, abs=1e-8)
    assert rep.m == pytest.approx(3, abs=1e-8)
    assert rep.l_star == math.inf


def test_indices_loglinear_ell_is_one():
    rep = indices(catalog("loglinear"))
    assert rep.ell == pytest.approx(1.0, abs=2e-3)
    assert rep.l == pytest.approx(1.0, abs=2e-3)
    assert rep.delta2_Phi and not rep.delta2_tilde


def test_indices_quadratic_three_dims():
    rep = indices(catalog("power", p=2), N_dim=3)
    assert rep.l == pytest.approx(2.0, abs=1e-10)
    assert rep.l_star == pytest.approx(6.0, abs=1e-8)


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0, 7.0])
def test_index_sandwich_power(p):
    rep = indices(catalog("power", p=p), with_delta2=False)
    assert abs(rep.l - p) < 1e-8
    assert abs(rep.m - p) < 1e-8


def test_index_ordering(model):
    rep = indices(model, with_delta2=False)
    assert 1 <= rep.l <= rep.m_check + 1e-12
    assert rep.ell <= rep.m + 1e-12
    assert len(rep.grid) == 2000


def test_powersum_indices():
    rep = indices(catalog("powersum", p=2, q=3), with_delta2=False)
    assert rep.l == pytest.approx(2, abs=1e-5)
    assert rep.m_check == pytest.approx(3, abs=1e-5)


def test_degenerate_index():
    phi = NFunction(Density(lambda s: np.ones_like(s)), phi=lambda t: np.where(t < 1, 0.0, t))
    with pytest.raises(DegenerateIndex):
        indices(phi, grid=np.array([0.5, 2.0]), with_delta2=False)
