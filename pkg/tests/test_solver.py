import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orlicz_mp.discretization import (
    DiscreteFunction,
    EnergyFunctional,
    dom_diagnostics,
    make_mesh,
    random_zero_trace,
)
from orlicz_mp.errors import HypothesisFailed, LambdaTooSmall, NoPositivePlateau
from orlicz_mp.modular import luxemburg_norm
from orlicz_mp.nfunction import catalog
from orlicz_mp.nonlinearity import Nonlinearity, check_hypotheses, model_f, truncate
from orlicz_mp.solver import (
    lambda_star,
    minimize_I,
    mountain_pass,
    plateau,
    solve_two,
    verify_mp_geometry,
)

QUAD = catalog("power", p=2)
QUART = catalog("power", p=4)
PQ = model_f("pq", p=3, q=2)
ONE = model_f("const", c=1.0)


@pytest.fixture(scope="module")
def mesh64():
    return make_mesh(1, (0, 1), 64)


@pytest.fixture(scope="module")
def reference(mesh64):
    wit = lambda_star(QUART, PQ, mesh64)
    rep = solve_two(QUART, PQ, mesh64, 2 * wit.lambda_star, witness=wit)
    return wit, rep


# -- plateau witness ------------------------------------------------------------------

@pytest.mark.parametrize("dim", [1, 2])
def test_plateau_invariants(dim):
    m = make_mesh(dim, None, 16)
    pl = plateau(m, 2.5, 0.25)
    v = pl.profile.values
    assert np.all((v >= 0) & (v <= 2.5))
    assert np.all(v[pl.inner_region] == 2.5) and pl.inner_region.size > 0
    assert pl.profile.zero_trace


def test_witness_linear_rhs_closed_form():
    # Phi = t^2/2, F = t: the trapezoid plateau of height 1 and ramp w has
    # Q = 1/w and int F = 1 - w (P1 and the quadrature are exact here)
    m = make_mesh(1, None, 64)
    for w in (0.125, 0.25, 0.5):
        wit = lambda_star(QUAD, ONE, m, t1=1.0, ramp_width=w)
        assert wit.Q_u0 == pytest.approx(1 / w, rel=1e-13)
        assert wit.F_u0 == pytest.approx(1 - w, rel=1e-13)
        assert wit.lambda_star == pytest.approx(1 / (w * (1 - w)), rel=1e-13)


def test_witness_negative_F_raises():
    neg = model_f("const", c=-1.0)
    with pytest.raises(NoPositivePlateau):
        lambda_star(QUAD, neg, make_mesh(1, None, 16))
    with pytest.raises(NoPositivePlateau):
        lambda_star(QUAD, neg, make_mesh(1, None, 16), t1=1.0)


def test_witness_pq_fixed_plateau(mesh64):
    wit = lambda_star(QUART, PQ, mesh64, t1=2.0, ramp_width=1 / 8)
    assert np.isfinite(wit.lambda_star) and wit.lambda_star > 0
    E = EnergyFunctional(QUART, PQ, 2 * wit.lambda_star, mesh64)
    assert E.value(wit.u0.profile) < 0
    assert E.value(wit.u0.profile) == pytest.approx(wit.energy_at(2 * wit.lambda_star), rel=1e-12)


def test_witness_affine_in_lambda(mesh64):
    wit = lambda_star(QUART, PQ, mesh64)
    lams = np.array([0.5, 1.0, 2.0]) * wit.lambda_star
    vals = np.array([EnergyFunctional(QUART, PQ, lam, mesh64).value(wit.u0.profile) for lam in lams])
    slope, icept = np.polyfit(lams, vals, 1)
    np.testing.assert_allclose(np.polyval([slope, icept], lams), vals, rtol=1e-12, atol=1e-9)
    assert -icept / slope == pytest.approx(wit.lambda_star, rel=1e-8)
    assert abs(vals[1]) < 1e-8 * wit.Q_u0


def test_witness_scan_beats_fixed_level(mesh64):
    scanned = lambda_star(QUART, PQ, mesh64)
    fixed = lambda_star(QUART, PQ, mesh64, t1=2.0)
    assert scanned.lambda_star <= fixed.lambda_star


# -- minimization -----------------------------------------------------------------------

@pytest.mark.parametrize("lam", [1.0, 4.0])
def test_minimize_poisson(lam):
    m = make_mesh(1, None, 32)
    res = minimize_I(EnergyFunctional(QUAD, ONE, lam, m))
    x = m.nodes[:, 0]
    np.testing.assert_allclose(res.u.values, lam * x * (1 - x) / 2, atol=1e-13)
    # I(u) = -(lam^2 / 2) int x(1-x)/2 = -lam^2 / 24, exact for nodal-exact P1 here
    assert res.energy == pytest.approx(-lam**2 / 24 * (1 - 1 / 32**2), rel=1e-10)


def test_minimize_trivial_below_threshold(mesh64):
    wit = lambda_star(QUART, PQ, mesh64)
    res = minimize_I(EnergyFunctional(QUART, PQ, 0.05 * wit.lambda_star, mesh64))
    assert res.trivial and res.energy == 0.0


def test_minimizer_beats_witness(reference):
    wit, rep = reference
    assert rep.I_u1 <= wit.energy_at(rep.lam) < 0


def test_minimize_trace_monotone(mesh64):
    wit = lambda_star(QUART, PQ, mesh64)
    res = minimize_I(EnergyFunctional(QUART, PQ, 2 * wit.lambda_star, mesh64), wit.u0.profile)
    assert np.all(np.diff(res.trace) < 0)
    assert res.residual_norm < 1e-8


def test_critical_point_inequality(reference):
    _, rep = reference
    u1 = rep.u1
    E = EnergyFunctional(QUART, PQ, rep.lam, u1.mesh)
    rng = np.random.default_rng(11)
    x1 = u1.interior
    q1, load = E.Q_vec(x1), E.load_vec(x1)
    for k in range(100):
        v = random_zero_trace(u1.mesh, rng).interior * (0.5 + 20 * rng.random())
        assert E.Q_vec(v) - q1 >= rep.lam * load @ (v - x1) - 1e-6


# -- geometry ------------------------------------------------------------------------

def test_geometry_zero_rhs():
    m = make_mesh(1, None, 32)
    J = EnergyFunctional(QUART, model_f("zero"), 1.0, m)
    geo = verify_mp_geometry(J, r_grid=[0.1, 0.5], samples=50)
    assert geo.holds
    # J = Q and the Luxemburg sphere ||grad u|| = r <= 1 has Q >= r^4 for t^4/4
    assert min(geo.rho_grid) >= 0.1**4 * (1 - 1e-9)


def test_geometry_reference(reference):
    _, rep = reference
    assert rep.geometry.holds and rep.geometry.rho > 0
    assert rep.c >= rep.geometry.rho - 1e-6


def test_geometry_monotone_in_lambda(reference):
    _, rep = reference
    u1 = rep.u1
    r = [0.3 * luxemburg_norm(QUART, u1, of_gradient=True).value]
    rhos = [verify_mp_geometry(EnergyFunctional(QUART, truncate(PQ, u1), lam, u1.mesh), r_grid=r,
                               samples=60).rho for lam in (rep.lam, 2 * rep.lam, 4 * rep.lam)]
    assert rhos[0] >= rhos[1] >= rhos[2]


# -- mountain pass ---------------------------------------------------------------------

def _engineered():
    # one interior node; J(v) = v^2 - 2 v^3 + 0.9 v^4 for the hat function v * phi_1
    F = lambda x, t: 3 * t**2 + 8 * t**3 - 4.5 * t**4  # noqa: E731
    f = lambda x, t: 6 * t + 24 * t**2 - 18 * t**3  # noqa: E731
    df = lambda x, t: 6 + 48 * t - 54 * t**2  # noqa: E731
    rhs = Nonlinearity(f, F, df, name="double-well")
    m = make_mesh(1, None, 2)
    return QUAD, rhs, m


def test_engineered_energy_is_quartic():
    phi, rhs, m = _engineered()
    E = EnergyFunctional(phi, rhs, 1.0, m)
    v = np.linspace(-1, 2, 31)
    np.testing.assert_allclose(E.value_vec(v[:, None]), v**2 - 2 * v**3 + 0.9 * v**4, atol=1e-13)


def test_mountain_pass_matches_grid_oracle():
    phi, rhs, m = _engineered()
    E = EnergyFunctional(phi, rhs, 1.0, m)
    u1 = minimize_I(E, DiscreteFunction(m, [0.0, 1.5, 0.0])).u
    v1 = u1.values[1]
    assert v1 == pytest.approx((6 + np.sqrt(7.2)) / 7.2, rel=1e-10)
    # with one degree of freedom every path from 0 to u1 sweeps [0, v1];
    # the min-max level is the max of J over that interval
    grid = np.linspace(0.0, v1, 2_000_001)
    oracle = np.max(grid**2 - 2 * grid**3 + 0.9 * grid**4)
    J = EnergyFunctional(phi, truncate(rhs, u1), 1.0, m)
    u2, c, state = mountain_pass(J, u1)
    assert abs(c - oracle) < 1e-4
    assert state.morse_index == 1
    assert state.path[0].sup_norm() == 0.0
    np.testing.assert_array_equal(state.path[-1].values, u1.values)
    assert state.level >= 0.0


def test_mountain_pass_rejects_nonnegative_endpoint():
    m = make_mesh(1, None, 16)
    J = EnergyFunctional(QUART, model_f("zero"), 1.0, m)
    u = DiscreteFunction.interpolate(m, lambda x: x * (1 - x))
    with pytest.raises(ValueError):
        mountain_pass(J, u)


# -- full pipeline -----------------------------------------------------------------------

def test_reference_two_solutions(reference):
    _, rep = reference
    assert rep.success, rep.failures
    assert rep.I_u1 < -1e-6 < 1e-6 < rep.c
    assert abs(rep.c - rep.I_u2) < 1e-6
    assert np.all(rep.u2.values <= rep.u1.values + 1e-8)
    assert max(rep.residual_norms) < 1e-6
    assert np.max(np.abs(rep.u1.values - rep.u2.values)) > 1e-4
    assert rep.morse_index == 1


def test_reference_mesh_stability(reference):
    wit, rep = reference
    fine = solve_two(QUART, PQ, make_mesh(1, (0, 1), 128), rep.lam)
    assert fine.success
    assert abs(fine.I_u1 - rep.I_u1) < 0.05 * abs(rep.I_u1)
    assert abs(fine.c - rep.c) < 0.05 * abs(rep.c)


def test_lambda_too_small(reference):
    wit, _ = reference
    mesh = wit.u0.profile.mesh
    with pytest.raises(LambdaTooSmall) as info:
        solve_two(QUART, PQ, mesh, 0.5 * wit.lambda_star, witness=wit)
    rep = info.value.report
    assert rep.status == "lambda_too_small" and rep.u2 is None and rep.c is None


def test_hypothesis_failure_raises(mesh64):
    with pytest.raises(HypothesisFailed):
        solve_two(QUAD, PQ, mesh64, 100.0)


def test_report_serialization(reference, tmp_path):
    _, rep = reference
    rep.write(tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    for key in ("lambda", "lambda_star", "I_u1", "I_u2", "c", "residual_norms", "ordering_ok"):
        assert key in d
    assert d["lambda_star_kind"] == "witness threshold"
    assert d["u1"]["values"] == list(rep.u1.values)
    rep.write_profiles(tmp_path / "p.csv")
    rows = list(csv.reader(open(tmp_path / "p.csv")))
    assert rows[0] == ["x", "u1", "u2"] and len(rows) == 66
    assert float(rows[10][1]) == rep.u1.values[9]


@pytest.mark.parametrize("phi_name", ["loglinear", "exp"])
def test_T2_runs(phi_name):
    phi = catalog(phi_name)
    f = model_f("phipow", phi=phi)
    mesh = make_mesh(1, None, 32)
    wit = lambda_star(phi, f, mesh)
    accepted = []
    rep = solve_two(phi, f, mesh, 2 * wit.lambda_star, profile="T2", witness=wit,
                    callback=accepted.append)
    assert rep.success, rep.failures
    assert rep.profile == "T2"
    for x in accepted[:: max(1, len(accepted) // 50)]:
        d = dom_diagnostics(phi, DiscreteFunction.from_interior(mesh, x))
        assert d.relative_gap < 1e-8


def test_T2_profile_report():
    phi = catalog("loglinear")
    rep = check_hypotheses(model_f("phipow", phi=phi), phi, "T2")
    assert rep.profile == "T2" and rep.holds


@settings(max_examples=10)
@given(st.floats(1.2, 4.0))
def test_witness_energy_decreasing(mult):
    m = make_mesh(1, None, 16)
    wit = lambda_star(QUART, PQ, m)
    assert wit.energy_at(mult * wit.lambda_star) < 0 < wit.energy_at(wit.lambda_star / mult)
