import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from ewbench import closed_form as cf
from ewbench import rk45, solver
from ewbench.bundle import validate_bundle_spec
from ewbench.solver import ShootingState

from conftest import REF_A, REF_G2, REF_L

S0 = validate_bundle_spec({"n": 2, "epsilon": 1, "k": 0, "q": 1})
S1 = validate_bundle_spec({"n": 2, "epsilon": 1, "k": 1, "q": 2})


def test_harmonic_event():
    d = 1e-3
    L, end = solver.integrate_until_f_zero(ShootingState(d, math.sin(d), math.cos(d), 1.0, 0.0), S1, 1.0,
                                           rhs=rk45.harmonic_rhs)
    assert abs(L - math.pi) < 1e-9
    assert abs(end.f) < 1e-12
    assert end.fp == pytest.approx(-1.0, abs=1e-9)


def test_no_return():
    # f'' = -f never fires within a short horizon
    with pytest.raises(solver.NoReturn):
        solver.integrate_until_f_zero(ShootingState(0.1, 0.1, 1.0, 1.0, 0.0), S1, 1.0, rhs=rk45.harmonic_rhs,
                                      t_max=2.0)


def test_blow_up():
    with pytest.raises(solver.BlowUp):
        # g grows linearly and crosses the threshold long before f returns to zero
        solver.integrate_until_f_zero(ShootingState(0.1, 0.1, 1.0, 1.0, 1.0), S1, 1.0, rhs=rk45.harmonic_rhs,
                                      blowup=1.5)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 3), st.floats(-2, 2), st.floats(0.1, 3), st.floats(-2, 2), st.floats(0, 3),
       st.sampled_from([(0, 1), (1, 2), (1, 1), (2, 3)]), st.sampled_from([-1, 0, 1]), st.integers(2, 4))
def test_back_substitution(f, fp, g, gp, C, kq, eps, n):
    s = 2 * kq[0] / kq[1]
    fpp, gpp = solver.second_derivatives(f, fp, g, gp, n, float(eps), s, C)
    lam0, lam1, lam2 = cf.eigenvalues_at(f, fp, fpp, g, gp, gpp, n, float(eps), s)
    scale = max(1.0, abs(lam0), abs(lam1), abs(lam2))
    assert abs(lam0 - lam2) < 1e-12 * scale
    assert abs(lam0 - lam1 - C * C * f * f) < 1e-12 * scale


def test_rhs_regression():
    # s = 0, C = 0, f = g = 1, f' = g' = 0.3: g'' = gQ = 0.09, f'' = f(-g''/g + Q - 2 + g'^2) = -1.91
    out = solver.ode_rhs(ShootingState(0.5, 1.0, 0.3, 1.0, 0.3), S0, 0.0)
    np.testing.assert_allclose(out, (0.3, -1.91, 0.3, 0.09), atol=1e-15)


def test_degenerate_state():
    with pytest.raises(solver.DegenerateState):
        solver.ode_rhs(ShootingState(0.5, 1e-14, 1.0, 1.0, 0.0), S1, 1.0)


def test_series_product_case():
    # s = 0, C = 0, g(0) = 1, g2 = 0: g = 1 and f = sin(sqrt 2 t)/sqrt 2 solve the system exactly
    ser = solver.axis_series(1.0, 0.0, 0.0, S0)
    for t in (1e-3, 1e-2, 0.1):
        st_ = ser.state(t)
        assert st_.f == pytest.approx(math.sin(math.sqrt(2) * t) / math.sqrt(2), abs=1e-12)
        assert st_.g == 1.0 and st_.gp == 0.0
    L, end = solver.integrate_until_f_zero(ser.state(1e-3), S0, 0.0)
    assert L == pytest.approx(math.pi / math.sqrt(2), abs=1e-9)
    assert end.fp == pytest.approx(-1.0, abs=1e-9)


def test_series_keeps_free_g2():
    for g2 in (-0.3, 0.0, 0.7):
        ser = solver.axis_series(0.8, g2, 1.3, S1)
        assert ser.g_coeffs[2] == g2 and ser.f_coeffs[1] == 1.0


def test_series_self_consistency():
    a, g2, C = REF_A, REF_G2, 1.0
    delta = solver.default_delta(a, C)
    ser = solver.axis_series(a, g2, C, S1)
    y0 = ser.state(delta / 2).as_array()
    sol = solve_ivp(lambda t, y: solver.ode_rhs(ShootingState.from_array(t, y), S1, C), (delta / 2, delta), y0,
                    method="DOP853", rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(sol.y[:, -1], ser.state(delta).as_array(), atol=1e-10)


def test_series_axis_limits():
    ser = solver.axis_series(REF_A, REF_G2, 1.0, S1)
    for d in (1e-2, 1e-3, 1e-4):
        assert ser.state(d).f / d == pytest.approx(1.0, abs=2 * d)
    fpp, _ = ser.second(np.array([1e-2, 1e-4, 1e-6]))
    assert abs(fpp[2]) < abs(fpp[1]) < abs(fpp[0])


def test_series_diverged():
    with pytest.raises(solver.SeriesDiverged):
        solver.axis_series(0.0, 0.0, 1.0, S1)


def test_reference_shot_closes():
    res = solver.shooting_residual(REF_A, 1.0, S1, g2=REF_G2)
    assert np.all(np.abs(res) < 1e-9)
    shot = solver.shoot(S1, REF_A, REF_G2, 1.0)
    assert shot.L == pytest.approx(REF_L, abs=1e-8)
    assert shot.end.fp < 0


def test_residual_continuity_and_structure():
    ms = solver.matching_structure(S1, REF_A, REF_G2, 1.0)
    assert ms["rank"] == 1
    assert ms["family_dimension_mod_scale"] == 1
    # the homothety (a, g2, C) -> (mu a, g2/mu, C/mu^2) leaves every condition fixed
    assert ms["homothety_direction_residual"] < 1e-6
    r0 = solver.shooting_residual(REF_A, 1.0, S1, g2=REF_G2)[0]
    r1 = solver.shooting_residual(REF_A + 1e-6, 1.0, S1, g2=REF_G2)[0]
    assert abs(r1 - r0) < 1e-5


def test_homothety():
    mu = 1.7
    a = solver.shoot(S1, REF_A, REF_G2, 1.0)
    b = solver.shoot(S1, mu * REF_A, REF_G2 / mu, 1.0 / mu**2)
    assert b.L == pytest.approx(mu * a.L, rel=1e-9)
    assert b.end.fp == pytest.approx(a.end.fp, abs=1e-9)


def test_scan_brackets_sign_change():
    vals, roots = solver.scan_g2(S1, REF_A, 1.0)
    finite = vals[np.isfinite(vals)]
    assert np.any(finite > 0) and np.any(finite < 0)
    assert any(abs(r["g2"] - REF_G2) < 1e-9 for r in roots)


@pytest.mark.parametrize("eps", [0, -1])
def test_no_roots_for_nonpositive_epsilon(eps):
    spec = S1.replace(epsilon=eps)
    assert solver.bracket_g2(spec, 0.5, 1.0) == []
    with pytest.raises(solver.NoConvergence):
        solver.solve(spec, 0.5, 1.0)


def test_solve_reference(solution64):
    sol = solution64
    assert sol.certified
    assert sol.g2 == pytest.approx(REF_G2, abs=1e-12)
    assert sol.L == pytest.approx(REF_L, abs=1e-10)
    assert sol.certificate["newton"]["final_residual_norm"] < 1e-12


def test_solve_validates_guesses():
    with pytest.raises(ValueError):
        solver.solve(S1, -1.0, 1.0)
    with pytest.raises(ValueError):
        solver.solve(S1, 0.5, 1.0, unknowns=("L",))


def test_critical_point(solution64):
    rep = solver.critical_point_check(solution64)
    assert rep["passed"]
    by = {c["name"]: c for c in rep["checks"]}
    assert by["sec4-critical-lambda1-positive"]["value"] > 0
    # s = 1 happens to give a profile symmetric about L/2
    assert abs(rep["t0"] - 0.5 * solution64.L) < 1e-8


def test_critical_point_needs_certificate(solution64):
    uncertified = solver.SolutionProfile(S1, solution64.a, solution64.g2, 1.0, solution64.L, solution64.delta,
                                         solution64.jet)
    with pytest.raises(solver.NotCertified):
        solver.critical_point_check(uncertified)


def test_projective_not_certified():
    with pytest.raises(solver.NoConvergence):
        solver.solve(S1.replace(topology="ProjectiveSpace"), 0.5, 1.0)


def test_small_sweep():
    res = solver.sweep(S1, 0.3, 3.0, 0.1, 3.0, cells=3, workers=1)
    assert len(res.cells) == 9
    assert res.root_count >= 1
    lines = res.to_csv().splitlines()
    assert lines[0] == solver.CSV_SWEEP_HEADER and len(lines) == 10
    assert res.summary()["roots"] == res.root_count


def test_sweep_parallel_matches_serial():
    a = solver.sweep(S1, 0.5, 2.0, 0.5, 2.0, cells=2, workers=1)
    b = solver.sweep(S1, 0.5, 2.0, 0.5, 2.0, cells=2, workers=2)
    assert a.to_csv() == b.to_csv()


@pytest.mark.parametrize("args", [(2.0, 1.0, 0.1, 1.0, 4), (0.1, 1.0, 0.0, 1.0, 4), (0.1, 1.0, 0.1, 1.0, 0)])
def test_sweep_bad_range(args):
    with pytest.raises(solver.SweepRangeError):
        solver.sweep(S1, *args)
