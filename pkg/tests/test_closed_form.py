import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ewbench import closed_form as cf
from ewbench import oracle as orc
from ewbench.bundle import validate_bundle_spec
from ewbench.profiles import make_grid, sample_profile


def spec(n=2, eps=1, k=1, q=2):
    return validate_bundle_spec({"n": n, "epsilon": eps, "k": k, "q": q})


def test_product_example():
    jet = sample_profile(make_grid(math.pi, 33), math.sin, lambda t: 1.0)
    mid = 16  # t = pi/2
    tri = cf.ricci_eigenvalues(jet, spec(k=0, q=1), mid)
    np.testing.assert_allclose(tri.as_tuple(), (1.0, 1.0, 2.0), atol=1e-10)


def test_linear_fibre_example():
    # f = t, g = 1 at t = 1 with s = 2
    lam = cf.eigenvalues_at(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 2, 1.0, 2.0)
    np.testing.assert_allclose(lam, (0.0, 2.0, 0.0), atol=1e-15)


def test_matches_oracle_at_one_point():
    f, g = math.sin, lambda t: 2 + math.cos(t)
    field = orc.build_patch_metric(f, g, spec())
    le = orc.labeled_ricci_eigenvalues(field, orc.PatchPoint(1.0, 0.4, 0.3, -0.2))
    closed = cf.eigenvalues_at(math.sin(1), math.cos(1), -math.sin(1), g(1), -math.sin(1), -math.cos(1), 2, 1.0, 1.0)
    for num, ref in zip(le.as_triple(), closed):
        assert abs(num - ref) / abs(ref) < 1e-6


def test_singular_endpoint():
    jet = sample_profile(make_grid(math.pi, 16), math.sin, lambda t: 1.0)
    with pytest.raises(cf.SingularPoint):
        cf.ricci_eigenvalues(jet, spec(), 0)


def test_einstein_profile_has_zero_residuals():
    # S^2 x S^2 with equal radii: f = sin(2t)/2, g^2 = 1/2, s = 0; all eigenvalues 4
    jet = sample_profile(make_grid(math.pi / 2, 40), lambda t: 0.5 * math.sin(2 * t), lambda t: math.sqrt(0.5))
    G1, G2 = cf.gauduchon_residuals(jet, spec(k=0, q=1), 0.0)
    # sampled derivatives: f''/f next to the zero of f amplifies round-off to ~1e-9
    assert np.max(np.abs(G1)) < 1e-8 and np.max(np.abs(G2)) < 1e-8


def test_gauduchon_example():
    jet = sample_profile(make_grid(math.pi, 33), math.sin, lambda t: 1.0)
    G1, G2 = cf.gauduchon_residuals(jet, spec(k=0, q=1), 1.0)
    assert abs(G1[15] + 1) < 1e-10 and abs(G2[15] + 1) < 1e-10  # interior index 15 is node 16


def test_gray_constant_residual():
    same = [cf.EigenTriple(1.0, 2.0, 1.0)] * 5
    assert cf.gray_constant_residual(same, spec()) == 0.0
    s3 = spec(n=3, k=1, q=3)  # m = 6: coefficient of lambda0 is 2
    bumped = list(same)
    bumped[2] = cf.EigenTriple(1.0 + 1e-3, 2.0, 1.0)
    assert cf.gray_constant_residual(bumped, s3) >= 2e-3 * (1 - 1e-9)


def test_index_bridge():
    tri = cf.EigenTriple(3.0, 5.0, 3.0)
    assert tri.killing == 5.0 and tri.other == 3.0
    np.testing.assert_allclose(cf.gray_combination(tri.killing, tri.other, 4), 10.0)


def test_eigenvalues_from_scalar():
    other, killing = cf.eigenvalues_from_scalar(6.0, 2.0, 4)
    assert other == pytest.approx(5 / 3) and killing == pytest.approx(1.0)
    assert 3 * other + killing == pytest.approx(6.0)
    assert cf.eigenvalues_from_scalar(0.0, 0.0, 6) == (0.0, 0.0)


@given(st.floats(-50, 50), st.floats(-50, 50), st.integers(3, 12))
def test_scalar_round_trip(tau, C0, m):
    other, killing = cf.eigenvalues_from_scalar(tau, C0, m)
    assert (m - 4) * other + 2 * killing == pytest.approx(C0, abs=1e-9)
    assert (m - 1) * other + killing == pytest.approx(tau, abs=1e-9)


def test_lambda_bar():
    assert cf.lambda_bar(1.0, 0.0, 0.0, 4) == 2.0
    assert cf.lambda_bar(1.0, 0.0, 4.0, 4) == -2.0


def test_conformal_scalar_and_weyl_gap():
    assert cf.conformal_scalar(1.0, 4) == 4.0
    assert cf.conformal_scalar(0.0, 6) == 0.0
    assert cf.weyl_gap_from_killing(2.0, 2.0, 0.0, 4) == 0.0
    assert cf.weyl_gap_from_killing(3.0, 2.0, 2.0, 4) == 0.0


def test_c_norm():
    assert cf.c_norm(4) == pytest.approx(math.sqrt(2))
    # the canonical normalization gives C_gap = 1: (m - 2)/4 c^2 = 1
    for m in (4, 6, 8):
        assert (m - 2) / 4 * cf.c_norm(m) ** 2 == pytest.approx(1.0)
    with pytest.raises(ValueError):
        cf.WeylConstants(1.0, 0.0, np.zeros(3), 1.0, 4)


@settings(max_examples=30)
@given(st.floats(0.1, 3), st.floats(-2, 2), st.floats(-5, 5), st.floats(0.2, 3), st.floats(-2, 2),
       st.floats(-5, 5), st.integers(-4, 4))
def test_sign_of_k_irrelevant(f, fp, fpp, g, gp, gpp, k):
    a = cf.eigenvalues_at(f, fp, fpp, g, gp, gpp, 2, 1.0, 2 * k / 3)
    b = cf.eigenvalues_at(f, fp, fpp, g, gp, gpp, 2, 1.0, -2 * k / 3)
    assert a == b


def test_reflection_symmetry():
    L = 2.0
    grid = make_grid(L, 31)
    f = lambda t: math.sin(math.pi * t / L) * (1.2 + math.cos(math.pi * t / L) ** 2)
    g = lambda t: 1.5 + 0.2 * math.cos(2 * math.pi * t / L)
    jet = sample_profile(grid, f, g)
    lam = cf.eigenvalue_field(jet, spec())
    for field in lam:
        np.testing.assert_allclose(field[1:-1], field[1:-1][::-1], rtol=1e-9, atol=1e-9)


def test_eigenvalue_csv():
    jet = sample_profile(make_grid(math.pi, 16), math.sin, lambda t: 2 + math.cos(t))
    rows = cf.eigenvalue_csv(jet, spec()).splitlines()
    assert rows[0] == "t,lambda0,lambda1,lambda2"
    assert len(rows) == 17
