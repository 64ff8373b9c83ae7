"""Acceptance criteria 1-9; each test prints one PASS/FAIL line (visible with or without -s)."""

import time

import numpy as np
import pytest

from ewbench import closed_form as cf
from ewbench import solver, verify
from ewbench.bundle import validate_bundle_spec

from conftest import REF_A


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}")
        assert ok, detail
    return emit


def _checks(sol):
    return {c["name"]: c for c in sol.certificate["checks"]}


def test_criterion_1_oracle_equivalence(report):
    start = time.perf_counter()
    rep = verify.formula_check(profiles=5, points=20, seed=0, tol=1e-6)
    elapsed = time.perf_counter() - start
    worst = {r["s"]: max(r["max_rel_error"].values()) for r in rep["runs"]}
    ok = rep["passed"] and rep["max_rel_error"] < 1e-6 and elapsed < 60
    report(1, "closed form vs oracle eigenvalues, s in {0,1,2}, 5 profiles x 20 points", ok,
           f"max rel error per s {worst}, {elapsed:.1f} s")


def test_criterion_2_solver_existence(timed_solution64, report):
    sol, elapsed = timed_solution64
    by = _checks(sol)
    values = {k: by[k]["value"] for k in ("sec4-boundary", "sec4-gauduchon-G1", "sec4-gauduchon-G2",
                                          "thm1.3a-gray-constant")}
    ok = (sol.certified and values["sec4-boundary"] < 1e-9 and values["sec4-gauduchon-G1"] < 1e-8
          and values["sec4-gauduchon-G2"] < 1e-8 and values["thm1.3a-gray-constant"] < 1e-7 and elapsed < 60)
    report(2, "n=2, s=1, eps=1 sphere bundle solve is certified", ok,
           ", ".join(f"{k}={v:.2e}" for k, v in values.items()) + f", {elapsed:.1f} s")


def test_criterion_3_einstein_weyl(solution64, report):
    c = _checks(solution64)["eq1.4-einstein-weyl"]
    report(3, "Einstein-Weyl residual at 20 oracle points", c["value"] < 1e-5 and c["points"] == 20,
           f"max frame residual {c['value']:.2e}")


def test_criterion_4_killing_tensor(solution64, report):
    c = _checks(solution64)["killing-tensor"]
    ok = c["value"] < 1e-5 and c["points"] == 10 and c["trials"] == 50
    report(4, "Killing tensor T = S - Lambda Id, 50 vectors x 10 points", ok, f"max residual {c['value']:.2e}")


def test_criterion_5_j_invariance(solution64, report):
    by = _checks(solution64)
    one_one, skew = by["sec3-one-one"], by["sec3-weyl-ricci-skew"]
    ok = one_one["value"] < 1e-6 and one_one["points"] == 20 and skew["value"] < 1e-4
    report(5, "d omega is (1,1); skew part of rho^D proportional to d omega", ok,
           f"(1,1) residual {one_one['value']:.2e}, factor {skew['factor']:.10f} (matches {skew['matches']}), "
           f"relative spread {skew['value']:.2e}")


def test_criterion_6_positivity_of_epsilon(report):
    counts = {}
    start = time.perf_counter()
    for eps in (0, -1, 1):
        spec = validate_bundle_spec({"n": 2, "epsilon": eps, "k": 1, "q": 2})
        counts[eps] = solver.sweep(spec, cells=40).root_count
    elapsed = time.perf_counter() - start
    ok = counts[0] == 0 and counts[-1] == 0 and counts[1] >= 1
    report(6, "40x40 sweeps flag roots only for eps = 1", ok,
           f"roots eps=0: {counts[0]}, eps=-1: {counts[-1]}, eps=1: {counts[1]}, {elapsed:.0f} s")


def test_criterion_7_conformal_scalar(solution64, report):
    lam0, lam1, _ = cf.eigenvalue_field(solution64.jet, solution64.spec)
    scal = cf.conformal_scalar(lam1, solution64.spec.m)
    report(7, "m * lambda_killing >= -1e-9 at all nodes", bool(np.min(scal) >= -1e-9),
           f"min {np.min(scal):.6f} over {scal.size} nodes")


def test_criterion_8_critical_point(solution64, report):
    rep = solver.critical_point_check(solution64, tol=1e-6)
    detail = ", ".join(f"{c['name']}={c['value']:.2e}" for c in rep["checks"])
    report(8, "critical point identities at the maximum of f", rep["passed"], f"t0={rep['t0']:.6f}; {detail}")


def test_criterion_9_determinism(spec_s1, solution64, solution128, report):
    again = solver.solve(spec_s1, REF_A, 1.0, count=64, seed=0)
    identical = again.certificate_json() == solution64.certificate_json()
    cmp = verify.compare_certificates(solution64.certificate, solution128.certificate)
    ok = identical and cmp["max"] < 1e-8 and solution128.certified
    report(9, "byte-identical reruns; 64 vs 128 nodes agree", ok,
           f"identical={identical}, max relative difference {cmp['max']:.2e} over {len(cmp['differences'])} "
           f"quantities, 128-node certified={solution128.certified}")
