"""Certificates: every residual check on a solved profile, runnable from stored data alone."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from . import closed_form as cf
from . import oracle as orc
from .bundle import BundleSpec, Epsilon, boundary_conditions, validate_bundle_spec
from .profiles import ProfileJet, differentiate, jet_from_dict, parity_residual, sample_profile

CERTIFICATE_FORMAT = "ewbench-certificate/1"

DEFAULT_TOLERANCES: dict[str, float] = {
    "boundary": 1e-9,
    "replay": 1e-9,
    "gauduchon": 1e-8,
    "roundtrip": 1e-8,
    "consistency": 1e-6,
    "gray": 1e-7,
    "sign": 1e-9,
    "multiplicity_gap": 1e-6,
    "weyl_gap": 1e-8,
    "conformal_scalar": 1e-9,
    "oracle_eigen": 1e-6,
    "einstein_weyl": 1e-5,
    "lambda_bar": 1e-5,
    "conformal_trace": 1e-5,
    "skew_spread": 1e-4,
    "one_one": 1e-6,
    "killing": 1e-5,
    "mean_curvature": 1e-4,
    "totally_geodesic": 1e-6,
    "trace": 1e-4,
    "critical": 1e-6,
}

# nodes where f is below this fraction of its maximum are left out of the
# re-differentiation round trip: forward integration only gives f to absolute
# (not relative) accuracy there, and f''/f amplifies it
ROUNDTRIP_F_FLOOR = 1e-2
ORACLE_T_WINDOW = (0.1, 0.9)
ORACLE_CHART_RADIUS = 2.0
KILLING_TRIALS = 50


def _check(name: str, value: float, tol: float, passed: bool | None = None, **extra) -> dict:
    value = float(value)
    ok = (math.isfinite(value) and abs(value) < tol) if passed is None else bool(passed)
    out = {"name": name, "value": value, "tol": float(tol), "passed": ok}
    out.update(extra)
    return out


def _interp(jet: ProfileJet, column: np.ndarray, t: float) -> float:
    return float(jet.grid.interpolate(np.asarray(column), t)[0])


def oracle_points(L: float, count: int, seed: int) -> list[orc.PatchPoint]:
    rng = np.random.default_rng(seed)
    lo, hi = ORACLE_T_WINDOW
    pts = []
    for _ in range(count):
        r = ORACLE_CHART_RADIUS * math.sqrt(rng.uniform())
        phi = rng.uniform(0.0, 2.0 * math.pi)
        pts.append(orc.PatchPoint(float(rng.uniform(lo * L, hi * L)), float(rng.uniform(0.0, 2.0 * math.pi)),
                                  r * math.cos(phi), r * math.sin(phi)))
    return pts


# --- closed-form checks -------------------------------------------------------


def closed_form_checks(jet: ProfileJet, spec: BundleSpec, C_gap: float, tol: dict) -> tuple[list[dict], dict]:
    checks = []
    res = parity_residual(jet, boundary_conditions(spec))
    checks.append(_check("sec4-boundary", np.max(np.abs(res)), tol["boundary"],
                         labels=boundary_conditions(spec).labels(), residuals=[float(v) for v in res]))

    G1, G2 = cf.gauduchon_residuals(jet, spec, C_gap)
    checks.append(_check("sec4-gauduchon-G1", np.max(np.abs(G1)), tol["gauduchon"],
                         worst_node=int(np.argmax(np.abs(G1))) + 1))
    checks.append(_check("sec4-gauduchon-G2", np.max(np.abs(G2)), tol["gauduchon"],
                         worst_node=int(np.argmax(np.abs(G2))) + 1))

    rt = sample_profile(jet.grid, *jet.callables())
    R1, R2 = cf.gauduchon_residuals(rt, spec, C_gap)
    f_in = np.asarray(jet.f)[jet.grid.interior()]
    bulk = f_in >= ROUNDTRIP_F_FLOOR * float(np.max(jet.f))
    full = max(float(np.max(np.abs(R1))), float(np.max(np.abs(R2))))
    checks.append(_check("sec4-gauduchon-roundtrip",
                         max(float(np.max(np.abs(R1[bulk]))), float(np.max(np.abs(R2[bulk])))),
                         tol["roundtrip"], nodes_used=int(bulk.sum()), all_nodes_value=full))

    cons = jet.derivative_consistency()
    checks.append(_check("profile-derivative-consistency", max(cons.values()), tol["consistency"],
                         columns=cons))

    lam0, lam1, lam2 = cf.eigenvalue_field(jet, spec)
    combo = cf.gray_combination(lam1, lam0, spec.m)
    checks.append(_check("thm1.3a-gray-constant", float(np.max(combo) - np.min(combo)), tol["gray"],
                         C0=float(np.mean(combo))))
    gap = lam0 - lam1
    checks.append(_check("thm1.3b-sign", float(np.min(gap)), tol["sign"], passed=float(np.min(gap)) >= -tol["sign"]))

    inner = jet.grid.interior()
    split = gap[inner] > tol["multiplicity_gap"]
    merge = float(np.max(np.abs(lam0 - lam2)[inner]))
    checks.append(_check("thm1.3c-multiplicity", merge, tol["multiplicity_gap"],
                         passed=merge < tol["multiplicity_gap"] and bool(split.any()),
                         separated_nodes=int(split.sum())))

    c = cf.c_norm(spec.m) * C_gap
    xi_sq = (c * np.asarray(jet.f)) ** 2
    weyl_gap = cf.weyl_gap_from_killing(lam0, lam1, xi_sq, spec.m)
    checks.append(_check("thm1.3d-weyl-gap", float(np.max(np.abs(weyl_gap))), tol["weyl_gap"]))

    scal = cf.conformal_scalar(lam1, spec.m)
    checks.append(_check("eq1.6-conformal-scalar-nonneg", float(np.min(scal)), tol["conformal_scalar"],
                         passed=float(np.min(scal)) >= -tol["conformal_scalar"]))
    fields = {"lambda0": lam0, "lambda1": lam1, "lambda2": lam2}
    return checks, fields


# --- oracle checks ------------------------------------------------------------


def oracle_checks(jet: ProfileJet, spec: BundleSpec, C_gap: float, fields: dict, *, seed: int,
                  count: int, tol: dict) -> tuple[list[dict], dict]:
    if spec.n_complex != 2 or spec.epsilon is not Epsilon.POSITIVE:
        return [], {"skipped": "oracle base only for n=2, epsilon=1"}
    f_fn, g_fn = jet.callables()
    field = orc.build_patch_metric(f_fn, g_fn, spec, C_gap=C_gap)
    pts = oracle_points(jet.L, count, seed)
    rng = np.random.default_rng(seed + 1)
    m = spec.m
    lam_field = fields["lambda1"] - fields["lambda0"]  # Killing-tensor eigenvalue on the fibre
    dlam, _ = differentiate(jet.grid, lam_field)

    worst = {k: 0.0 for k in ("eigen", "ew", "lambda_bar", "conformal", "skew", "one_one", "mc",
                              "tg", "killing", "trace", "cluster")}
    factors = []
    n_killing = max(1, count // 2)
    for i, p in enumerate(pts):
        q = p.coords()
        G = field.metric(q)
        R = orc.ricci_numeric(field, q)
        le = orc.labeled_ricci_eigenvalues(field, q, ricci=R)
        closed = cf.eigenvalues_at(*(_interp(jet, getattr(jet, col), p.t) for col in
                                     ("f", "fp", "fpp", "g", "gp", "gpp")),
                                   spec.n_complex, float(int(spec.epsilon)), spec.s_float)
        for num, ref in zip(le.as_triple(), closed):
            worst["eigen"] = max(worst["eigen"], abs(num - ref) / max(1.0, abs(ref)))
        worst["eigen"] = max(worst["eigen"], le.eigvec_residual)

        spec_sorted = np.sort(le.spectrum)
        # one simple eigenvalue (Killing direction) and one of multiplicity m - 1
        gaps = np.diff(spec_sorted)
        big = int(np.argmax(gaps))
        sizes = sorted([big + 1, m - big - 1])
        scale = max(1.0, float(np.max(np.abs(spec_sorted))))
        spread = float(max(np.ptp(spec_sorted[: big + 1]), np.ptp(spec_sorted[big + 1:]))) / scale
        if sizes != [1, m - 1] or gaps[big] <= tol["multiplicity_gap"] * scale:
            spread = math.inf
        worst["cluster"] = max(worst["cluster"], spread)

        ew, Lam = orc.einstein_weyl_residual(field, q, ricci=R)
        worst["ew"] = max(worst["ew"], ew)

        RD = orc.weyl_ricci(field, q)
        sym = 0.5 * (RD + RD.T)
        skew = 0.5 * (RD - RD.T)
        w = field.omega(q)
        norm_w = float(w @ np.linalg.solve(G, w))
        div = orc.divergence_omega(field, q)
        lb = cf.lambda_bar(Lam, div, norm_w, m)
        worst["lambda_bar"] = max(worst["lambda_bar"],
                                  float(np.max(np.abs(orc.frame_components(G, sym - 0.5 * lb * G)))))
        scal_D = float(np.trace(np.linalg.solve(G, RD)))
        worst["conformal"] = max(worst["conformal"], abs(scal_D / m - le.fiber))

        dw = orc.exterior_derivative(field, q)
        mask = np.abs(dw) > 1e-3 * float(np.max(np.abs(dw)))
        factors.extend((skew[mask] / dw[mask]).tolist())
        worst["one_one"] = max(worst["one_one"], orc.one_one_residual(field, q))

        mc = orc.mean_curvature_normal(field, orc.Direction.KILLING_DIR, q)
        lam_t = _interp(jet, lam_field, p.t)
        expected = np.zeros(orc.DIM)
        expected[orc.T] = _interp(jet, dlam, p.t) / (2.0 * (0.0 - lam_t))
        diff = mc - expected
        worst["mc"] = max(worst["mc"], math.sqrt(abs(diff @ G @ diff)))
        tg = orc.mean_curvature_normal(field, orc.Direction.ORTHOGONAL, q)
        worst["tg"] = max(worst["tg"], math.sqrt(abs(tg @ G @ tg)))

        if i < n_killing:
            def T_fn(qq):
                Gq = field.metric(qq)
                Rq = orc.ricci_numeric(field, qq, check=False)
                _, Lq = orc.einstein_weyl_residual(field, qq, ricci=Rq)
                return np.linalg.solve(Gq, Rq) - Lq * np.eye(orc.DIM)

            worst["killing"] = max(worst["killing"],
                                   orc.killing_tensor_residual(field, T_fn, q, KILLING_TRIALS, rng=rng))
            tr, _ = orc.trace_identity_residual(field, q)
            worst["trace"] = max(worst["trace"], tr)

    factors = np.array(factors)
    factor = float(np.median(factors)) if factors.size else math.nan
    rel_spread = float(np.ptp(factors) / abs(factor)) if factors.size else math.inf
    checks = [
        _check("oracle-eigenvalues", worst["eigen"], tol["oracle_eigen"], points=count),
        _check("thm1.3c-multiplicity-oracle", worst["cluster"], tol["multiplicity_gap"]),
        _check("eq1.4-einstein-weyl", worst["ew"], tol["einstein_weyl"], points=count),
        _check("eq1.3-lambda-bar", worst["lambda_bar"], tol["lambda_bar"]),
        _check("eq1.6-conformal-scalar", worst["conformal"], tol["conformal_trace"]),
        _check("sec3-weyl-ricci-skew", rel_spread, tol["skew_spread"], factor=factor,
               factor_real_dim=m / 4.0, factor_complex_dim=spec.n_complex / 4.0,
               matches=("m/4" if abs(factor - m / 4.0) < 1e-4 else
                        "n/4" if abs(factor - spec.n_complex / 4.0) < 1e-4 else "neither")),
        _check("sec3-one-one", worst["one_one"], tol["one_one"], points=count),
        _check("killing-tensor", worst["killing"], tol["killing"], points=n_killing, trials=KILLING_TRIALS),
        _check("lemma2.1-mean-curvature", worst["mc"], tol["mean_curvature"]),
        _check("prop2.2-totally-geodesic", worst["tg"], tol["totally_geodesic"]),
        _check("prop2.2-trace", worst["trace"], tol["trace"], points=n_killing),
    ]
    return checks, {"weyl_ricci_skew_factor": factor}


# --- assembling a certificate ------------------------------------------------


def _resolve_tolerances(tolerances: dict | None) -> dict:
    tol = dict(DEFAULT_TOLERANCES)
    if tolerances:
        unknown = set(tolerances) - set(tol)
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
        for k, v in tolerances.items():
            if not (v > 0):
                raise ValueError(f"tolerance {k} must be positive")
            tol[k] = float(v)
    return tol


def run_checks(jet: ProfileJet, spec: BundleSpec, params: dict, *, seed: int = 0, oracle_points: int = 20,
               tolerances: dict | None = None, replay: bool = True) -> dict:
    """All checks on a profile; returns the certificate body (without the profile columns)."""
    from .solver import critical_point_report, shoot, SOLVE_ATOL, SOLVE_RTOL  # circular at import time

    tol = _resolve_tolerances(tolerances)
    C_gap = float(params["C_gap"])
    checks, fields = closed_form_checks(jet, spec, C_gap, tol)

    if replay:
        shot = shoot(spec, params["a"], params["g2"], C_gap, params.get("delta"), rtol=SOLVE_RTOL, atol=SOLVE_ATOL)
        if shot.ok:
            value = max(abs(shot.end.fp + 1.0), abs(shot.end.gp), abs(shot.L - jet.L))
        else:
            value = math.inf
        checks.append(_check("shooting-replay", value, tol["replay"], tag=shot.tag))

    crit = critical_point_report(jet, spec, C_gap, tol["critical"])
    for c in crit["checks"]:
        c["t0"] = crit["t0"]
    checks.extend(crit["checks"])

    o_checks, o_info = oracle_checks(jet, spec, C_gap, fields, seed=seed, count=oracle_points, tol=tol)
    checks.extend(o_checks)

    by_name = {c["name"]: c for c in checks}
    invariants = {
        "L": float(jet.L),
        "C0": by_name["thm1.3a-gray-constant"]["C0"],
        "t0": crit["t0"],
        "lambda1_at_t0": by_name["sec4-critical-lambda1-positive"]["value"],
        "fpp_at_t0": by_name["sec4-critical-fpp-nonpositive"]["value"],
        "min_conformal_scalar": by_name["eq1.6-conformal-scalar-nonneg"]["value"],
    }
    return {
        "format": CERTIFICATE_FORMAT,
        "invariants": invariants,
        "spec": spec.to_dict(),
        "parameters": {k: float(v) for k, v in params.items()},
        "grid": {"count": jet.grid.count, "L": jet.L},
        "seed": int(seed),
        "oracle_points": int(oracle_points),
        "tolerances": tol,
        "checks": checks,
        "critical_point": {"t0": crit["t0"], "t0_minus_half_L": crit["t0_minus_half_L"]},
        "oracle": o_info,
        "passed": all(c["passed"] for c in checks),
    }


def certify(sol, *, seed: int = 0, oracle_points: int = 20, tolerances: dict | None = None,
            newton: dict | None = None) -> dict:
    cert = run_checks(sol.jet, sol.spec, sol.parameters(), seed=seed, oracle_points=oracle_points,
                      tolerances=tolerances)
    if newton is not None:
        cert["newton"] = newton
    cert["profile"] = sol.jet.to_dict()
    return cert


def certificate_json(cert: dict) -> str:
    return json.dumps(cert, sort_keys=True, indent=2) + "\n"


def load_certificate(path: str | Path) -> dict:
    cert = json.loads(Path(path).read_text())
    if cert.get("format") != CERTIFICATE_FORMAT:
        raise ValueError(f"not a certificate: format={cert.get('format')!r}")
    return cert


def verify_certificate(cert: dict, *, seed: int | None = None, oracle_points: int | None = None,
                       tolerances: dict | None = None) -> dict:
    """Re-run every check from the stored spec, parameters and profile columns."""
    spec = validate_bundle_spec(cert["spec"])
    jet = jet_from_dict(cert["profile"])
    tol = dict(cert.get("tolerances", {}))
    tol.update(tolerances or {})
    report = run_checks(jet, spec, cert["parameters"],
                        seed=cert.get("seed", 0) if seed is None else seed,
                        oracle_points=cert.get("oracle_points", 20) if oracle_points is None else oracle_points,
                        tolerances=tol)
    report["failed"] = [c["name"] for c in report["checks"] if not c["passed"]]
    return report


def compare_certificates(a: dict, b: dict) -> dict:
    """Relative differences of the discretization-independent quantities of two certificates.

    Residual values are noise-level numbers and are not compared; the solution
    parameters and the invariants block are.
    """
    diffs = {}
    for block in ("parameters", "invariants"):
        for key in sorted(set(a.get(block, {})) & set(b.get(block, {}))):
            x, y = float(a[block][key]), float(b[block][key])
            diffs[f"{block}.{key}"] = abs(x - y) / max(1.0, abs(x), abs(y))
    return {"differences": diffs, "max": max(diffs.values(), default=0.0)}


# --- closed form vs oracle on random profiles --------------------------------

FORMULA_S_VALUES = ((0, 1), (1, 2), (1, 1))  # (k, q) giving s = 0, 1, 2
FORMULA_T_RANGE = (0.5, 2.5)


def formula_check(*, n: int = 2, epsilon: int = 1, s_values=FORMULA_S_VALUES, profiles: int = 5,
                  points: int = 20, seed: int = 0, tol: float = 1e-6) -> dict:
    """Closed-form eigenvalues against eigenvector-labelled numeric Ricci eigenvalues.

    For each s, ``profiles`` random positive (f, g) pairs are sampled and the
    patch metric is differentiated at ``points`` random points.  Errors are
    relative, |num - closed| / max(1, |closed|).
    """
    if n != 2 or epsilon != 1:
        raise orc.UnsupportedBase("the oracle base is the round two-sphere: n = 2, epsilon = 1")
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    rng = np.random.default_rng(seed)
    runs = []
    for k, q in s_values:
        spec = validate_bundle_spec({"n": n, "epsilon": epsilon, "k": k, "q": q})
        worst = {"lambda0": 0.0, "lambda1": 0.0, "lambda2": 0.0, "eigenvector": 0.0}
        for _ in range(profiles):
            f, g = orc.random_profile_pair(rng)
            field = orc.build_patch_metric(f, g, spec)
            for _ in range(points):
                p = orc.random_patch_point(rng, FORMULA_T_RANGE)
                le = orc.labeled_ricci_eigenvalues(field, p)
                t = p.t
                closed = cf.eigenvalues_at(f(t), f.d1(t), f.d2(t), g(t), g.d1(t), g.d2(t), n, float(epsilon),
                                           spec.s_float)
                for key, num, ref in zip(("lambda0", "lambda1", "lambda2"), le.as_triple(), closed):
                    worst[key] = max(worst[key], abs(num - float(ref)) / max(1.0, abs(float(ref))))
                worst["eigenvector"] = max(worst["eigenvector"], le.eigvec_residual)
        runs.append({"s": spec.to_dict()["s"], "k": k, "q": q, "max_rel_error": worst,
                     "passed": max(worst.values()) < tol})
    return {"profiles": profiles, "points": points, "seed": seed, "tol": tol,
            "max_rel_error": max(max(r["max_rel_error"].values()) for r in runs),
            "runs": runs, "passed": all(r["passed"] for r in runs)}
