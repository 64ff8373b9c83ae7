"""Shooting solver for the Gauduchon Einstein–Weyl profile equations.

Unknown functions f, g on [0, L].  Imposing ``lambda0 == lambda2`` and
``lambda0 - lambda1 == C^2 f^2`` on the ansatz eigenvalues and solving for
the second derivatives gives (n = complex dimension, P = s^2 f^2 / (4 g^4),
Q = f' g' / (f g)):

    g'' = g (Q - P) - g C^2 f^2 / (2 (n - 1))
    f'' = f [ -(2n - 3) g''/g + 2P + Q - 2 eps / g^2 + (2n - 3) g'^2 / g^2 ]

The axis t = 0 is a regular singular point.  Smooth solutions have
f = t + f3 t^3 + ..., g = a + g2 t^2 + ..., where ``a`` and ``g2`` are both
free (g2 sits at the indicial root 2 of the g equation).  Together with C
the initial data are (a, g2, C), subject to the homothety

    (a, g2, C) -> (mu a, g2 / mu, C / mu^2)

so fixing C (default 1) removes the scale.  The closing condition at the far
zero L of f is f'(L) = -1; g'(L) = 0 comes out automatically.  The
regular solutions therefore form a one-parameter family, which
:func:`solve` parametrizes by ``a`` and :func:`matching_structure` reports
explicitly.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from numba import njit
from scipy.optimize import brentq

from . import rk45
from .bundle import BundleSpec, Topology, boundary_conditions
from .profiles import DEFAULT_COUNT, Grid, ProfileJet, jet_from_values, make_grid

DEGENERATE_THRESHOLD = 1e-12
RTOL = 1e-10
ATOL = 1e-12
# the certified trajectory is integrated tighter: its samples feed spectral
# differentiation, which amplifies sampling noise
SOLVE_RTOL = 1e-12
SOLVE_ATOL = 1e-14
T_MAX = 100.0
BLOWUP = 1e8
SERIES_ORDER = 9  # highest power of t kept in f
MAX_RECORD = 200_000


class ShootingError(RuntimeError):
    tag = "ShootingError"


class DegenerateState(ShootingError):
    tag = "DegenerateState"


class SeriesDiverged(ShootingError):
    tag = "SeriesDiverged"


class NoReturn(ShootingError):
    tag = "NoReturn"


class BlowUp(ShootingError):
    tag = "BlowUp"


class NoConvergence(ShootingError):
    tag = "NoConvergence"


class CertificateFailed(RuntimeError):
    def __init__(self, solution: "SolutionProfile"):
        self.solution = solution
        failed = [c["name"] for c in solution.certificate["checks"] if not c["passed"]]
        super().__init__("certificate checks failed: " + ", ".join(failed))


class NotCertified(ValueError):
    pass


_STATUS_ERRORS = {
    rk45.NO_RETURN: NoReturn,
    rk45.BLOW_UP: BlowUp,
    rk45.DEGENERATE: DegenerateState,
    rk45.STEP_UNDERFLOW: DegenerateState,
}


@dataclass(frozen=True)
class ShootingState:
    t: float
    f: float
    fp: float
    g: float
    gp: float

    def as_array(self) -> np.ndarray:
        return np.array([self.f, self.fp, self.g, self.gp])

    @classmethod
    def from_array(cls, t: float, y) -> "ShootingState":
        return cls(float(t), *(float(v) for v in y))


def _params(spec: BundleSpec, C_gap: float) -> np.ndarray:
    return np.array([spec.n_complex, float(int(spec.epsilon)), spec.s_float, C_gap], dtype=float)


def second_derivatives(f, fp, g, gp, n: int, eps: float, s: float, C_gap: float):
    """(f'', g'') solving the two Gauduchon conditions; elementwise on arrays."""
    Pt = s * s * f * f / (4.0 * g**4)
    Qt = fp * gp / (f * g)
    gpp = g * (Qt - Pt) - g * C_gap**2 * f * f / (2.0 * (n - 1))
    fpp = f * (-(2 * n - 3) * gpp / g + 2.0 * Pt + Qt - 2.0 * eps / g**2 + (2 * n - 3) * gp**2 / g**2)
    return fpp, gpp


def ode_rhs(state: ShootingState, spec: BundleSpec, C_gap: float) -> tuple[float, float, float, float]:
    if state.f < DEGENERATE_THRESHOLD or state.g < DEGENERATE_THRESHOLD:
        raise DegenerateState(f"f={state.f}, g={state.g} at t={state.t}")
    fpp, gpp = second_derivatives(state.f, state.fp, state.g, state.gp, spec.n_complex,
                                  float(int(spec.epsilon)), spec.s_float, C_gap)
    return state.fp, float(fpp), state.gp, float(gpp)


# --- series at the axis ------------------------------------------------------


@njit(cache=True, error_model="numpy")
def _pmul(p, q, deg):
    out = np.zeros(deg + 1)
    for i in range(min(p.size, deg + 1)):
        if p[i] == 0.0:
            continue
        for j in range(min(q.size, deg + 1 - i)):
            out[i + j] += p[i] * q[j]
    return out


@njit(cache=True, error_model="numpy")
def _pder(p):
    out = np.zeros(max(p.size - 1, 1))
    for i in range(1, p.size):
        out[i - 1] = i * p[i]
    return out


@njit(cache=True, error_model="numpy")
def _polynomial_residuals(fc, gc, n, eps, s, C, deg):
    """Both Gauduchon equations cleared of denominators (polynomials in t).

    E1 = g^4 f'' + (2n-3) f g^3 g'' - s^2 f^3/2 - f' g' g^3 + 2 eps f g^2 - (2n-3) f g^2 g'^2
    E2 = f g^3 g'' - f' g' g^3 + s^2 f^3/4 + C^2 f^3 g^4 / (2(n-1))
    """
    f1 = _pder(fc)
    f2 = _pder(f1)
    g1 = _pder(gc)
    g2 = _pder(g1)
    gg = _pmul(gc, gc, deg)
    g3 = _pmul(gg, gc, deg)
    g4 = _pmul(g3, gc, deg)
    f3 = _pmul(_pmul(fc, fc, deg), fc, deg)
    fg3g2 = _pmul(_pmul(fc, g3, deg), g2, deg)
    f1g1g3 = _pmul(_pmul(f1, g1, deg), g3, deg)
    E1 = (_pmul(g4, f2, deg) + (2 * n - 3) * fg3g2 - 0.5 * s * s * f3 - f1g1g3
          + 2 * eps * _pmul(fc, gg, deg)
          - (2 * n - 3) * _pmul(_pmul(fc, gg, deg), _pmul(g1, g1, deg), deg))
    E2 = fg3g2 - f1g1g3 + 0.25 * s * s * f3 + C * C / (2.0 * (n - 1)) * _pmul(f3, g4, deg)
    return E1, E2


@njit(cache=True, error_model="numpy")
def _series_coeffs(a, g2, C, n, eps, s, order):
    """Returns (fc, gc, ok); ok is False when a coefficient solve is singular."""
    deg = order + 4
    fc = np.zeros(order + 1)
    gc = np.zeros(order + 1)
    fc[1] = 1.0
    gc[0] = a
    gc[2] = g2
    for p in range(3, order + 1, 2):
        # g_{p-1} from E2, then f_p from E1, both at power p - 2
        for which in range(2):
            if which == 0 and p - 1 < 4:
                continue
            arr = gc if which == 0 else fc
            power = p - 1 if which == 0 else p
            eq = 1 if which == 0 else 0
            arr[power] = 0.0
            v0 = _polynomial_residuals(fc, gc, n, eps, s, C, deg)[eq][p - 2]
            arr[power] = 1.0
            v1 = _polynomial_residuals(fc, gc, n, eps, s, C, deg)[eq][p - 2]
            slope = v1 - v0
            if not np.isfinite(slope) or abs(slope) <= 1e-14 * max(1.0, abs(v0)):
                return fc, gc, False
            arr[power] = -v0 / slope
    return fc, gc, True


@dataclass(frozen=True)
class AxisSeries:
    f_coeffs: np.ndarray
    g_coeffs: np.ndarray

    def state(self, t: float) -> ShootingState:
        return ShootingState(
            float(t),
            float(P.polyval(t, self.f_coeffs)),
            float(P.polyval(t, P.polyder(self.f_coeffs))),
            float(P.polyval(t, self.g_coeffs)),
            float(P.polyval(t, P.polyder(self.g_coeffs))),
        )

    def second(self, t) -> tuple:
        return P.polyval(t, P.polyder(self.f_coeffs, 2)), P.polyval(t, P.polyder(self.g_coeffs, 2))


def axis_series(a: float, g2: float, C_gap: float, spec: BundleSpec, order: int = SERIES_ORDER) -> AxisSeries:
    """Taylor data f = t + f3 t^3 + ..., g = a + g2 t^2 + ... up to t^order.

    Each new coefficient enters its matching order of E1 or E2 affinely; it is
    found by evaluating that coefficient at two trial values and solving the
    resulting 1x1 linear system.
    """
    if not a > 0:
        raise SeriesDiverged(f"a must be positive, got {a}")
    fc, gc, ok = _series_coeffs(float(a), float(g2), float(C_gap), float(spec.n_complex),
                                float(int(spec.epsilon)), spec.s_float, int(order))
    if not ok or not (np.all(np.isfinite(fc)) and np.all(np.isfinite(gc))):
        raise SeriesDiverged("singular or non-finite coefficient solve")
    return AxisSeries(fc, gc)


def series_start(a: float, C_gap: float, spec: BundleSpec, delta: float, g2: float = 0.0) -> ShootingState:
    """State at t = delta from the axis series with g(0) = a, g''(0) = 2 g2."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return axis_series(a, g2, C_gap, spec).state(delta)


# --- integration --------------------------------------------------------------


def _numba_rhs(rhs):
    return rk45.gauduchon_rhs if rhs is None else rhs


def integrate_until_f_zero(start: ShootingState, spec: BundleSpec, C_gap: float, *, rhs=None,
                           rtol: float = RTOL, atol: float = ATOL, t_max: float = T_MAX,
                           blowup: float = BLOWUP) -> tuple[float, ShootingState]:
    """Adaptive DP5(4) from ``start`` until f crosses zero from above.

    ``rhs`` may be any numba-compiled ``rhs(t, y, params, out)``; the
    default is the Gauduchon system.
    """
    empty = np.empty(0)
    status, t_end, y_end, _ = rk45.integrate_to_zero(
        _numba_rhs(rhs), start.t, start.as_array(), _params(spec, C_gap), t_max, rtol, atol, blowup,
        _initial_step(start), empty, np.empty((0, 4)), empty)
    if status != rk45.EVENT:
        raise _STATUS_ERRORS[status](f"{rk45.STATUS_NAMES[status]} at t={t_end:.6g}")
    return float(t_end), ShootingState.from_array(t_end, y_end)


def _initial_step(start: ShootingState) -> float:
    return max(1e-6, min(1e-2, 0.5 * start.t))


def default_delta(a: float, C_gap: float) -> float:
    scale = min(a, 1.0 / math.sqrt(C_gap)) if C_gap > 0 else a
    return 1e-3 * scale


@dataclass(frozen=True)
class Shot:
    a: float
    g2: float
    C_gap: float
    delta: float
    tag: str
    L: float = math.nan
    end: ShootingState | None = None

    @property
    def ok(self) -> bool:
        return self.tag == "ok"


def shoot(spec: BundleSpec, a: float, g2: float, C_gap: float, delta: float | None = None, *,
          rtol: float = RTOL, atol: float = ATOL) -> Shot:
    delta = default_delta(a, C_gap) if delta is None else delta
    try:
        start = series_start(a, C_gap, spec, delta, g2=g2)
        L, end = integrate_until_f_zero(start, spec, C_gap, rtol=rtol, atol=atol)
    except ShootingError as exc:
        return Shot(a, g2, C_gap, delta, exc.tag)
    return Shot(a, g2, C_gap, delta, "ok", L, end)


def boundary_residual(shot: Shot, spec: BundleSpec) -> np.ndarray:
    """Far-end residuals: SphereBundle (f'(L)+1, g'(L)); ProjectiveSpace (f'(L)+1, g(L), g'(L)+1)."""
    size = 2 if spec.topology is Topology.SPHERE_BUNDLE else 3
    if not shot.ok:
        return np.full(size, np.nan)
    e = shot.end
    if spec.topology is Topology.SPHERE_BUNDLE:
        return np.array([e.fp + 1.0, e.gp])
    return np.array([e.fp + 1.0, e.g, e.gp + 1.0])


def shooting_residual(a: float, C_gap: float, spec: BundleSpec, g2: float = 0.0,
                      delta: float | None = None, *, rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    """Residual vector at the far zero of f; all-NaN when the shot fails (see :func:`shoot` for the tag)."""
    return boundary_residual(shoot(spec, a, g2, C_gap, delta, rtol=rtol, atol=atol), spec)


# --- matching structure -------------------------------------------------------


def matching_structure(spec: BundleSpec, a: float, g2: float, C_gap: float, rel_step: float = 1e-6) -> dict:
    """Finite-difference Jacobian of the far-end conditions in (a, g2, C).

    Rows: f'(L)+1, g'(L), g(L)-a.  The singular values expose which
    conditions are independent and how many directions of initial data
    leave them unchanged.  ``solution_family_dimension`` counts the
    homothety; ``family_dimension_mod_scale`` does not.
    """
    x0 = np.array([a, g2, C_gap])

    def full(x):
        shot = shoot(spec, x[0], x[1], x[2])
        if not shot.ok:
            return np.full(3, np.nan)
        return np.array([shot.end.fp + 1.0, shot.end.gp, shot.end.g - x[0]])

    r0 = full(x0)
    J = np.empty((3, 3))
    for j in range(3):
        h = rel_step * max(1.0, abs(x0[j]))
        xp, xm = x0.copy(), x0.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (full(xp) - full(xm)) / (2 * h)
    sv = np.linalg.svd(J, compute_uv=False) if np.all(np.isfinite(J)) else np.full(3, np.nan)
    scale = sv[0] if np.isfinite(sv[0]) and sv[0] > 0 else 1.0
    rank = int(np.sum(sv > 1e-5 * scale))
    homothety = np.array([a, -g2, -2.0 * C_gap])
    hom_res = float(np.linalg.norm(J @ homothety)) if np.all(np.isfinite(J)) else math.nan
    return {
        "unknowns": ["a", "g2", "C_gap"],
        "conditions": ["f'(L)+1", "g'(L)", "g(L)-a"],
        "residual": r0.tolist(),
        "jacobian": J.tolist(),
        "singular_values": sv.tolist(),
        "rank": rank,
        "solution_family_dimension": 3 - rank,
        "family_dimension_mod_scale": 3 - rank - 1,
        "homothety_direction_residual": hom_res,
    }


# --- Newton -------------------------------------------------------------------


UNKNOWN_NAMES = ("a", "g2", "C_gap")


def _newton(residual_fn: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, *, tol: float,
            max_iter: int = 30, min_step: float = 1e-8, fd_rel: float = 1e-7) -> tuple[np.ndarray, list[dict]]:
    """Damped Newton (least-squares step) with a halving line search on ||r||."""
    x = np.array(x0, dtype=float)
    r = residual_fn(x)
    history = []
    if not np.all(np.isfinite(r)):
        raise NoConvergence("initial guess does not produce a closing shot")
    for it in range(max_iter):
        norm = float(np.linalg.norm(r))
        history.append({"iter": it, "x": x.tolist(), "residual_norm": norm})
        if norm < tol:
            return x, history
        J = np.empty((r.size, x.size))
        for j in range(x.size):
            h = fd_rel * max(1e-3, abs(x[j]))
            xp, xm = x.copy(), x.copy()
            xp[j] += h
            xm[j] -= h
            J[:, j] = (residual_fn(xp) - residual_fn(xm)) / (2 * h)
        if not np.all(np.isfinite(J)):
            raise NoConvergence(f"non-finite Jacobian at iteration {it}")
        dx = np.linalg.lstsq(J, -r, rcond=None)[0]
        lam = 1.0
        while lam >= min_step:
            x_try = x + lam * dx
            r_try = residual_fn(x_try)
            if np.all(np.isfinite(r_try)) and np.linalg.norm(r_try) < norm:
                x, r = x_try, r_try
                break
            lam *= 0.5
        else:
            raise NoConvergence(f"line search stalled at iteration {it} (|r|={norm:.3e})")
    if float(np.linalg.norm(r)) < tol:
        history.append({"iter": max_iter, "x": x.tolist(), "residual_norm": float(np.linalg.norm(r))})
        return x, history
    raise NoConvergence(f"no convergence in {max_iter} iterations (|r|={np.linalg.norm(r):.3e})")


BETA_SCAN = np.linspace(-1.0, 3.0, 41)
NEWTON_TOL = 1e-13


ROOT_TOL = 1e-8


def scan_g2(spec: BundleSpec, a: float, C_gap: float,
            betas: Sequence[float] = BETA_SCAN) -> tuple[np.ndarray, list[dict]]:
    """Closing residual f'(L)+1 at g2 = beta / a for each beta, plus the verified roots.

    A sign change between two closing shots only counts once the Brent-refined
    root actually closes (|f'(L)+1| < ROOT_TOL); jumps across shots that stop
    closing are rejected.
    """
    betas = np.asarray(betas, dtype=float)
    vals = np.array([shooting_residual(a, C_gap, spec, g2=b / a)[0] for b in betas])
    roots = []
    fn = lambda g: shooting_residual(a, C_gap, spec, g2=g)[0]
    for i in range(betas.size - 1):
        v0, v1 = vals[i], vals[i + 1]
        if not (np.isfinite(v0) and np.isfinite(v1)) or v0 * v1 > 0:
            continue
        lo, hi = betas[i] / a, betas[i + 1] / a
        try:
            g_root = brentq(lambda g: np.nan_to_num(fn(g), nan=1e3), lo, hi, xtol=1e-14, rtol=1e-14)
        except ValueError:
            continue
        res = fn(g_root)
        if np.isfinite(res) and abs(res) < ROOT_TOL:
            roots.append({"g2": float(g_root), "residual": float(res), "bracket": [float(lo), float(hi)]})
    return vals, roots


def bracket_g2(spec: BundleSpec, a: float, C_gap: float, betas: Sequence[float] = BETA_SCAN) -> list[dict]:
    """Verified closing values of g2 for fixed (a, C); see :func:`scan_g2`."""
    return scan_g2(spec, a, C_gap, betas)[1]


# --- sweep --------------------------------------------------------------------


class SweepRangeError(ValueError):
    pass


@dataclass(frozen=True)
class SweepCell:
    i: int
    j: int
    a: float
    C_gap: float
    min_abs_residual: float  # over the closing shots of the g2 scan; inf if none close
    closing_shots: int
    roots: tuple[float, ...]  # verified g2 values


CSV_SWEEP_HEADER = "i,j,a,C_gap,min_abs_residual,closing_shots,roots,first_root_g2"


@dataclass(frozen=True)
class SweepResult:
    spec: BundleSpec
    a_values: np.ndarray
    c_values: np.ndarray
    cells: tuple[SweepCell, ...]

    @property
    def root_count(self) -> int:
        return sum(len(c.roots) for c in self.cells)

    @property
    def flagged_cells(self) -> int:
        return sum(1 for c in self.cells if c.roots)

    def to_csv(self) -> str:
        lines = [CSV_SWEEP_HEADER]
        for c in self.cells:
            first = repr(c.roots[0]) if c.roots else ""
            lines.append(f"{c.i},{c.j},{c.a!r},{c.C_gap!r},{c.min_abs_residual!r},{c.closing_shots},"
                         f"{len(c.roots)},{first}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "a_range": [float(self.a_values[0]), float(self.a_values[-1])],
            "c_range": [float(self.c_values[0]), float(self.c_values[-1])],
            "cells": [int(self.a_values.size), int(self.c_values.size)],
            "flagged_cells": self.flagged_cells,
            "roots": self.root_count,
            "flagged": [{"i": c.i, "j": c.j, "a": c.a, "C_gap": c.C_gap, "g2": list(c.roots)}
                        for c in self.cells if c.roots],
        }


def log_grid(lo: float, hi: float, cells: int, name: str) -> np.ndarray:
    if not (lo > 0 and hi > 0):
        raise SweepRangeError(f"{name} range must be positive, got [{lo}, {hi}]")
    if lo > hi:
        raise SweepRangeError(f"{name} range is empty: min {lo} > max {hi}")
    if cells < 1:
        raise SweepRangeError(f"need at least one cell, got {cells}")
    return np.geomspace(lo, hi, cells)


def _sweep_cell(args) -> SweepCell:
    spec, i, j, a, C = args
    vals, roots = scan_g2(spec, a, C)
    finite = np.abs(vals[np.isfinite(vals)])
    return SweepCell(i, j, float(a), float(C), float(finite.min()) if finite.size else math.inf,
                     int(finite.size), tuple(r["g2"] for r in roots))


def sweep(spec: BundleSpec, a_min: float = 0.1, a_max: float = 10.0, c_min: float = 0.01, c_max: float = 10.0,
          cells: int = 40, *, workers: int | None = None) -> SweepResult:
    """Residual landscape over a log grid of (a, C); each cell scans g2 and flags verified roots.

    Cells run on a process pool (``workers`` defaults to the CPU count) and
    are merged in input order, so the result does not depend on scheduling.
    """
    a_values = log_grid(a_min, a_max, cells, "a")
    c_values = log_grid(c_min, c_max, cells, "C")
    jobs = [(spec, i, j, float(a), float(C)) for i, a in enumerate(a_values) for j, C in enumerate(c_values)]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1:
        out = [_sweep_cell(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_sweep_cell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return SweepResult(spec, a_values, c_values, tuple(out))


# --- solution profile ---------------------------------------------------------


@dataclass(eq=False)
class SolutionProfile:
    spec: BundleSpec
    a: float
    g2: float
    C_gap: float
    L: float
    delta: float
    jet: ProfileJet
    certificate: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return bool(self.certificate.get("passed"))

    def parameters(self) -> dict:
        return {"a": self.a, "g2": self.g2, "C_gap": self.C_gap, "L": self.L, "delta": self.delta}

    def certificate_json(self) -> str:
        return json.dumps(self.certificate, sort_keys=True, indent=2) + "\n"


def trajectory_jet(spec: BundleSpec, a: float, g2: float, C_gap: float, delta: float,
                   count: int = DEFAULT_COUNT, *, rtol: float = SOLVE_RTOL, atol: float = SOLVE_ATOL) -> ProfileJet:
    """Resample the closing trajectory onto a spectral grid on [0, L]."""
    series = axis_series(a, g2, C_gap, spec)
    start = series.state(delta)
    rec_t = np.empty(MAX_RECORD)
    rec_h = np.empty(MAX_RECORD)
    rec_y = np.empty((MAX_RECORD, 4))
    params = _params(spec, C_gap)
    status, L, y_end, n_rec = rk45.integrate_to_zero(
        rk45.gauduchon_rhs, start.t, start.as_array(), params, T_MAX, rtol, atol, BLOWUP,
        _initial_step(start), rec_t, rec_y, rec_h)
    if status != rk45.EVENT:
        raise _STATUS_ERRORS[status](rk45.STATUS_NAMES[status])
    if n_rec >= MAX_RECORD:
        raise ShootingError("trajectory record overflow")
    grid = make_grid(float(L), count)
    t = grid.nodes
    Y = np.empty((count, 4))
    near = t <= delta
    for i in np.nonzero(near)[0]:
        Y[i] = series.state(t[i]).as_array()
    mid = ~near
    mid[-1] = False
    Y[mid] = rk45.sample_from_record(rk45.gauduchon_rhs, rec_t, rec_y, rec_h, n_rec, params,
                                     np.ascontiguousarray(t[mid]))
    Y[-1] = y_end
    Y[-1, 0] = 0.0
    f, fp, g, gp = Y.T
    fpp = np.empty(count)
    gpp = np.empty(count)
    inner = grid.interior()
    fpp[inner], gpp[inner] = second_derivatives(f[inner], fp[inner], g[inner], gp[inner], spec.n_complex,
                                                float(int(spec.epsilon)), spec.s_float, C_gap)
    fpp_near, gpp_near = series.second(t[near])
    fpp[near], gpp[near] = fpp_near, gpp_near
    fpp[-1] = 0.0  # f odd at L
    coeffs = np.polynomial.polynomial.polyfit(t[-9:-1] - L, gpp[-9:-1], 4)
    gpp[-1] = coeffs[0]
    return jet_from_values(grid, f, fp, fpp, g, gp, gpp)


def solve(spec: BundleSpec, a0: float, C0_guess: float = 1.0, *, g2_guess: float | None = None,
          unknowns: Sequence[str] = ("g2",), count: int = DEFAULT_COUNT, seed: int = 0,
          oracle_points: int = 20, tolerances: dict | None = None, raise_on_failure: bool = True) -> SolutionProfile:
    """Find a closing profile and certify it.

    ``a0`` and ``C0_guess`` are g(0) and the Gauduchon gap constant; with the
    default ``unknowns=("g2",)`` both are held fixed (C fixes the scale, a
    picks the family member) and Newton runs on g''(0)/2 alone.  Any subset
    of ("a", "g2", "C_gap") may be freed; redundant unknowns are handled by
    the least-squares Newton step and reported in the certificate.
    """
    from .verify import certify  # circular at import time

    if spec.topology is not Topology.SPHERE_BUNDLE:
        return _solve_projective(spec, a0, C0_guess, g2_guess=g2_guess, count=count, seed=seed)
    unknowns = tuple(unknowns)
    for u in unknowns:
        if u not in UNKNOWN_NAMES:
            raise ValueError(f"unknown shooting parameter {u!r}")
    if not (a0 > 0 and C0_guess > 0):
        raise ValueError("initial guesses must be positive")
    if g2_guess is None:
        roots = bracket_g2(spec, a0, C0_guess)
        if not roots:
            raise NoConvergence(f"no closing shot bracketed for a={a0}, C={C0_guess}")
        g2_guess = roots[0]["g2"]
    base = {"a": a0, "g2": g2_guess, "C_gap": C0_guess}
    idx = [UNKNOWN_NAMES.index(u) for u in unknowns]

    def unpack(x):
        full = dict(base)
        for u, v in zip(unknowns, x):
            full[u] = float(v)
        return full

    def residual(x):
        p = unpack(x)
        if p["a"] <= 0 or p["C_gap"] <= 0:
            return np.full(1, np.nan)
        r = shooting_residual(p["a"], p["C_gap"], spec, g2=p["g2"],
                              delta=default_delta(p["a"], p["C_gap"]), rtol=SOLVE_RTOL, atol=SOLVE_ATOL)
        return r[:1]

    x_star, history = _newton(residual, np.array([base[u] for u in unknowns]), tol=NEWTON_TOL)
    p = unpack(x_star)
    delta = default_delta(p["a"], p["C_gap"])
    shot = shoot(spec, p["a"], p["g2"], p["C_gap"], delta, rtol=SOLVE_RTOL, atol=SOLVE_ATOL)
    if not shot.ok:
        raise NoConvergence(f"converged parameters do not close ({shot.tag})")
    jet = trajectory_jet(spec, p["a"], p["g2"], p["C_gap"], delta, count)
    sol = SolutionProfile(spec, p["a"], p["g2"], p["C_gap"], float(jet.L), delta, jet)
    sol.certificate = certify(sol, seed=seed, oracle_points=oracle_points, tolerances=tolerances,
                              newton={"unknowns": list(unknowns), "iterations": len(history) - 1,
                                      "final_residual_norm": history[-1]["residual_norm"]})
    if raise_on_failure and not sol.certified:
        raise CertificateFailed(sol)
    return sol


def _solve_projective(spec: BundleSpec, a0: float, C0_guess: float, *, g2_guess, count, seed):
    """Three far-end conditions against (a, g2) after the scale is fixed by C.

    f and g must vanish together at L; the shot stops at the first zero of f
    (or reports a degenerate state when g dies first).  Newton runs on all
    three residuals in the least-squares sense and only accepts an exact zero.
    """
    g2_guess = 0.0 if g2_guess is None else g2_guess

    def residual(x):
        if x[0] <= 0:
            return np.full(3, np.nan)
        return shooting_residual(x[0], C0_guess, spec, g2=x[1])

    r0 = residual(np.array([a0, g2_guess]))
    if not np.all(np.isfinite(r0)):
        raise NoConvergence("ProjectiveSpace shot from the initial guess does not reach f = 0 with g > 0")
    _newton(residual, np.array([a0, g2_guess]), tol=1e-10)
    raise NoConvergence("ProjectiveSpace closing is not certified by this solver")


# --- critical point of f -----------------------------------------------------


def critical_point_check(sol: SolutionProfile, tol: float = 1e-6) -> dict:
    """Checks at the maximum t0 of f: f'(t0) = 0, f''(t0) <= 0, lambda1(t0) > 0, and the g'' identity."""
    if not sol.certified:
        raise NotCertified("critical_point_check needs a certified solution")
    return critical_point_report(sol.jet, sol.spec, sol.C_gap, tol)


def critical_point_report(jet: ProfileJet, spec: BundleSpec, C_gap: float, tol: float = 1e-6) -> dict:
    grid = jet.grid
    i = int(np.argmax(jet.f))
    lo = grid.nodes[max(i - 1, 0)]
    hi = grid.nodes[min(i + 1, grid.count - 1)]
    fp_fn = lambda t: float(grid.interpolate(np.array(jet.fp), t)[0])
    t0 = brentq(fp_fn, lo, hi, xtol=1e-15) if fp_fn(lo) * fp_fn(hi) < 0 else float(grid.nodes[i])
    f, fp, fpp, g, gp, gpp = (float(grid.interpolate(np.array(getattr(jet, c)), t0)[0])
                              for c in ("f", "fp", "fpp", "g", "gp", "gpp"))
    n, s = spec.n_complex, spec.s_float
    lam1_display = -fpp / f + 2 * (n - 1) * s * s * f * f / (4 * g**4)
    lhs = -2 * (n - 1) * gpp / g
    rhs = 2 * (n - 1) * s * s * f * f / (4 * g**4) + C_gap**2 * f * f
    checks = [
        {"name": "sec4-critical-fprime-zero", "value": abs(fp), "tol": tol, "passed": abs(fp) < tol},
        {"name": "sec4-critical-fpp-nonpositive", "value": fpp, "tol": tol, "passed": fpp <= tol},
        {"name": "sec4-critical-lambda1-positive", "value": lam1_display, "tol": 0.0, "passed": lam1_display > 0},
        {"name": "sec4-critical-gpp-identity", "value": abs(lhs - rhs), "tol": tol,
         "passed": abs(lhs - rhs) < tol and rhs > 0},
    ]
    return {
        "t0": t0,
        "L": jet.L,
        "t0_minus_half_L": t0 - 0.5 * jet.L,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
