"""Finite-difference curvature of the ansatz metric in explicit coordinates.

Concrete base: S^2 with Gauss curvature 2 (scalar curvature 4), in the
stereographic chart (x, y).  Coordinates on the total space are
(t, psi, x, y) and the metric is

    dt^2 + f(t)^2 (dpsi + s A)^2 + g(t)^2 h,
    h = 2 (dx^2 + dy^2) / (1 + r^2)^2,   A = (x dy - y dx) / (1 + r^2),

with dA the Kähler form of h.  Nothing here imports the closed-form
eigenvalue module: every curvature quantity is built from metric components
by central differences.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .bundle import BundleSpec, Epsilon

DIM = 4
T, PSI, X, Y = range(DIM)
CHART_RADIUS_SQ = 10.0
DEFAULT_STEP = 1e-3
OUTER_STEP = 2e-2  # for derivatives of already-differentiated quantities
RICHARDSON_TOL = 1e-5

# sixth-order central first derivative: sum_k w_k (u(q + k h) - u(q - k h)) / h
_STENCIL = ((1, 45.0 / 60.0), (2, -9.0 / 60.0), (3, 1.0 / 60.0))


class UnsupportedBase(ValueError):
    pass


class StepTooLarge(ArithmeticError):
    pass


class Direction(str, enum.Enum):
    KILLING_DIR = "KillingDir"
    ORTHOGONAL = "Orthogonal"


@dataclass(frozen=True)
class PatchPoint:
    t: float
    psi: float
    x: float
    y: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"t must be interior, got {self.t}")
        if self.x * self.x + self.y * self.y >= CHART_RADIUS_SQ:
            raise ValueError("chart point too close to the pole")

    def coords(self) -> np.ndarray:
        return np.array([self.t, self.psi, self.x, self.y], dtype=float)

    @classmethod
    def from_coords(cls, c) -> "PatchPoint":
        return cls(*(float(v) for v in c))


Coords = np.ndarray


@dataclass(frozen=True, eq=False)
class MetricField:
    """Callables on coordinate 4-vectors: metric components, Weyl 1-form, complex structure."""

    component_fn: Callable[[Coords], np.ndarray]
    omega_fn: Callable[[Coords], np.ndarray] | None = None
    J_fn: Callable[[Coords], np.ndarray] | None = None
    dim: int = DIM

    def metric(self, p: PatchPoint | Coords) -> np.ndarray:
        return self.component_fn(_coords(p))

    def omega(self, p: PatchPoint | Coords) -> np.ndarray:
        if self.omega_fn is None:
            return np.zeros(self.dim)
        return self.omega_fn(_coords(p))

    def J(self, p: PatchPoint | Coords) -> np.ndarray:
        if self.J_fn is None:
            raise ValueError("metric field carries no complex structure")
        return self.J_fn(_coords(p))

    def with_omega(self, omega_fn) -> "MetricField":
        return MetricField(self.component_fn, omega_fn, self.J_fn, self.dim)


def _coords(p) -> np.ndarray:
    return p.coords() if isinstance(p, PatchPoint) else np.asarray(p, dtype=float)


# --- the concrete base --------------------------------------------------------


def _conformal(x, y) -> float:
    return 2.0 / (1.0 + x * x + y * y) ** 2


def monopole_potential(x, y) -> tuple[float, float]:
    """(A_x, A_y) for A = (x dy - y dx) / (1 + r^2); vanishes at the chart centre."""
    d = 1.0 + x * x + y * y
    return -y / d, x / d


def kahler_form_density(x, y) -> float:
    """omega_N = density * dx ^ dy, equal to the conformal factor of h."""
    return _conformal(x, y)


def fiber_frame(f_val: float, s: float, x: float, y: float) -> np.ndarray:
    """Columns: d/dt, d/dpsi, horizontal lifts of d/dx and d/dy."""
    Ax, Ay = monopole_potential(x, y)
    E = np.eye(DIM)
    E[PSI, X] = -s * Ax
    E[PSI, Y] = -s * Ay
    return E


def build_patch_metric(f: Callable[[float], float], g: Callable[[float], float], spec: BundleSpec, *,
                       C_gap: float = 1.0, omega: Callable[[Coords], np.ndarray] | None = None) -> MetricField:
    """The ansatz metric over the S^2 base with its Weyl 1-form and complex structure.

    The 1-form defaults to c_norm * C_gap * f^2 theta (theta = dpsi + s A),
    the metric dual of the fibre Killing field scaled so that the Einstein–Weyl
    gap is C_gap^2 f^2.  Pass ``omega`` to override it.
    """
    if spec.n_complex != 2 or spec.epsilon is not Epsilon.POSITIVE:
        raise UnsupportedBase(f"oracle base is S^2 with n=2, epsilon=1; got n={spec.n_complex}, "
                              f"epsilon={int(spec.epsilon)}")
    s = spec.s_float
    m = spec.m
    c = 2.0 * math.sqrt(1.0 / (m - 2)) * C_gap

    def components(q: Coords) -> np.ndarray:
        t, _, x, y = q
        fv, gv = float(f(t)), float(g(t))
        Ax, Ay = monopole_potential(x, y)
        theta = np.array([0.0, 1.0, s * Ax, s * Ay])
        G = fv * fv * np.outer(theta, theta)
        G[T, T] += 1.0
        h0 = gv * gv * _conformal(x, y)
        G[X, X] += h0
        G[Y, Y] += h0
        return G

    def omega_default(q: Coords) -> np.ndarray:
        t, _, x, y = q
        fv = float(f(t))
        Ax, Ay = monopole_potential(x, y)
        return c * fv * fv * np.array([0.0, 1.0, s * Ax, s * Ay])

    def J_fn(q: Coords) -> np.ndarray:
        t, _, x, y = q
        fv = float(f(t))
        E = fiber_frame(fv, s, x, y)
        Jf = np.zeros((DIM, DIM))
        Jf[PSI, T] = 1.0 / fv   # J d/dt = d/dpsi / f
        Jf[T, PSI] = -fv        # J d/dpsi = -f d/dt
        Jf[Y, X] = 1.0          # J X^h = Y^h
        Jf[X, Y] = -1.0
        return E @ Jf @ np.linalg.inv(E)

    return MetricField(components, omega if omega is not None else omega_default, J_fn)


# --- finite differences -------------------------------------------------------


def _partial(fn: Callable[[Coords], np.ndarray], q: Coords, axis: int, h: float) -> np.ndarray:
    acc = None
    for k, w in _STENCIL:
        qp, qm = q.copy(), q.copy()
        qp[axis] += k * h
        qm[axis] -= k * h
        v = w * (np.asarray(fn(qp)) - np.asarray(fn(qm)))
        acc = v if acc is None else acc + v
    return acc / h


def _gradient(fn: Callable[[Coords], np.ndarray], q: Coords, h: float) -> np.ndarray:
    """d[l, ...] = partial_l fn."""
    return np.stack([_partial(fn, q, axis, h) for axis in range(DIM)])


def _christoffel_raw(field: MetricField, q: Coords, h: float) -> np.ndarray:
    G = field.component_fn(q)
    Ginv = np.linalg.inv(G)
    dG = _gradient(field.component_fn, q, h)  # dG[l, i, j] = d_l g_ij
    # Gamma_lij (lowered) = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    low = 0.5 * (np.transpose(dG, (2, 0, 1)) + np.transpose(dG, (2, 1, 0)) - dG)
    return np.einsum("kl,lij->kij", Ginv, low)


def _check_richardson(a: np.ndarray, b: np.ndarray, what: str) -> None:
    scale = max(1.0, float(np.max(np.abs(a))))
    diff = float(np.max(np.abs(a - b)))
    if diff > RICHARDSON_TOL * scale:
        raise StepTooLarge(f"{what}: step and half-step disagree by {diff:.3e}")


def christoffel(field: MetricField, p: PatchPoint | Coords, step: float = DEFAULT_STEP, *,
                check: bool = True) -> np.ndarray:
    """Gamma[k, i, j] = Γ^k_ij by central differences of the metric components."""
    q = _coords(p)
    gam = _christoffel_raw(field, q, step)
    if check:
        _check_richardson(gam, _christoffel_raw(field, q, 0.5 * step), "christoffel")
    return gam


def _ricci_from_connection(gamma_fn: Callable[[Coords], np.ndarray], q: Coords, h: float) -> np.ndarray:
    """R_jk = d_i Γ^i_jk - d_j Γ^i_ik + Γ^i_il Γ^l_jk - Γ^i_jl Γ^l_ik (any torsion-free connection)."""
    gam = gamma_fn(q)
    dgam = _gradient(gamma_fn, q, h)  # dgam[l, k, i, j] = d_l Γ^k_ij
    term1 = np.einsum("iijk->jk", dgam)
    trace = np.einsum("liik->lk", dgam)  # d_l Γ^i_ik
    term3 = np.einsum("iil,ljk->jk", gam, gam)
    term4 = np.einsum("ijl,lik->jk", gam, gam)
    return term1 - trace + term3 - term4


def ricci_numeric(field: MetricField, p: PatchPoint | Coords, step: float = DEFAULT_STEP, *,
                  check: bool = True) -> np.ndarray:
    """Levi-Civita Ricci tensor (lower indices), symmetrized; the skew part is checked to be small."""
    q = _coords(p)

    def compute(h):
        return _ricci_from_connection(lambda qq: _christoffel_raw(field, qq, h), q, h)

    R = compute(step)
    if check:
        _check_richardson(R, compute(0.5 * step), "ricci")
    skew = float(np.max(np.abs(R - R.T)))
    if skew > 1e-6 * max(1.0, float(np.max(np.abs(R)))):
        raise StepTooLarge(f"ricci: asymmetry {skew:.3e}")
    return 0.5 * (R + R.T)


def weyl_christoffel(field: MetricField, q: Coords, h: float) -> np.ndarray:
    """Coefficients of D = ∇ + A with A^k_ij = -1/2 (w_i δ^k_j + w_j δ^k_i - g_ij w^k), so that Dg = w ⊗ g."""
    gam = _christoffel_raw(field, q, h)
    G = field.component_fn(q)
    w = field.omega(q)
    w_up = np.linalg.solve(G, w)
    eye = np.eye(DIM)
    A = -0.5 * (np.einsum("i,kj->kij", w, eye) + np.einsum("j,ki->kij", w, eye) - np.einsum("ij,k->kij", G, w_up))
    return gam + A


def weyl_ricci(field: MetricField, p: PatchPoint | Coords, step: float = DEFAULT_STEP, *,
               check: bool = True) -> np.ndarray:
    """Ricci tensor of the Weyl connection, rho^D(Y, Z) = tr(X -> R^D(X, Y) Z); not symmetric in general."""
    q = _coords(p)

    def compute(h):
        return _ricci_from_connection(lambda qq: weyl_christoffel(field, qq, h), q, h)

    R = compute(step)
    if check:
        _check_richardson(R, compute(0.5 * step), "weyl_ricci")
    return R


def exterior_derivative(field: MetricField, p: PatchPoint | Coords, step: float = DEFAULT_STEP) -> np.ndarray:
    """(dω)_jk = d_j ω_k - d_k ω_j."""
    q = _coords(p)
    dw = _gradient(field.omega, q, step)
    return dw - dw.T


def divergence_omega(field: MetricField, p: PatchPoint | Coords, step: float = DEFAULT_STEP) -> float:
    """div ω = g^ij ∇_i ω_j."""
    q = _coords(p)
    G = field.component_fn(q)
    gam = _christoffel_raw(field, q, step)
    dw = _gradient(field.omega, q, step)
    nabla = dw - np.einsum("kij,k->ij", gam, field.omega(q))
    return float(np.einsum("ij,ij->", np.linalg.inv(G), nabla))


# --- frames and frame norms ---------------------------------------------------


def orthonormal_coframe(G: np.ndarray) -> np.ndarray:
    """Lower-triangular L with G = L L^T; frame components of a bilinear form B are L^-1 B L^-T."""
    return np.linalg.cholesky(G)


def frame_components(G: np.ndarray, B: np.ndarray) -> np.ndarray:
    L = orthonormal_coframe(G)
    Li = scipy.linalg.solve_triangular(L, np.eye(DIM), lower=True)
    return Li @ B @ Li.T


def adapted_frame(field: MetricField, p: PatchPoint | Coords) -> dict[str, np.ndarray]:
    """Unit vectors along d/dt, the fibre, and the two horizontal lifts (coordinate components)."""
    q = _coords(p)
    G = field.component_fn(q)
    _, _, x, y = q
    Ax, Ay = monopole_potential(x, y)
    # s from the metric: theta-component ratio g_psi,x / g_psi,psi = s A_x
    gpp = G[PSI, PSI]
    cols = {"t": np.array([1.0, 0.0, 0.0, 0.0]), "fiber": np.array([0.0, 1.0, 0.0, 0.0])}
    hx = np.array([0.0, -G[PSI, X] / gpp, 1.0, 0.0])
    hy = np.array([0.0, -G[PSI, Y] / gpp, 0.0, 1.0])
    cols["hx"], cols["hy"] = hx, hy
    return {k: v / math.sqrt(v @ G @ v) for k, v in cols.items()}


# --- eigenvalues --------------------------------------------------------------


@dataclass(frozen=True)
class LabeledEigenvalues:
    """Ricci eigenvalues labeled by the adapted distribution that carries them."""

    t: float
    fiber: float
    horizontal: float
    spectrum: np.ndarray
    eigvec_residual: float

    def as_triple(self) -> tuple[float, float, float]:
        return (self.t, self.fiber, self.horizontal)


def labeled_ricci_eigenvalues(field: MetricField, p: PatchPoint | Coords, step: float = DEFAULT_STEP,
                              *, ricci: np.ndarray | None = None) -> LabeledEigenvalues:
    """Rayleigh quotients of Ric on the adapted frame, with an eigenvector check.

    Each frame vector e must satisfy Ric e = λ g e; the worst violation
    (measured in the g-norm) is returned as ``eigvec_residual`` and the full
    generalized spectrum of (Ric, g) is returned for comparison.
    """
    q = _coords(p)
    G = field.component_fn(q)
    R = ricci_numeric(field, q, step) if ricci is None else ricci
    frame = adapted_frame(field, q)
    Ginv = np.linalg.inv(G)
    rq = {}
    worst = 0.0
    for name, e in frame.items():
        lam = float(e @ R @ e)
        rq[name] = lam
        r = Ginv @ (R @ e) - lam * e
        worst = max(worst, math.sqrt(abs(r @ G @ r)))
    spectrum = scipy.linalg.eigh(R, G, eigvals_only=True)
    return LabeledEigenvalues(rq["t"], rq["fiber"], 0.5 * (rq["hx"] + rq["hy"]), spectrum, worst)


# --- Einstein–Weyl and Killing-tensor checks ---------------------------------


def einstein_weyl_residual(field: MetricField, p: PatchPoint | Coords, step: float = DEFAULT_STEP, *,
                           ricci: np.ndarray | None = None) -> tuple[float, float]:
    """max frame component of ρ + (m-2)/4 ω⊗ω - Λ g with Λ fitted as the g-trace / m; returns (residual, Λ)."""
    q = _coords(p)
    G = field.component_fn(q)
    R = ricci_numeric(field, q, step) if ricci is None else ricci
    w = field.omega(q)
    E = R + 0.25 * (DIM - 2) * np.outer(w, w)
    Lam = float(np.trace(np.linalg.solve(G, E)) / DIM)
    res = frame_components(G, E - Lam * G)
    return float(np.max(np.abs(res))), Lam


def ricci_endomorphism(field: MetricField, step: float = DEFAULT_STEP) -> Callable[[Coords], np.ndarray]:
    def S(q):
        q = _coords(q)
        return np.linalg.solve(field.component_fn(q), ricci_numeric(field, q, step, check=False))

    return S


def covariant_derivative_endomorphism(field: MetricField, S_fn: Callable[[Coords], np.ndarray],
                                      p: PatchPoint | Coords, step: float = OUTER_STEP) -> np.ndarray:
    """nS[k, i, j] = (∇_k S)^i_j."""
    q = _coords(p)
    S = S_fn(q)
    dS = _gradient(S_fn, q, step)
    gam = _christoffel_raw(field, q, DEFAULT_STEP)
    return dS + np.einsum("ikl,lj->kij", gam, S) - np.einsum("lkj,il->kij", gam, S)


def random_unit_vectors(G: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Rows are g-unit vectors, uniformly distributed in an orthonormal frame."""
    u = rng.standard_normal((count, DIM))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    L = orthonormal_coframe(G)
    return scipy.linalg.solve_triangular(L.T, u.T, lower=False).T


def killing_tensor_residual(field: MetricField, S_fn: Callable[[Coords], np.ndarray], p: PatchPoint | Coords,
                            trials: int = 50, *, rng: np.random.Generator | None = None,
                            step: float = OUTER_STEP) -> float:
    """max over random g-unit X of |g((∇_X S) X, X)|."""
    q = _coords(p)
    rng = np.random.default_rng(0) if rng is None else rng
    G = field.component_fn(q)
    nS = covariant_derivative_endomorphism(field, S_fn, q, step)
    worst = 0.0
    for Xv in random_unit_vectors(G, trials, rng):
        val = Xv @ G @ np.einsum("kij,k,j->i", nS, Xv, Xv)
        worst = max(worst, abs(float(val)))
    return worst


def trace_identity_residual(field: MetricField, p: PatchPoint | Coords, step: float = OUTER_STEP) -> tuple[float, float]:
    """|tr ∇S - dτ/2| in the frame norm for S the Ricci endomorphism; returns (residual, |dτ|)."""
    q = _coords(p)
    S_fn = ricci_endomorphism(field)
    nS = covariant_derivative_endomorphism(field, S_fn, q, step)
    div = np.einsum("iij->j", nS)
    dtau = _gradient(lambda qq: np.trace(S_fn(qq)), q, step)
    G = field.component_fn(q)
    Ginv = np.linalg.inv(G)
    r = div - 0.5 * dtau
    return math.sqrt(abs(r @ Ginv @ r)), math.sqrt(abs(dtau @ Ginv @ dtau))


def one_one_residual(field: MetricField, p: PatchPoint | Coords, step: float = DEFAULT_STEP) -> float:
    """max over coordinate basis pairs of |dω(JX, JY) - dω(X, Y)|."""
    q = _coords(p)
    dw = exterior_derivative(field, q, step)
    J = field.J(q)
    return float(np.max(np.abs(J.T @ dw @ J - dw)))


def hermitian_residual(field: MetricField, p: PatchPoint | Coords) -> tuple[float, float]:
    """(|J^2 + 1|, |g(J., J.) - g|) at p."""
    q = _coords(p)
    J = field.J(q)
    G = field.component_fn(q)
    return (float(np.max(np.abs(J @ J + np.eye(DIM)))), float(np.max(np.abs(J.T @ G @ J - G))))


def mean_curvature_normal(field: MetricField, which: Direction | str, p: PatchPoint | Coords,
                          step: float = DEFAULT_STEP) -> np.ndarray:
    """KillingDir: the part of ∇_U U orthogonal to the unit fibre vector U.

    Orthogonal: over an orthonormal frame {X} of U-perp, the U-component of
    ∇_X X (times U) with the largest magnitude; zero when the complement is
    totally geodesic.
    """
    which = Direction(which)
    q = _coords(p)
    G = field.component_fn(q)
    gam = _christoffel_raw(field, q, step)
    U = adapted_frame(field, q)["fiber"]
    if which is Direction.KILLING_DIR:
        # U = d/dpsi / |d/dpsi| and nothing depends on psi, so U(U) = 0
        v = np.einsum("kij,i,j->k", gam, U, U)
        return v - (v @ G @ U) * U

    def frame_field(name):
        return lambda qq: adapted_frame(field, qq)[name]

    best = np.zeros(DIM)
    for name in ("t", "hx", "hy"):
        Xf = frame_field(name)
        Xv = Xf(q)
        dX = _gradient(Xf, q, step)  # dX[l, k] = d_l X^k
        v = Xv @ dX + np.einsum("kij,i,j->k", gam, Xv, Xv)
        proj = (v @ G @ U) * U
        if np.linalg.norm(proj) > np.linalg.norm(best):
            best = proj
    return best


# --- random test profiles -----------------------------------------------------


@dataclass(frozen=True)
class TrigProfile:
    """c0 + sum_k a_k cos(w_k t + phi_k), with analytic first and second derivatives."""

    c0: float
    amps: tuple[float, ...]
    freqs: tuple[float, ...]
    phases: tuple[float, ...]

    def __call__(self, t):
        return self.c0 + sum(a * np.cos(w * t + ph) for a, w, ph in zip(self.amps, self.freqs, self.phases))

    def d1(self, t):
        return sum(-a * w * np.sin(w * t + ph) for a, w, ph in zip(self.amps, self.freqs, self.phases))

    def d2(self, t):
        return sum(-a * w * w * np.cos(w * t + ph) for a, w, ph in zip(self.amps, self.freqs, self.phases))

    @property
    def lower_bound(self) -> float:
        return self.c0 - sum(abs(a) for a in self.amps)


def random_profile(rng: np.random.Generator, base: float = 1.0, terms: int = 2) -> TrigProfile:
    """A random profile bounded below by base / 2 (so positive everywhere)."""
    amps = rng.uniform(-1.0, 1.0, terms)
    amps *= 0.5 * base / np.sum(np.abs(amps))
    return TrigProfile(base, tuple(amps), tuple(rng.uniform(0.3, 2.0, terms)),
                       tuple(rng.uniform(0.0, 2 * np.pi, terms)))


def random_profile_pair(rng: np.random.Generator) -> tuple[TrigProfile, TrigProfile]:
    return random_profile(rng, rng.uniform(0.5, 1.5)), random_profile(rng, rng.uniform(0.5, 1.5))


def random_patch_point(rng: np.random.Generator, t_range: tuple[float, float]) -> PatchPoint:
    r = math.sqrt(rng.uniform(0.0, 4.0))
    phi = rng.uniform(0.0, 2 * np.pi)
    return PatchPoint(float(rng.uniform(*t_range)), float(rng.uniform(0.0, 2 * np.pi)),
                      r * math.cos(phi), r * math.sin(phi))
