"""Closed-form Ricci eigenvalues of the ansatz and the Einstein–Weyl / Gray relations.

Two index conventions meet here.  The ansatz eigenvalues are labelled by
distribution: ``lambda0`` on the d/dt direction, ``lambda1`` on the circle
fibre (the Killing direction), ``lambda2`` on the horizontal space.  The
Einstein–Weyl relations are stated for a Killing-direction eigenvalue of
multiplicity one and an "other" eigenvalue of multiplicity m - 1; on a
Gauduchon profile ``lambda0 == lambda2`` is the other one.  The bridge is
:attr:`EigenTriple.killing` / :attr:`EigenTriple.other`.

Functions taking ``m`` want the real dimension; functions taking a
:class:`BundleSpec` read the complex dimension from it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .bundle import BundleSpec
from .profiles import ProfileJet


class SingularPoint(ValueError):
    pass


@dataclass(frozen=True)
class EigenTriple:
    lambda0: float  # d/dt direction
    lambda1: float  # fibre (Killing) direction
    lambda2: float  # horizontal distribution

    @property
    def killing(self) -> float:
        return self.lambda1

    @property
    def other(self) -> float:
        return self.lambda0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.lambda0, self.lambda1, self.lambda2)


def c_norm(m: int) -> float:
    """Normalization of the Weyl 1-form against the Killing field, 2 sqrt(1/(m-2))."""
    if m <= 2:
        raise ValueError("need real dimension m > 2")
    return 2.0 * math.sqrt(1.0 / (m - 2))


@dataclass(frozen=True)
class WeylConstants:
    C_gap: float
    C0: float
    Lambda: np.ndarray
    c_norm: float
    m: int

    def __post_init__(self):
        if not math.isclose(self.c_norm, c_norm(self.m), rel_tol=0, abs_tol=0):
            raise ValueError("c_norm does not match the dimension")


def eigenvalues_at(f, fp, fpp, g, gp, gpp, n: int, eps: float, s: float):
    """Ricci eigenvalues of dt^2 + f^2 theta^2 + g^2 h, base normalized to scalar curvature 4(n-1)eps.

    ``n`` is the complex dimension.  Works elementwise on arrays.
    """
    P = s * s * f * f / (4.0 * g**4)
    Q = fp * gp / (f * g)
    lam0 = -2.0 * (n - 1) * gpp / g - fpp / f
    lam1 = -fpp / f + 2.0 * (n - 1) * (P - Q)
    lam2 = -gpp / g + (P - Q) + 2.0 * eps / g**2 - 3.0 * P - (2 * n - 3) * gp**2 / g**2
    return lam0, lam1, lam2


def _spec_args(spec: BundleSpec) -> tuple[int, float, float]:
    return spec.n_complex, float(int(spec.epsilon)), spec.s_float


def ricci_eigenvalues(jet: ProfileJet, spec: BundleSpec, node_index: int) -> EigenTriple:
    f, fp, fpp, g, gp, gpp = jet.at(node_index)
    if not (f > 0 and g > 0):
        raise SingularPoint(f"node {node_index} has f={f}, g={g}; eigenvalues need f, g > 0")
    return EigenTriple(*(float(v) for v in eigenvalues_at(f, fp, fpp, g, gp, gpp, *_spec_args(spec))))


def _extrapolate_end(t: np.ndarray, y: np.ndarray, at: float, degree: int = 4, width: int = 8) -> float:
    coeffs = np.polynomial.polynomial.polyfit(t[:width] - at, y[:width], degree)
    return float(coeffs[0])


def eigenvalue_field(jet: ProfileJet, spec: BundleSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigenvalues at every node; endpoint values by one-sided extrapolation from interior nodes."""
    inner = jet.grid.interior()
    vals = eigenvalues_at(jet.f[inner], jet.fp[inner], jet.fpp[inner], jet.g[inner],
                          jet.gp[inner], jet.gpp[inner], *_spec_args(spec))
    t = jet.t[inner]
    out = []
    for lam in vals:
        full = np.empty(jet.grid.count)
        full[inner] = lam
        full[0] = _extrapolate_end(t, lam, 0.0)
        full[-1] = _extrapolate_end(t[::-1], lam[::-1], jet.L)
        out.append(full)
    return tuple(out)


def gauduchon_residuals(jet: ProfileJet, spec: BundleSpec, C_gap: float) -> tuple[np.ndarray, np.ndarray]:
    """G1 = lambda0 - lambda2 and G2 = lambda0 - lambda1 - C^2 f^2 over interior nodes."""
    inner = jet.grid.interior()
    f = jet.f[inner]
    if np.any(f <= 0) or np.any(jet.g[inner] <= 0):
        raise SingularPoint("profile vanishes at an interior node")
    lam0, lam1, lam2 = eigenvalues_at(f, jet.fp[inner], jet.fpp[inner], jet.g[inner],
                                      jet.gp[inner], jet.gpp[inner], *_spec_args(spec))
    return lam0 - lam2, lam0 - lam1 - C_gap**2 * f**2


def gray_combination(killing, other, m: int):
    """(m-4) * other + 2 * killing; constant on Einstein–Weyl Gauduchon metrics."""
    return (m - 4) * np.asarray(other) + 2.0 * np.asarray(killing)


def gray_constant_residual(triples, spec: BundleSpec) -> float:
    """Spread (max - min) of the Gray combination over the supplied eigenvalue triples."""
    killing = np.array([tr.killing for tr in triples])
    other = np.array([tr.other for tr in triples])
    if killing.size == 0:
        return 0.0
    combo = gray_combination(killing, other, spec.m)
    return float(np.max(combo) - np.min(combo))


def eigenvalues_from_scalar(tau: float, C0: float, m: int) -> tuple[float, float]:
    """Recover (other, killing) eigenvalues from scalar curvature and the Gray constant.

    Returned in the order (lambda1, lambda0) of the two-eigenvalue theorem, i.e.
    (other, killing).
    """
    if m < 3:
        raise ValueError("need m >= 3")
    lam_other = (2.0 * tau - C0) / (m + 2)
    lam_killing = ((m - 1) * C0 - (m - 4) * tau) / (m + 2)
    return lam_other, lam_killing


def lambda_bar(Lambda: float, div_omega: float, norm_omega_sq: float, m: int) -> float:
    if m < 3:
        raise ValueError("need m >= 3")
    return 2.0 * Lambda + div_omega - 0.5 * (m - 2) * norm_omega_sq


def conformal_scalar(lambda_killing: float, m: int) -> float:
    return m * lambda_killing


def weyl_gap_from_killing(lambda_other: float, lambda_killing: float, norm_xi_sq: float, m: int) -> float:
    return (lambda_other - lambda_killing) - 0.25 * (m - 2) * norm_xi_sq


def weyl_constants(jet: ProfileJet, spec: BundleSpec, C_gap: float) -> WeylConstants:
    lam0, lam1, _ = eigenvalue_field(jet, spec)
    C0 = float(np.mean(gray_combination(lam1, lam0, spec.m)))
    return WeylConstants(C_gap=C_gap, C0=C0, Lambda=lam0, c_norm=c_norm(spec.m), m=spec.m)


EIGEN_COLUMNS = ("t", "lambda0", "lambda1", "lambda2")


def eigenvalue_csv(jet: ProfileJet, spec: BundleSpec) -> str:
    """Node-wise eigenvalue field as CSV (endpoint rows extrapolated)."""
    fields = eigenvalue_field(jet, spec)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EIGEN_COLUMNS)
    for row in zip(jet.t, *fields):
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
