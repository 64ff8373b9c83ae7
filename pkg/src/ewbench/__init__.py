"""Numerical workbench for Gauduchon Einstein–Weyl metrics of cohomogeneity one.

Modules: ``bundle`` (bundle data and boundary conditions), ``profiles``
(spectral grids and profile jets), ``closed_form`` (ansatz Ricci eigenvalues),
``oracle`` (finite-difference curvature of the full metric), ``solver``
(shooting and sweeps), ``verify`` (certificates) and ``cli``.
"""

from .bundle import BundleSpec, BundleSpecError, Epsilon, Topology, boundary_conditions, validate_bundle_spec
from .closed_form import EigenTriple, eigenvalues_at, gauduchon_residuals, ricci_eigenvalues
from .profiles import Grid, ProfileJet, make_grid, sample_profile
from .solver import SolutionProfile, critical_point_check, shooting_residual, solve, sweep
from .verify import certify, compare_certificates, formula_check, verify_certificate

__version__ = "0.1.0"

__all__ = [
    "BundleSpec", "BundleSpecError", "Epsilon", "Topology", "boundary_conditions", "validate_bundle_spec",
    "EigenTriple", "eigenvalues_at", "gauduchon_residuals", "ricci_eigenvalues",
    "Grid", "ProfileJet", "make_grid", "sample_profile",
    "SolutionProfile", "critical_point_check", "shooting_residual", "solve", "sweep",
    "certify", "compare_certificates", "formula_check", "verify_certificate",
]
