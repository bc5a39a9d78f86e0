"""Pseudo-spectral simulator for the semi-relativistic Schrodinger-Poisson system."""

from .diagnostics import DiagnosticsRecord, conservation_report, record
from .ensemble import (
    Ensemble,
    density,
    energy,
    gram_matrix,
    hartree_rhs,
    poisson_solve,
    random_ensemble,
    sobolev_norm,
)
from .integrator import BlowUpError, StepParams, duhamel_midpoint_step, free_flow, potential_kick, run, strang_step
from .spectral import DomainSpec

__all__ = [
    "BlowUpError", "DiagnosticsRecord", "DomainSpec", "Ensemble", "StepParams", "conservation_report",
    "density", "duhamel_midpoint_step", "energy", "free_flow", "gram_matrix", "hartree_rhs",
    "poisson_solve", "potential_kick", "random_ensemble", "record", "run", "sobolev_norm", "strang_step",
]
