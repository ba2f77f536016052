"""Manufactured solutions and the h-/p-version convergence studies."""

from .fields import ScalarField, forcing, manufactured_solution
from .fitting import fit_slope
from .report import emit_report
from .studies import (CellResult, ConvergenceReport, SlopeResult, StudyConfig,
                      run_h_study, run_p_study)

__all__ = ["ScalarField", "manufactured_solution", "forcing", "fit_slope",
           "emit_report", "StudyConfig", "CellResult", "SlopeResult",
           "ConvergenceReport", "run_h_study", "run_p_study"]
