"""Compact block-centered finite-difference (CBCFD) solvers for flow with a
Volterra memory flux, plus a classical second-order baseline and a
manufactured-solutions convergence harness.

The schemes keep pressure at cell centers and velocity at cell faces on a
staggered grid; three-point compact interpolation operators raise the spatial
order to four, and Crank-Nicolson time stepping with composite-midpoint
quadrature handles the memory integral.
"""

from .grids import (
    StaggeredGrid1D,
    StaggeredGrid2D,
    CellField,
    FaceFieldX,
    FaceFieldY,
    inner_cell,
    inner_facex,
    inner_facey,
    norm,
)
from .history import HistoryState, midpoint_integral, advance_history
from .linalg import (
    BandedMatrix,
    SparseMatrix,
    SolverError,
    banded_solve,
    sparse_solve,
    dense_oracle_solve,
)
from .solver1d import ProblemSpec1D, StepperState1D, init_utilde, step, run
from .solver2d import ProblemSpec2D, StepperState2D, init_utilde_2d, step_2d, run_2d
from .baseline import run_bcfd_1d, run_bcfd_2d, step_bcfd_1d, step_bcfd_2d
from .mms import MmsProblem, ErrorReport, example1, example2, derive_forcing, verify_consistency, error_report
from .report import RunConfig, ConvergenceReport, run_study, emit_csv, emit_markdown, emit_loglog_data

__version__ = "0.1.0"
