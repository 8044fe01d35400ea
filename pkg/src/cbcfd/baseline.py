"""Classical second-order block-centered scheme, as a baseline.

Same staggered grids, same Crank-Nicolson/memory treatment, but every
compact average is replaced by the identity.  The steppers in
``solver1d``/``solver2d`` already accept a scheme switch; these wrappers
pin it, so that convergence studies can call the baseline by name.
"""

from __future__ import annotations

from . import solver1d, solver2d
from .solver1d import ProblemSpec1D, StepperState1D
from .solver2d import ProblemSpec2D, StepperState2D

SCHEME = solver1d.SCHEME_CLASSICAL


def step_bcfd_1d(state: StepperState1D, spec: ProblemSpec1D, factor=None) -> StepperState1D:
    return solver1d.step(state, spec, scheme=SCHEME, factor=factor)


def run_bcfd_1d(spec: ProblemSpec1D, M: int, dt: float, debug_history=False):
    return solver1d.run(spec, M, dt, scheme=SCHEME, debug_history=debug_history)


def step_bcfd_2d(state: StepperState2D, spec: ProblemSpec2D, factor=None) -> StepperState2D:
    return solver2d.step_2d(state, spec, scheme=SCHEME, factor=factor)


def run_bcfd_2d(spec: ProblemSpec2D, N1: int, N2: int, dt: float, debug_history=False):
    return solver2d.run_2d(spec, N1, N2, dt, scheme=SCHEME, debug_history=debug_history)
