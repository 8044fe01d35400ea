"""One-dimensional staggered-grid stepper with no-flux boundaries.

The implicit system couples cell pressures and interior-face auxiliary
velocities.  Each Crank-Nicolson step solves, in the interleaved unknown
vector ``(P_0, U_1, P_1, U_2, ..., P_{M-1})``:

* mass rows (one per cell): compact-averaged pressure increment over dt plus
  the divergence of the half-step total flux equals the compact-averaged
  forcing at the half step;
* constitutive rows (one per interior face): the pressure gradient plus the
  compact average of (velocity / a) vanishes.

The half-step total flux expands into ``c * (U_old + U_new) + dt * S`` with
``c = 1/2 + (dt/4) * b_mid / a`` — the Crank-Nicolson average of the
instantaneous flux plus the composite-midpoint memory sum, whose newest
half-step sample is split between the known and unknown velocity levels.
Boundary faces carry zero velocity data throughout, so the classical
(identity-operator) variant and the compact one share all of this machinery
and differ only in the stencils selected.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .grids import CellField, FaceFieldX, StaggeredGrid1D, inner_facex, norm
from .history import HistoryState, advance_history
from .linalg import BandedFactor, BandedMatrix, banded_factor, banded_solve
from .operators import (
    delta_cells_to_faces_matrix,
    delta_faces_to_cells_matrix,
    diff_cells_to_faces,
    diff_faces_to_cells,
    interp_cell_hat,
    interp_cell_tilde,
    interp_face_noflux,
    psi_face_noflux_matrix,
    psi_hat_matrix,
)

SCHEME_COMPACT = "cbcfd"
SCHEME_CLASSICAL = "bcfd"
_SCHEMES = (SCHEME_COMPACT, SCHEME_CLASSICAL)


@dataclass
class ProblemSpec1D:
    """Problem data on (0, L) x (0, T].

    ``a(x)`` must be strictly positive; ``b(x, t)`` and ``f(x, t)`` are the
    memory kernel coefficient and the source.  All callables must accept
    numpy arrays.  ``exact_p(x, t)`` / ``exact_u_tilde(x, t)``, when given,
    enable error reporting.  Set ``b_time_independent`` when b never changes
    in time so the step matrix can be factorized once.
    """

    L: float
    T: float
    a: callable
    b: callable
    f: callable
    p0: callable
    exact_p: callable = None
    exact_u_tilde: callable = None
    b_time_independent: bool = False

    def validate(self, grid: StaggeredGrid1D):
        xs = np.linspace(0.0, self.L, 1001)
        avals = np.asarray(self.a(xs), dtype=float)
        if avals.shape != xs.shape or np.min(avals) <= 0.0:
            raise ValueError("coefficient a must be strictly positive on the domain")
        # no-flux compatibility of the initial data at both walls
        d = min(grid.h, self.L * 1e-5)
        lo = (-3.0 * self.p0(0.0) + 4.0 * self.p0(d) - self.p0(2 * d)) / (2 * d)
        hi = (3.0 * self.p0(self.L) - 4.0 * self.p0(self.L - d) + self.p0(self.L - 2 * d)) / (2 * d)
        for x, slope in ((0.0, lo), (self.L, hi)):
            if abs(float(self.a(np.array([x]))[0]) * slope) > 1e-8:
                warnings.warn(
                    f"initial pressure violates the no-flux wall condition at x={x} "
                    f"(flux {float(self.a(np.array([x]))[0]) * slope:.2e})",
                    stacklevel=2,
                )


@dataclass
class StepperState1D:
    """Solution at time level n: cell pressures, face velocities, memory sum."""

    n: int
    p: CellField
    u_tilde: FaceFieldX
    history: HistoryState
    dt: float

    @property
    def time(self):
        return self.n * self.dt


def _require_scheme(scheme):
    if scheme not in _SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {_SCHEMES}")


def _face_coeffs(spec, grid, t_mid, dt):
    """a on faces, and the Crank-Nicolson/memory weight c on faces."""
    xf = grid.faces()
    a_f = np.asarray(spec.a(xf), dtype=float)
    c = 0.5 + (dt / 4.0) * np.asarray(spec.b(xf, t_mid), dtype=float) / a_f
    return a_f, c


def init_utilde(P0: CellField, spec: ProblemSpec1D, scheme=SCHEME_COMPACT) -> FaceFieldX:
    """Initial auxiliary velocity from the discrete constitutive relation.

    Solves (compact average of U/a) = -(pressure gradient) on interior faces
    with zero boundary-face data; the classical variant reduces to
    ``U = -a * gradient`` pointwise.
    """
    _require_scheme(scheme)
    grid = P0.grid
    a_f = np.asarray(spec.a(grid.faces()), dtype=float)
    rhs = -diff_cells_to_faces(P0.values, grid.h)
    A = BandedMatrix.from_sparse(_constitutive_block(grid, a_f, scheme))
    sol = banded_solve(A, rhs)
    full = np.zeros(grid.M + 1)
    full[1:-1] = sol
    return FaceFieldX(grid, full)


def _constitutive_block(grid, a_f, scheme):
    """Matrix of the velocity part of the constitutive rows (interior faces)."""
    M = grid.M
    inv_a_int = sp.diags(1.0 / a_f[1:-1])
    if scheme == SCHEME_COMPACT:
        return sp.csr_matrix(psi_face_noflux_matrix(M)[:, 1:-1] @ inv_a_int)
    return sp.csr_matrix(inv_a_int)


def _interleave_permutation(M):
    """Permutation taking the block vector [P; U_interior] to interleaved order."""
    new = np.empty(2 * M - 1, dtype=int)
    new[:M] = 2 * np.arange(M)
    new[M:] = 2 * np.arange(1, M) - 1
    Pm = sp.csr_matrix((np.ones(2 * M - 1), (new, np.arange(2 * M - 1))), shape=(2 * M - 1, 2 * M - 1))
    return Pm


def _system_matrix(grid, dt, c_faces, a_f, scheme) -> BandedMatrix:
    M, h = grid.M, grid.h
    if scheme == SCHEME_COMPACT:
        pressure_block = psi_hat_matrix(M) / dt
    else:
        pressure_block = sp.identity(M, format="csr") / dt
    flux_block = delta_faces_to_cells_matrix(M, h)[:, 1:-1] @ sp.diags(c_faces[1:-1])
    gradient_block = delta_cells_to_faces_matrix(M, h)
    A_block = sp.bmat(
        [[pressure_block, flux_block], [gradient_block, _constitutive_block(grid, a_f, scheme)]],
        format="csr",
    )
    Pm = _interleave_permutation(M)
    return BandedMatrix.from_sparse(Pm @ A_block @ Pm.T)


def _rhs_vector(state, spec, grid, c_faces, t_mid, scheme):
    M, h, dt = grid.M, grid.h, state.dt
    xc = grid.cells()
    f_mid = np.asarray(spec.f(xc, t_mid), dtype=float)
    if scheme == SCHEME_COMPACT:
        pressure_part = interp_cell_hat(state.p.values) / dt
        fL = float(spec.f(np.array([0.0]), t_mid)[0])
        fLh = float(spec.f(np.array([h]), t_mid)[0])
        fRh = float(spec.f(np.array([spec.L - h]), t_mid)[0])
        fR = float(spec.f(np.array([spec.L]), t_mid)[0])
        forcing_part = interp_cell_tilde(f_mid, (fL, fLh), (fRh, fR))
    else:
        pressure_part = state.p.values / dt
        forcing_part = f_mid
    w = c_faces * state.u_tilde.values + dt * state.history.weighted_sum
    rhs = np.zeros(2 * M - 1)
    rhs[0::2] = pressure_part + forcing_part - diff_faces_to_cells(w, h)
    return rhs


def assemble_step_system(state: StepperState1D, spec: ProblemSpec1D, scheme=SCHEME_COMPACT):
    """Implicit system for the next time level: (band matrix, right-hand side)."""
    _require_scheme(scheme)
    grid = state.p.grid
    t_mid = (state.n + 0.5) * state.dt
    a_f, c_faces = _face_coeffs(spec, grid, t_mid, state.dt)
    A = _system_matrix(grid, state.dt, c_faces, a_f, scheme)
    rhs = _rhs_vector(state, spec, grid, c_faces, t_mid, scheme)
    return A, rhs


def step(state: StepperState1D, spec: ProblemSpec1D, scheme=SCHEME_COMPACT, factor: BandedFactor = None) -> StepperState1D:
    """Advance one time step (optionally through a cached factorization)."""
    _require_scheme(scheme)
    grid = state.p.grid
    t_mid = (state.n + 0.5) * state.dt
    a_f, c_faces = _face_coeffs(spec, grid, t_mid, state.dt)
    rhs = _rhs_vector(state, spec, grid, c_faces, t_mid, scheme)
    if factor is None:
        A = _system_matrix(grid, state.dt, c_faces, a_f, scheme)
        try:
            x = banded_solve(A, rhs)
        except Exception as exc:
            raise type(exc)(f"step {state.n} -> {state.n + 1}: {exc}") from exc
    else:
        x = factor.solve(rhs)
    p_new = x[0::2]
    u_new = np.zeros(grid.M + 1)
    u_new[1:-1] = x[1::2]
    b_mid = np.asarray(spec.b(grid.faces(), t_mid), dtype=float)
    hist = advance_history(state.history, b_mid, a_f, state.u_tilde.values, u_new)
    return StepperState1D(
        n=state.n + 1,
        p=CellField(grid, p_new),
        u_tilde=FaceFieldX(grid, u_new),
        history=hist,
        dt=state.dt,
    )


def initial_state(spec: ProblemSpec1D, M: int, dt: float, scheme=SCHEME_COMPACT, debug_history=False) -> StepperState1D:
    grid = StaggeredGrid1D(L=spec.L, M=M)
    spec.validate(grid)
    n_steps = round(spec.T / dt)
    if n_steps < 1 or abs(n_steps * dt - spec.T) > 1e-9 * max(abs(spec.T), 1.0):
        raise ValueError("the final time must be an integer number of steps")
    P0 = CellField(grid, np.asarray(spec.p0(grid.cells()), dtype=float))
    U0 = init_utilde(P0, spec, scheme)
    hist = HistoryState.zero((grid.M + 1,), dt, debug=debug_history)
    return StepperState1D(n=0, p=P0, u_tilde=U0, history=hist, dt=dt)


def run(spec: ProblemSpec1D, M: int, dt: float, scheme=SCHEME_COMPACT, debug_history=False):
    """March from t=0 to t=T; returns the final state and, when the problem
    carries an exact solution, an error report."""
    from .mms import error_report_from_spec  # local import to avoid a cycle

    state = initial_state(spec, M, dt, scheme, debug_history=debug_history)
    n_steps = round(spec.T / dt)
    factor = None
    if spec.b_time_independent:
        A, _ = assemble_step_system(state, spec, scheme)
        factor = banded_factor(A)
    for _ in range(n_steps):
        state = step(state, spec, scheme, factor=factor)
    report = None
    if spec.exact_p is not None:
        report = error_report_from_spec(state, spec)
    return state, report


def total_flux(state: StepperState1D, spec: ProblemSpec1D) -> FaceFieldX:
    """Reconstruct the total (instantaneous + memory) flux at the current level."""
    return FaceFieldX(state.p.grid, state.u_tilde.values + state.dt * state.history.weighted_sum)


def step_residuals(old: StepperState1D, new: StepperState1D, spec: ProblemSpec1D, scheme=SCHEME_COMPACT):
    """Matrix-free residuals of the two discrete equations at a solved step.

    Returns (mass residual, constitutive residual), both in the max norm;
    used to certify that assembly and solve agree with the scheme as written.
    """
    _require_scheme(scheme)
    grid = old.p.grid
    h, dt = grid.h, old.dt
    t_mid = (old.n + 0.5) * dt
    a_f, c_faces = _face_coeffs(spec, grid, t_mid, dt)
    u_half = c_faces * (old.u_tilde.values + new.u_tilde.values) + dt * old.history.weighted_sum
    xc = grid.cells()
    f_mid = np.asarray(spec.f(xc, t_mid), dtype=float)
    if scheme == SCHEME_COMPACT:
        dP = (interp_cell_hat(new.p.values) - interp_cell_hat(old.p.values)) / dt
        forcing = interp_cell_tilde(
            f_mid,
            (float(spec.f(np.array([0.0]), t_mid)[0]), float(spec.f(np.array([h]), t_mid)[0])),
            (float(spec.f(np.array([spec.L - h]), t_mid)[0]), float(spec.f(np.array([spec.L]), t_mid)[0])),
        )
    else:
        dP = (new.p.values - old.p.values) / dt
        forcing = f_mid
    mass = dP + diff_faces_to_cells(u_half, h) - forcing
    grad = diff_cells_to_faces(new.p.values, h)
    g = np.zeros(grid.M + 1)
    g[1:-1] = new.u_tilde.values[1:-1] / a_f[1:-1]
    if scheme == SCHEME_COMPACT:
        constitutive = grad + interp_face_noflux(g)
    else:
        constitutive = grad + g[1:-1]
    return float(np.max(np.abs(mass))), float(np.max(np.abs(constitutive)))


def mass_balance_residual(old: StepperState1D, new: StepperState1D, spec: ProblemSpec1D, scheme=SCHEME_COMPACT):
    """Relative defect of the per-step conservation identity.

    Summing the mass rows against the constant one telescopes the flux away
    (boundary faces carry no flux), leaving: the compact-averaged pressure
    mass advances by dt times the compact-averaged forcing integral.
    """
    _require_scheme(scheme)
    grid = old.p.grid
    h, dt = grid.h, old.dt
    t_mid = (old.n + 0.5) * dt
    f_mid = np.asarray(spec.f(grid.cells(), t_mid), dtype=float)
    if scheme == SCHEME_COMPACT:
        mass_new = h * float(np.sum(interp_cell_hat(new.p.values)))
        mass_old = h * float(np.sum(interp_cell_hat(old.p.values)))
        forcing = interp_cell_tilde(
            f_mid,
            (float(spec.f(np.array([0.0]), t_mid)[0]), float(spec.f(np.array([h]), t_mid)[0])),
            (float(spec.f(np.array([spec.L - h]), t_mid)[0]), float(spec.f(np.array([spec.L]), t_mid)[0])),
        )
    else:
        mass_new = h * float(np.sum(new.p.values))
        mass_old = h * float(np.sum(old.p.values))
        forcing = f_mid
    source = dt * h * float(np.sum(forcing))
    defect = abs(mass_new - mass_old - source)
    scale = max(abs(mass_new), abs(mass_old), abs(source),
                h * float(np.sum(np.abs(new.p.values))), 1e-300)
    return defect / scale


def velocity_error(state: StepperState1D, spec: ProblemSpec1D):
    """Discrete L2 error of the auxiliary velocity against the exact solution."""
    grid = state.p.grid
    t = state.time
    exact = np.zeros(grid.M + 1)
    exact[1:-1] = np.asarray(spec.exact_u_tilde(grid.interior_faces(), t), dtype=float)
    diff = FaceFieldX(grid, state.u_tilde.values - exact)
    return float(np.sqrt(inner_facex(diff, diff)))


def pressure_error(state: StepperState1D, spec: ProblemSpec1D):
    grid = state.p.grid
    exact = np.asarray(spec.exact_p(grid.cells(), state.time), dtype=float)
    return norm(CellField(grid, state.p.values - exact))
