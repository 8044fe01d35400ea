"""Manufactured-solution catalog and forcing-consistency oracle.

A manufactured problem pairs a stepper problem description with the closed
form it was built from.  The forcing that makes a chosen pressure an exact
solution is ``f = p_t - div(a grad p) - int_0^t div(b grad p) ds``; the
catalog carries two variants of it for each example:

* ``derived`` — obtained here by differentiating the closed-form pressure;
* ``printed`` — the formula the source tables were generated against,
  transcribed verbatim.

The two disagree for both catalog problems (the transcribed formulas are not
consistent with their stated pressures), which is why the consistency oracle
below exists: it re-evaluates the residual of the strong equation using
nothing but black-box calls to the closed-form pressure — Richardson-
extrapolated central differences in time and space, Gauss-Legendre
quadrature in the memory variable — so a wrong forcing cannot hide behind
its own derivation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .solver1d import ProblemSpec1D, StepperState1D, pressure_error, velocity_error
from .solver2d import (
    ProblemSpec2D,
    StepperState2D,
    pressure_error_2d,
    velocity_errors_2d,
)

FORCING_DERIVED = "derived"
FORCING_PRINTED = "printed"

#: base step for Richardson-extrapolated first derivatives
FIRST_DERIV_STEP = 1e-4
#: base step for the iterated second-derivative extrapolation; larger than
#: the first-derivative step because dividing by h^2 amplifies round-off,
#: and the sixth-order extrapolation keeps the truncation part negligible
SECOND_DERIV_STEP = 1e-2
#: Gauss-Legendre node count for the memory integral in the oracle
ORACLE_QUAD_NODES = 32
#: node count used when deriving forcings by quadrature; exact for
#: polynomial time dependence up to degree 127
DERIVE_QUAD_NODES = 64


@dataclass(frozen=True)
class ErrorReport:
    """Discrete L2 errors at the final time (2D keeps the per-axis parts)."""

    err_p: float
    err_u: float
    err_ux: float = None
    err_uy: float = None


@dataclass(frozen=True)
class ClosedFormSolution:
    """A pressure field with the closed-form derivatives the forcing needs.

    All callables take ``(x, t)`` in one dimension and ``(x, y, t)`` in two;
    ``grad`` and ``second`` hold one callable per axis (unmixed second
    derivatives only — the mobility is diagonal).
    """

    ndim: int
    p: callable
    dp_dt: callable
    grad: tuple
    second: tuple


@dataclass(frozen=True)
class MmsProblem:
    """A runnable problem plus the closed form and forcing variant behind it.

    ``total_flux`` holds the closed-form instantaneous-plus-memory flux, one
    callable per axis, for reconstruction checks.
    """

    name: str
    spec: object  # ProblemSpec1D | ProblemSpec2D
    solution: ClosedFormSolution
    forcing_variant: str
    total_flux: tuple = ()

    @property
    def ndim(self):
        return self.solution.ndim


def _coeff_tuple(coeff, ndim):
    if isinstance(coeff, tuple):
        if len(coeff) != ndim:
            raise ValueError(f"expected {ndim} coefficient components, got {len(coeff)}")
        return coeff
    return (coeff,) * ndim


def _eval_coeff_a(fn, point):
    arrs = tuple(np.atleast_1d(c) for c in point)
    return float(np.asarray(fn(*arrs), dtype=float).ravel()[0])


def derive_forcing(p: ClosedFormSolution, a, b, point, time):
    """Forcing that makes ``p`` an exact solution, from its closed form.

    ``point`` is ``(x,)`` or ``(x, y)`` (a bare scalar is accepted in one
    dimension); ``a`` and ``b`` are the coefficient callables, per axis when
    given as a tuple.  The mobility is treated as spatially uniform — it is
    evaluated at the point and multiplies the second derivative — which
    covers the catalog; spatially varying coefficients are the oracle's job.
    The memory term integrates ``b * (second derivative)`` in time by
    Gauss-Legendre quadrature, exact for the catalog kernels.
    """
    if not isinstance(point, tuple):
        point = (point,)
    if len(point) != p.ndim:
        raise ValueError(f"expected a {p.ndim}-coordinate point, got {len(point)}")
    a_parts = _coeff_tuple(a, p.ndim)
    b_parts = _coeff_tuple(b, p.ndim)
    out = p.dp_dt(*point, time)
    for axis in range(p.ndim):
        out = out - _eval_coeff_a(a_parts[axis], point) * p.second[axis](*point, time)
    if time != 0.0:
        nodes, weights = roots_legendre(DERIVE_QUAD_NODES)
        s = 0.5 * time * (nodes + 1.0)
        w = 0.5 * time * weights
        for axis in range(p.ndim):
            vals = [
                float(np.asarray(b_parts[axis](*(np.atleast_1d(c) for c in point), si)).ravel()[0])
                * p.second[axis](*point, si)
                for si in s
            ]
            out = out - float(np.dot(w, vals))
    return out


# ---------------------------------------------------------------------------
# numerical differentiation for the oracle (black-box p only)

def _richardson_first(fn, x, h=FIRST_DERIV_STEP):
    def central(step):
        return (fn(x + step) - fn(x - step)) / (2.0 * step)

    return (4.0 * central(h / 2.0) - central(h)) / 3.0


def _richardson_second(fn, x, h=SECOND_DERIV_STEP):
    def d2(step):
        return (fn(x + step) - 2.0 * fn(x) + fn(x - step)) / (step * step)

    r1 = (4.0 * d2(h / 2.0) - d2(h)) / 3.0
    r2 = (4.0 * d2(h / 4.0) - d2(h / 2.0)) / 3.0
    return (16.0 * r2 - r1) / 15.0


def _numeric_divergence(p_fn, coeff_fns, point, time):
    """div(a grad p) at (point, time) by pure numerical differentiation,
    with the product rule handling spatially varying coefficients."""
    total = 0.0
    for axis, coeff in enumerate(coeff_fns):
        def p_along(xi, axis=axis):
            coords = list(point)
            coords[axis] = xi
            return p_fn(*coords, time)

        def a_along(xi, axis=axis):
            coords = list(point)
            coords[axis] = xi
            return float(np.asarray(coeff(*(np.atleast_1d(c) for c in coords))).ravel()[0])

        x0 = point[axis]
        total += (
            _richardson_first(a_along, x0) * _richardson_first(p_along, x0)
            + a_along(x0) * _richardson_second(p_along, x0)
        )
    return total


def consistency_residual(problem: MmsProblem, point, time):
    """|p_t + div(total flux) - f| at one space-time point, all derivatives
    taken numerically from the black-box closed-form pressure."""
    sol = problem.solution
    spec = problem.spec
    if not isinstance(point, tuple):
        point = (point,)
    if sol.ndim == 1:
        a_fns = (spec.a,)
        b_fns = (spec.b,)
        f_val = float(np.asarray(spec.f(np.atleast_1d(point[0]), time)).ravel()[0])
    else:
        a_fns = (spec.ax, spec.ay)
        b_fns = (spec.bx, spec.by)
        f_val = float(
            np.asarray(spec.f(np.atleast_1d(point[0]), np.atleast_1d(point[1]), time)).ravel()[0]
        )

    def p_at_t(t):
        return sol.p(*point, t)

    dpdt = _richardson_first(p_at_t, time)
    diffusive = _numeric_divergence(sol.p, a_fns, point, time)
    memory = 0.0
    if time != 0.0:
        nodes, weights = roots_legendre(ORACLE_QUAD_NODES)
        s_nodes = 0.5 * time * (nodes + 1.0)
        s_weights = 0.5 * time * weights
        for s, w in zip(s_nodes, s_weights):
            if sol.ndim == 1:
                b_at = (lambda x, s=s: spec.b(x, s),)
            else:
                b_at = (lambda x, y, s=s: spec.bx(x, y, s), lambda x, y, s=s: spec.by(x, y, s))
            memory += w * _numeric_divergence(sol.p, b_at, point, s)
    return abs(dpdt - diffusive - memory - f_val)


def verify_consistency(problem: MmsProblem, sample_count=100, seed=20260822):
    """Max strong-equation residual of the problem's forcing over random
    interior space-time samples; the derived forcings sit at the noise floor
    of the differentiation (well under 1e-7), a mistranscribed forcing does
    not."""
    rng = np.random.default_rng(seed)
    spec = problem.spec
    margin = 0.05
    worst = 0.0
    for _ in range(sample_count):
        if problem.ndim == 1:
            x = spec.L * (margin + (1 - 2 * margin) * rng.random())
            point = (x,)
        else:
            x = spec.L1 * (margin + (1 - 2 * margin) * rng.random())
            y = spec.L2 * (margin + (1 - 2 * margin) * rng.random())
            point = (x, y)
        t = spec.T * (0.05 + 0.95 * rng.random())
        worst = max(worst, consistency_residual(problem, point, t))
    return worst


# ---------------------------------------------------------------------------
# catalog

def _poly_g(x):
    return x**4 * (1.0 - x) ** 4


def _poly_g1(x):
    return 4.0 * x**3 * (1.0 - x) ** 3 * (1.0 - 2.0 * x)


def _poly_g2(x):
    return 4.0 * x**2 * (1.0 - x) ** 2 * (3.0 - 14.0 * x + 14.0 * x**2)


_A1 = 1.0e-8


def example1(forcing=FORCING_DERIVED) -> MmsProblem:
    """One-dimensional polynomial problem: p = t x^4 (1-x)^4, a = 1e-8, b = 1.

    The derived forcing is f = g - (a t + t^2/2) g'' with g the spatial
    profile; the printed variant transcribes the published formula, whose
    polynomial t-groups do not match this pressure (kept selectable so the
    discrepancy stays demonstrable).
    """
    if forcing not in (FORCING_DERIVED, FORCING_PRINTED):
        raise ValueError(f"unknown forcing variant {forcing!r}")

    if forcing == FORCING_DERIVED:
        def f(x, t):
            return _poly_g(x) - (_A1 * t + 0.5 * t * t) * _poly_g2(x)
    else:
        def f(x, t):
            return _poly_g(x) - 4.0e-8 * x**2 * (1.0 - x) ** 2 * (
                3.0 - 14.0 * x + 11.0 * x**2
                - 1.5 * t**2 + 7.0 * x * t**2 + 3.0 * x**2 * t - 7.0 * x**2 * t**2
            )

    spec = ProblemSpec1D(
        L=1.0,
        T=1.0,
        a=lambda x: np.full_like(np.asarray(x, dtype=float), _A1),
        b=lambda x, t: np.ones_like(np.asarray(x, dtype=float)),
        f=f,
        p0=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        exact_p=lambda x, t: t * _poly_g(x),
        exact_u_tilde=lambda x, t: -_A1 * t * _poly_g1(x),
        b_time_independent=True,
    )
    solution = ClosedFormSolution(
        ndim=1,
        p=lambda x, t: t * _poly_g(x),
        dp_dt=lambda x, t: _poly_g(x),
        grad=(lambda x, t: t * _poly_g1(x),),
        second=(lambda x, t: t * _poly_g2(x),),
    )
    total = (lambda x, t: -(_A1 * t + 0.5 * t * t) * _poly_g1(x),)
    return MmsProblem(
        name="example1",
        spec=spec,
        solution=solution,
        forcing_variant=forcing,
        total_flux=total,
    )


_TWO_PI = 2.0 * math.pi


def example2(forcing=FORCING_DERIVED) -> MmsProblem:
    """Two-dimensional trigonometric problem on the periodic unit box:
    p = t^2 cos(2 pi x) cos(2 pi y), unit mobility, memory kernel t.

    The derived forcing is (2t + 8 pi^2 t^2 + 2 pi^2 t^4) cos cos; the
    printed variant carries pi^2/2 t^4 in the last group and is inconsistent
    with this pressure by (3 pi^2 / 2) t^4 cos cos — about 14.8 at t = 1 at
    the origin — which the oracle flags.
    """
    if forcing not in (FORCING_DERIVED, FORCING_PRINTED):
        raise ValueError(f"unknown forcing variant {forcing!r}")

    def cc(x, y):
        return np.cos(_TWO_PI * np.asarray(x, dtype=float)) * np.cos(_TWO_PI * np.asarray(y, dtype=float))

    if forcing == FORCING_DERIVED:
        def f(x, y, t):
            return (2.0 * t + 8.0 * math.pi**2 * t**2 + 2.0 * math.pi**2 * t**4) * cc(x, y)
    else:
        def f(x, y, t):
            return (2.0 * t + 8.0 * math.pi**2 * t**2 + 0.5 * math.pi**2 * t**4) * cc(x, y)

    ones2 = lambda x, y: np.ones_like(np.asarray(x, dtype=float) * np.asarray(y, dtype=float))

    spec = ProblemSpec2D(
        L1=1.0,
        L2=1.0,
        T=1.0,
        ax=ones2,
        ay=ones2,
        bx=lambda x, y, t: t * ones2(x, y),
        by=lambda x, y, t: t * ones2(x, y),
        f=f,
        p0=lambda x, y: np.zeros_like(np.asarray(x, dtype=float) * np.asarray(y, dtype=float)),
        exact_p=lambda x, y, t: t * t * cc(x, y),
        exact_ux=lambda x, y, t: _TWO_PI * t * t * np.sin(_TWO_PI * np.asarray(x, dtype=float)) * np.cos(_TWO_PI * np.asarray(y, dtype=float)),
        exact_uy=lambda x, y, t: _TWO_PI * t * t * np.cos(_TWO_PI * np.asarray(x, dtype=float)) * np.sin(_TWO_PI * np.asarray(y, dtype=float)),
        b_time_independent=False,
    )
    solution = ClosedFormSolution(
        ndim=2,
        p=lambda x, y, t: t * t * cc(x, y),
        dp_dt=lambda x, y, t: 2.0 * t * cc(x, y),
        grad=(
            lambda x, y, t: -_TWO_PI * t * t * np.sin(_TWO_PI * x) * np.cos(_TWO_PI * y),
            lambda x, y, t: -_TWO_PI * t * t * np.cos(_TWO_PI * x) * np.sin(_TWO_PI * y),
        ),
        second=(
            lambda x, y, t: -(_TWO_PI**2) * t * t * cc(x, y),
            lambda x, y, t: -(_TWO_PI**2) * t * t * cc(x, y),
        ),
    )
    total = (
        lambda x, y, t: _TWO_PI * (t * t + 0.25 * t**4) * np.sin(_TWO_PI * np.asarray(x, dtype=float)) * np.cos(_TWO_PI * np.asarray(y, dtype=float)),
        lambda x, y, t: _TWO_PI * (t * t + 0.25 * t**4) * np.cos(_TWO_PI * np.asarray(x, dtype=float)) * np.sin(_TWO_PI * np.asarray(y, dtype=float)),
    )
    return MmsProblem(
        name="example2",
        spec=spec,
        solution=solution,
        forcing_variant=forcing,
        total_flux=total,
    )


CATALOG = {"example1": example1, "example2": example2}


def manufactured_1d(L, T, a, b, solution: ClosedFormSolution, b_time_independent=False) -> MmsProblem:
    """Generic builder: wrap a user closed form (with its derivatives) into a
    runnable problem, deriving the forcing and exact velocity from it."""
    if solution.ndim != 1:
        raise ValueError("manufactured_1d needs a one-dimensional closed form")

    def f(x, t):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        vals = np.array([derive_forcing(solution, a, b, (xi,), t) for xi in xs])
        return vals if np.ndim(x) else vals[0]

    spec = ProblemSpec1D(
        L=L,
        T=T,
        a=a,
        b=b,
        f=f,
        p0=lambda x: np.asarray(solution.p(x, 0.0), dtype=float),
        exact_p=lambda x, t: np.asarray(solution.p(x, t), dtype=float),
        exact_u_tilde=lambda x, t: -np.asarray(a(x), dtype=float) * np.asarray(solution.grad[0](x, t), dtype=float),
        b_time_independent=b_time_independent,
    )
    return MmsProblem(name="custom1d", spec=spec, solution=solution, forcing_variant=FORCING_DERIVED)


def manufactured_2d(L1, L2, T, ax, ay, bx, by, solution: ClosedFormSolution, b_time_independent=False) -> MmsProblem:
    """Two-dimensional counterpart of manufactured_1d (periodic box)."""
    if solution.ndim != 2:
        raise ValueError("manufactured_2d needs a two-dimensional closed form")

    def f(x, y, t):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        ys = np.atleast_1d(np.asarray(y, dtype=float))
        xs_b, ys_b = np.broadcast_arrays(xs, ys)
        flat = np.array(
            [
                derive_forcing(solution, (ax, ay), (bx, by), (xi, yi), t)
                for xi, yi in zip(xs_b.ravel(), ys_b.ravel())
            ]
        )
        vals = flat.reshape(xs_b.shape)
        return vals if np.ndim(x) or np.ndim(y) else vals.ravel()[0]

    spec = ProblemSpec2D(
        L1=L1,
        L2=L2,
        T=T,
        ax=ax,
        ay=ay,
        bx=bx,
        by=by,
        f=f,
        p0=lambda x, y: np.asarray(solution.p(x, y, 0.0), dtype=float),
        exact_p=lambda x, y, t: np.asarray(solution.p(x, y, t), dtype=float),
        exact_ux=lambda x, y, t: -np.asarray(ax(x, y), dtype=float) * np.asarray(solution.grad[0](x, y, t), dtype=float),
        exact_uy=lambda x, y, t: -np.asarray(ay(x, y), dtype=float) * np.asarray(solution.grad[1](x, y, t), dtype=float),
        b_time_independent=b_time_independent,
    )
    return MmsProblem(name="custom2d", spec=spec, solution=solution, forcing_variant=FORCING_DERIVED)


# ---------------------------------------------------------------------------
# error reporting

def error_report_from_spec(state, spec) -> ErrorReport:
    """Final-time discrete L2 errors for a finished run (dispatching on the
    state's dimensionality)."""
    if isinstance(state, StepperState1D):
        return ErrorReport(
            err_p=pressure_error(state, spec),
            err_u=velocity_error(state, spec),
        )
    if isinstance(state, StepperState2D):
        err_x, err_y = velocity_errors_2d(state, spec)
        return ErrorReport(
            err_p=pressure_error_2d(state, spec),
            err_u=math.hypot(err_x, err_y),
            err_ux=err_x,
            err_uy=err_y,
        )
    raise TypeError(f"unsupported state type {type(state).__name__}")


def error_report(state, problem: MmsProblem) -> ErrorReport:
    """Errors of a finished run against the problem's closed form."""
    return error_report_from_spec(state, problem.spec)
