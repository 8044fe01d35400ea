"""Difference and compact interpolation operators on staggered grids.

Every operator exists in two independent constructions:

* a matrix-free kernel acting on plain arrays (used for right-hand sides and
  residual checks), and
* a materialized sparse matrix (used for implicit assembly).

The two are tested against each other to 1e-14; neither is derived from the
other.

Interior stencil for all compact interpolations:

    (psi g)_i = (g_{i-1} + 22 g_i + g_{i+1}) / 24,

i.e. identity plus h^2/24 times the centered second difference, which is what
buys fourth-order accuracy without widening the stencil.  The no-flux variants
differ only in how the first and last rows close:

* ``psi`` on faces takes the two boundary-face values as data,
* ``psi_tilde`` on cells uses a Simpson-type row referencing the boundary face
  and the first interior face, ``(g_face0 + 4 g_cell0 + g_face1) / 6``,
* ``psi_hat`` on cells uses the one-sided four-point row
  ``(26 g_0 - 5 g_1 + 4 g_2 - g_3) / 24`` (mirrored on the right), whose
  weights sum to one and reproduce linears exactly.

Under periodic boundaries there are no boundary rows and all three collapse to
the plain circulant stencil.
"""

from __future__ import annotations

from enum import Enum

import numpy as np
import scipy.sparse as sp

from .grids import CellField, FaceFieldX, FaceFieldY, ShapeError, StaggeredGrid1D, StaggeredGrid2D


class OperatorVariant(Enum):
    NOFLUX_1D = "noflux-1d"
    PERIODIC_1D = "periodic-1d"
    PERIODIC_2D_X = "periodic-2d-x"
    PERIODIC_2D_Y = "periodic-2d-y"

    def validate_size(self, n: int) -> None:
        if self is OperatorVariant.NOFLUX_1D:
            if n < 4:
                raise ValueError("no-flux operators need at least 4 cells")
        elif n < 3:
            raise ValueError("periodic operators need at least 3 points along the axis")


# ---------------------------------------------------------------------------
# matrix-free kernels (plain ndarrays)
# ---------------------------------------------------------------------------

def diff_faces_to_cells(w, h):
    """First difference of a full 1D face vector (M+1,) onto cells (M,)."""
    w = np.asarray(w, dtype=float)
    return (w[1:] - w[:-1]) / h


def diff_cells_to_faces(q, h):
    """First difference of a 1D cell vector (M,) onto interior faces (M-1,)."""
    q = np.asarray(q, dtype=float)
    return (q[1:] - q[:-1]) / h


def diff_faces_to_cells_periodic(w, h, axis=0):
    """Periodic face->cell difference: cell i gets (w[i+1] - w[i]) / h."""
    w = np.asarray(w, dtype=float)
    return (np.roll(w, -1, axis=axis) - w) / h


def diff_cells_to_faces_periodic(q, h, axis=0):
    """Periodic cell->face difference: face i gets (q[i] - q[i-1]) / h."""
    q = np.asarray(q, dtype=float)
    return (q - np.roll(q, 1, axis=axis)) / h


def interp_periodic(g, axis=0):
    """Circulant compact average along an axis."""
    g = np.asarray(g, dtype=float)
    return (np.roll(g, 1, axis=axis) + 22.0 * g + np.roll(g, -1, axis=axis)) / 24.0


def interp_face_noflux(g_full):
    """Compact average on interior faces of a full face vector (M+1,).

    The first and last entries of ``g_full`` are the boundary-face data (the
    steppers pass zeros there); the result has length M-1.
    """
    g = np.asarray(g_full, dtype=float)
    return (g[:-2] + 22.0 * g[1:-1] + g[2:]) / 24.0


def interp_cell_hat(g):
    """Compact average on cells with the one-sided four-point closures."""
    g = np.asarray(g, dtype=float)
    m = g.shape[0]
    if m < 4:
        raise ValueError("one-sided closure needs at least 4 cells")
    out = np.empty_like(g)
    out[1:-1] = (g[:-2] + 22.0 * g[1:-1] + g[2:]) / 24.0
    out[0] = (26.0 * g[0] - 5.0 * g[1] + 4.0 * g[2] - g[3]) / 24.0
    out[-1] = (26.0 * g[-1] - 5.0 * g[-2] + 4.0 * g[-3] - g[-4]) / 24.0
    return out


def interp_cell_tilde(g, left, right):
    """Compact average on cells with Simpson-type boundary rows.

    ``left = (g(0), g(h))`` and ``right = (g(L-h), g(L))`` supply the face
    samples the closure rows reference.
    """
    if left is None or right is None:
        raise ValueError("boundary-face samples are required for the Simpson closure rows")
    g = np.asarray(g, dtype=float)
    out = np.empty_like(g)
    out[1:-1] = (g[:-2] + 22.0 * g[1:-1] + g[2:]) / 24.0
    out[0] = (left[0] + 4.0 * g[0] + left[1]) / 6.0
    out[-1] = (right[0] + 4.0 * g[-1] + right[1]) / 6.0
    return out


def compose_xy(op_x, op_y, field2d):
    """Apply an x-axis operator then a y-axis operator to a 2D array."""
    return op_y(op_x(np.asarray(field2d, dtype=float)))


# ---------------------------------------------------------------------------
# materialized sparse forms
# ---------------------------------------------------------------------------

def delta_faces_to_cells_matrix(M, h):
    """(M, M+1) difference matrix taking a full face vector to cells."""
    rows = np.repeat(np.arange(M), 2)
    cols = np.empty(2 * M, dtype=int)
    cols[0::2] = np.arange(M)
    cols[1::2] = np.arange(1, M + 1)
    vals = np.tile([-1.0 / h, 1.0 / h], M)
    return sp.csr_matrix((vals, (rows, cols)), shape=(M, M + 1))


def delta_cells_to_faces_matrix(M, h):
    """(M-1, M) difference matrix taking cells to interior faces."""
    rows = np.repeat(np.arange(M - 1), 2)
    cols = np.empty(2 * (M - 1), dtype=int)
    cols[0::2] = np.arange(M - 1)
    cols[1::2] = np.arange(1, M)
    vals = np.tile([-1.0 / h, 1.0 / h], M - 1)
    return sp.csr_matrix((vals, (rows, cols)), shape=(M - 1, M))


def psi_face_noflux_matrix(M):
    """(M-1, M+1) compact-average matrix on interior faces of a full face vector."""
    d = sp.diags(
        [np.full(M - 1, 1.0 / 24.0), np.full(M - 1, 22.0 / 24.0), np.full(M - 1, 1.0 / 24.0)],
        [0, 1, 2],
        shape=(M - 1, M + 1),
    )
    return sp.csr_matrix(d)


def psi_hat_matrix(M):
    """(M, M) compact-average matrix with one-sided closures."""
    if M < 4:
        raise ValueError("one-sided closure needs at least 4 cells")
    A = sp.lil_matrix((M, M))
    for i in range(1, M - 1):
        A[i, i - 1] = 1.0 / 24.0
        A[i, i] = 22.0 / 24.0
        A[i, i + 1] = 1.0 / 24.0
    A[0, 0:4] = np.array([26.0, -5.0, 4.0, -1.0]) / 24.0
    A[M - 1, M - 4 : M] = np.array([-1.0, 4.0, -5.0, 26.0]) / 24.0
    return sp.csr_matrix(A)


def psi_tilde_matrix(M):
    """(M, M+4) Simpson-closure matrix on the extended vector.

    Column layout: the M cell values, then the four face samples
    ``g(0), g(h), g(L-h), g(L)`` referenced by the closure rows.
    """
    A = sp.lil_matrix((M, M + 4))
    for i in range(1, M - 1):
        A[i, i - 1] = 1.0 / 24.0
        A[i, i] = 22.0 / 24.0
        A[i, i + 1] = 1.0 / 24.0
    A[0, 0] = 4.0 / 6.0
    A[0, M] = 1.0 / 6.0
    A[0, M + 1] = 1.0 / 6.0
    A[M - 1, M - 1] = 4.0 / 6.0
    A[M - 1, M + 2] = 1.0 / 6.0
    A[M - 1, M + 3] = 1.0 / 6.0
    return sp.csr_matrix(A)


def circulant_interp_matrix(n):
    """(n, n) circulant compact-average matrix (periodic stencil)."""
    OperatorVariant.PERIODIC_1D.validate_size(n)
    A = sp.lil_matrix((n, n))
    for i in range(n):
        A[i, (i - 1) % n] = 1.0 / 24.0
        A[i, i] = 22.0 / 24.0
        A[i, (i + 1) % n] = 1.0 / 24.0
    return sp.csr_matrix(A)


def circulant_diff_faces_to_cells_matrix(n, h):
    """(n, n) periodic face->cell difference: row i holds -1/h at i, +1/h at i+1."""
    A = sp.lil_matrix((n, n))
    for i in range(n):
        A[i, i] = -1.0 / h
        A[i, (i + 1) % n] = 1.0 / h
    return sp.csr_matrix(A)


def circulant_diff_cells_to_faces_matrix(n, h):
    """(n, n) periodic cell->face difference: row i holds +1/h at i, -1/h at i-1."""
    A = sp.lil_matrix((n, n))
    for i in range(n):
        A[i, i] = 1.0 / h
        A[i, (i - 1) % n] = -1.0 / h
    return sp.csr_matrix(A)


def psi_from_second_difference_matrix(n):
    """Periodic compact average built as I + (second difference)/24.

    Independent construction of the circulant stencil, used to check that the
    closure-style operators collapse to the plain periodic one.
    """
    D2 = sp.lil_matrix((n, n))
    for i in range(n):
        D2[i, (i - 1) % n] = 1.0
        D2[i, i] = -2.0
        D2[i, (i + 1) % n] = 1.0
    return sp.csr_matrix(sp.identity(n) + D2 / 24.0)


# ---------------------------------------------------------------------------
# field-level operations
# ---------------------------------------------------------------------------

def delta_x_to_cells(w: FaceFieldX) -> CellField:
    """First difference in x of a face field, landing on cell centers."""
    if not isinstance(w, FaceFieldX):
        raise ShapeError("delta_x_to_cells expects an x-face field")
    g = w.grid
    if isinstance(g, StaggeredGrid1D):
        return CellField(g, diff_faces_to_cells(w.values, g.h))
    return CellField(g, diff_faces_to_cells_periodic(w.values, g.h, axis=0))


def delta_y_to_cells(w: FaceFieldY) -> CellField:
    if not isinstance(w, FaceFieldY):
        raise ShapeError("delta_y_to_cells expects a y-face field")
    g = w.grid
    return CellField(g, diff_faces_to_cells_periodic(w.values, g.k, axis=1))


def delta_x_to_faces(q: CellField) -> FaceFieldX:
    """First difference in x of a cell field, landing on faces.

    On a no-flux 1D grid the derivative is defined on interior faces; the two
    boundary slots of the returned field are zero-filled.
    """
    if not isinstance(q, CellField):
        raise ShapeError("delta_x_to_faces expects a cell field")
    g = q.grid
    if isinstance(g, StaggeredGrid1D):
        full = np.zeros(g.M + 1)
        full[1:-1] = diff_cells_to_faces(q.values, g.h)
        return FaceFieldX(g, full)
    return FaceFieldX(g, diff_cells_to_faces_periodic(q.values, g.h, axis=0))


def delta_y_to_faces(q: CellField) -> FaceFieldY:
    if not isinstance(q, CellField):
        raise ShapeError("delta_y_to_faces expects a cell field")
    g = q.grid
    if not isinstance(g, StaggeredGrid2D):
        raise ShapeError("delta_y_to_faces requires a 2D grid")
    return FaceFieldY(g, diff_cells_to_faces_periodic(q.values, g.k, axis=1))


def psi_x(g):
    """Compact average along x.

    Face fields: on a no-flux grid the stored boundary-face values serve as
    stencil data and pass through unchanged; periodic grids wrap.  Cell
    fields: periodic grids only — a no-flux cell field needs a boundary
    closure, i.e. ``psi_hat_x`` or ``psi_tilde_x``.
    """
    if isinstance(g, FaceFieldX):
        grid = g.grid
        if isinstance(grid, StaggeredGrid1D):
            out = g.values.copy()
            out[1:-1] = interp_face_noflux(g.values)
            return FaceFieldX(grid, out)
        return FaceFieldX(grid, interp_periodic(g.values, axis=0))
    if isinstance(g, CellField):
        if isinstance(g.grid, StaggeredGrid1D):
            raise ShapeError(
                "compact average of a no-flux cell field needs a closure; use psi_hat_x or psi_tilde_x"
            )
        return CellField(g.grid, interp_periodic(g.values, axis=0))
    raise ShapeError("psi_x expects an x-face field or a cell field")


def psi_y(g):
    """Compact average along y (2D periodic fields)."""
    if isinstance(g, FaceFieldY):
        return FaceFieldY(g.grid, interp_periodic(g.values, axis=1))
    if isinstance(g, CellField) and isinstance(g.grid, StaggeredGrid2D):
        return CellField(g.grid, interp_periodic(g.values, axis=1))
    raise ShapeError("psi_y expects a 2D y-face field or cell field")


def psi_hat_x(g: CellField) -> CellField:
    """Compact average on cells, one-sided closures (collapses to psi_x when periodic)."""
    if not isinstance(g, CellField):
        raise ShapeError("psi_hat_x expects a cell field")
    if isinstance(g.grid, StaggeredGrid1D):
        return CellField(g.grid, interp_cell_hat(g.values))
    return CellField(g.grid, interp_periodic(g.values, axis=0))


def psi_hat_y(g: CellField) -> CellField:
    if not isinstance(g, CellField) or not isinstance(g.grid, StaggeredGrid2D):
        raise ShapeError("psi_hat_y expects a 2D cell field")
    return CellField(g.grid, interp_periodic(g.values, axis=1))


def psi_tilde_x(g: CellField, left=None, right=None) -> CellField:
    """Compact average on cells, Simpson closures (collapses to psi_x when periodic).

    For no-flux grids ``left``/``right`` supply the face samples
    ``(g(0), g(h))`` and ``(g(L-h), g(L))``; omitting them is a contract error.
    """
    if not isinstance(g, CellField):
        raise ShapeError("psi_tilde_x expects a cell field")
    if isinstance(g.grid, StaggeredGrid1D):
        return CellField(g.grid, interp_cell_tilde(g.values, left, right))
    return CellField(g.grid, interp_periodic(g.values, axis=0))


def psi_tilde_y(g: CellField, bottom=None, top=None) -> CellField:
    if not isinstance(g, CellField) or not isinstance(g.grid, StaggeredGrid2D):
        raise ShapeError("psi_tilde_y expects a 2D cell field")
    return CellField(g.grid, interp_periodic(g.values, axis=1))
