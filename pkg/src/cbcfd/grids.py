"""Uniform staggered grids, cell/face field containers, and discrete inner
products.

Conventions used throughout the package:

* 1D: ``M`` cells of width ``h = L/M``; cell centers sit at ``(i + 1/2) h``
  for ``i = 0..M-1`` and faces at ``j h`` for ``j = 0..M``.  Face ``j`` is
  the left face of cell ``j``.  No-flux face fields store the two boundary
  faces explicitly (length ``M + 1``).
* 2D (periodic): ``N1 x N2`` cells, ``h = L1/N1``, ``k = L2/N2``, arrays in
  row-major order with the y index fastest.  One period of faces is stored:
  x-face ``[i, j]`` sits at ``(i h, (j + 1/2) k)`` and y-face ``[i, j]`` at
  ``((i + 1/2) h, j k)``; indices wrap modulo the cell counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Raised when fields disagree about their grid, shape, or orientation."""


def _frozen(values, shape, what):
    arr = np.array(values, dtype=float, copy=True)
    if arr.shape != shape:
        raise ShapeError(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StaggeredGrid1D:
    """Uniform 1D staggered grid on (0, L) with M cells."""

    L: float
    M: int

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("domain length must be positive")
        if self.M < 4:
            raise ValueError("at least 4 cells are required (one-sided closures span 4 cells)")

    @property
    def h(self) -> float:
        return self.L / self.M

    def cells(self) -> np.ndarray:
        """Cell-center coordinates, length M."""
        return (np.arange(self.M) + 0.5) * self.h

    def faces(self) -> np.ndarray:
        """Face coordinates including both boundary faces, length M + 1."""
        return np.arange(self.M + 1) * self.h

    def interior_faces(self) -> np.ndarray:
        return self.faces()[1:-1]


@dataclass(frozen=True)
class StaggeredGrid2D:
    """Uniform 2D staggered grid on (0, L1) x (0, L2), periodic in both axes."""

    L1: float
    L2: float
    N1: int
    N2: int

    def __post_init__(self):
        if self.L1 <= 0 or self.L2 <= 0:
            raise ValueError("domain lengths must be positive")
        if self.N1 < 4 or self.N2 < 4:
            raise ValueError("at least 4 cells per axis are required")

    @property
    def h(self) -> float:
        return self.L1 / self.N1

    @property
    def k(self) -> float:
        return self.L2 / self.N2

    @property
    def h_max(self) -> float:
        return max(self.h, self.k)

    def cells_x(self) -> np.ndarray:
        return (np.arange(self.N1) + 0.5) * self.h

    def cells_y(self) -> np.ndarray:
        return (np.arange(self.N2) + 0.5) * self.k

    def faces_x(self) -> np.ndarray:
        """x-face abscissae over one period (face i at x = i h), length N1."""
        return np.arange(self.N1) * self.h

    def faces_y(self) -> np.ndarray:
        return np.arange(self.N2) * self.k

    def cell_mesh(self):
        return np.meshgrid(self.cells_x(), self.cells_y(), indexing="ij")

    def xface_mesh(self):
        return np.meshgrid(self.faces_x(), self.cells_y(), indexing="ij")

    def yface_mesh(self):
        return np.meshgrid(self.cells_x(), self.faces_y(), indexing="ij")


@dataclass(frozen=True)
class CellField:
    """Cell-centered values (pressure, forcing, ...). Immutable."""

    grid: StaggeredGrid1D | StaggeredGrid2D
    values: np.ndarray

    def __post_init__(self):
        if isinstance(self.grid, StaggeredGrid1D):
            shape = (self.grid.M,)
        else:
            shape = (self.grid.N1, self.grid.N2)
        object.__setattr__(self, "values", _frozen(self.values, shape, "CellField"))


@dataclass(frozen=True)
class FaceFieldX:
    """Values on x-faces.

    On a 1D grid the boundary faces are stored explicitly (length M + 1);
    on a 2D grid one period is stored (shape N1 x N2, wrapping modulo N1).
    """

    grid: StaggeredGrid1D | StaggeredGrid2D
    values: np.ndarray

    def __post_init__(self):
        if isinstance(self.grid, StaggeredGrid1D):
            shape = (self.grid.M + 1,)
        else:
            shape = (self.grid.N1, self.grid.N2)
        object.__setattr__(self, "values", _frozen(self.values, shape, "FaceFieldX"))

    @property
    def interior(self) -> np.ndarray:
        """Values away from boundary faces (everything, when periodic)."""
        if isinstance(self.grid, StaggeredGrid1D):
            return self.values[1:-1]
        return self.values


@dataclass(frozen=True)
class FaceFieldY:
    """Values on y-faces of a 2D grid, one period (shape N1 x N2)."""

    grid: StaggeredGrid2D
    values: np.ndarray

    def __post_init__(self):
        if not isinstance(self.grid, StaggeredGrid2D):
            raise ShapeError("FaceFieldY requires a 2D grid")
        shape = (self.grid.N1, self.grid.N2)
        object.__setattr__(self, "values", _frozen(self.values, shape, "FaceFieldY"))

    @property
    def interior(self) -> np.ndarray:
        return self.values


def _same_grid(f, g):
    if f.grid != g.grid:
        raise ShapeError("fields live on different grids")


def inner_cell(f: CellField, g: CellField) -> float:
    """Discrete L2 inner product over cells: sum of h (or h k) * f * g."""
    if not isinstance(f, CellField) or not isinstance(g, CellField):
        raise ShapeError("inner_cell expects two cell fields")
    _same_grid(f, g)
    if isinstance(f.grid, StaggeredGrid1D):
        return float(f.grid.h * np.dot(f.values, g.values))
    return float(f.grid.h * f.grid.k * np.sum(f.values * g.values))


def inner_facex(f: FaceFieldX, g: FaceFieldX) -> float:
    """Inner product over x-faces.

    1D no-flux grids sum interior faces only (boundary faces carry
    homogeneous data); periodic 2D grids sum one full period.
    """
    if not isinstance(f, FaceFieldX) or not isinstance(g, FaceFieldX):
        raise ShapeError("inner_facex expects two x-face fields")
    _same_grid(f, g)
    if isinstance(f.grid, StaggeredGrid1D):
        return float(f.grid.h * np.dot(f.values[1:-1], g.values[1:-1]))
    return float(f.grid.h * f.grid.k * np.sum(f.values * g.values))


def inner_facey(f: FaceFieldY, g: FaceFieldY) -> float:
    """Inner product over one period of y-faces."""
    if not isinstance(f, FaceFieldY) or not isinstance(g, FaceFieldY):
        raise ShapeError("inner_facey expects two y-face fields")
    _same_grid(f, g)
    return float(f.grid.h * f.grid.k * np.sum(f.values * g.values))


def norm(f) -> float:
    """Discrete L2 norm matching the field's inner product."""
    if isinstance(f, CellField):
        return float(np.sqrt(inner_cell(f, f)))
    if isinstance(f, FaceFieldX):
        return float(np.sqrt(inner_facex(f, f)))
    if isinstance(f, FaceFieldY):
        return float(np.sqrt(inner_facey(f, f)))
    raise ShapeError(f"norm is not defined for {type(f).__name__}")
