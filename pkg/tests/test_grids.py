"""Staggered grids, field containers, and discrete inner products."""

import numpy as np
import pytest

from cbcfd.grids import (
    CellField,
    FaceFieldX,
    FaceFieldY,
    ShapeError,
    StaggeredGrid1D,
    StaggeredGrid2D,
    inner_cell,
    inner_facex,
    inner_facey,
    norm,
)


def test_1d_coordinates():
    grid = StaggeredGrid1D(1.0, 4)
    assert grid.h == 0.25
    assert np.array_equal(grid.cells(), [0.125, 0.375, 0.625, 0.875])
    assert np.array_equal(grid.faces(), [0.0, 0.25, 0.5, 0.75, 1.0])
    assert np.array_equal(grid.interior_faces(), [0.25, 0.5, 0.75])


def test_2d_coordinates():
    grid = StaggeredGrid2D(1.0, 2.0, 4, 8)
    assert grid.h == 0.25
    assert grid.k == 0.25
    assert grid.h_max == 0.25
    X, Y = grid.cell_mesh()
    assert X.shape == (4, 8)
    assert X[1, 0] == 0.375
    assert Y[0, 1] == 0.375
    XF, YF = grid.xface_mesh()
    # x-face (i, j) sits at (i*h, (j+1/2)*k)
    assert XF[1, 0] == 0.25
    assert YF[0, 0] == 0.125
    XG, YG = grid.yface_mesh()
    assert XG[0, 0] == 0.125
    assert YG[0, 1] == 0.25


def test_inner_cell_frozen_value():
    # f = g = x_i on M = 4:  h * sum(x_i^2) = 0.328125 exactly
    grid = StaggeredGrid1D(1.0, 4)
    f = CellField(grid, grid.cells())
    assert inner_cell(f, f) == 0.328125
    assert abs(norm(f) - np.sqrt(0.328125)) < 1e-15


def test_inner_facex_1d_skips_boundary_faces():
    grid = StaggeredGrid1D(1.0, 4)
    w = FaceFieldX(grid, np.ones(5))
    # only the M-1 interior faces contribute
    assert inner_facex(w, w) == 0.75


def test_inner_products_2d_unit_square():
    grid = StaggeredGrid2D(1.0, 1.0, 4, 4)
    ones = np.ones((4, 4))
    assert inner_cell(CellField(grid, ones), CellField(grid, ones)) == pytest.approx(1.0, abs=1e-15)
    assert inner_facex(FaceFieldX(grid, ones), FaceFieldX(grid, ones)) == pytest.approx(1.0, abs=1e-15)
    assert inner_facey(FaceFieldY(grid, ones), FaceFieldY(grid, ones)) == pytest.approx(1.0, abs=1e-15)


def test_zero_field_norm():
    grid = StaggeredGrid1D(1.0, 8)
    z = CellField(grid, np.zeros(8))
    assert norm(z) == 0.0


def test_cauchy_schwarz_1d_and_2d():
    rng = np.random.default_rng(1234)
    g1 = StaggeredGrid1D(1.0, 12)
    g2 = StaggeredGrid2D(1.0, 1.5, 6, 9)
    for _ in range(100):
        f = CellField(g1, rng.standard_normal(12))
        g = CellField(g1, rng.standard_normal(12))
        assert abs(inner_cell(f, g)) <= norm(f) * norm(g) + 1e-12
        u = FaceFieldX(g2, rng.standard_normal((6, 9)))
        v = FaceFieldX(g2, rng.standard_normal((6, 9)))
        assert abs(inner_facex(u, v)) <= norm(u) * norm(v) + 1e-12


def test_inner_symmetry_and_bilinearity():
    rng = np.random.default_rng(77)
    grid = StaggeredGrid1D(2.0, 10)
    a = CellField(grid, rng.standard_normal(10))
    b = CellField(grid, rng.standard_normal(10))
    c = CellField(grid, rng.standard_normal(10))
    assert inner_cell(a, b) == inner_cell(b, a)
    lhs = inner_cell(CellField(grid, 2.5 * a.values - 0.5 * c.values), b)
    rhs = 2.5 * inner_cell(a, b) - 0.5 * inner_cell(c, b)
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))


def test_field_shape_validation():
    grid = StaggeredGrid1D(1.0, 4)
    with pytest.raises(ShapeError):
        CellField(grid, np.zeros(5))
    with pytest.raises(ShapeError):
        FaceFieldX(grid, np.zeros(4))
    with pytest.raises(ShapeError):
        FaceFieldY(grid, np.zeros(5))  # no y faces on a 1D grid
    grid2 = StaggeredGrid2D(1.0, 1.0, 4, 6)
    with pytest.raises(ShapeError):
        CellField(grid2, np.zeros((6, 4)))


def test_inner_product_grid_mismatch():
    g1 = StaggeredGrid1D(1.0, 4)
    g1b = StaggeredGrid1D(1.0, 8)
    with pytest.raises(ShapeError):
        inner_cell(CellField(g1, np.zeros(4)), CellField(g1b, np.zeros(8)))
    # cell/face type mixing is rejected as well
    with pytest.raises(ShapeError):
        inner_cell(CellField(g1, np.zeros(4)), FaceFieldX(g1, np.zeros(5)))


def test_minimum_grid_sizes():
    with pytest.raises(ValueError):
        StaggeredGrid1D(1.0, 3)
    with pytest.raises(ValueError):
        StaggeredGrid2D(1.0, 1.0, 4, 3)
    with pytest.raises(ValueError):
        StaggeredGrid1D(-1.0, 8)


def test_field_values_frozen():
    grid = StaggeredGrid1D(1.0, 4)
    f = CellField(grid, np.arange(4.0))
    with pytest.raises(ValueError):
        f.values[0] = 99.0


def test_nonfinite_rejected():
    grid = StaggeredGrid1D(1.0, 4)
    with pytest.raises(ValueError):
        CellField(grid, np.array([0.0, np.nan, 0.0, 0.0]))
    with pytest.raises(ValueError):
        FaceFieldX(grid, np.array([0.0, np.inf, 0.0, 0.0, 0.0]))


def test_interior_view():
    grid = StaggeredGrid1D(1.0, 4)
    w = FaceFieldX(grid, np.array([9.0, 1.0, 2.0, 3.0, 9.0]))
    assert np.array_equal(w.interior, [1.0, 2.0, 3.0])
