import numpy as np
import pytest

from app.core.errors import DomainTopologyError, InvalidData, LoopClosureFailure
from app.geometry.grid import DomainGrid, GridCalculus, central_difference, finite_max, path_primitive
from app.geometry.parser import parse_expression


def primitive_of(src, grid):
    e = parse_expression(src)
    return path_primitive(lambda z: e.evaluate(z), grid)


def test_rectangle_layout():
    grid = DomainGrid.rectangle(-0.5, 0.5, -0.25, 0.25, 11)
    assert grid.shape == (11, 6)
    assert grid.hx == pytest.approx(0.1)
    assert grid.hy == pytest.approx(0.1)
    assert grid.nodes[0, 0] == pytest.approx(-0.5 - 0.25j)
    assert grid.nodes[grid.base_index] == grid.z0


def test_base_point_is_snapped():
    grid = DomainGrid.rectangle(-0.5, 0.5, -0.5, 0.5, 11, 0.21 + 0.01j)
    assert grid.z0 == pytest.approx(0.2)
    with pytest.raises(InvalidData):
        DomainGrid.rectangle(-0.5, 0.5, -0.5, 0.5, 11, 2.0 + 0j)


def test_invalid_rectangles():
    with pytest.raises(InvalidData):
        DomainGrid.rectangle(1, 0, 0, 1, 11)
    with pytest.raises(InvalidData):
        DomainGrid.rectangle(0, 1, 0, 1, 2)


def test_primitive_of_one_is_z():
    grid = DomainGrid.rectangle(-0.5, 0.5, -0.5, 0.5, 11, 0.1 + 0.2j)
    np.testing.assert_allclose(primitive_of("1", grid).values, grid.nodes - grid.z0, atol=1e-14)


def test_primitive_of_z_along_segment():
    grid = DomainGrid.rectangle(0, 1, 0, 1, 11)
    values = primitive_of("z", grid).values
    assert values[10, 0] == pytest.approx(0.5)


def test_primitive_of_cubic_closed_form():
    grid = DomainGrid.rectangle(0, 1, 0, 1, 11)
    result = primitive_of("3*z^2", grid)
    assert result.values[10, 10] == pytest.approx(-2 + 2j)
    np.testing.assert_allclose(result.values, grid.nodes**3, atol=1e-13)
    assert result.loop_residual < 1e-12


def test_primitive_detects_enclosed_pole():
    grid = DomainGrid.rectangle(-1, 1, -1, 1, 10, 0.5 + 0.5j)
    with pytest.raises(LoopClosureFailure):
        primitive_of("1/z", grid)


def test_spanning_tree_covers_active_nodes():
    grid = DomainGrid.rectangle(-1, 1, -1, 1, 9)
    grid = grid.masked_disks([0.75 + 0.75j], 0.2)
    for prefer in ("x", "y"):
        tree = grid.spanning_tree(prefer)
        children = np.concatenate([c for _, c in tree.levels])
        assert children.size == int(grid.active.sum()) - 1
        assert not np.any(grid.mask.ravel()[children])


def test_spanning_trees_follow_different_paths():
    grid = DomainGrid.rectangle(-1, 1, -1, 1, 9)
    ny = grid.shape[1]
    i0, j0 = grid.base_index
    root = i0 * ny + j0

    def parents(prefer):
        tree = grid.spanning_tree(prefer)
        return {int(c): int(p) for ps, cs in tree.levels for p, c in zip(ps, cs)}

    def path(parent, k):
        out = [k]
        while k in parent:
            k = parent[k]
            out.append(k)
        return out

    px, py = parents("x"), parents("y")
    off_axis = [k for k in px if k // ny != i0 and k % ny != j0]
    assert off_axis
    assert all(px[k] != py[k] for k in off_axis)
    node = 6 * ny + 7
    assert set(path(px, node)) & set(path(py, node)) == {node, root}


def test_masking_that_disconnects_the_grid():
    grid = DomainGrid.rectangle(-1, 1, -1, 1, 9)
    extra = np.zeros(grid.shape, dtype=bool)
    extra[6, :] = True
    with pytest.raises(DomainTopologyError):
        grid.with_mask(extra).check_topology()


def test_masked_hole_is_not_simply_connected():
    grid = DomainGrid.rectangle(-1, 1, -1, 1, 9)
    extra = np.zeros(grid.shape, dtype=bool)
    extra[6, 6] = True
    with pytest.raises(DomainTopologyError):
        grid.with_mask(extra).check_topology()


def test_mask_touching_the_boundary_is_fine():
    grid = DomainGrid.rectangle(-1, 1, -1, 1, 9)
    grid.masked_disks([1 + 1j], 0.3).check_topology()


@pytest.mark.parametrize("accuracy", [4, 6])
def test_central_difference(accuracy):
    h = 0.1
    x = np.arange(20) * h
    d = central_difference(x**3, h, axis=0, accuracy=accuracy)
    p = accuracy // 2
    np.testing.assert_allclose(d[p:-p], 3 * x[p:-p] ** 2, rtol=1e-10)
    assert np.all(np.isnan(d[:p])) and np.all(np.isnan(d[-p:]))
    d2 = central_difference(x**3, h, axis=0, order=2, accuracy=accuracy)
    np.testing.assert_allclose(d2[p:-p], 6 * x[p:-p], rtol=1e-8)


def test_wirtinger_derivatives_of_holomorphic_field():
    grid = DomainGrid.rectangle(-0.5, 0.5, -0.5, 0.5, 21)
    z = grid.nodes
    calc = GridCalculus(z**3 + np.conj(z) * z, grid)
    inner = (slice(6, -6), slice(6, -6))
    np.testing.assert_allclose(calc.dz[inner], (3 * z**2 + np.conj(z))[inner], atol=1e-9)
    np.testing.assert_allclose(calc.dzbar[inner], z[inner], atol=1e-9)
    np.testing.assert_allclose(calc.dz_dzbar[inner], 1, atol=1e-8)
    np.testing.assert_allclose(calc.dzz[inner], (6 * z)[inner], atol=1e-8)


def test_finite_max():
    assert finite_max(np.array([np.nan, -3.0, 2.0]), "values") == 3.0
    with pytest.raises(InvalidData):
        finite_max(np.array([np.nan]), "values")
