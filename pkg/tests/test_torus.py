"""Test module for torus arithmetic and momentum grids."""
import numpy as np
import pytest

from lattice_spectra.exceptions import InvalidResolutionError
from lattice_spectra.torus import (
    TorusGrid,
    as_point,
    make_grid,
    normalize,
    torus_add,
    torus_distance,
    torus_neg,
    torus_scale,
    torus_sub,
)

PI = np.pi


def test_normalize_half_open_convention() -> None:
    """Test that −π maps to +π and reduction is idempotent."""
    assert normalize(-PI) == pytest.approx(PI)
    assert normalize(3 * PI) == pytest.approx(PI)
    assert normalize(2 * PI) == pytest.approx(0.0)
    values = np.linspace(-10.0, 10.0, 101)
    once = normalize(values)
    assert np.all(once > -PI) and np.all(once <= PI)
    assert np.allclose(normalize(once), once, rtol=0.0, atol=1e-14)


def test_torus_add_examples() -> None:
    """Test the reference sums, including wrap-around of 2π to 0."""
    a = np.array([2 * PI / 3, 3 * PI / 4, 11 * PI / 12])
    b = np.array([2 * PI / 3, PI / 2, 5 * PI / 6])
    expected = np.array([-2 * PI / 3, -3 * PI / 4, -PI / 4])
    assert torus_distance(torus_add(a, b), expected) < 1e-12
    assert torus_distance(torus_add(a, np.zeros(3)), a) < 1e-12
    assert torus_distance(torus_add([PI] * 3, [PI] * 3), np.zeros(3)) < 1e-12


def test_torus_scale_examples() -> None:
    """Test scaling by 12, 1 and 0."""
    a = np.array([2 * PI / 3, 3 * PI / 4, 11 * PI / 12])
    assert torus_distance(torus_scale(12.0, a), [0.0, PI, PI]) < 1e-12
    assert torus_distance(torus_scale(1.0, a), a) < 1e-12
    assert np.array_equal(torus_scale(0.0, a), np.zeros(3))


def test_torus_group_laws() -> None:
    """Test commutativity, associativity and inverses on random points."""
    rng = np.random.default_rng(7)
    a, b, c = (rng.uniform(-PI, PI, size=(1000, 3)) for _ in range(3))
    assert torus_distance(torus_add(a, b), torus_add(b, a)) < 1e-12
    assert torus_distance(torus_add(torus_add(a, b), c), torus_add(a, torus_add(b, c))) < 1e-12
    assert torus_distance(torus_add(a, torus_neg(a)), np.zeros_like(a)) < 1e-12
    assert torus_distance(torus_sub(a, b), torus_add(a, torus_scale(-1.0, b))) < 1e-12


def test_as_point_rejects_wrong_shape() -> None:
    """Test that points need three coordinates."""
    with pytest.raises(ValueError):
        as_point([0.0, 1.0])


def test_make_grid_small_resolutions() -> None:
    """Test point counts, coordinates and weights of small grids."""
    grid2 = make_grid(2)
    assert grid2.size == 8
    assert set(np.round(grid2.points.ravel(), 12)) == {0.0, round(PI, 12)}

    grid4 = make_grid(4)
    assert grid4.points.shape == (64, 3)
    assert any(torus_distance(p, [-PI / 2, 0.0, PI]) < 1e-12 for p in grid4.points)
    assert len({tuple(np.round(p, 12)) for p in grid4.points}) == 64

    assert make_grid(3).weight == pytest.approx((2 * PI / 3) ** 3)


@pytest.mark.parametrize("n", [0, 1, -3])
def test_make_grid_rejects_small_n(n: int) -> None:
    """Test that n < 2 is an invalid resolution."""
    with pytest.raises(InvalidResolutionError):
        make_grid(n)


def test_grid_closed_under_addition_and_negation() -> None:
    """Test index arithmetic against floating-point torus arithmetic."""
    grid = make_grid(5)
    i = np.arange(grid.size)
    j = (7 * i + 3) % grid.size
    sums = grid.points[grid.add_index(i, j)]
    assert torus_distance(sums, torus_add(grid.points[i], grid.points[j])) < 1e-12
    diffs = grid.points[grid.sub_index(i, j)]
    assert torus_distance(diffs, torus_sub(grid.points[i], grid.points[j])) < 1e-12
    assert torus_distance(grid.points[grid.neg_index(i)], torus_neg(grid.points)) < 1e-12
    assert np.array_equal(grid.difference_table[i, j], grid.sub_index(i, j))


def test_neighbor_table_is_cyclic() -> None:
    """Test that every point has six distinct axis neighbours one step away."""
    grid = make_grid(4)
    table = grid.neighbor_table
    assert table.shape == (64, 6)
    for index in range(grid.size):
        for neighbor in table[index]:
            assert torus_distance(grid.points[neighbor], grid.points[index]) == pytest.approx(grid.spacing)


def test_shifted_grid_membership() -> None:
    """Test that a translated grid contains exactly its translated points."""
    grid = make_grid(4).shifted([0.1, -0.2, PI / 3])
    assert isinstance(grid, TorusGrid)
    assert all(grid.contains(p) for p in grid.points)
    assert not grid.contains([0.0, 0.0, 0.0])
    assert make_grid(4).contains([PI / 2, -PI, 0.0])
