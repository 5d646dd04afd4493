import numpy as np
import pytest

from grushin.errors import DomainError
from grushin.grid import TensorGrid, build_cutoff, dilate, gauge_norm, smoothstep5


def test_node_count_must_be_dyadic():
    with pytest.raises(DomainError):
        TensorGrid(((-1, 1), (-1, 1)), (10, 10))


def test_plane_x0_is_a_node():
    grid = TensorGrid(((-1, 1), (-1, 1)), (9, 9))
    assert 0.0 in grid.axes[0]
    assert grid.size == 49


def test_trapezoid_integrates_bilinear_exactly():
    grid = TensorGrid(((0, 2), (-1, 3)), (9, 17))
    vals = grid.sample(lambda p: (1 + p[..., 0]) * (2 + p[..., 1]), full=True)
    # int_0^2 (1+x) dx * int_{-1}^3 (2+y) dy = 4 * 12
    assert grid.integrate(vals) == pytest.approx(48.0)


def test_to_full_zero_boundary():
    grid = TensorGrid(((-1, 1), (-1, 1)), (5, 5))
    full = grid.to_full(np.ones(grid.size))
    assert full[0].sum() == 0 and full[:, -1].sum() == 0
    assert full.sum() == grid.size


def test_gauge_is_homogeneous_under_dilation(rng):
    z = rng.normal(size=(50, 2))
    for lam in (0.5, 1.0, 2.0):
        for t in (0.3, 2.5):
            np.testing.assert_allclose(gauge_norm(dilate(z, t, lam), lam), t * gauge_norm(z, lam), rtol=1e-12)


def test_dilate_rejects_nonpositive():
    with pytest.raises(DomainError):
        dilate(np.zeros((1, 2)), 0.0, 1.0)


def test_smoothstep_values():
    np.testing.assert_allclose(smoothstep5([-1, 0, 0.5, 1, 2]), [1, 1, 0.5, 0, 0])


def test_cutoff_support():
    grid = TensorGrid(((-1, 1), (-0.5, 0.5)), (65, 65))
    phi = build_cutoff(grid, (0.6, 0.0), 0.15, 1.0)
    rho = grid.gauge_distance((0.6, 0.0), 1.0)
    assert np.all(phi[rho <= 0.15] == 1.0)
    assert np.all(phi[rho >= 0.3] == 0.0)


def test_cutoff_must_avoid_sigma():
    grid = TensorGrid(((-1, 1), (-0.5, 0.5)), (33, 33))
    with pytest.raises(DomainError):
        build_cutoff(grid, (0.2, 0.0), 0.15, 1.0)
    build_cutoff(grid, (0.0, 0.0), 0.15, 1.0, allow_sigma=True)


def test_csv_export(tmp_path):
    grid = TensorGrid(((-1, 1), (-1, 1)), (5, 5))
    path = tmp_path / "u.csv"
    grid.to_csv(path, np.arange(grid.size, dtype=float))
    lines = path.read_text().splitlines()
    assert lines[0] == "x1,y1,value"
    assert len(lines) == grid.size + 1
