import numpy as np
import pytest
import scipy.sparse as sp

from grushin.errors import DomainError
from grushin.grid import TensorGrid
from grushin.operator import GrushinOperator, lp_norm, weighted_power_integral


def make(nodes, lam=1.0, box=((-1, 1), (-1, 1))):
    grid = TensorGrid(box, (nodes, nodes))
    return grid, GrushinOperator(grid, lam)


def test_matrix_symmetric_positive():
    grid, op = make(17)
    assert abs(op.matrix - op.matrix.T).max() < 1e-14
    u = np.random.default_rng(0).normal(size=grid.size)
    assert op.energy(u) > 0


def test_lam_zero_is_laplacian():
    grid, op = make(9, lam=0.0)
    h = grid.spacing[0]
    d = sp.diags([-1, 2, -1], [-1, 0, 1], shape=(7, 7)) / h ** 2
    lap = sp.kron(d, sp.identity(7)) + sp.kron(sp.identity(7), d)
    assert abs(op.apply(np.eye(grid.size)) - lap.toarray()).max() < 1e-10


def test_y_coupling_vanishes_on_sigma():
    grid, op = make(9)
    on_sigma = np.flatnonzero(grid.points[:, 0] == 0.0)
    u = np.zeros(grid.size)
    u[on_sigma[3]] = 1.0
    out = op.apply(u)
    # only the x neighbours are touched
    touched = np.flatnonzero(out)
    assert set(grid.points[touched, 1]) == {grid.points[on_sigma[3], 1]}


def test_product_oracle_energy():
    # ||(1-x^2)(1-y^2)||^2 with weight x^2 equals 128/45 + 128/315
    grid, op = make(129)
    u = grid.sample(lambda p: (1 - p[..., 0] ** 2) * (1 - p[..., 1] ** 2))
    assert op.energy(u) == pytest.approx(1024 / 315, rel=1e-2)


def test_riesz_inverts_matrix():
    grid, op = make(17)
    load = np.random.default_rng(1).normal(size=grid.size)
    w = op.riesz(load)
    np.testing.assert_allclose(op.matrix @ w, grid.cell_volume * load, atol=1e-10)


def test_poincare_constant_for_laplacian():
    # smallest Dirichlet eigenvalue of the 5-point Laplacian on (-1,1)^2
    grid, op = make(33, lam=0.0)
    h = grid.spacing[0]
    lam1 = 2 * (4 / h ** 2) * np.sin(np.pi * h / 4) ** 2
    assert op.poincare_constant == pytest.approx(lam1, rel=1e-8)


def test_lp_norm_and_power_integral():
    grid, _ = make(9)
    u = np.full(grid.size, 2.0)
    assert lp_norm(grid, u, np.inf) == 2.0
    assert weighted_power_integral(grid, np.ones(grid.size), -u, 2.0) == pytest.approx(4 * grid.size * grid.cell_volume)
    assert weighted_power_integral(grid, np.ones(grid.size), -u, 2.0, "positive_part") == 0.0
    with pytest.raises(DomainError):
        lp_norm(grid, u, 0.5)
    with pytest.raises(DomainError):
        weighted_power_integral(grid, u, u, 2.0, "signed")


def test_dump(tmp_path):
    grid, op = make(5)
    op.dump(tmp_path / "k.txt")
    lines = (tmp_path / "k.txt").read_text().splitlines()
    assert len(lines) == op.matrix.nnz
