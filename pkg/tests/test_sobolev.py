import numpy as np
import pytest

from grushin.errors import DomainError
from grushin.grid import TensorGrid
from grushin.operator import GrushinOperator, lp_norm
from grushin.sobolev import SobolevEstimator, estimate_sobolev_constants, minimize_quotient


def test_p2_gives_poincare_constant(small_op):
    est = minimize_quotient(small_op, 2.0, tol=1e-14, max_iter=5000)
    assert est.quotient == pytest.approx(small_op.poincare_constant, rel=1e-6)


def test_quotient_matches_minimizer_field(small_op):
    est = minimize_quotient(small_op, 4.0)
    u = est.field
    assert est.quotient == pytest.approx(small_op.energy(u) / lp_norm(small_op.grid, u, 4.0) ** 2, rel=1e-12)
    assert est.converged
    assert np.all(u >= 0)


def test_embedding_inequality_holds_for_random_fields(small_op, rng):
    S = estimate_sobolev_constants(small_op, (3.0,))[3.0]
    for _ in range(20):
        u = rng.normal(size=small_op.size)
        assert lp_norm(small_op.grid, u, 3.0) <= S * np.sqrt(small_op.energy(u)) * (1 + 1e-9)


def test_box_scaling_in_x_only_for_laplacian():
    # for lam = 0 and p = 2 the quotient is the first eigenvalue, pi^2 (1/a^2 + 1/b^2) / 4 in the limit
    grid = TensorGrid(((-1, 1), (-2, 2)), (65, 65))
    op = GrushinOperator(grid, 0.0)
    est = minimize_quotient(op, 2.0, tol=1e-14, max_iter=5000)
    assert est.quotient == pytest.approx(np.pi ** 2 / 4 * (1 + 0.25), rel=2e-3)


def test_estimator_api(small_op):
    est = SobolevEstimator(exponents=(2.0, 4.0)).fit(small_op)
    assert set(est.constants_) == {2.0, 4.0}
    assert est.get_params()["exponents"] == (2.0, 4.0)
    with pytest.raises(DomainError):
        minimize_quotient(small_op, 0.5)
