import numpy as np
import pytest

from grushin import critical_solver as cs
from grushin.errors import ConvergenceError, DomainError, ThresholdError
from grushin.functional import EnergyFunctional
from grushin.grid import TensorGrid
from grushin.operator import GrushinOperator, lp_norm


@pytest.fixture(scope="module")
def pipeline(critical_spec):
    grid = TensorGrid.from_spec(critical_spec, 65)
    op = GrushinOperator(grid, 1.0)
    thr = cs.compute_thresholds(critical_spec, op, cs.critical_constants(critical_spec, op))
    f = EnergyFunctional(critical_spec.with_params(mu=0.5 * thr.mu_star), op)
    local = cs.local_minimize_in_ball(f, thr)
    family = cs.build_bubble_family(critical_spec, op, center=(0.0, 0.0), R=0.45)
    return {"grid": grid, "op": op, "thr": thr.with_level(local.energy), "f": f, "local": local, "family": family}


def test_delta_solves_its_defining_equation(pipeline):
    thr = pipeline["thr"]
    crit = 6.0
    coef = thr.Sp ** crit * thr.h_norm
    root = thr.delta_root
    assert root / 4 == pytest.approx(coef * root ** (crit - 1) / crit, rel=1e-12)
    assert thr.delta == pytest.approx(root / 2)
    assert thr.alpha_delta > 0


def test_compact_level_and_certified_level(pipeline):
    thr = pipeline["thr"]
    assert thr.compact_level == pytest.approx(thr.S_lambda_hat ** 1.5 / 3)
    assert thr.c_tilde_hat == pytest.approx(pipeline["local"].energy + thr.compact_level)


def test_floor_on_the_sphere(pipeline):
    out = cs.floor_check(pipeline["f"], pipeline["thr"], samples=30)
    assert out["floor_slack"] > 0 and out["chain_slack"] > 0


def test_local_minimizer(pipeline):
    loc, op, thr = pipeline["local"], pipeline["op"], pipeline["thr"]
    assert loc.energy < 0
    assert np.sqrt(op.energy(loc.field)) < thr.delta
    assert loc.residual < 1e-8
    assert loc.field.min() >= -1e-12


def test_local_minimizer_threshold(pipeline):
    f, thr = pipeline["f"], pipeline["thr"]
    with pytest.raises(ThresholdError):
        cs.local_minimize_in_ball(f.with_mu(2 * thr.mu_star), thr)


def test_bubble_family_resolution(pipeline):
    fam, grid = pipeline["family"], pipeline["grid"]
    assert fam.eps == (0.2,)
    assert fam.skipped == (0.1, 0.05, 0.025)
    assert fam.nodes_across(grid, 0.2).min() >= cs.MIN_NODES_ACROSS
    assert lp_norm(grid, fam.w[0.2], 6.0) == pytest.approx(1.0)


def test_bubble_family_strict_and_center(critical_spec, pipeline):
    op = pipeline["op"]
    with pytest.raises(DomainError, match="epsilon under-resolved"):
        cs.build_bubble_family(critical_spec, op, center=(0.0, 0.0), R=0.45, strict=True)
    with pytest.raises(DomainError):
        cs.build_bubble_family(critical_spec, op, center=(0.3, 0.0), R=0.1)


def test_default_placement(critical_spec):
    center, R = cs.default_bubble_placement(critical_spec)
    assert center == (0.0, 0.0)
    assert R == pytest.approx(0.45)


def test_asymptotic_slopes(pipeline):
    table = cs.asymptotics_experiment(pipeline["family"])
    assert len(table.rows) == 4
    for name in ("gamma_4.5", "gamma_5", "critical_deficit", "dirichlet_excess"):
        assert table.fit(name).ok, table.fit(name).to_dict()


def test_asymptotics_rejects_bad_gamma(pipeline):
    with pytest.raises(DomainError):
        cs.asymptotics_experiment(pipeline["family"], gammas=(2.0,))


def test_mountain_pass(pipeline):
    f, loc, thr = pipeline["f"], pipeline["local"], pipeline["thr"]
    mp = cs.mountain_pass(f, loc.field, pipeline["family"], thr)
    assert mp.solve.residual < 1e-6
    assert thr.delta ** 2 / 8 <= mp.solve.energy < loc.energy + thr.compact_level
    assert lp_norm(pipeline["grid"], mp.solve.field - loc.field, 2) > 1e-2
    assert len(mp.path_t) == 64


def test_mountain_pass_needs_points(pipeline):
    with pytest.raises(DomainError):
        cs.mountain_pass(pipeline["f"], pipeline["local"].field, pipeline["family"], pipeline["thr"], points=10)


def test_mountain_pass_iteration_cap(pipeline):
    with pytest.raises(ConvergenceError):
        cs.mountain_pass(pipeline["f"], pipeline["local"].field, pipeline["family"], pipeline["thr"], max_iter=0)


def test_gap_table_structure(pipeline):
    table = cs.verify_energy_gap(pipeline["f"], pipeline["local"].field, pipeline["family"],
                              pipeline["thr"].S_lambda_hat, samples=100)
    row = table.rows[0]
    assert row.margin == pytest.approx(table.bound - row.max_energy)
    assert row.holds == (row.margin > 0)
    assert table.to_dict()["holding"] == table.holding


def test_gap_holds_for_grid_minimizer(pipeline, critical_spec):
    # with the grid's own extremal in place of a bubble the ray stays under the level
    from grushin.sobolev import minimize_quotient

    op, grid = pipeline["op"], pipeline["grid"]
    est = minimize_quotient(op, 6.0)
    w = est.field / lp_norm(grid, est.field, 6.0)
    fam = cs.BubbleFamily(None, (0.0, 0.0), 0.45, None, (1.0,), (1.0,), {1.0: w}, {1.0: w})
    table = cs.verify_energy_gap(pipeline["f"], pipeline["local"].field, fam, est.quotient, samples=200)
    assert table.rows[0].holds


def test_golden_max_refines():
    ts = np.linspace(0, 3, 7)
    t, v = cs.golden_max(lambda t: -(t - 1.3) ** 2, ts, -(ts - 1.3) ** 2)
    assert t == pytest.approx(1.3, abs=1e-6) and v == pytest.approx(0, abs=1e-12)


def test_mountain_level_1d_bad_input():
    with pytest.raises(DomainError):
        cs.mountain_level_1d(-1.0, 3.0)
