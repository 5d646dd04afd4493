import pytest

from grushin.errors import BranchEmptyError, DomainError, ThresholdError
from grushin.fibering import (RayData, find_roots, g_function, mu_zero, scale_to_nehari, sup_g,
                              sup_g_closed_form, t_zero)
from grushin.functional import EnergyFunctional
from grushin.model import WeightSpec


def test_case_b_roots():
    ray = RayData(A=2.0, B=1.0, C=1.0, r=0.5, s=3.0, mu=0.1)
    rep = find_roots(ray)
    assert rep.case == "b"
    assert rep.t_plus < rep.t0 < rep.t_minus
    assert rep.d2F_plus > 0 > rep.d2F_minus
    assert ray.dF(rep.t_plus) == pytest.approx(0, abs=1e-10)
    assert ray.dF(rep.t_minus) == pytest.approx(0, abs=1e-10)
    assert rep.F_plus < 0


def test_case_a_single_root():
    ray = RayData(A=2.0, B=-1.0, C=1.0, r=0.5, s=3.0, mu=0.1)
    rep = find_roots(ray)
    assert rep.case == "a" and rep.t_plus is None
    with pytest.raises(BranchEmptyError):
        rep.root("plus")


def test_threshold_error_above_sup_g():
    ray = RayData(A=1.0, B=1.0, C=1.0, r=0.5, s=3.0, mu=10.0)
    with pytest.raises(ThresholdError):
        find_roots(ray)


def test_zero_ray_rejected():
    with pytest.raises(DomainError):
        RayData(A=0.0, B=1.0, C=1.0, r=0.5, s=3.0, mu=0.1)


def test_no_maximum_when_c_nonpositive():
    with pytest.raises(DomainError):
        t_zero(RayData(A=1.0, B=1.0, C=-1.0, r=0.5, s=3.0, mu=0.1))
    with pytest.raises(DomainError):
        g_function(RayData(A=1.0, B=1.0, C=1.0, r=0.5, s=3.0, mu=0.1), -1.0)


def test_sup_g_closed_form_agrees():
    ray = RayData(A=1.7, B=0.3, C=0.9, r=0.25, s=2.5, mu=0.1)
    assert sup_g(ray) == pytest.approx(sup_g_closed_form(ray), rel=1e-12)


def test_mu_zero_is_worst_case_threshold():
    # a ray attaining both embedding bounds sits exactly on the threshold
    class Spec:
        r, s = 0.5, 3.0
    Sq, Sp, gn, hn = 0.6, 0.7, 2.0, 4.0
    mu0 = mu_zero(Spec, Sq, Sp, gn, hn)
    ray = RayData(A=1.0, B=Sq ** 1.5 * gn, C=Sp ** 4 * hn, r=0.5, s=3.0, mu=mu0)
    assert sup_g(ray) == pytest.approx(mu0 * ray.B, rel=1e-12)
    with pytest.raises(DomainError):
        mu_zero(Spec, 0.0, Sp, gn, hn)


def test_scale_to_nehari(small_spec, small_op):
    f = EnergyFunctional(small_spec, small_op)
    u = small_op.grid.sample(lambda p: (1 - p[..., 0] ** 2) * (1 - p[..., 1] ** 2))
    for branch in ("plus", "minus"):
        v = scale_to_nehari(f, u, branch)
        assert f.classify(v).label == branch
    with pytest.raises(DomainError):
        scale_to_nehari(f, u, "zero")
    negative_h = EnergyFunctional(small_spec.with_params(h_weight=WeightSpec.constant(-1.0)), small_op)
    with pytest.raises(BranchEmptyError):
        scale_to_nehari(negative_h, u, "plus")
