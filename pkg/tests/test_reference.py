import numpy as np
import pytest

from grushin.grid import gauge_norm
from grushin.reference import ReferenceProfile, compute_reference_profile, graded_axis, reference_profile

COARSE = {"h0": 0.1, "ratio": 1.2, "extent": 30.0, "core": 1.0}


@pytest.fixture(scope="module")
def coarse():
    return compute_reference_profile(tol=1e-12, **COARSE)


@pytest.fixture(scope="module")
def fine():
    return reference_profile()


def closed_form(points):
    # positive solution of -Delta_1 v = v^5 in R^2 with v(0) = 1
    x, y = points[..., 0], points[..., 1]
    return ((1 + x ** 2) ** 2 + 4 * y ** 2) ** -0.25


def test_graded_axis_shape():
    ax = graded_axis(0.1, 1.2, 30.0, 1.0)
    assert ax[-1] >= 30.0
    assert np.all(np.diff(ax) > 0)
    np.testing.assert_allclose(ax, -ax[::-1])
    assert np.diff(ax).max() / np.diff(ax).min() > 10


def test_coarse_profile_normalized(coarse):
    assert coarse(np.zeros((1, 2)))[0] == pytest.approx(1.0)
    assert coarse.values.max() == pytest.approx(1.0)
    assert np.all(coarse.values > 0)
    assert coarse.residual < 1e-5


def test_profile_symmetric(coarse):
    pts = np.array([[0.7, 0.3], [-0.7, 0.3], [0.7, -0.3], [-0.7, -0.3]])
    vals = coarse(pts)
    np.testing.assert_allclose(vals, vals[0], rtol=1e-10)


def test_save_load_round_trip(coarse, tmp_path):
    coarse.save(tmp_path / "p.npz")
    again = ReferenceProfile.load(tmp_path / "p.npz")
    np.testing.assert_array_equal(again.values, coarse.values)
    assert again.quotient == coarse.quotient
    assert again.Q == 3.0 and again.crit == 6.0


def test_cache_reuses_file(tmp_path, monkeypatch):
    monkeypatch.setenv("GRUSHIN_CACHE", str(tmp_path))
    first = reference_profile(**COARSE)
    assert len(list(tmp_path.glob("profile-*.npz"))) == 1
    second = reference_profile(**COARSE)
    np.testing.assert_array_equal(first.values, second.values)


def test_fine_profile_matches_closed_form(fine):
    pts = fine.space.points
    rho = gauge_norm(pts, 1.0)
    rel = np.abs(fine.values - closed_form(pts)) / closed_form(pts)
    assert rel[rho < 10].max() < 0.01
    assert rel[rho < 50].max() < 0.05


def test_fine_quotient_near_sharp_constant(fine):
    # sharp Sobolev quotient for lam = 1, n = m = 1
    assert fine.quotient == pytest.approx((np.pi / 2) ** (2 / 3), rel=5e-3)
    assert fine.quotient >= (np.pi / 2) ** (2 / 3)


def test_fine_half_widths(fine):
    np.testing.assert_allclose(fine.half_max_widths(), [2 * np.sqrt(3), np.sqrt(15)], rtol=5e-3)
