import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pogit.exceptions import DomainError, SplineSpecError
from pogit.splines import SplineSpec, build_basis, first_derivative_map, second_derivative_map


def interpolate(spec, f):
    """Spline coefficients reproducing ``f`` (exact for polynomials of degree <= spec.degree)."""
    x = np.linspace(*spec.domain, 4 * spec.n_basis)
    B = build_basis(x, spec)
    return np.linalg.lstsq(B, f(x), rcond=None)[0]


def test_degree_zero_is_indicator():
    B = build_basis([0.3], SplineSpec(0, (), (0.0, 1.0)))
    assert B.shape == (1, 1)
    assert B[0, 0] == 1.0


def test_linear_hat_peaks_at_knot():
    B = build_basis([0.5], SplineSpec(1, (0.5,), (0.0, 1.0)))
    np.testing.assert_allclose(B[0], [0.0, 1.0, 0.0], atol=1e-15)


def test_partition_of_unity_cubic():
    spec = SplineSpec(3, (0.25, 0.5, 0.75))
    B = build_basis(np.linspace(0, 1, 100), spec)
    assert B.shape == (100, 3 + 1 + 3)
    assert np.max(np.abs(B.sum(axis=1) - 1.0)) < 1e-12


def test_domain_endpoints_included():
    spec = SplineSpec(2, (0.4,), (-1.0, 2.0))
    B = build_basis([-1.0, 2.0], spec)
    np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("bad", [-0.01, 1.01, np.nan, np.inf])
def test_out_of_domain_raises(bad):
    with pytest.raises(DomainError):
        build_basis([0.5, bad], SplineSpec(3, (0.5,)))


@pytest.mark.parametrize("kw", [
    dict(degree=3, interior_knots=(0.5, 0.4)),
    dict(degree=3, interior_knots=(0.5, 0.5)),
    dict(degree=3, interior_knots=(0.0,)),
    dict(degree=3, interior_knots=(1.2,)),
    dict(degree=4),
    dict(degree=-1),
    dict(degree=2, domain=(1.0, 0.0)),
])
def test_invalid_specs(kw):
    with pytest.raises(SplineSpecError):
        SplineSpec(**kw)


def test_second_derivative_of_square_is_two():
    spec = SplineSpec(2, (0.3, 0.6))
    theta = interpolate(spec, lambda x: x**2)
    D = second_derivative_map(spec, np.linspace(0, 1, 17))
    np.testing.assert_allclose(D @ theta, 2.0, atol=1e-9)


def test_second_derivative_of_line_is_zero():
    spec = SplineSpec(3, (0.25, 0.5, 0.75))
    theta = interpolate(spec, lambda x: 3 * x)
    np.testing.assert_allclose(second_derivative_map(spec, np.linspace(0, 1, 17)) @ theta, 0.0, atol=1e-9)


def test_second_derivative_convex_target_positive():
    spec = SplineSpec(3, (0.25, 0.5, 0.75))
    theta = interpolate(spec, np.exp)
    assert np.all(second_derivative_map(spec, np.linspace(0, 1, 50)) @ theta > 0)


def test_first_derivative_examples():
    spec = SplineSpec(3, (0.25, 0.5, 0.75))
    pts = np.linspace(0, 1, 11)
    D1 = first_derivative_map(spec, pts)
    np.testing.assert_allclose(D1 @ interpolate(spec, lambda x: 3 * x), 3.0, atol=1e-9)
    np.testing.assert_allclose(D1 @ interpolate(spec, lambda x: 0 * x + 2.5), 0.0, atol=1e-9)
    sq = interpolate(spec, lambda x: x**2)
    assert abs(first_derivative_map(spec, [0.5]) @ sq - 1.0)[0] < 1e-8


def test_derivative_degree_errors():
    with pytest.raises(SplineSpecError):
        second_derivative_map(SplineSpec(1, (0.5,)), [0.2])
    with pytest.raises(SplineSpecError):
        first_derivative_map(SplineSpec(0, ()), [0.2])


degrees = st.integers(min_value=0, max_value=3)
knot_sets = st.lists(st.floats(0.02, 0.98), min_size=0, max_size=5, unique=True).map(
    lambda ks: tuple(sorted(k for i, k in enumerate(sorted(ks)) if i == 0 or k - sorted(ks)[i - 1] > 0.01)))


@settings(max_examples=60, deadline=None)
@given(degrees, knot_sets, st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30))
def test_basis_properties(degree, knots, points):
    spec = SplineSpec(degree, knots)
    B = build_basis(points, spec)
    assert B.shape == (len(points), degree + 1 + len(knots))
    assert np.all(B >= 0)
    np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-12)
    assert np.all((B > 0).sum(axis=1) <= degree + 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 3), knot_sets, st.integers(0, 2**31 - 1))
def test_derivative_maps_match_finite_differences(degree, knots, seed):
    spec = SplineSpec(degree, knots)
    theta = np.random.default_rng(seed).normal(size=spec.n_basis)
    # stay away from knots where the (degree-1)th derivative has kinks
    pts = np.linspace(0.05, 0.95, 13)
    all_knots = np.array((0.0, *knots, 1.0))
    pts = pts[np.min(np.abs(pts[:, None] - all_knots[None, :]), axis=1) > 2e-3]
    f = lambda x: build_basis(x, spec) @ theta  # noqa: E731
    h = 1e-5
    fd1 = (f(pts + h) - f(pts - h)) / (2 * h)
    an1 = first_derivative_map(spec, pts) @ theta
    scale1 = max(1.0, np.abs(an1).max())
    assert np.max(np.abs(fd1 - an1)) / scale1 < 1e-6
    h2 = 1e-4
    fd2 = (f(pts + h2) - 2 * f(pts) + f(pts - h2)) / h2**2
    an2 = second_derivative_map(spec, pts) @ theta
    scale2 = max(1.0, np.abs(an2).max())
    assert np.max(np.abs(fd2 - an2)) / scale2 < 1e-6
