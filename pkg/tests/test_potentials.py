import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import gshs


def _fd_grad(phi, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (phi.value_at(x + e) - phi.value_at(x - e)) / (2 * h)
    return g


def _fd_lap(phi, x, h=1e-5):
    out = 0.0
    f0 = phi.value_at(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out += (phi.value_at(x + e) - 2 * f0 + phi.value_at(x - e)) / h ** 2
    return out


@pytest.mark.parametrize("factory,dim,shift", [
    (lambda: gshs.quadratic_potential(1, stiffness=2.0), 1, 0.0),
    (lambda: gshs.quadratic_potential(2), 2, 0.0),
    (lambda: gshs.quartic_potential(1), 1, 0.0),
    (lambda: gshs.double_well_potential(1), 1, 0.0),
    (lambda: gshs.lennard_jones_potential(1), 1, 1.5),
    (lambda: gshs.lennard_jones_potential(2), 2, 1.5),
])
def test_gradients_and_laplacians_match_finite_differences(factory, dim,
                                                           shift):
    phi = factory()
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.uniform(-0.8, 0.8, size=dim) + shift
        if not phi.finite_domain(x):
            continue
        assert np.allclose(phi.grad_at(x), _fd_grad(phi, x),
                           rtol=1e-4, atol=1e-4)
        assert np.allclose(phi.laplacian_at(x), _fd_lap(phi, x),
                           rtol=1e-3, atol=1e-3)


def test_quadratic_closed_form():
    phi = gshs.quadratic_potential(2, stiffness=3.0)
    x = np.array([1.0, -2.0])
    assert phi.value_at(x) == pytest.approx(3.0 * 5.0 / 2.0)
    assert np.allclose(phi.grad_at(x), 3.0 * x)
    assert phi.laplacian_at(x) == pytest.approx(6.0)


def test_lennard_jones_domain_and_singularity():
    lj = gshs.lennard_jones_potential(1)
    assert not lj.finite_domain(np.array([-0.5]))
    assert not lj.finite_domain(np.array([0.0]))
    assert lj.finite_domain(np.array([1.0]))
    assert lj.singularity_distance(np.array([0.3])) == pytest.approx(0.3)
    # deep repulsive core dominates near the wall
    assert lj.value_at(np.array([0.2])) > 1e6


def test_lennard_jones_2d_is_radial():
    lj = gshs.lennard_jones_potential(2)
    a = np.array([1.1, 0.0])
    b = np.array([0.0, 1.1])
    assert lj.value_at(a) == pytest.approx(lj.value_at(b))
    # gradient points along the radius
    g = lj.grad_at(np.array([0.9, 0.0]))
    assert abs(g[1]) < 1e-12


def test_linear_potential_is_not_confining():
    lin = gshs.linear_potential(1)
    assert lin.value_at(np.array([10.0])) < lin.value_at(np.array([0.0]))
    assert math.isinf(gshs.moment(gshs.GibbsMeasure(phi1=lin), "x", 2))


@given(st.floats(0.05, 1.0), st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_velocity_scaling_identity(eps, v):
    phi = gshs.quadratic_potential(1, stiffness=1.7)
    scaled = gshs.scale_velocity_potential(phi, eps)
    p = np.array([v])
    assert scaled.value_at(p) == pytest.approx(
        phi.value_at(p / eps) + math.log(eps), rel=1e-12, abs=1e-12)
    assert scaled.grad_at(p)[0] == pytest.approx(
        phi.grad_at(p / eps)[0] / eps, rel=1e-12, abs=1e-12)
    assert scaled.laplacian_at(p) == pytest.approx(
        phi.laplacian_at(p / eps) / eps ** 2, rel=1e-12, abs=1e-12)


def test_velocity_scaling_preserves_gibbs_mass():
    phi = gshs.quadratic_potential(1)
    for eps in (0.5, 0.1):
        scaled = gshs.scale_velocity_potential(phi, eps)
        z = gshs.GibbsMeasure(phi2=scaled).log_normalization
        assert z == pytest.approx(0.5 * math.log(2 * math.pi), rel=1e-9)


def test_expression_potential_round_trip():
    phi = gshs.expression_potential("x1**4/4", dim=1)
    x = np.array([1.3])
    assert phi.value_at(x) == pytest.approx(1.3 ** 4 / 4)
    assert phi.grad_at(x)[0] == pytest.approx(1.3 ** 3)
    assert phi.laplacian_at(x) == pytest.approx(3 * 1.3 ** 2)


def test_make_potential_registry_and_errors():
    phi = gshs.make_potential("quadratic", dim=2, stiffness=0.5)
    assert phi.dim == 2
    with pytest.raises(KeyError):
        gshs.make_potential("no-such-kind")


def test_growth_condition_probe():
    phi = gshs.quadratic_potential(1)
    pts = np.linspace(-5, 5, 101)[:, None]
    rep = gshs.check_growth_condition(
        phi, gshs.GrowthConstants(K=1.0, alpha=1.0), pts)
    assert rep.verified
    quartic = gshs.quartic_potential(1)
    rep2 = gshs.check_growth_condition(
        quartic, gshs.GrowthConstants(K=0.1, alpha=1.0), pts)
    assert not rep2.verified
    with pytest.raises(ValueError):
        gshs.GrowthConstants(K=1.0, alpha=2.5)
