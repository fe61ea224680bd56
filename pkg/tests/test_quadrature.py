import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gshs.quadrature import (QuadratureError, adaptive_quad_1d,
                             composite_gauss, gauss_panel, refine_until_stable,
                             split_panels, tensor_grid, truncated_interval)


@given(st.integers(min_value=1, max_value=10),
       st.floats(-3, 3), st.floats(0.5, 4))
@settings(max_examples=50, deadline=None)
def test_gauss_panel_integrates_polynomials_exactly(n, a, width):
    # degree 2n - 1 exactness of an n-point rule
    b = a + width
    x, w = gauss_panel(a, b, n)
    deg = 2 * n - 1
    exact = (b ** (deg + 1) - a ** (deg + 1)) / (deg + 1)
    approx = float(np.sum(w * x ** deg))
    assert math.isclose(approx, exact, rel_tol=1e-10, abs_tol=1e-10)


def test_composite_gauss_skips_degenerate_panels():
    x, w = composite_gauss([0.0, 1.0, 1.0, 2.0], 4)
    assert x.size == 8
    assert math.isclose(float(np.sum(w)), 2.0)


def test_composite_gauss_rejects_empty():
    with pytest.raises(ValueError):
        composite_gauss([1.0, 1.0], 4)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6, unique=True),
       st.floats(0.1, 2.0))
@settings(max_examples=50, deadline=None)
def test_split_panels_respects_max_width(points, max_width):
    bp = sorted(points)
    out = split_panels(bp, max_width)
    assert out[0] == bp[0] and out[-1] == bp[-1]
    widths = np.diff(out)
    assert np.all(widths <= max_width * (1 + 1e-12))
    # original breakpoints survive the subdivision
    for b in bp:
        assert min(abs(o - b) for o in out) < 1e-9


def test_tensor_grid_weights_multiply():
    ax = gauss_panel(0.0, 1.0, 3)
    pts, w = tensor_grid([ax, ax])
    assert pts.shape == (9, 2)
    assert math.isclose(float(np.sum(w)), 1.0)


def test_truncated_interval_gaussian():
    lo, hi = truncated_interval(lambda x: -0.5 * x * x)
    # exp(-x^2/2) = 1e-16 at |x| = 8.58
    target = math.sqrt(-2 * math.log(1e-16))
    assert abs(-lo - target) < 0.05
    assert abs(hi - target) < 0.05


def test_truncated_interval_respects_walls():
    lo, hi = truncated_interval(
        lambda x: np.where(x > 0, -x, -np.inf), x_min=0.0, x_start=0.5)
    assert lo == 0.0
    assert 36 < hi < 38  # exp(-x) hits the floor at x = 36.8


def test_adaptive_quad_matches_gaussian_mass():
    val = adaptive_quad_1d(lambda x: math.exp(-0.5 * x * x), -40, 40)
    assert math.isclose(val, math.sqrt(2 * math.pi), rel_tol=1e-10)


def test_refine_until_stable_converges_and_diverges():
    assert refine_until_stable(lambda n: 1.0 + 1.0 / n ** 4) == pytest.approx(
        1.0, rel=1e-6)
    with pytest.raises(QuadratureError):
        refine_until_stable(lambda n: float(n), max_n=160)


def test_refine_until_stable_zero_value_needs_abs_tol():
    # rounding noise around zero never satisfies a relative criterion
    noise = {40: 3e-17, 80: -2e-17, 160: 1e-17, 320: -3e-17, 640: 2e-17}
    with pytest.raises(QuadratureError):
        refine_until_stable(lambda n: noise[n])
    assert abs(refine_until_stable(lambda n: noise[n], abs_tol=1e-13)) < 1e-13
