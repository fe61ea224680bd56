"""Deterministic quadrature helpers for Gibbs-weighted integrals.

1d integrals use adaptive Gauss-Kronrod (scipy.integrate.quad) on a
truncated domain; multi-dimensional integrals use composite
Gauss-Legendre tensor grids with panel boundaries aligned to support
edges, refined until two successive node counts agree.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

# Density values below DENSITY_FLOOR * max are treated as zero when
# truncating integration domains.
DENSITY_FLOOR = 1e-16


class QuadratureError(RuntimeError):
    """Raised when successive refinements fail to stabilise."""

    def __init__(self, message, integral_name=None):
        super().__init__(message)
        self.integral_name = integral_name


def gauss_panel(a, b, n):
    """Gauss-Legendre nodes/weights on a single interval [a, b]."""
    x, w = leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def composite_gauss(breakpoints, n_per_panel):
    """Composite Gauss rule over consecutive panels between breakpoints."""
    bp = np.asarray(breakpoints, dtype=float)
    nodes, weights = [], []
    for a, b in zip(bp[:-1], bp[1:]):
        if b <= a:
            continue
        x, w = gauss_panel(a, b, n_per_panel)
        nodes.append(x)
        weights.append(w)
    if not nodes:
        raise ValueError("empty panel list")
    return np.concatenate(nodes), np.concatenate(weights)


def split_panels(breakpoints, max_width):
    """Insert equal subdivisions so no panel exceeds max_width."""
    bp = [float(b) for b in breakpoints]
    out = [bp[0]]
    for a, b in zip(bp[:-1], bp[1:]):
        n = max(1, int(np.ceil((b - a) / max_width)))
        out.extend(np.linspace(a, b, n + 1)[1:].tolist())
    return out


def tensor_grid(axes):
    """Tensor product of per-axis (nodes, weights) pairs.

    Returns points of shape (N, d) and weights of shape (N,).
    """
    node_list = [np.asarray(n) for n, _ in axes]
    weight_list = [np.asarray(w) for _, w in axes]
    mesh = np.meshgrid(*node_list, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    w = weight_list[0]
    for wi in weight_list[1:]:
        w = np.multiply.outer(w, wi)
    return points, w.ravel()


def truncated_interval(log_density, x_min=None, x_max=None, x_start=0.0,
                       floor=DENSITY_FLOOR):
    """Interval outside of which exp(log_density) < floor * max.

    ``log_density`` maps a float array to log-density values (-inf
    allowed).  ``x_min``/``x_max`` are hard domain walls (e.g. a
    singularity at 0).  The search expands geometrically from a point
    near the density mode.
    """
    # locate an approximate mode on a coarse grid
    lo = x_start - 1.0 if x_min is None else x_min + 1e-9
    hi = x_start + 1.0 if x_max is None else x_max - 1e-9
    span = np.linspace(lo, hi, 257)
    vals = log_density(span)
    best = span[int(np.argmax(vals))]
    log_max = float(np.max(vals))
    cut = log_max + np.log(floor)

    def expand(direction):
        step = 0.5
        edge = best
        for _ in range(200):
            probe = edge + direction * step
            if x_min is not None and probe <= x_min:
                return x_min
            if x_max is not None and probe >= x_max:
                return x_max
            if log_density(np.array([probe]))[0] < cut:
                # tighten the overshoot of the geometric search
                inner, outer = edge, probe
                for _ in range(30):
                    mid = 0.5 * (inner + outer)
                    if log_density(np.array([mid]))[0] < cut:
                        outer = mid
                    else:
                        inner = mid
                return outer
            edge = probe
            step *= 1.5
        raise QuadratureError("density truncation search did not terminate")

    return float(expand(-1.0)), float(expand(+1.0))


def adaptive_quad_1d(func, a, b, singular_points=(), rel_tol=1e-9,
                     name="integral"):
    """Adaptive 1d quadrature with optional interior refinement points."""
    pts = [p for p in singular_points if a < p < b]
    val, err = integrate.quad(func, a, b, points=pts or None, limit=400)
    if val != 0.0 and err > max(abs(val) * 1e-6, 1e-13):
        raise QuadratureError(
            f"{name}: quad error estimate {err:.2e} too large for value "
            f"{val:.6e}", integral_name=name)
    return val


def refine_until_stable(evaluate, rel_tol=1e-9, abs_tol=0.0, start=40,
                        max_n=640, name="integral"):
    """Call ``evaluate(n)`` with doubling n until successive values agree.

    ``abs_tol`` handles integrals whose true value is (near) zero, where
    relative agreement is meaningless.  Raises QuadratureError when the
    refinement diverges.
    """
    n = start
    prev = evaluate(n)
    while n < max_n:
        n *= 2
        cur = evaluate(n)
        scale = max(abs(cur), abs(prev), 1e-300)
        if abs(cur - prev) <= rel_tol * scale + abs_tol:
            return cur
        prev = cur
    raise QuadratureError(
        f"{name}: refinements did not stabilise (last {prev:.6e})",
        integral_name=name)
