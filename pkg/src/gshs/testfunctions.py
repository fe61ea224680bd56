"""Smooth test functions for generator identities and quadrature checks.

The bump family is polynomial, (1 - t^2)^4 per coordinate (product form)
or (1 - |p|^2/r^2)^4 (radial form), so that all derivatives are exact
rational arithmetic.  Coordinate functions x_i + v_i and v_i are
unbounded members flagged via an infinite support radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "TestFunction",
    "product_bump",
    "radial_bump",
    "position_plus_velocity_coordinate",
    "velocity_coordinate",
    "position_coordinate",
    "lift_position",
    "lift_velocity",
    "hermite_function",
    "tf_linear_combination",
    "tf_square",
    "constant_function",
]


@dataclass(frozen=True)
class TestFunction:
    """A C^2 function with analytic first derivatives and Hessian diagonal.

    ``hessian_diag_at`` returns the diagonal of the Hessian with shape
    (..., dim); summing the last ``d`` entries gives the velocity
    Laplacian of a phase-space function, summing all entries the full
    Laplacian.  ``support_radius`` is a compact-support certificate
    (math.inf for unbounded members).
    """

    dim: int
    value_at: Callable[[np.ndarray], np.ndarray]
    grad_at: Callable[[np.ndarray], np.ndarray]
    hessian_diag_at: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    smooth: bool = True
    name: str = ""
    # per-axis support box (lo, hi) arrays; None for unbounded support.
    # Quadrature panels are aligned to these edges so polynomial bumps
    # integrate at spectral accuracy.
    support_box: Optional[tuple] = None

    def laplacian_at(self, p):
        return np.sum(self.hessian_diag_at(p), axis=-1)

    def vlaplacian_at(self, p, d):
        """Laplacian in the last d (velocity) coordinates."""
        return np.sum(self.hessian_diag_at(p)[..., self.dim - d:], axis=-1)


def _b(t):
    u = 1.0 - t * t
    return np.where(np.abs(t) < 1.0, u ** 4, 0.0)


def _db(t):
    u = 1.0 - t * t
    return np.where(np.abs(t) < 1.0, -8.0 * t * u ** 3, 0.0)


def _d2b(t):
    u = 1.0 - t * t
    return np.where(np.abs(t) < 1.0,
                    -8.0 * u ** 3 + 48.0 * t * t * u ** 2, 0.0)


class _ProductBump:
    """f(p) = prod_i b((p_i - c_i) / r_i) with b(t) = (1 - t^2)^4."""

    def __init__(self, center, radii):
        self.c = np.asarray(center, dtype=float)
        self.r = np.broadcast_to(np.asarray(radii, dtype=float),
                                 self.c.shape).copy()

    def _t(self, p):
        return (np.asarray(p, dtype=float) - self.c) / self.r

    def value(self, p):
        return np.prod(_b(self._t(p)), axis=-1)

    def grad(self, p):
        t = self._t(p)
        b = _b(t)
        db = _db(t) / self.r
        total = np.prod(b, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            others = np.where(b > 0.0, total / b, 0.0)
        # recompute the zero-factor case exactly: product over j != i
        bad = np.any(b == 0.0, axis=-1)
        if np.any(bad):
            others = _leave_one_out(b, others, bad)
        return others * db

    def hessian_diag(self, p):
        t = self._t(p)
        b = _b(t)
        d2b = _d2b(t) / (self.r * self.r)
        total = np.prod(b, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            others = np.where(b > 0.0, total / b, 0.0)
        bad = np.any(b == 0.0, axis=-1)
        if np.any(bad):
            others = _leave_one_out(b, others, bad)
        return others * d2b


def _leave_one_out(b, others, bad):
    """Exact leave-one-out products where some factor vanishes."""
    others = others.copy()
    flat_b = b[bad]
    n = flat_b.shape[-1]
    out = np.empty_like(flat_b)
    for i in range(n):
        out[..., i] = np.prod(np.delete(flat_b, i, axis=-1), axis=-1)
    others[bad] = out
    return others


class _RadialBump:
    """f(p) = (1 - |p - c|^2 / r^2)^4 on the ball of radius r."""

    def __init__(self, center, radius):
        self.c = np.asarray(center, dtype=float)
        self.r2 = float(radius) ** 2

    def _s(self, p):
        z = np.asarray(p, dtype=float) - self.c
        return z, np.sum(z * z, axis=-1) / self.r2

    def value(self, p):
        _, s = self._s(p)
        return np.where(s < 1.0, (1.0 - s) ** 4, 0.0)

    def grad(self, p):
        z, s = self._s(p)
        coef = np.where(s < 1.0, -8.0 * (1.0 - s) ** 3 / self.r2, 0.0)
        return coef[..., None] * z

    def hessian_diag(self, p):
        z, s = self._s(p)
        inside = s < 1.0
        u = np.where(inside, 1.0 - s, 0.0)
        diag = (-8.0 * u ** 3 / self.r2)[..., None] \
            + (48.0 * u ** 2 / self.r2 ** 2)[..., None] * z * z
        return np.where(inside[..., None], diag, 0.0)


def product_bump(center, radii):
    """Polynomial bump in product form; support is the axis box."""
    impl = _ProductBump(center, radii)
    radius = float(np.linalg.norm(np.abs(impl.c) + impl.r))
    return TestFunction(dim=impl.c.size, value_at=impl.value,
                        grad_at=impl.grad, hessian_diag_at=impl.hessian_diag,
                        support_radius=radius, smooth=True,
                        name="product-bump",
                        support_box=(impl.c - impl.r, impl.c + impl.r))


def radial_bump(center, radius):
    impl = _RadialBump(center, radius)
    outer = float(np.linalg.norm(impl.c) + radius)
    r = float(radius)
    return TestFunction(dim=np.asarray(center).size, value_at=impl.value,
                        grad_at=impl.grad, hessian_diag_at=impl.hessian_diag,
                        support_radius=outer, smooth=True, name="radial-bump",
                        support_box=(impl.c - r, impl.c + r))


class _Linear:
    """f(p) = coeffs . p"""

    def __init__(self, coeffs):
        self.a = np.asarray(coeffs, dtype=float)

    def value(self, p):
        return np.sum(np.asarray(p, dtype=float) * self.a, axis=-1)

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(self.a, p.shape).copy()

    def hessian_diag(self, p):
        return np.zeros_like(np.asarray(p, dtype=float))


def _linear(coeffs, name):
    impl = _Linear(coeffs)
    return TestFunction(dim=impl.a.size, value_at=impl.value,
                        grad_at=impl.grad, hessian_diag_at=impl.hessian_diag,
                        support_radius=math.inf, smooth=True, name=name)


def position_plus_velocity_coordinate(i, d):
    """x_i + v_i on R^{2d} (tightness coordinate, unbounded)."""
    a = np.zeros(2 * d)
    a[i] = 1.0
    a[d + i] = 1.0
    return _linear(a, f"x{i}+v{i}")


def velocity_coordinate(i, d):
    """v_i on R^{2d} (unbounded)."""
    a = np.zeros(2 * d)
    a[d + i] = 1.0
    return _linear(a, f"v{i}")


def position_coordinate(i, d):
    a = np.zeros(2 * d)
    a[i] = 1.0
    return _linear(a, f"x{i}")


class _Lift:
    def __init__(self, base: TestFunction, d, which):
        self.base = base
        self.d = d
        self.sl = slice(0, d) if which == "x" else slice(d, 2 * d)
        self.which = which

    def _sub(self, p):
        return np.asarray(p, dtype=float)[..., self.sl]

    def value(self, p):
        return self.base.value_at(self._sub(p))

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        g = np.zeros_like(p)
        g[..., self.sl] = self.base.grad_at(self._sub(p))
        return g

    def hessian_diag(self, p):
        p = np.asarray(p, dtype=float)
        h = np.zeros_like(p)
        h[..., self.sl] = self.base.hessian_diag_at(self._sub(p))
        return h


def lift_position(f: TestFunction, d: int) -> TestFunction:
    """View a function of x as a phase-space function constant in v."""
    impl = _Lift(f, d, "x")
    return TestFunction(dim=2 * d, value_at=impl.value, grad_at=impl.grad,
                        hessian_diag_at=impl.hessian_diag,
                        support_radius=math.inf, smooth=f.smooth,
                        name=f"{f.name}(x)")


def lift_velocity(f: TestFunction, d: int) -> TestFunction:
    impl = _Lift(f, d, "v")
    return TestFunction(dim=2 * d, value_at=impl.value, grad_at=impl.grad,
                        hessian_diag_at=impl.hessian_diag,
                        support_radius=math.inf, smooth=f.smooth,
                        name=f"{f.name}(v)")


class _Hermite:
    """Probabilists' Hermite polynomial He_k in one variable."""

    def __init__(self, k):
        from numpy.polynomial import hermite_e
        self.k = k
        self.p = hermite_e.HermiteE.basis(k)
        self.dp = self.p.deriv()
        self.d2p = self.dp.deriv()

    def value(self, p):
        return self.p(np.asarray(p, dtype=float)[..., 0])

    def grad(self, p):
        return self.dp(np.asarray(p, dtype=float)[..., 0])[..., None]

    def hessian_diag(self, p):
        return self.d2p(np.asarray(p, dtype=float)[..., 0])[..., None]


def hermite_function(k):
    """He_k(x) on R; eigenfunction of the Ornstein-Uhlenbeck generator."""
    impl = _Hermite(k)
    return TestFunction(dim=1, value_at=impl.value, grad_at=impl.grad,
                        hessian_diag_at=impl.hessian_diag,
                        support_radius=math.inf, smooth=True,
                        name=f"hermite-{k}")


class _LinComb:
    def __init__(self, coeffs, funcs):
        self.coeffs = list(coeffs)
        self.funcs = list(funcs)

    def value(self, p):
        return sum(c * f.value_at(p) for c, f in zip(self.coeffs, self.funcs))

    def grad(self, p):
        return sum(c * f.grad_at(p) for c, f in zip(self.coeffs, self.funcs))

    def hessian_diag(self, p):
        return sum(c * f.hessian_diag_at(p)
                   for c, f in zip(self.coeffs, self.funcs))


def tf_linear_combination(coeffs, funcs) -> TestFunction:
    dims = {f.dim for f in funcs}
    if len(dims) != 1:
        raise ValueError("mixed dimensions in linear combination")
    impl = _LinComb(coeffs, funcs)
    radius = max(f.support_radius for f in funcs)
    box = None
    if all(f.support_box is not None for f in funcs):
        los = np.min([f.support_box[0] for f in funcs], axis=0)
        his = np.max([f.support_box[1] for f in funcs], axis=0)
        box = (los, his)
    return TestFunction(dim=dims.pop(), value_at=impl.value,
                        grad_at=impl.grad, hessian_diag_at=impl.hessian_diag,
                        support_radius=radius,
                        smooth=all(f.smooth for f in funcs),
                        name="lincomb", support_box=box)


class _Square:
    def __init__(self, base):
        self.base = base

    def value(self, p):
        v = self.base.value_at(p)
        return v * v

    def grad(self, p):
        return 2.0 * self.base.value_at(p)[..., None] * self.base.grad_at(p)

    def hessian_diag(self, p):
        g = self.base.grad_at(p)
        return 2.0 * (g * g
                      + self.base.value_at(p)[..., None]
                      * self.base.hessian_diag_at(p))


def tf_square(f: TestFunction) -> TestFunction:
    impl = _Square(f)
    return TestFunction(dim=f.dim, value_at=impl.value, grad_at=impl.grad,
                        hessian_diag_at=impl.hessian_diag,
                        support_radius=f.support_radius, smooth=f.smooth,
                        name=f"({f.name})^2", support_box=f.support_box)


class _Const:
    def __init__(self, c, dim):
        self.c = c
        self.dim = dim

    def value(self, p):
        p = np.asarray(p, dtype=float)
        return np.full(p.shape[:-1], self.c)

    def grad(self, p):
        return np.zeros_like(np.asarray(p, dtype=float))

    hessian_diag = grad


def constant_function(c, dim) -> TestFunction:
    impl = _Const(float(c), dim)
    return TestFunction(dim=dim, value_at=impl.value, grad_at=impl.grad,
                        hessian_diag_at=impl.hessian_diag,
                        support_radius=math.inf, smooth=True,
                        name=f"const-{c}")
