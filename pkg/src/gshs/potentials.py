"""Position and velocity potentials, including singular ones.

A potential is described by a :class:`PotentialSpec`: analytic value,
gradient and Laplacian maps together with a finiteness predicate, a
certified lower bound and a symmetry flag.  All evaluation maps are
vectorised over a trailing coordinate axis: points have shape
``(..., dim)`` and values have shape ``(...,)``.

Built-in families cover the smooth, non-Gaussian-kinetic and singular
regimes: quadratic, quartic, double-well, and Lennard-Jones-type
potentials with harmonic confinement (1d half-line and 2d radial).
Custom potentials can be declared through a small expression grammar
(sums/products/powers of coordinates and ``absx``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import sympy as sp

__all__ = [
    "PotentialSpec",
    "GrowthConstants",
    "GrowthReport",
    "quadratic_potential",
    "quartic_potential",
    "double_well_potential",
    "lennard_jones_potential",
    "linear_potential",
    "zero_potential",
    "expression_potential",
    "make_potential",
    "scale_velocity_potential",
    "check_growth_condition",
    "BUILTIN_KINDS",
]


@dataclass(frozen=True)
class PotentialSpec:
    """Immutable description of a potential on R^dim.

    ``value_at`` returns +inf outside the finite domain; ``grad_at`` and
    ``laplacian_at`` are only meaningful where the potential is finite.
    ``singularity_distance`` gives integrators a guard-band hint
    (distance to the singular set; None for everywhere-finite
    potentials).
    """

    dim: int
    value_at: Callable[[np.ndarray], np.ndarray]
    grad_at: Callable[[np.ndarray], np.ndarray]
    laplacian_at: Callable[[np.ndarray], np.ndarray]
    finite_domain: Callable[[np.ndarray], np.ndarray]
    lower_bound: float
    symmetric: bool = False
    singularity_distance: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")


@dataclass(frozen=True)
class GrowthConstants:
    """Constants (K, alpha) in the bound |lap| <= K(1 + |grad|^alpha)."""

    K: float
    alpha: float

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("K must be positive")
        if not (1.0 <= self.alpha < 2.0):
            raise ValueError("alpha must lie in [1, 2)")


@dataclass(frozen=True)
class GrowthReport:
    verified: bool
    max_violation: float
    worst_point: np.ndarray


def _as_points(p, dim):
    p = np.asarray(p, dtype=float)
    if p.shape == (dim,):
        return p[None, :], True
    if p.ndim >= 1 and p.shape[-1] == dim:
        return p, False
    raise ValueError(f"expected points with trailing axis of length {dim}")


class _Quadratic:
    def __init__(self, dim, stiffness):
        self.dim = dim
        self.k = stiffness

    def value(self, p):
        p = np.asarray(p, dtype=float)
        return 0.5 * self.k * np.sum(p * p, axis=-1)

    def grad(self, p):
        return self.k * np.asarray(p, dtype=float)

    def laplacian(self, p):
        p = np.asarray(p, dtype=float)
        return np.full(p.shape[:-1], self.k * self.dim)

    def finite(self, p):
        p = np.asarray(p, dtype=float)
        return np.ones(p.shape[:-1], dtype=bool)


class _Quartic:
    """Phi(u) = |u|^4 / 4."""

    def __init__(self, dim):
        self.dim = dim

    def value(self, p):
        p = np.asarray(p, dtype=float)
        r2 = np.sum(p * p, axis=-1)
        return 0.25 * r2 * r2

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        r2 = np.sum(p * p, axis=-1)
        return r2[..., None] * p

    def laplacian(self, p):
        p = np.asarray(p, dtype=float)
        r2 = np.sum(p * p, axis=-1)
        return (self.dim + 2.0) * r2

    def finite(self, p):
        p = np.asarray(p, dtype=float)
        return np.ones(p.shape[:-1], dtype=bool)


class _DoubleWell:
    """Phi(u) = (|u|^2 - 1)^2."""

    def __init__(self, dim):
        self.dim = dim

    def value(self, p):
        p = np.asarray(p, dtype=float)
        r2 = np.sum(p * p, axis=-1)
        return (r2 - 1.0) ** 2

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        r2 = np.sum(p * p, axis=-1)
        return 4.0 * (r2 - 1.0)[..., None] * p

    def laplacian(self, p):
        p = np.asarray(p, dtype=float)
        r2 = np.sum(p * p, axis=-1)
        return 4.0 * self.dim * (r2 - 1.0) + 8.0 * r2

    def finite(self, p):
        p = np.asarray(p, dtype=float)
        return np.ones(p.shape[:-1], dtype=bool)


class _LennardJones:
    """Phi(u) = r^-12 - r^-6 + c r^2 / 2, r = |u|, singular at the origin.

    In 1d this is restricted to the half-line x > 0.
    """

    def __init__(self, dim, confinement):
        self.dim = dim
        self.c = confinement

    def _radius(self, p):
        p = np.asarray(p, dtype=float)
        if self.dim == 1:
            return p[..., 0]
        return np.sqrt(np.sum(p * p, axis=-1))

    def _phi_of_r(self, r):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            r6 = r ** 6
            return np.where(r > 0.0,
                            1.0 / (r6 * r6) - 1.0 / r6 + 0.5 * self.c * r * r,
                            np.inf)

    def _dphi_of_r(self, r):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            r7 = r ** 7
            return -12.0 / (r7 * r7 / r) + 6.0 / r7 + self.c * r

    def _d2phi_of_r(self, r):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            r8 = r ** 8
            return 156.0 / (r8 * r8 / r / r) - 42.0 / r8 + self.c

    def value(self, p):
        return self._phi_of_r(self._radius(p))

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        r = self._radius(p)
        if self.dim == 1:
            return self._dphi_of_r(r)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            unit = p / r[..., None]
        return self._dphi_of_r(r)[..., None] * unit

    def laplacian(self, p):
        r = self._radius(p)
        lap = self._d2phi_of_r(r)
        if self.dim > 1:
            with np.errstate(divide="ignore", invalid="ignore"):
                lap = lap + (self.dim - 1) * self._dphi_of_r(r) / r
        return lap

    def finite(self, p):
        return self._radius(p) > 0.0

    def sing_dist(self, p):
        return self._radius(p)


class _Linear:
    """Phi(x) = -x_1; unbounded below (used as a negative control)."""

    def __init__(self, dim):
        self.dim = dim

    def value(self, p):
        p = np.asarray(p, dtype=float)
        return -p[..., 0]

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        g = np.zeros_like(p)
        g[..., 0] = -1.0
        return g

    def laplacian(self, p):
        p = np.asarray(p, dtype=float)
        return np.zeros(p.shape[:-1])

    def finite(self, p):
        p = np.asarray(p, dtype=float)
        return np.ones(p.shape[:-1], dtype=bool)


class _Zero:
    def __init__(self, dim):
        self.dim = dim

    def value(self, p):
        p = np.asarray(p, dtype=float)
        return np.zeros(p.shape[:-1])

    def grad(self, p):
        return np.zeros_like(np.asarray(p, dtype=float))

    laplacian = value

    def finite(self, p):
        p = np.asarray(p, dtype=float)
        return np.ones(p.shape[:-1], dtype=bool)


def quadratic_potential(dim=1, stiffness=1.0):
    impl = _Quadratic(dim, stiffness)
    return PotentialSpec(
        dim=dim, value_at=impl.value, grad_at=impl.grad,
        laplacian_at=impl.laplacian, finite_domain=impl.finite,
        lower_bound=0.0, symmetric=True, name="quadratic",
        params={"dim": dim, "stiffness": stiffness})


def quartic_potential(dim=1):
    impl = _Quartic(dim)
    return PotentialSpec(
        dim=dim, value_at=impl.value, grad_at=impl.grad,
        laplacian_at=impl.laplacian, finite_domain=impl.finite,
        lower_bound=0.0, symmetric=True, name="quartic",
        params={"dim": dim})


def double_well_potential(dim=1):
    impl = _DoubleWell(dim)
    return PotentialSpec(
        dim=dim, value_at=impl.value, grad_at=impl.grad,
        laplacian_at=impl.laplacian, finite_domain=impl.finite,
        lower_bound=0.0, symmetric=True, name="double-well",
        params={"dim": dim})


def lennard_jones_potential(dim=1, confinement=1.0):
    """Lennard-Jones-type potential with harmonic confinement.

    1d: half-line x > 0; 2d: radial with origin singularity.
    """
    if dim not in (1, 2):
        raise ValueError("Lennard-Jones potential implemented for d in {1,2}")
    impl = _LennardJones(dim, confinement)
    # certified lower bound: minimise phi(r) over r > 0 on a fine grid,
    # then subtract a safety margin; phi is smooth with a unique interior
    # minimum for the confinement strengths used here.
    r = np.linspace(0.8, 3.0, 20001)
    lower = float(np.min(impl._phi_of_r(r))) - 1e-9
    return PotentialSpec(
        dim=dim, value_at=impl.value, grad_at=impl.grad,
        laplacian_at=impl.laplacian, finite_domain=impl.finite,
        lower_bound=lower, symmetric=False,
        singularity_distance=impl.sing_dist,
        name="lennard-jones",
        params={"dim": dim, "confinement": confinement})


def linear_potential(dim=1):
    impl = _Linear(dim)
    return PotentialSpec(
        dim=dim, value_at=impl.value, grad_at=impl.grad,
        laplacian_at=impl.laplacian, finite_domain=impl.finite,
        lower_bound=-math.inf, symmetric=False, name="linear",
        params={"dim": dim})


def zero_potential(dim=1):
    impl = _Zero(dim)
    return PotentialSpec(
        dim=dim, value_at=impl.value, grad_at=impl.grad,
        laplacian_at=impl.laplacian, finite_domain=impl.finite,
        lower_bound=0.0, symmetric=True, name="zero", params={"dim": dim})


class _Expression:
    """Potential defined by a sympy expression in x1..xd and absx."""

    def __init__(self, expr_str, dim):
        self.dim = dim
        syms = sp.symbols(f"x1:{dim + 1}")
        absx = sp.sqrt(sum(s ** 2 for s in syms))
        expr = sp.sympify(expr_str, locals={"absx": absx,
                                            **{f"x{i+1}": syms[i]
                                               for i in range(dim)}})
        grads = [sp.diff(expr, s) for s in syms]
        lap = sum(sp.diff(g, s) for g, s in zip(grads, syms))
        self._value = sp.lambdify(syms, expr, "numpy")
        self._grads = [sp.lambdify(syms, g, "numpy") for g in grads]
        self._lap = sp.lambdify(syms, lap, "numpy")

    def _split(self, p):
        p = np.asarray(p, dtype=float)
        return [p[..., i] for i in range(self.dim)], p.shape[:-1]

    def value(self, p):
        coords, shape = self._split(p)
        return np.broadcast_to(np.asarray(self._value(*coords), dtype=float),
                               shape).copy()

    def grad(self, p):
        coords, shape = self._split(p)
        cols = [np.broadcast_to(np.asarray(g(*coords), dtype=float), shape)
                for g in self._grads]
        return np.stack(cols, axis=-1)

    def laplacian(self, p):
        coords, shape = self._split(p)
        return np.broadcast_to(np.asarray(self._lap(*coords), dtype=float),
                               shape).copy()

    def finite(self, p):
        return np.isfinite(self.value(p))


def expression_potential(expr, dim=1, lower_bound=None, name=None):
    """Potential from an expression in x1..xd and absx, e.g. "x1**4/4 + absx".

    The lower bound is probed on a coarse grid when not supplied; such a
    bound is a probe estimate, not a certificate.
    """
    impl = _Expression(expr, dim)
    if lower_bound is None:
        grid = np.linspace(-50.0, 50.0, 4001)
        if dim == 1:
            probes = grid[:, None]
        else:
            rng = np.random.default_rng(0)
            probes = rng.uniform(-50.0, 50.0, size=(20000, dim))
        with np.errstate(invalid="ignore"):
            vals = impl.value(probes)
        lower_bound = float(np.nanmin(vals))
    # symmetry probe
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(256, dim))
    sym = bool(np.allclose(impl.value(pts), impl.value(-pts),
                           rtol=1e-12, atol=1e-12))
    return PotentialSpec(
        dim=dim, value_at=impl.value, grad_at=impl.grad,
        laplacian_at=impl.laplacian, finite_domain=impl.finite,
        lower_bound=lower_bound, symmetric=sym,
        name=name or f"expr:{expr}", params={"dim": dim, "expr": expr})


BUILTIN_KINDS = {
    "quadratic": quadratic_potential,
    "quartic": quartic_potential,
    "double-well": double_well_potential,
    "lennard-jones": lennard_jones_potential,
    "linear": linear_potential,
    "zero": zero_potential,
}


def make_potential(kind, **params):
    """Construct a potential by registry name or expression."""
    if kind == "expression":
        return expression_potential(**params)
    try:
        factory = BUILTIN_KINDS[kind]
    except KeyError:
        raise KeyError(f"unknown potential kind {kind!r}; "
                       f"choices: {sorted(BUILTIN_KINDS)} or 'expression'")
    return factory(**params)


class _Scaled:
    """phi(. / eps) + d*ln(eps): mass-preserving velocity scaling."""

    def __init__(self, base: PotentialSpec, eps: float):
        self.base = base
        self.eps = eps
        self.shift = base.dim * math.log(eps)

    def value(self, p):
        return self.base.value_at(np.asarray(p, dtype=float) / self.eps) \
            + self.shift

    def grad(self, p):
        return self.base.grad_at(np.asarray(p, dtype=float) / self.eps) \
            / self.eps

    def laplacian(self, p):
        return self.base.laplacian_at(np.asarray(p, dtype=float) / self.eps) \
            / (self.eps * self.eps)

    def finite(self, p):
        return self.base.finite_domain(np.asarray(p, dtype=float) / self.eps)

    def sing_dist(self, p):
        return self.base.singularity_distance(
            np.asarray(p, dtype=float) / self.eps) * self.eps


def scale_velocity_potential(phi2: PotentialSpec, eps: float) -> PotentialSpec:
    """Velocity scaling phi2(. / eps) + d*ln(eps).

    The additive constant keeps the Gibbs mass of the scaled potential
    equal to that of the original for every eps.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    impl = _Scaled(phi2, eps)
    return PotentialSpec(
        dim=phi2.dim, value_at=impl.value, grad_at=impl.grad,
        laplacian_at=impl.laplacian, finite_domain=impl.finite,
        lower_bound=phi2.lower_bound + impl.shift,
        symmetric=phi2.symmetric,
        singularity_distance=(impl.sing_dist
                              if phi2.singularity_distance else None),
        name=f"{phi2.name}@eps={eps:g}",
        params={"base": phi2.name, "eps": eps, **phi2.params})


def check_growth_condition(phi2: PotentialSpec, gc: GrowthConstants,
                           probe_points) -> GrowthReport:
    """Probe |lap phi2| <= K (1 + |grad phi2|^alpha) and report the worst
    violation over the probe set."""
    pts, _ = _as_points(probe_points, phi2.dim)
    if pts.shape[0] == 0:
        raise ValueError("probe point set must be non-empty")
    inside = phi2.finite_domain(pts)
    if not np.all(inside):
        raise ValueError("probe points must lie in the finite domain")
    lap = np.abs(phi2.laplacian_at(pts))
    grad_norm = np.linalg.norm(phi2.grad_at(pts), axis=-1)
    margin = lap - gc.K * (1.0 + grad_norm ** gc.alpha)
    worst = int(np.argmax(margin))
    return GrowthReport(verified=bool(margin[worst] <= 0.0),
                        max_violation=float(margin[worst]),
                        worst_point=pts[worst].copy())
