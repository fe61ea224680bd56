"""Varying-Hilbert-space convergence numerics.

The embedding f -> (f o sigma)(eta_eps o p_v), with sigma(x, v) = x + v
and a symmetric radial cutoff eta_eps, carries position-space test
functions into phase space.  This module verifies that the embedded
norms converge to the position-space norm and that the generator
applied to embedded functions splits into six summands with the
expected limits.

Phase-space integrals are computed in (y, v) = (x + v, v) coordinates,
so that quadrature panels align with the support edges of the
position-space function and polynomial bumps integrate at spectral
accuracy despite the cutoff radius growing like eps^-2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import GibbsMeasure, _axis_interval, weighted_l2_inner
from .potentials import PotentialSpec, scale_velocity_potential
from .quadrature import (composite_gauss, refine_until_stable, split_panels,
                         tensor_grid)
from .report import ConvergenceReport
from .testfunctions import TestFunction

__all__ = [
    "CutoffFunction",
    "build_cutoff",
    "embed",
    "norm_convergence_curve",
    "generator_summand_norms",
    "SummandReport",
    "embedded_inner",
]

# extrema of the quintic smoothstep transition: max |q'| and max |q''|
_PROFILE_GRAD_BOUND = 15.0 / 8.0
_PROFILE_CURV_BOUND = 10.0 / math.sqrt(3.0)


def _profile(u):
    """q(u): 1 for u <= 1, 0 for u >= 2, quintic smoothstep between."""
    t = np.clip(u - 1.0, 0.0, 1.0)
    return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


def _dprofile(u):
    t = u - 1.0
    inside = (t > 0.0) & (t < 1.0)
    t = np.where(inside, t, 0.0)
    return np.where(inside, -30.0 * t * t * (1.0 - t) ** 2, 0.0)


def _d2profile(u):
    t = u - 1.0
    inside = (t > 0.0) & (t < 1.0)
    t = np.where(inside, t, 0.0)
    return np.where(inside, -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 0.0)


@dataclass(frozen=True)
class CutoffFunction:
    """Radial C^2 cutoff eta(v) = q(|v| eps^2): 1 inside the ball of
    radius eps^-2, 0 outside radius 2 eps^-2.

    The derivative bounds |grad eta| <= C eps^2 and |lap eta| <= C eps^4
    hold with the eps-independent template constants stored here (the
    Laplacian bound uses |v| >= eps^-2 on the transition shell).
    """

    eps: float
    dim: int

    @property
    def inner_radius(self):
        return self.eps ** -2

    @property
    def outer_radius(self):
        return 2.0 * self.eps ** -2

    @property
    def grad_constant(self):
        return _PROFILE_GRAD_BOUND

    @property
    def laplacian_constant(self):
        return _PROFILE_CURV_BOUND + (self.dim - 1) * _PROFILE_GRAD_BOUND

    def _radial(self, v):
        v = np.asarray(v, dtype=float)
        r = np.sqrt(np.sum(v * v, axis=-1))
        return v, r, r * self.eps ** 2

    def value(self, v):
        _, _, u = self._radial(v)
        return _profile(u)

    def grad(self, v):
        v, r, u = self._radial(v)
        dq = _dprofile(u) * self.eps ** 2
        # dq vanishes for u <= 1, so r > eps^-2 > 0 wherever it is used
        safe_r = np.where(r > 0.0, r, 1.0)
        return (dq / safe_r)[..., None] * v

    def hessian_diag(self, v):
        v, r, u = self._radial(v)
        e2 = self.eps ** 2
        dq = _dprofile(u) * e2
        d2q = _d2profile(u) * e2 * e2
        safe_r = np.where(r > 0.0, r, 1.0)
        unit_sq = (v / safe_r[..., None]) ** 2
        return d2q[..., None] * unit_sq \
            + (dq / safe_r)[..., None] * (1.0 - unit_sq)

    def laplacian(self, v):
        return np.sum(self.hessian_diag(v), axis=-1)


def build_cutoff(eps: float, dim: int = 1) -> CutoffFunction:
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    return CutoffFunction(eps=eps, dim=dim)


class _Embedded:
    """Psi f (x, v) = f(x + v) eta(v), with exact chain-rule
    derivatives; the x-gradient equals the f-gradient times eta and the
    v-gradient adds the cutoff term."""

    def __init__(self, f: TestFunction, cutoff: CutoffFunction):
        self.f = f
        self.cutoff = cutoff
        self.d = f.dim

    def _split(self, p):
        p = np.asarray(p, dtype=float)
        return p[..., :self.d], p[..., self.d:]

    def value(self, p):
        x, v = self._split(p)
        return self.f.value_at(x + v) * self.cutoff.value(v)

    def grad(self, p):
        x, v = self._split(p)
        fg = self.f.grad_at(x + v)
        eta = self.cutoff.value(v)[..., None]
        ge = self.cutoff.grad(v)
        fv = self.f.value_at(x + v)[..., None]
        return np.concatenate([fg * eta, fg * eta + fv * ge], axis=-1)

    def hessian_diag(self, p):
        x, v = self._split(p)
        fh = self.f.hessian_diag_at(x + v)
        fg = self.f.grad_at(x + v)
        fv = self.f.value_at(x + v)[..., None]
        eta = self.cutoff.value(v)[..., None]
        ge = self.cutoff.grad(v)
        he = self.cutoff.hessian_diag(v)
        return np.concatenate(
            [fh * eta, fh * eta + 2.0 * fg * ge + fv * he], axis=-1)


def embed(f: TestFunction, eps: float) -> TestFunction:
    """Embedded phase-space function Psi f on R^{2d}."""
    cutoff = build_cutoff(eps, dim=f.dim)
    impl = _Embedded(f, cutoff)
    radius = f.support_radius + 3.0 * cutoff.outer_radius
    tf = TestFunction(dim=2 * f.dim, value_at=impl.value, grad_at=impl.grad,
                      hessian_diag_at=impl.hessian_diag,
                      support_radius=radius, smooth=True,
                      name=f"embed[{f.name}]@eps={eps:g}")
    object.__setattr__(tf, "base", f)
    object.__setattr__(tf, "cutoff", cutoff)
    return tf


def _velocity_breakpoints(phi2s: PotentialSpec, cutoff: CutoffFunction):
    """Panels for the v-axis: density truncation of the scaled potential
    with edges at the cutoff radii, split so the Gibbs decay scale is
    resolved."""
    lo, hi = _axis_interval(phi2s, 0)
    edges = {lo, hi}
    for r in (cutoff.inner_radius, cutoff.outer_radius):
        for s in (-r, r):
            if lo < s < hi:
                edges.add(s)
    breaks = sorted(edges)
    return split_panels(breaks, max_width=(hi - lo) / 8.0)


def _position_breakpoints(f: TestFunction, phi1: PotentialSpec):
    if f.support_box is not None:
        blo, bhi = f.support_box
        return [float(blo[0]), float(bhi[0])]
    lo, hi = _axis_interval(phi1, 0)
    return [lo, hi]


def _phase_inner(g1, g2, phi1: PotentialSpec, phi2s: PotentialSpec,
                 cutoff: CutoffFunction, f: TestFunction,
                 rel_tol=1e-9) -> float:
    """int g1(x,v) g2(x,v) e^(-Phi1(x)) dmu2s(v) dx in (y, v) = (x+v, v)
    coordinates, with mu2s normalized to mass one (d = 1)."""
    if phi1.dim != 1:
        raise ValueError("phase-space quadrature implemented for d = 1")
    y_breaks = _position_breakpoints(f, phi1)
    v_breaks = _velocity_breakpoints(phi2s, cutoff)
    mu2 = GibbsMeasure(phi2=phi2s)
    log_z2 = mu2.marginal_log_normalization("velocity")

    def evaluate(n):
        ys, wy = composite_gauss(y_breaks, n)
        vs, wv = composite_gauss(v_breaks, n)
        pts, w = tensor_grid([(ys, wy), (vs, wv)])
        y, v = pts[:, :1], pts[:, 1:]
        x = y - v
        xv = np.concatenate([x, v], axis=-1)
        with np.errstate(over="ignore"):
            logw = -phi1.value_at(x) - phi2s.value_at(v) - log_z2
        dens = np.where(np.isfinite(logw), np.exp(logw), 0.0)
        return float(np.sum(w * g1(xv) * g2(xv) * dens))

    return refine_until_stable(evaluate, rel_tol=rel_tol, start=24,
                               max_n=192, name="phase-inner")


def embedded_inner(f: TestFunction, g: TestFunction, phi1, phi2, eps,
                   rel_tol=1e-9) -> float:
    """(Psi_eps f, Psi_eps g) in the eps-dependent phase-space inner
    product (position measure unnormalized, velocity measure
    normalized)."""
    phi2s = scale_velocity_potential(phi2, eps)
    cutoff = build_cutoff(eps, dim=f.dim)

    def gf(xv):
        x, v = xv[..., :f.dim], xv[..., f.dim:]
        return f.value_at(x + v) * cutoff.value(v)

    def gg(xv):
        x, v = xv[..., :g.dim], xv[..., g.dim:]
        return g.value_at(x + v) * cutoff.value(v)

    from .testfunctions import tf_linear_combination
    hull = tf_linear_combination([1.0, 1.0], [f, g]) \
        if (f.support_box is not None and g.support_box is not None) else f
    return _phase_inner(gf, gg, phi1, phi2s, cutoff, hull, rel_tol=rel_tol)


def _alpha(phi2s: PotentialSpec, cutoff: CutoffFunction) -> float:
    """Normalized mass of eta^2 under the scaled velocity measure."""
    mu2 = GibbsMeasure(phi2=phi2s)
    log_z2 = mu2.marginal_log_normalization("velocity")
    breaks = _velocity_breakpoints(phi2s, cutoff)

    def evaluate(n):
        vs, wv = composite_gauss(breaks, n)
        v = vs[:, None]
        with np.errstate(over="ignore"):
            logw = -phi2s.value_at(v) - log_z2
        dens = np.where(np.isfinite(logw), np.exp(logw), 0.0)
        return float(np.sum(wv * cutoff.value(v) ** 2 * dens))

    return refine_until_stable(evaluate, rel_tol=1e-10, start=24,
                               max_n=192, name="alpha")


def _norm_convolution(f: TestFunction, phi1, phi2s, cutoff) -> float:
    """Norm of Psi f via the convolution identity: the squared norm is
    the integral of f^2 convolved with eta^2 times the scaled velocity
    density, against e^(-Phi1)."""
    if f.support_box is None:
        raise ValueError("convolution route needs a compactly supported f")
    blo, bhi = float(f.support_box[0][0]), float(f.support_box[1][0])
    mu2 = GibbsMeasure(phi2=phi2s)
    log_z2 = mu2.marginal_log_normalization("velocity")
    v_breaks = _velocity_breakpoints(phi2s, cutoff)
    v_lo, v_hi = v_breaks[0], v_breaks[-1]
    x_lo, x_hi = blo - v_hi, bhi - v_lo

    def inner(x, n):
        lo = max(v_lo, blo - x)
        hi = min(v_hi, bhi - x)
        if hi <= lo:
            return 0.0
        edges = sorted({lo, hi} | {b for b in v_breaks if lo < b < hi})
        vs, wv = composite_gauss(edges, n)
        v = vs[:, None]
        with np.errstate(over="ignore"):
            logw = -phi2s.value_at(v) - log_z2
        dens = np.where(np.isfinite(logw), np.exp(logw), 0.0)
        fv = f.value_at((x + vs)[:, None])
        return float(np.sum(wv * fv * fv * cutoff.value(v) ** 2 * dens))

    def evaluate(n):
        xs, wx = composite_gauss(
            split_panels([x_lo, x_hi], (x_hi - x_lo) / 4.0), n)
        with np.errstate(over="ignore"):
            outer = np.exp(-phi1.value_at(xs[:, None]))
        vals = np.array([inner(x, n) for x in xs])
        return float(np.sum(wx * outer * vals))

    val = refine_until_stable(evaluate, rel_tol=1e-8, start=24, max_n=192,
                              name="norm-convolution")
    return math.sqrt(max(val, 0.0))


def norm_convergence_curve(f: TestFunction, phi1: PotentialSpec,
                           phi2: PotentialSpec, eps_grid) -> ConvergenceReport:
    """Embedded norms against the position-space limit norm, per eps.

    Columns: eps, norm_direct, norm_convolution, norm_limit, alpha_eps,
    rel_error.  Both evaluation routes guard each other against
    truncation error in the exploding cutoff domain.
    """
    mu1 = GibbsMeasure(phi1=phi1)
    limit = math.sqrt(weighted_l2_inner(f, f, mu1, normalized=False))
    report = ConvergenceReport(
        columns=["eps", "norm_direct", "norm_convolution", "norm_limit",
                 "alpha_eps", "rel_error"],
        metadata={"f": f.name, "phi1": phi1.name, "phi2": phi2.name})
    for eps in eps_grid:
        phi2s = scale_velocity_potential(phi2, eps)
        cutoff = build_cutoff(eps, dim=f.dim)

        def g(xv, _f=f, _c=cutoff):
            x, v = xv[..., :f.dim], xv[..., f.dim:]
            return _f.value_at(x + v) * _c.value(v)

        direct = math.sqrt(max(_phase_inner(g, g, phi1, phi2s, cutoff, f),
                               0.0))
        conv = _norm_convolution(f, phi1, phi2s, cutoff)
        alpha = _alpha(phi2s, cutoff)
        rel = abs(direct - limit) / limit
        report.add_row([eps, direct, conv, limit, alpha, rel])

    errs = report.column("rel_error")
    report.add_check("norm error monotone decreasing",
                     all(a > b for a, b in zip(errs[:-1], errs[1:])),
                     f"errors={errs}")
    routes = [abs(a - b) / c for a, b, c in
              zip(report.column("norm_direct"),
                  report.column("norm_convolution"),
                  report.column("norm_limit"))]
    report.add_check("routes agree to 1e-4",
                     max(routes) <= 1e-4, f"max gap {max(routes):.3e}")
    return report


@dataclass(frozen=True)
class SummandReport:
    """Norms of the six-summand expansion of the generator applied to an
    embedded function.

    Terms 1 to 4 carry cutoff derivatives and vanish in the limit;
    terms 5 and 6 converge to the Laplacian and drift parts of the
    overdamped generator, reported as relative norm distances.
    """

    eps: float
    term_norms: tuple  # H_eps norms of terms 1..4
    term5_norm: float
    term6_norm: float
    limit_laplacian_norm: float
    limit_drift_norm: float
    term5_distance: float
    term6_distance: float
    reconstruction_error: float


def generator_summand_norms(f: TestFunction, phi1: PotentialSpec,
                            phi2: PotentialSpec, eps: float,
                            rel_tol=1e-7) -> SummandReport:
    """Six-summand expansion of the generator on Psi_eps f (d = 1).

    The expansion (with the scaled velocity potential, unit eps
    convention) is: (f o sigma) lap eta + 2 (f' o sigma) eta'
    - (Phi1' (f o sigma)) eta' - (Phi2eps' (f o sigma)) eta'
    + (f'' o sigma) eta - (Phi1' (f' o sigma)) eta; the sum equals the
    generator applied to the embedded function, checked pointwise.
    """
    if f.dim != 1:
        raise ValueError("summand norms implemented for d = 1")
    phi2s = scale_velocity_potential(phi2, eps)
    cutoff = build_cutoff(eps, dim=1)
    d = 1

    def parts(xv):
        x, v = xv[..., :d], xv[..., d:]
        y = x + v
        fv = f.value_at(y)
        fg = f.grad_at(y)[..., 0]
        fl = f.laplacian_at(y)
        eta = cutoff.value(v)
        geta = cutoff.grad(v)[..., 0]
        leta = cutoff.laplacian(v)
        g1 = phi1.grad_at(x)[..., 0]
        g2 = phi2s.grad_at(v)[..., 0]
        return (fv * leta,
                2.0 * fg * geta,
                -g1 * fv * geta,
                -g2 * fv * geta,
                fl * eta,
                -g1 * fg * eta)

    terms = [lambda xv, i=i: parts(xv)[i] for i in range(6)]
    norms = [math.sqrt(max(_phase_inner(t, t, phi1, phi2s, cutoff, f,
                                        rel_tol=rel_tol), 0.0))
             for t in terms]

    mu1 = GibbsMeasure(phi1=phi1)

    class _Lap:
        support_box = f.support_box

        @staticmethod
        def value_at(x):
            return f.laplacian_at(x)

    class _Drift:
        support_box = f.support_box

        @staticmethod
        def value_at(x):
            return -phi1.grad_at(x)[..., 0] * f.grad_at(x)[..., 0]

    lap_norm = math.sqrt(weighted_l2_inner(_Lap, _Lap, mu1,
                                           normalized=False))
    drift_norm = math.sqrt(weighted_l2_inner(_Drift, _Drift, mu1,
                                             normalized=False))

    # pointwise reconstruction against the generator on the embedding
    from .generator import apply_gshs_generator
    emb = embed(f, eps)
    rng = np.random.default_rng(7)
    blo, bhi = f.support_box if f.support_box is not None else \
        (np.array([-3.0]), np.array([3.0]))
    y = rng.uniform(float(blo[0]), float(bhi[0]), size=100)
    v = rng.uniform(-1.1 * cutoff.outer_radius, 1.1 * cutoff.outer_radius,
                    size=100)
    pts = np.stack([y - v, v], axis=-1)
    total = sum(t(pts) for t in terms)
    direct = apply_gshs_generator(phi1, phi2s, 1.0, emb, pts)
    scale = max(float(np.max(np.abs(direct))), 1.0)
    recon = float(np.max(np.abs(total - direct))) / scale

    return SummandReport(
        eps=eps, term_norms=tuple(norms[:4]), term5_norm=norms[4],
        term6_norm=norms[5], limit_laplacian_norm=lap_norm,
        limit_drift_norm=drift_norm,
        term5_distance=abs(norms[4] - lap_norm) / lap_norm,
        term6_distance=abs(norms[5] - drift_norm) / max(drift_norm, 1e-300),
        reconstruction_error=recon)
