"""Path simulation for the kinetic system and its overdamped limit,
plus the martingale objects built along paths.

Determinism contract: Brownian increments come from counter-based
generators keyed by (seed, path index), so ensembles are bitwise
identical for any worker count; singularity rescues draw from separate
streams keyed by (seed, path, step, attempt) and never perturb the main
noise sequence.
"""

from __future__ import annotations

import math
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .measures import InitialDistribution, _gaussian_std, sample
from .potentials import PotentialSpec
from .testfunctions import TestFunction, tf_square

__all__ = [
    "SdeConfig",
    "PathEnsemble",
    "PathBlowupError",
    "NumericFailure",
    "ResolutionWarning",
    "simulate_gshs",
    "simulate_overdamped",
    "martingale_process",
    "quadratic_compensator",
    "save_ensemble",
    "load_ensemble",
    "export_ensemble_csv",
]

# paths are integrated in fixed-size chunks; the chunk partition is part
# of the determinism contract and must not depend on the worker count
PATH_CHUNK = 1024

ENSEMBLE_MAGIC = b"GSHS"
ENSEMBLE_VERSION = 1

# derived-seed tags for the independent RNG streams of one run
_INIT_STREAM = 0x1217
_RESCUE_STREAM = 0x7E5C


class PathBlowupError(RuntimeError):
    def __init__(self, path_index, time):
        super().__init__(f"path {path_index} violated the singularity "
                         f"guard at t = {time:.6g}")
        self.path_index = path_index
        self.time = time


class NumericFailure(RuntimeError):
    pass


class ResolutionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SdeConfig:
    """Integration parameters.

    ``force`` bypasses the stiffness rule dt <= eps^2/10 (eps^2/2 for
    the splitting scheme, whose stiff part is integrated exactly for
    quadratic velocity potentials).
    """

    eps: float = 1.0
    t_end: float = 1.0
    dt: float = 1e-3
    scheme: str = "euler-maruyama"
    n_paths: int = 1000
    seed: int = 0
    singularity_guard: str = "shrink-step"
    guard_distance: float = 0.05
    record_stride: int = 1
    force: bool = False

    def __post_init__(self):
        if not (self.eps > 0 and self.t_end > 0 and self.dt > 0):
            raise ValueError("eps, t_end and dt must be positive")
        if self.scheme not in ("euler-maruyama", "splitting"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.singularity_guard not in ("none", "reject-step",
                                          "shrink-step"):
            raise ValueError(
                f"unknown singularity guard {self.singularity_guard!r}")
        if self.n_paths < 1 or self.record_stride < 1:
            raise ValueError("n_paths and record_stride must be >= 1")
        n_steps = self.n_steps
        if abs(n_steps * self.dt - self.t_end) > 1e-9 * self.t_end:
            raise ValueError("t_end must be an integer multiple of dt")
        if n_steps % self.record_stride != 0:
            raise ValueError("step count must be a multiple of "
                             "record_stride")
        if not self.force and self.eps < 1.0:
            cap = self.eps ** 2 / (2.0 if self.scheme == "splitting"
                                   else 10.0)
            if self.dt > cap * (1 + 1e-12):
                raise ValueError(
                    f"stiffness rule violated: dt = {self.dt:g} exceeds "
                    f"{cap:g} for eps = {self.eps:g} "
                    f"({self.scheme}); pass force=True to override")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class PathEnsemble:
    """Recorded trajectories on a fixed time grid.

    ``states`` has shape (n_paths, len(times), dim_state) with
    dim_state = 2d for kinetic paths (x then v) and d for overdamped
    paths.  Immutable once returned.
    """

    times: np.ndarray
    states: np.ndarray
    config: SdeConfig
    kind: str  # "gshs" or "overdamped"
    dim: int
    phi1_name: str = ""
    phi2_name: str = ""
    rescue_count: int = 0

    @property
    def n_paths(self):
        return self.states.shape[0]

    def positions(self):
        return self.states[..., :self.dim]

    def velocities(self):
        if self.kind != "gshs":
            raise ValueError("overdamped ensemble has no velocities")
        return self.states[..., self.dim:]

    def recorded_dt(self):
        return float(self.times[1] - self.times[0])


def _resolve_initial(init, n, dim_state, seed):
    if isinstance(init, np.ndarray):
        if init.shape != (n, dim_state):
            raise ValueError(f"initial array must have shape "
                             f"({n}, {dim_state})")
        return init.astype(float, copy=True)
    if isinstance(init, InitialDistribution):
        pts = sample(init, n, seed)
        if pts.shape[1] != dim_state:
            raise ValueError("initial distribution dimension mismatch")
        return pts
    raise TypeError("init must be an InitialDistribution or an array")


def _state_ok(phi1, phi2, x, v, guard):
    """Per-path validity: finite coordinates, finite potential domain,
    and clearance of the guard band around singular sets."""
    ok = np.all(np.isfinite(x), axis=-1)
    ok &= phi1.finite_domain(x)
    if phi1.singularity_distance is not None:
        ok &= phi1.singularity_distance(x) > guard
    if v is not None:
        ok &= np.all(np.isfinite(v), axis=-1)
        ok &= phi2.finite_domain(v)
        if phi2.singularity_distance is not None:
            ok &= phi2.singularity_distance(v) > guard
    return ok


def _em_step_gshs(phi1, phi2, eps, dt, x, v, dw):
    drift_x = phi2.grad_at(v) / eps
    drift_v = -phi1.grad_at(x) / eps - phi2.grad_at(v) / (eps * eps)
    x_new = x + dt * drift_x
    v_new = v + dt * drift_v + (math.sqrt(2.0) / eps) * dw
    return x_new, v_new


def _splitting_step_gshs(phi1, phi2, eps, dt, x, v, dw, k_eff):
    """Strang splitting: half kick, half drift, stiff velocity part,
    half drift, half kick.  The stiff part is exact for quadratic
    velocity potentials and Euler-Maruyama otherwise."""
    v = v - (0.5 * dt / eps) * phi1.grad_at(x)
    x = x + (0.5 * dt / eps) * phi2.grad_at(v)
    if k_eff is not None:
        lam = k_eff / (eps * eps)
        decay = math.exp(-lam * dt)
        sigma = math.sqrt((1.0 - decay * decay) / k_eff)
        # dw carries the sqrt(dt) Brownian scaling; the exact transition
        # needs a unit normal
        v = decay * v + (sigma / math.sqrt(dt)) * dw
    else:
        v = v - (dt / (eps * eps)) * phi2.grad_at(v) \
            + (math.sqrt(2.0) / eps) * dw
    x = x + (0.5 * dt / eps) * phi2.grad_at(v)
    v = v - (0.5 * dt / eps) * phi1.grad_at(x)
    return x, v


def _em_step_overdamped(phi1, dt, x, dw):
    return x - dt * phi1.grad_at(x) + math.sqrt(2.0) * dw


def _advance(phi1, phi2, cfg, dt, x, v, dw, k_eff):
    """One step of the selected scheme; returns proposed (x, v)."""
    if phi2 is None:
        return _em_step_overdamped(phi1, dt, x, dw), None
    if cfg.scheme == "splitting":
        return _splitting_step_gshs(phi1, phi2, cfg.eps, dt, x, v, dw, k_eff)
    return _em_step_gshs(phi1, phi2, cfg.eps, dt, x, v, dw)


def _rescue(phi1, phi2, cfg, x0, v0, step, path_index, k_eff):
    """Shrink-step recovery for a single offending path.

    The step is re-integrated with 2^r substeps (r up to 20); if every
    refinement still violates the guard, the noise is redrawn from the
    rescue stream (counting attempts) before giving up.
    """
    for attempt in range(8):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(
            [cfg.seed, _RESCUE_STREAM, path_index, step, attempt])))
        for r in range(1, 21):
            n_sub = 1 << r
            sub_dt = cfg.dt / n_sub
            dws = math.sqrt(sub_dt) * rng.standard_normal(
                (n_sub, x0.shape[-1]))
            x, v = x0.copy(), None if v0 is None else v0.copy()
            good = True
            for s in range(n_sub):
                x, v = _advance(phi1, phi2, cfg, sub_dt, x[None],
                                None if v is None else v[None],
                                dws[s][None], k_eff)
                x = x[0]
                v = None if v is None else v[0]
                if not bool(_state_ok(phi1, phi2, x[None],
                                      None if v is None else v[None],
                                      cfg.guard_distance)[0]):
                    good = False
                    break
            if good:
                return x, v
    raise PathBlowupError(path_index, (step + 1) * cfg.dt)


def _simulate_chunk(phi1, phi2, cfg, z0, chunk_start, d, dim_state, k_eff):
    """Integrate one chunk of paths; returns recorded states and the
    number of rescue interventions."""
    n = z0.shape[0]
    n_steps = cfg.n_steps
    n_rec = n_steps // cfg.record_stride
    rec = np.empty((n, n_rec + 1, dim_state))
    rec[:, 0] = z0

    noise = np.empty((n, n_steps, d))
    for i in range(n):
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence([cfg.seed, chunk_start + i])))
        noise[i] = rng.standard_normal((n_steps, d))
    noise *= math.sqrt(cfg.dt)

    x = z0[:, :d].copy()
    v = z0[:, d:].copy() if phi2 is not None else None
    rescues = 0
    guarded = (phi1.singularity_distance is not None
               or (phi2 is not None
                   and phi2.singularity_distance is not None))

    for step in range(n_steps):
        x_new, v_new = _advance(phi1, phi2, cfg, cfg.dt, x, v,
                                noise[:, step], k_eff)
        if guarded or cfg.singularity_guard == "none":
            ok = _state_ok(phi1, phi2, x_new, v_new, cfg.guard_distance)
            if not np.all(ok):
                bad = np.nonzero(~ok)[0]
                if cfg.singularity_guard == "none":
                    raise PathBlowupError(chunk_start + int(bad[0]),
                                          (step + 1) * cfg.dt)
                for i in bad:
                    rescues += 1
                    if cfg.singularity_guard == "reject-step":
                        x_new[i] = x[i]
                        if v_new is not None:
                            v_new[i] = v[i]
                    else:
                        xi, vi = _rescue(phi1, phi2, cfg, x[i],
                                         None if v is None else v[i],
                                         step, chunk_start + int(i), k_eff)
                        x_new[i] = xi
                        if v_new is not None:
                            v_new[i] = vi
        x, v = x_new, v_new
        if not guarded and (step + 1) % cfg.record_stride == 0:
            # unguarded potentials still must produce finite states
            if not (np.all(np.isfinite(x))
                    and (v is None or np.all(np.isfinite(v)))):
                raise NumericFailure(
                    f"non-finite state at t = {(step + 1) * cfg.dt:.6g}")
        if (step + 1) % cfg.record_stride == 0:
            idx = (step + 1) // cfg.record_stride
            rec[:, idx, :d] = x
            if v is not None:
                rec[:, idx, d:] = v
    return rec, rescues


def _simulate(phi1, phi2, init, cfg, workers):
    d = phi1.dim
    dim_state = 2 * d if phi2 is not None else d
    z0 = _resolve_initial(init, cfg.n_paths, dim_state,
                          cfg.seed + _INIT_STREAM)
    k_eff = None
    if phi2 is not None:
        s = _gaussian_std(phi2)
        if s is not None:
            k_eff = 1.0 / (s * s)

    chunks = [(start, min(start + PATH_CHUNK, cfg.n_paths))
              for start in range(0, cfg.n_paths, PATH_CHUNK)]

    def run(chunk):
        start, stop = chunk
        return _simulate_chunk(phi1, phi2, cfg, z0[start:stop], start, d,
                               dim_state, k_eff)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]

    states = np.concatenate([r[0] for r in results], axis=0)
    rescues = sum(r[1] for r in results)
    n_rec = cfg.n_steps // cfg.record_stride
    times = cfg.dt * cfg.record_stride * np.arange(n_rec + 1)
    kind = "gshs" if phi2 is not None else "overdamped"
    ens = PathEnsemble(times=times, states=states, config=cfg, kind=kind,
                       dim=d, phi1_name=phi1.name,
                       phi2_name="" if phi2 is None else phi2.name,
                       rescue_count=rescues)
    ens.states.setflags(write=False)
    ens.times.setflags(write=False)
    return ens


def simulate_gshs(phi1: PotentialSpec, phi2: PotentialSpec, init,
                  cfg: SdeConfig, workers: int = 1) -> PathEnsemble:
    """Integrate dX = (1/eps) grad Phi2(V) dt,
    dV = -(1/eps) grad Phi1(X) dt - (1/eps^2) grad Phi2(V) dt
    + (sqrt 2 / eps) dB."""
    if phi1.dim != phi2.dim:
        raise ValueError("position and velocity dimensions differ")
    return _simulate(phi1, phi2, init, cfg, workers)


def simulate_overdamped(phi1: PotentialSpec, init, cfg: SdeConfig,
                        workers: int = 1) -> PathEnsemble:
    """Integrate dX = -grad Phi1(X) dt + sqrt(2) dB (no stiffness rule:
    eps plays no role and is ignored)."""
    if cfg.eps != 1.0:
        cfg = replace(cfg, eps=1.0)
    return _simulate(phi1, None, init, cfg, workers)


def _integrand_along_paths(paths: PathEnsemble, values_fn):
    flat = paths.states.reshape(-1, paths.states.shape[-1])
    return values_fn(flat).reshape(paths.states.shape[:2])


def _cumulative_integral(vals, dt_rec, rule):
    """Cumulative time integral of a recorded integrand, starting at 0."""
    if rule == "trapezoid":
        inc = 0.5 * (vals[:, :-1] + vals[:, 1:]) * dt_rec
    elif rule == "left":
        inc = vals[:, :-1] * dt_rec
    else:
        raise ValueError(f"unknown integration rule {rule!r}")
    out = np.zeros_like(vals)
    np.cumsum(inc, axis=1, out=out[:, 1:])
    return out


def _check_resolution(paths):
    if paths.recorded_dt() > 1e-2 + 1e-12:
        warnings.warn(
            f"recorded step {paths.recorded_dt():.3g} exceeds 1e-2; "
            "time-integral accuracy along paths is degraded",
            ResolutionWarning, stacklevel=3)


def martingale_process(paths: PathEnsemble, f: TestFunction,
                       phi1: PotentialSpec,
                       phi2: Optional[PotentialSpec] = None,
                       eps: Optional[float] = None,
                       rule: str = "trapezoid") -> np.ndarray:
    """M_t = f(Z_t) - f(Z_0) - int_0^t L f(Z_s) ds along recorded paths.

    ``rule`` selects the drift-integral discretization: "trapezoid" for
    the generic second-order estimate, "left" to match the left-point
    accumulation of the Euler scheme exactly.
    """
    from .generator import generator_action
    _check_resolution(paths)
    if paths.kind == "gshs":
        if phi2 is None:
            raise ValueError("kinetic paths need the velocity potential")
        lf = generator_action(phi1, phi2, eps or paths.config.eps, f)
    else:
        lf = generator_action(phi1, None, 1.0, f, overdamped=True)
    fv = _integrand_along_paths(paths, f.value_at)
    lfv = _integrand_along_paths(paths, lf)
    drift = _cumulative_integral(lfv, paths.recorded_dt(), rule)
    return fv - fv[:, :1] - drift


def quadratic_compensator(paths: PathEnsemble, f: TestFunction,
                          phi1: PotentialSpec,
                          phi2: Optional[PotentialSpec] = None,
                          eps: Optional[float] = None,
                          rule: str = "trapezoid") -> np.ndarray:
    """int_0^t (L(f^2) - 2 f L f)(Z_s) ds, the compensator of M^2."""
    from .generator import apply_gshs_generator, apply_overdamped_generator
    _check_resolution(paths)
    e = eps or paths.config.eps
    f2 = tf_square(f)

    def integrand(flat):
        if paths.kind == "gshs":
            lf = apply_gshs_generator(phi1, phi2, e, f, flat)
            lf2 = apply_gshs_generator(phi1, phi2, e, f2, flat)
        else:
            lf = apply_overdamped_generator(phi1, f, flat)
            lf2 = apply_overdamped_generator(phi1, f2, flat)
        return lf2 - 2.0 * f.value_at(flat) * lf

    vals = _integrand_along_paths(paths, integrand)
    return _cumulative_integral(vals, paths.recorded_dt(), rule)


def save_ensemble(paths: PathEnsemble, filename):
    """Compact binary format: magic, version, kind, d, n_paths, grid
    length, then times and states as little-endian 64-bit floats."""
    kind_code = 1 if paths.kind == "gshs" else 0
    header = struct.pack(
        "<4sIBIQQ", ENSEMBLE_MAGIC, ENSEMBLE_VERSION, kind_code,
        paths.dim, paths.n_paths, paths.times.size)
    with open(filename, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(paths.times, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(paths.states, dtype="<f8").tobytes())


def load_ensemble(filename, config: Optional[SdeConfig] = None
                  ) -> PathEnsemble:
    header_size = struct.calcsize("<4sIBIQQ")
    with open(filename, "rb") as fh:
        magic, version, kind_code, d, n_paths, grid_len = struct.unpack(
            "<4sIBIQQ", fh.read(header_size))
        if magic != ENSEMBLE_MAGIC:
            raise ValueError("not an ensemble file (bad magic)")
        if version != ENSEMBLE_VERSION:
            raise ValueError(f"unsupported ensemble version {version}")
        times = np.frombuffer(fh.read(8 * grid_len), dtype="<f8")
        dim_state = 2 * d if kind_code == 1 else d
        states = np.frombuffer(fh.read(8 * n_paths * grid_len * dim_state),
                               dtype="<f8")
    states = states.reshape(n_paths, grid_len, dim_state)
    kind = "gshs" if kind_code == 1 else "overdamped"
    cfg = config or SdeConfig(t_end=float(times[-1]),
                              dt=float(times[1] - times[0]),
                              n_paths=int(n_paths))
    return PathEnsemble(times=times, states=states, config=cfg, kind=kind,
                        dim=int(d))


def export_ensemble_csv(paths: PathEnsemble, filename):
    """Columnar CSV: path_id, t, x_1..x_d (, v_1..v_d)."""
    import csv
    d = paths.dim
    names = ["path_id", "t"] + [f"x_{i+1}" for i in range(d)]
    if paths.kind == "gshs":
        names += [f"v_{i+1}" for i in range(d)]
    with open(filename, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for pid in range(paths.n_paths):
            for ti, t in enumerate(paths.times):
                row = [str(pid), repr(float(t))]
                row += [repr(float(c)) for c in paths.states[pid, ti]]
                writer.writerow(row)
