"""End-to-end verification battery.

Each test pins one advertised property of the lab at its stated
tolerance: generator closed forms, Gibbs invariance, the
symmetric/antisymmetric decomposition, convergence of the embedded
norms and generator summands across the eps-family of spaces,
martingale structure with negative control, tightness increment
diagnostics, the overdamped limit against the analytic reference,
unitary equivalence of the two velocity-scaling routes, robustness
under a singular position potential, and bitwise determinism across
worker counts.
"""

import math
import os
import time

import numpy as np
import pytest

import gshs

Q1 = gshs.quadratic_potential(1)
Q2 = gshs.quadratic_potential(2)
LJ = gshs.lennard_jones_potential(1)


# -- 1: generator closed forms ------------------------------------------------

def test_generator_closed_forms():
    start = time.time()
    rng = np.random.default_rng(0)
    for d, phi1 in ((1, Q1), (2, Q2)):
        for eps in (0.1, 0.5, 1.0):
            phi2s = gshs.scale_velocity_potential(
                gshs.quadratic_potential(d), eps)
            p = rng.normal(scale=0.7, size=(100, 2 * d))
            x, v = p[:, :d], p[:, d:]
            for i in range(d):
                fi = gshs.position_plus_velocity_coordinate(i, d)
                gi = gshs.velocity_coordinate(i, d)
                lf = gshs.apply_gshs_generator(phi1, phi2s, 1.0, fi, p)
                assert np.max(np.abs(
                    lf + phi1.grad_at(x)[:, i])) < 1e-12
                lg = gshs.apply_gshs_generator(phi1, phi2s, 1.0, gi, p)
                expect = -phi2s.grad_at(v)[:, i] - phi1.grad_at(x)[:, i]
                assert np.max(np.abs(lg - expect)) < 1e-12
                lg_hat = gshs.apply_adjoint_generator(phi1, phi2s, 1.0,
                                                      gi, p)
                expect_hat = -phi2s.grad_at(v)[:, i] \
                    + phi1.grad_at(x)[:, i]
                assert np.max(np.abs(lg_hat - expect_hat)) < 1e-12
                lf2 = gshs.apply_gshs_generator(phi1, phi2s, 1.0,
                                                gshs.tf_square(fi), p)
                assert np.max(np.abs(
                    lf2 - 2.0 - 2.0 * fi.value_at(p) * lf)) < 1e-12
                lg2 = gshs.apply_gshs_generator(phi1, phi2s, 1.0,
                                                gshs.tf_square(gi), p)
                assert np.max(np.abs(
                    lg2 - 2.0 - 2.0 * gi.value_at(p) * lg)) < 1e-12
    assert time.time() - start < 1.0


# -- 2: Gibbs invariance ------------------------------------------------------

def test_gibbs_invariance_of_bumps():
    start = time.time()
    gauss_bumps = [
        gshs.product_bump([0.0, 0.0], [1.2, 1.5]),
        gshs.product_bump([0.5, -0.3], [1.0, 1.0]),
        gshs.product_bump([-0.8, 0.2], [0.7, 1.3]),
        gshs.product_bump([0.0, 0.0], [2.0, 0.8]),
        gshs.product_bump([1.0, 0.5], [0.9, 1.1]),
    ]
    for f in gauss_bumps:
        assert gshs.relative_invariance_residual(Q1, Q1, f) <= 1e-6
    lj_bumps = [
        gshs.product_bump([1.4, 0.0], [0.6, 1.5]),
        gshs.product_bump([1.2, 0.3], [0.35, 1.0]),
        gshs.product_bump([1.8, -0.4], [0.7, 0.9]),
        gshs.product_bump([1.5, 0.0], [0.4, 2.0]),
        gshs.product_bump([2.0, 0.2], [0.8, 1.2]),
    ]
    for f in lj_bumps:
        assert gshs.relative_invariance_residual(LJ, Q1, f) <= 1e-6
    assert time.time() - start < 30.0


# -- 3: symmetric/antisymmetric decomposition ---------------------------------

class _Part:
    """One summand of the decomposition as an integrable callable."""

    def __init__(self, f, which):
        self.f = f
        self.which = which
        self.support_box = f.support_box

    def __call__(self, p):
        s, a = gshs.decompose(Q1, Q1, self.f, p)
        return s if self.which == "s" else a

    value_at = __call__


def test_decomposition_symmetry_in_quadrature():
    mu = gshs.GibbsMeasure(phi1=Q1, phi2=Q1)
    f = gshs.product_bump([0.0, 0.0], [1.2, 1.5])
    g = gshs.product_bump([0.3, -0.2], [1.0, 1.3])
    norm = math.sqrt(
        abs(gshs.weighted_l2_inner(_Part(f, "s"), _Part(f, "s"), mu))
        * abs(gshs.weighted_l2_inner(_Part(g, "s"), _Part(g, "s"), mu)))
    sym_defect = gshs.weighted_l2_inner(_Part(f, "s"), g, mu) \
        - gshs.weighted_l2_inner(f, _Part(g, "s"), mu)
    assert abs(sym_defect) <= 1e-6 * max(norm, 1.0)
    anti_defect = gshs.weighted_l2_inner(_Part(f, "a"), g, mu) \
        + gshs.weighted_l2_inner(f, _Part(g, "a"), mu)
    assert abs(anti_defect) <= 1e-6 * max(norm, 1.0)

    # pointwise additivity s + a = L at unit eps
    p = np.random.default_rng(1).normal(scale=0.6, size=(200, 2))
    s, a = gshs.decompose(Q1, Q1, f, p)
    total = gshs.apply_gshs_generator(Q1, Q1, 1.0, f, p)
    assert np.max(np.abs(s + a - total)) < 1e-12


# -- 4: norm convergence across the eps-family --------------------------------

def test_embedded_norm_convergence():
    start = time.time()
    f = gshs.product_bump([0.0], [1.0])
    rep = gshs.norm_convergence_curve(f, Q1, Q1,
                                      eps_grid=(0.5, 0.2, 0.1, 0.05))
    errors = rep.column("rel_error")
    assert all(a > b for a, b in zip(errors, errors[1:]))
    assert errors[-1] <= 0.01
    direct = np.asarray(rep.column("norm_direct"))
    conv = np.asarray(rep.column("norm_convolution"))
    assert np.max(np.abs(direct - conv) / direct) <= 1e-4
    assert abs(rep.column("alpha_eps")[-1] - 1.0) <= 1e-6
    assert rep.passed
    assert time.time() - start < 120.0


# -- 5: generator summand convergence -----------------------------------------

def test_generator_summand_convergence():
    start = time.time()
    f = gshs.product_bump([0.0], [1.0])
    coarse = gshs.generator_summand_norms(f, Q1, Q1, 0.5)
    fine = gshs.generator_summand_norms(f, Q1, Q1, 0.05)
    for fine_term, coarse_term in zip(fine.term_norms, coarse.term_norms):
        assert fine_term <= 0.10 * coarse_term + 1e-30
    assert fine.term5_distance <= 0.02
    assert time.time() - start < 120.0


# -- 6: martingale structure --------------------------------------------------

@pytest.fixture(scope="module")
def stationary_ensemble():
    mu = gshs.GibbsMeasure(phi1=Q1, phi2=Q1)
    cfg = gshs.SdeConfig(eps=1.0, t_end=1.0, dt=0.002, n_paths=10_000,
                         seed=0, record_stride=1)
    return gshs.simulate_gshs(Q1, Q1,
                              gshs.InitialDistribution.stationary(mu),
                              cfg, workers=4)


def test_martingale_structure(stationary_ensemble):
    start = time.time()
    paths = stationary_ensemble
    gi = gshs.velocity_coordinate(0, 1)
    M = gshs.martingale_process(paths, gi, Q1, Q1, rule="left")
    scores = gshs.martingale_zscores(
        M, paths.times, 0.25, 0.75,
        gshs.default_weight_battery(paths, M, 0.25))
    assert all(abs(z.z) <= 3.0 for z in scores if z.z is not None)

    qv, _ = gshs.empirical_quadratic_variation(M)
    assert abs(qv[-1] - 2.0) <= 0.05 * 2.0

    fi = gshs.position_plus_velocity_coordinate(0, 1)
    diff = gshs.tf_linear_combination([1.0, -1.0], [fi, gi])
    Md = gshs.martingale_process(paths, diff, Q1, Q1, rule="left")
    assert np.max(np.abs(Md)) <= 1e-6
    assert time.time() - start < 300.0


def test_martingale_negative_control(stationary_ensemble):
    # dropping the compensator leaves the raw drift: strong rejection
    paths = stationary_ensemble
    gi = gshs.velocity_coordinate(0, 1)
    vals = gi.value_at(paths.states.reshape(-1, 2)).reshape(
        paths.states.shape[:2])
    broken = vals - vals[:, :1]
    scores = gshs.martingale_zscores(
        broken, paths.times, 0.25, 0.75,
        gshs.default_weight_battery(paths, broken, 0.25))
    worst = max(abs(z.z) for z in scores if z.z is not None)
    assert worst > 5.0


# -- 7: tightness increment diagnostics ---------------------------------------

def test_tightness_fourth_moment_increments():
    start = time.time()
    pairs = [(0.2, 0.25), (0.2, 0.3), (0.2, 0.4), (0.2, 0.6)]
    fi = gshs.position_plus_velocity_coordinate(0, 1)
    slopes, consts = [], []
    for eps in (0.5, 0.2, 0.1):
        phi2s = gshs.scale_velocity_potential(Q1, eps)
        mu = gshs.GibbsMeasure(phi1=Q1, phi2=phi2s)
        cfg = gshs.SdeConfig(eps=1.0, t_end=1.0, dt=0.002, n_paths=5000,
                             seed=17, record_stride=1, scheme="splitting")
        paths = gshs.simulate_gshs(
            Q1, phi2s, gshs.InitialDistribution.stationary(mu), cfg,
            workers=4)
        slope, const, _ = gshs.increment_moment_diagnostic(
            paths, fi, Q1, phi2s, pairs=pairs)
        slopes.append(slope)
        consts.append(const)
    assert min(slopes) >= 1.8
    assert max(consts) / min(consts) <= 3.0
    assert time.time() - start < 600.0


# -- 8: overdamped limit ------------------------------------------------------

def test_overdamped_limit_convergence():
    # the gap between consecutive distances shrinks to ~3e-5 at the small
    # end of the eps grid, so the statistic runs at full resolution
    # (stat_cap = n_paths); auto per-eps steps keep large-eps runs cheap
    start = time.time()
    rep = gshs.overdamped_limit_experiment(
        Q1, Q1, eps_grid=(0.4, 0.2, 0.1), times=(0.5, 1.0),
        n_paths=50_000, seed=0, workers=4, dt="auto", stat_cap=50_000)
    assert rep.passed, rep.summary_lines()
    dists = rep.column("energy_distance")
    assert dists[0] > dists[1] > dists[2]
    assert rep.column("p_value")[-1] > 0.01

    # seed replication at full path count
    decreasing = 0
    for seed in range(1, 21):
        r = gshs.overdamped_limit_experiment(
            Q1, Q1, eps_grid=(0.4, 0.2, 0.1), times=(0.5, 1.0),
            n_paths=50_000, seed=seed, workers=4, dt="auto",
            stat_cap=50_000)
        d = r.column("energy_distance")
        decreasing += d[0] > d[1] > d[2]
    assert decreasing >= 18
    # budget stated for a 4-core machine; scale when fewer cores exist
    budget = 1200.0 * max(1.0, 4.0 / (os.cpu_count() or 1))
    assert time.time() - start < budget


# -- 9: unitary equivalence of the scaling routes -----------------------------

def test_unitary_equivalence():
    start = time.time()
    for k, eps in enumerate((0.5, 0.2)):
        phi2s = gshs.scale_velocity_potential(Q1, eps)
        mu_a = gshs.GibbsMeasure(phi1=Q1, phi2=phi2s)
        cfg_a = gshs.SdeConfig(eps=1.0, t_end=1.0, dt=0.002,
                               scheme="splitting", n_paths=20_000,
                               seed=100 + k, record_stride=50)
        ens_a = gshs.simulate_gshs(
            Q1, phi2s, gshs.InitialDistribution.stationary(mu_a), cfg_a,
            workers=4)
        mu_b = gshs.GibbsMeasure(phi1=Q1, phi2=Q1)
        cfg_b = gshs.SdeConfig(eps=eps, t_end=1.0, dt=0.002,
                               scheme="splitting", n_paths=20_000,
                               seed=200 + k, record_stride=50)
        ens_b = gshs.simulate_gshs(
            Q1, Q1, gshs.InitialDistribution.stationary(mu_b), cfg_b,
            workers=4)
        # v -> v/eps maps the scaled-potential route onto the eps route
        rescaled = gshs.rescale_ensemble(ens_a, eps)
        fdd_a = gshs.fdd_from_ensemble(rescaled, (0.5, 1.0),
                                       component="full")
        fdd_b = gshs.fdd_from_ensemble(ens_b, (0.5, 1.0),
                                       component="full")
        _, p = gshs.energy_distance(fdd_a, fdd_b, seed=300 + k)
        assert p > 0.01
    assert time.time() - start < 600.0


# -- 10: singular-potential robustness ----------------------------------------

def test_singular_potential_robustness():
    start = time.time()
    rep = gshs.validate_assumptions(LJ, Q1)
    assert rep.passed
    mu = gshs.GibbsMeasure(phi1=LJ, phi2=Q1)
    cfg = gshs.SdeConfig(eps=1.0, t_end=1.0, dt=0.002, n_paths=10_000,
                         seed=21, record_stride=10,
                         singularity_guard="shrink-step")
    ens = gshs.simulate_gshs(LJ, Q1,
                             gshs.InitialDistribution.stationary(mu),
                             cfg, workers=4)
    assert np.all(np.isfinite(ens.states))
    assert np.all(ens.positions() > 0.0)
    assert time.time() - start < 600.0


# -- 11: determinism across worker counts -------------------------------------

def test_worker_count_determinism(tmp_path):
    mu = gshs.GibbsMeasure(phi1=Q1, phi2=Q1)
    init = gshs.InitialDistribution.stationary(mu)
    cfg = gshs.SdeConfig(eps=1.0, t_end=0.5, dt=0.002, n_paths=5000,
                         seed=6, record_stride=10)
    files = []
    for workers in (1, 8):
        ens = gshs.simulate_gshs(Q1, Q1, init, cfg, workers=workers)
        path = tmp_path / f"w{workers}.bin"
        gshs.save_ensemble(ens, path)
        files.append(path.read_bytes())
    assert files[0] == files[1]
