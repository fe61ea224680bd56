import math

import numpy as np
import pytest

import gshs


def test_sde_config_validation():
    with pytest.raises(ValueError):
        gshs.SdeConfig(dt=-1.0)
    with pytest.raises(ValueError):
        gshs.SdeConfig(t_end=1.0, dt=0.3)  # not an integer multiple
    with pytest.raises(ValueError):
        gshs.SdeConfig(scheme="rk4")
    with pytest.raises(ValueError):
        gshs.SdeConfig(t_end=1.0, dt=0.01, record_stride=7)


def test_stiffness_rule_refusal_and_override():
    with pytest.raises(ValueError):
        gshs.SdeConfig(eps=0.1, t_end=1.0, dt=0.01)
    cfg = gshs.SdeConfig(eps=0.1, t_end=1.0, dt=0.01, force=True)
    assert cfg.dt == 0.01
    # the splitting scheme tolerates a larger step
    gshs.SdeConfig(eps=0.1, t_end=1.0, dt=0.005, scheme="splitting")


def test_em_weak_order_second_moment(quad1):
    # exact Euler-Maruyama recursion for dX = -X dt + sqrt(2) dB from 0:
    # E[X^2]_{k+1} = (1 - dt)^2 E[X^2]_k + 2 dt
    dt, n_steps = 0.01, 100
    m2 = 0.0
    for _ in range(n_steps):
        m2 = (1 - dt) ** 2 * m2 + 2 * dt
    cfg = gshs.SdeConfig(eps=1.0, t_end=1.0, dt=dt, n_paths=40_000, seed=9,
                         record_stride=100)
    init = np.zeros((40_000, 1))
    ens = gshs.simulate_overdamped(quad1, init, cfg)
    emp = float(ens.states[:, -1, 0].var())
    assert emp == pytest.approx(m2, rel=0.03)


def test_worker_count_does_not_change_bits(quad1, gauss_measure, tmp_path):
    cfg = gshs.SdeConfig(eps=1.0, t_end=0.2, dt=0.01, n_paths=3000, seed=1,
                         record_stride=4)
    init = gshs.InitialDistribution.stationary(gauss_measure)
    e1 = gshs.simulate_gshs(quad1, quad1, init, cfg, workers=1)
    e8 = gshs.simulate_gshs(quad1, quad1, init, cfg, workers=8)
    assert np.array_equal(e1.states, e8.states)
    p1, p8 = tmp_path / "a.bin", tmp_path / "b.bin"
    gshs.save_ensemble(e1, p1)
    gshs.save_ensemble(e8, p8)
    assert p1.read_bytes() == p8.read_bytes()


def test_save_load_round_trip(quad1, gauss_measure, tmp_path):
    cfg = gshs.SdeConfig(eps=1.0, t_end=0.1, dt=0.01, n_paths=50, seed=2)
    init = gshs.InitialDistribution.stationary(gauss_measure)
    ens = gshs.simulate_gshs(quad1, quad1, init, cfg)
    path = tmp_path / "e.bin"
    gshs.save_ensemble(ens, path)
    back = gshs.load_ensemble(path)
    assert np.array_equal(back.states, ens.states)
    assert np.array_equal(back.times, ens.times)
    assert back.kind == "gshs" and back.dim == 1


def test_ensemble_csv_export(quad1, gauss_measure, tmp_path):
    cfg = gshs.SdeConfig(eps=1.0, t_end=0.1, dt=0.05, n_paths=3, seed=2)
    init = gshs.InitialDistribution.stationary(gauss_measure)
    ens = gshs.simulate_gshs(quad1, quad1, init, cfg)
    path = tmp_path / "e.csv"
    gshs.export_ensemble_csv(ens, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "path_id,t,x_1,v_1"
    assert len(lines) == 1 + 3 * 3  # header + paths * instants


def test_ensemble_is_immutable(ou_paths):
    with pytest.raises(ValueError):
        ou_paths.states[0, 0, 0] = 99.0


def test_splitting_preserves_stationarity_at_small_eps(quad1, gauss_measure):
    cfg = gshs.SdeConfig(eps=0.1, t_end=0.5, dt=0.005, scheme="splitting",
                         n_paths=8000, seed=5, record_stride=10)
    init = gshs.InitialDistribution.stationary(gauss_measure)
    ens = gshs.simulate_gshs(quad1, quad1, init, cfg)
    var = ens.states[:, -1, :].var(axis=0)
    assert np.allclose(var, 1.0, atol=0.06)


def test_lennard_jones_guard_keeps_paths_in_domain(lj1, quad1):
    mu = gshs.GibbsMeasure(phi1=lj1, phi2=quad1)
    cfg = gshs.SdeConfig(eps=1.0, t_end=0.5, dt=0.002, n_paths=500, seed=13,
                         record_stride=10, singularity_guard="shrink-step")
    ens = gshs.simulate_gshs(lj1, quad1,
                             gshs.InitialDistribution.stationary(mu), cfg)
    assert np.all(np.isfinite(ens.states))
    assert np.all(ens.positions() > 0.05)


def test_guard_none_raises_on_blowup(lj1, quad1):
    # aimed at the wall with no guard, one step leaves the domain
    start = np.tile([0.2, -100.0], (10, 1))
    cfg = gshs.SdeConfig(eps=1.0, t_end=0.1, dt=0.01, n_paths=10, seed=1,
                         singularity_guard="none")
    with pytest.raises(gshs.PathBlowupError):
        gshs.simulate_gshs(lj1, quad1, start, cfg)


def test_martingale_of_coordinate_difference_vanishes(ou_paths, quad1):
    f = gshs.position_plus_velocity_coordinate(0, 1)
    g = gshs.velocity_coordinate(0, 1)
    diff = gshs.tf_linear_combination([1.0, -1.0], [f, g])
    M = gshs.martingale_process(ou_paths, diff, quad1, quad1, rule="left")
    assert np.max(np.abs(M)) < 1e-10


def test_quadratic_compensator_matches_carre_du_champ(ou_paths, quad1):
    f = gshs.position_plus_velocity_coordinate(0, 1)
    comp = gshs.quadratic_compensator(ou_paths, f, quad1, quad1)
    # gamma(f) = 2 along every path, so the compensator is exactly 2t
    assert np.allclose(comp[:, -1], 2.0 * ou_paths.times[-1], atol=1e-9)


def test_resolution_warning_on_coarse_grid(quad1, gauss_measure):
    cfg = gshs.SdeConfig(eps=1.0, t_end=1.0, dt=0.02, n_paths=50, seed=4,
                         record_stride=5)
    init = gshs.InitialDistribution.stationary(gauss_measure)
    ens = gshs.simulate_gshs(quad1, quad1, init, cfg)
    f = gshs.velocity_coordinate(0, 1)
    with pytest.warns(gshs.ResolutionWarning):
        gshs.martingale_process(ens, f, quad1, quad1)
