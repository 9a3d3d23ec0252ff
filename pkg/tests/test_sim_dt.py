import warnings

import numpy as np
import pytest

from escert.cert_dt import compute_deltas_dt
from escert.quadmap import DitherSpec, GainSpec, QuadraticMap, UncertaintyModel
from escert.sim_dt import DtSimConfig, DtTrajectory, compute_transformation_dt, residual_dt, simulate_dt

QMAP = QuadraticMap(0.0, [0.0], [[2.0]])
DITHER4 = DitherSpec([0.2], [1], 4, domain="discrete")
GAINS = GainSpec([-0.1])


def table6_traj(k_end=200, eps=0.015):
    cfg = DtSimConfig(QMAP, DITHER4, GAINS, eps, [1.0], k_end)
    return simulate_dt(cfg), eps


def test_config_validation():
    with pytest.raises(ValueError, match="discrete"):
        DtSimConfig(QMAP, DitherSpec([0.2], [1], 0.015), GAINS, 0.015, [1.0], 100)
    with pytest.raises(ValueError, match=r"\(0, 1\)"):
        DtSimConfig(QMAP, DITHER4, GAINS, 1.5, [1.0], 100)
    with pytest.raises(ValueError, match="period - 1"):
        DtSimConfig(QMAP, DITHER4, GAINS, 0.1, [1.0], 2)


def test_theta_bar_is_exact_difference():
    traj, _ = table6_traj()
    assert np.array_equal(traj.theta_bar, traj.theta_tilde[1:] - traj.theta_tilde[:-1])


def test_quiescent_start_first_window_bound():
    cfg = DtSimConfig(QMAP, DITHER4, GAINS, 0.015, [0.0], 30)
    traj = simulate_dt(cfg)
    unc = UncertaintyModel(0.0, [[2.0]], 0.0, 2.0, 2.0, 1.0, diagonal_hessian=True)
    amp = float(np.linalg.norm(DITHER4.amplitudes))
    d = compute_deltas_dt(unc, GAINS, DITHER4, amp, 4).d
    t = 4
    assert np.max(traj.theta_tilde_norm()[: t]) <= (t - 1) * 0.015 * d


def test_recursion_matches_hand_steps():
    traj, eps = table6_traj(k_end=3)
    th = 1.0
    for k in range(3):
        s = 0.2 * np.sin(np.pi / 2 * k)
        y = 0.5 * 2.0 * (th + s) ** 2
        assert traj.y[k] == pytest.approx(y, rel=1e-15)
        th = th + eps * (-0.1) * (2 / 0.2) * np.sin(np.pi / 2 * k) * y
        assert traj.theta_hat[k + 1, 0] == pytest.approx(th, rel=1e-15)


def test_transformation_zero_window():
    n_steps = 40
    tilde = np.tile([0.4, -0.2], (n_steps + 1, 1))
    traj = DtTrajectory(
        theta_hat=tilde.copy(),
        theta_tilde=tilde,
        theta_bar=np.zeros((n_steps, 2)),
        y=np.zeros(n_steps + 1),
        epsilon=0.01,
        period=5,
    )
    dither = DitherSpec([0.2, 0.3], [1, 2], 5, domain="discrete")
    gains = GainSpec([-0.05, -0.05])
    qmap = QuadraticMap(0.0, [0.0, 0.0], np.eye(2))
    out = compute_transformation_dt(traj, dither, gains, qmap)
    sel = slice(4, None)
    assert np.nanmax(np.abs(out.g[sel])) == 0.0
    assert np.nanmax(np.abs(out.y1[sel])) == 0.0
    assert np.nanmax(np.abs(out.y2[sel])) == 0.0
    # nonzero constant error: residual is exactly eps |L H theta_tilde|
    res = residual_dt(out, gains, qmap, 0.01)
    expected = 0.01 * np.linalg.norm(gains.matrix() @ qmap.hessian @ tilde[-1])
    assert np.nanmax(res) == pytest.approx(expected, rel=1e-12)
    zero = DtTrajectory(
        theta_hat=np.zeros_like(tilde), theta_tilde=np.zeros_like(tilde),
        theta_bar=np.zeros((n_steps, 2)), y=np.zeros(n_steps + 1),
        epsilon=0.01, period=5,
    )
    out0 = compute_transformation_dt(zero, dither, gains, qmap)
    assert np.nanmax(residual_dt(out0, gains, qmap, 0.01)) == 0.0


def test_residual_exact_table6_sim():
    traj, eps = table6_traj()
    out = compute_transformation_dt(traj, DITHER4, GAINS, QMAP)
    res = residual_dt(out, GAINS, QMAP, eps)
    tol = 1e-10 * (1.0 + np.nanmax(np.linalg.norm(out.z, axis=1)))
    assert np.nanmax(res) < tol


def test_residual_exact_random_instance():
    rng = np.random.default_rng(99)
    a = rng.normal(size=(3, 3))
    qmap = QuadraticMap(0.4, [0.1, -0.2, 0.3], a @ a.T + 2 * np.eye(3))
    dither = DitherSpec([0.3, 0.2, 0.4], [1, 2, -3], 8, domain="discrete")
    gains = GainSpec([-0.02, -0.05, -0.03])
    cfg = DtSimConfig(qmap, dither, gains, 0.02, [0.5, -0.5, 0.2], 150)
    out = compute_transformation_dt(simulate_dt(cfg), dither, gains, qmap)
    res = residual_dt(out, gains, qmap, 0.02)
    tol = 1e-10 * (1.0 + np.nanmax(np.linalg.norm(out.z, axis=1)))
    assert np.nanmax(res) < tol


def test_window_bounds_along_trajectory():
    traj, eps = table6_traj()
    out = compute_transformation_dt(traj, DITHER4, GAINS, QMAP)
    sigma = float(traj.theta_tilde_norm().max()) * (1 + 1e-12)
    unc = UncertaintyModel(0.0, [[2.0]], 0.0, 2.0, 2.0, 1.0, diagonal_hessian=True)
    t = 4
    d = compute_deltas_dt(unc, GAINS, DITHER4, sigma, t)
    sel = slice(t - 1, None)
    assert np.nanmax(np.linalg.norm(out.g[sel], axis=1)) < (t - 1) * eps * d.d / 2
    assert np.nanmax(np.linalg.norm(out.y2[sel], axis=1)) < eps * d.d * d.d3


def test_opposite_pair_dither_breaks_identity():
    # the transformation is exact only when the demodulation identity holds;
    # an opposite-sign index pair leaves an order eps * |coupling| residual
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dither = DitherSpec([0.5, 0.5], [1, -1], 3, domain="discrete")
    qmap = QuadraticMap(1.0, [2.0, 4.0], [[100.0, 30.0], [30.0, 20.0]])
    gains = GainSpec([-0.001, -0.001])
    cfg = DtSimConfig(qmap, dither, gains, 0.034, [3.0, 3.0], 120)
    out = compute_transformation_dt(simulate_dt(cfg), dither, gains, qmap)
    res = residual_dt(out, gains, qmap, 0.034)
    assert np.nanmax(res) > 1e-4


def test_csv_export(tmp_path):
    traj, _ = table6_traj(k_end=20)
    out = compute_transformation_dt(traj, DITHER4, GAINS, QMAP)
    path = tmp_path / "dt.csv"
    out.write_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "k,theta_hat_1,theta_tilde_norm,y,G_norm,Y1_norm,Y2_norm,z_norm"
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    assert data.shape == (21, 8)
