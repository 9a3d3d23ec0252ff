import numpy as np
import pytest

from escert.cert_ct import compute_deltas_ct
from escert.errors import SimulationDiverged
from escert.quadmap import DitherSpec, GainSpec, QuadraticMap, UncertaintyModel
from escert.sim_ct import CtSimConfig, Trajectory, compute_transformation_ct, residual_ct, simulate_ct

EPS = 0.021
QMAP = QuadraticMap(0.0, [0.0], [[2.0]])
DITHER = DitherSpec([0.1], [1], EPS)
GAINS = GainSpec([-6.5e-3])


def table2_traj(divisor=256, periods=24):
    cfg = CtSimConfig(QMAP, DITHER, GAINS, [2.0], t_end=periods * EPS, step=EPS / divisor)
    return simulate_ct(cfg)


def test_config_validation():
    with pytest.raises(ValueError, match="too coarse"):
        CtSimConfig(QMAP, DITHER, GAINS, [2.0], t_end=1.0, step=EPS / 32)
    with pytest.raises(ValueError, match="one dither period"):
        CtSimConfig(QMAP, DITHER, GAINS, [2.0], t_end=EPS / 2)
    with pytest.raises(ValueError, match="dimensions"):
        CtSimConfig(QMAP, DitherSpec([0.1, 0.1], [1, 2], EPS), GAINS, [2.0], t_end=1.0)
    with pytest.raises(ValueError, match="continuous"):
        CtSimConfig(QMAP, DitherSpec([0.1], [1], 4, domain="discrete"), GAINS, [2.0], t_end=1.0)


def test_grid_and_error_bookkeeping():
    traj = table2_traj(periods=3)
    assert np.allclose(np.diff(traj.times), traj.step)
    assert np.allclose(traj.theta_tilde, traj.theta_hat - QMAP.theta_star)
    assert traj.y[0] == pytest.approx(4.0)  # 0.5 * 2 * 2^2 at t = 0


def test_quiescent_start_stays_within_first_period_bound():
    # from the extremum with q* = 0, the first-period drift is below
    # eps * (derivative bound at the dither amplitude radius)
    cfg = CtSimConfig(QMAP, DITHER, GAINS, [0.0], t_end=EPS, step=EPS / 256)
    traj = simulate_ct(cfg)
    unc = UncertaintyModel(0.0, [[2.0]], 0.0, 2.0, 2.0, 1.0, diagonal_hessian=True)
    amp_norm = float(np.linalg.norm(DITHER.amplitudes))
    bound = EPS * compute_deltas_ct(unc, GAINS, DITHER, amp_norm).d
    assert traj.theta_tilde_norm().max() <= bound


def test_rk4_order():
    # |theta(h) - theta(h/8)| / |theta(h/2) - theta(h/8)| -> (1 - 8^-4)/(2^-4 - 8^-4) ~ 16.06
    qmap = QuadraticMap(0.1, [0.3], [[2.0]])
    dither = DitherSpec([0.5], [1], 0.5)
    gains = GainSpec([-0.8])
    vals = {}
    for div in (64, 128, 512):
        cfg = CtSimConfig(qmap, dither, gains, [1.5], t_end=3.0, step=0.5 / div)
        vals[div] = simulate_ct(cfg).theta_tilde[-1, 0]
    ratio = abs(vals[64] - vals[512]) / abs(vals[128] - vals[512])
    assert 12.0 < ratio < 22.0


def test_divergence_aborts_with_index():
    qmap = QuadraticMap(0.0, [0.0], [[2.0]])
    cfg = CtSimConfig(qmap, DitherSpec([0.1], [1], 1.0), GainSpec([-500.0]), [2.0], t_end=40.0, step=1.0 / 64)
    with pytest.raises(SimulationDiverged) as err:
        simulate_ct(cfg)
    assert err.value.index > 0


def _constant_trajectory(n_grid=900, mm_eps=0.06, h=0.0005):
    # hand-built record with zero derivative: the transformation must vanish
    times = h * np.arange(n_grid)
    tilde = np.tile([0.7, -0.3], (n_grid, 1))
    return Trajectory(
        times=times,
        theta_hat=tilde.copy(),
        theta_tilde=tilde,
        y=np.zeros(n_grid),
        theta_tilde_dot=np.zeros((n_grid, 2)),
        epsilon=mm_eps,
    )


def test_transformation_zero_derivative():
    traj = _constant_trajectory()
    dither = DitherSpec([0.2, 0.2], [1, 2], traj.epsilon)
    gains = GainSpec([-0.01, -0.01])
    qmap = QuadraticMap(0.0, [0.0, 0.0], 2 * np.eye(2))
    out = compute_transformation_ct(traj, dither, gains, qmap)
    sel = slice(out.diag_start, None)
    assert np.nanmax(np.abs(out.g[sel])) == 0.0
    assert np.nanmax(np.abs(out.y1[sel])) == 0.0
    assert np.nanmax(np.abs(out.y2[sel])) == 0.0
    assert np.allclose(out.z[sel], out.theta_tilde[sel])
    # a nonzero constant error is not a solution, so the residual equals
    # |K H theta_tilde| exactly; the quiescent solution gives zero
    res = residual_ct(out, gains, qmap)
    expected = np.linalg.norm(gains.matrix() @ qmap.hessian @ out.theta_tilde[-1])
    assert np.nanmax(res) == pytest.approx(expected, rel=1e-12)
    quiet = _constant_trajectory()
    quiet.theta_tilde = np.zeros_like(quiet.theta_tilde)
    quiet.theta_hat = quiet.theta_tilde
    out0 = compute_transformation_ct(quiet, dither, gains, qmap)
    assert np.nanmax(residual_ct(out0, gains, qmap)) < 1e-14


def test_transformation_window_bounds():
    # along the recorded trajectory the correction terms obey the certified
    # per-period bounds at sigma = sup |theta_tilde|
    traj = compute_transformation_ct(table2_traj(), DITHER, GAINS, QMAP)
    sigma = float(traj.theta_tilde_norm().max()) * (1 + 1e-12)
    unc = UncertaintyModel(0.0, [[2.0]], 0.0, 2.0, 2.0, 1.0, diagonal_hessian=True)
    d = compute_deltas_ct(unc, GAINS, DITHER, sigma)
    sel = slice(traj.diag_start, None)
    assert np.nanmax(np.linalg.norm(traj.g[sel], axis=1)) < EPS * d.d / 2
    assert np.nanmax(np.linalg.norm(traj.y1[sel], axis=1)) < EPS * d.d * d.d2
    assert np.nanmax(np.linalg.norm(traj.y2[sel], axis=1)) < EPS * d.d * d.d3


def test_z_plus_g_identity():
    traj = compute_transformation_ct(table2_traj(divisor=128, periods=8), DITHER, GAINS, QMAP)
    sel = slice(traj.diag_start, None)
    err = np.abs(traj.z[sel] + traj.g[sel] - traj.theta_tilde[sel])
    assert np.max(err) < 4e-16 * (1 + np.max(np.abs(traj.theta_tilde)))


def test_residual_halves_with_step_scalar():
    maxima = {}
    for div in (128, 256):
        traj = compute_transformation_ct(table2_traj(divisor=div), DITHER, GAINS, QMAP)
        maxima[div] = np.nanmax(residual_ct(traj, GAINS, QMAP))
    ratio = maxima[128] / maxima[256]
    assert 3.5 < ratio < 4.5


def test_residual_small_relative_to_dynamics():
    traj = compute_transformation_ct(table2_traj(), DITHER, GAINS, QMAP)
    res = residual_ct(traj, GAINS, QMAP)
    sel = slice(traj.diag_start + 1, len(traj.times) - 1)
    zdot_scale = np.max(np.abs(np.gradient(traj.z[sel, 0], traj.step)))
    # indicative size check at step = period/256; the sharp contract is the
    # second-order convergence ratio asserted above
    assert np.nanmax(res) < 2e-3 * zdot_scale


def test_csv_roundtrip_and_byte_stability(tmp_path):
    traj = compute_transformation_ct(table2_traj(divisor=128, periods=4), DITHER, GAINS, QMAP)
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    traj.write_csv(p1)
    traj.write_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0]
    assert header == "t,theta_hat_1,theta_tilde_norm,y,G_norm,Y1_norm,Y2_norm,z_norm"
    data = np.genfromtxt(p1, delimiter=",", skip_header=1)
    assert data.shape[1] == 8
    # full double precision survives the round trip
    assert data[5, 1] == traj.theta_hat[5, 0]


def test_time_varying_hook_matches_constant():
    cfg_const = CtSimConfig(QMAP, DITHER, GAINS, [2.0], t_end=4 * EPS, step=EPS / 64)
    cfg_hook = CtSimConfig(QMAP, DITHER, GAINS, [2.0], t_end=4 * EPS, step=EPS / 64,
                           hessian_t=lambda t: 2.0)
    a = simulate_ct(cfg_const)
    b = simulate_ct(cfg_hook)
    assert np.allclose(a.theta_hat, b.theta_hat, rtol=0, atol=1e-15)


def test_time_varying_hook_scalar_only():
    qmap = QuadraticMap(0.0, [0.0, 0.0], 2 * np.eye(2))
    with pytest.raises(ValueError, match="scalar-only"):
        CtSimConfig(qmap, DitherSpec([0.1, 0.1], [1, 2], EPS), GainSpec([-0.01, -0.01]),
                    [2.0, 2.0], t_end=1.0, hessian_t=lambda t: 2.0)
