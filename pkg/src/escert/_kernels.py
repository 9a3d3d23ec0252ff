"""Hot loops for the continuous-time simulator (numba).

The dither forces the step count to scale like t_end/period, so long runs
and multi-draw sweeps need compiled stepping.  All kernels use classical
fixed-step RK4 with the time rebuilt from the step index (no accumulation
drift).  The batched kernel advances every draw in lockstep so the sine
evaluations are shared across the batch.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _rhs(t, th, theta_star, hess, q_star, kdiag, amps, omegas, out):
    n = th.size
    y = q_star
    for i in range(n):
        di = th[i] + amps[i] * math.sin(omegas[i] * t) - theta_star[i]
        out[i] = di  # reuse out as scratch for the offset vector
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += hess[i, j] * out[j]
        y += 0.5 * out[i] * acc
    # the scratch offsets are consumed before being overwritten below
    for i in range(n):
        out[i] = kdiag[i] * (2.0 / amps[i]) * math.sin(omegas[i] * t) * y
    return y


@njit(cache=True)
def rk4_record(theta_hat0, theta_star, hess, q_star, kdiag, amps, omegas, h, n_steps):
    """Record theta_hat, y and the analytic error derivative on the full grid."""
    n = theta_hat0.size
    th = theta_hat0.copy()
    out_th = np.empty((n_steps + 1, n))
    out_y = np.empty(n_steps + 1)
    out_d = np.empty((n_steps + 1, n))
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    stage = np.empty(n)
    for step in range(n_steps + 1):
        t = step * h
        out_y[step] = _rhs(t, th, theta_star, hess, q_star, kdiag, amps, omegas, k1)
        for i in range(n):
            out_th[step, i] = th[i]
            out_d[step, i] = k1[i]
        if step == n_steps:
            break
        for i in range(n):
            stage[i] = th[i] + 0.5 * h * k1[i]
        _rhs(t + 0.5 * h, stage, theta_star, hess, q_star, kdiag, amps, omegas, k2)
        for i in range(n):
            stage[i] = th[i] + 0.5 * h * k2[i]
        _rhs(t + 0.5 * h, stage, theta_star, hess, q_star, kdiag, amps, omegas, k3)
        for i in range(n):
            stage[i] = th[i] + h * k3[i]
        _rhs(t + h, stage, theta_star, hess, q_star, kdiag, amps, omegas, k4)
        for i in range(n):
            th[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return out_th, out_y, out_d


@njit(cache=True)
def rk4_record_tv(theta_hat0, theta_star, hess_half_grid, q_star, kgain, amp, omega, h, n_steps):
    """Scalar loop with a time-varying Hessian sampled on the half-step grid."""
    th = theta_hat0
    out_th = np.empty(n_steps + 1)
    out_y = np.empty(n_steps + 1)
    out_d = np.empty(n_steps + 1)

    for step in range(n_steps + 1):
        t = step * h
        s = amp * math.sin(omega * t)
        d = th + s - theta_star
        y = q_star + 0.5 * hess_half_grid[2 * step] * d * d
        k1 = kgain * (2.0 / amp) * math.sin(omega * t) * y
        out_th[step] = th
        out_y[step] = y
        out_d[step] = k1
        if step == n_steps:
            break

        tm = t + 0.5 * h
        hm = hess_half_grid[2 * step + 1]
        sm = amp * math.sin(omega * tm)
        d = th + 0.5 * h * k1 + sm - theta_star
        k2 = kgain * (2.0 / amp) * math.sin(omega * tm) * (q_star + 0.5 * hm * d * d)
        d = th + 0.5 * h * k2 + sm - theta_star
        k3 = kgain * (2.0 / amp) * math.sin(omega * tm) * (q_star + 0.5 * hm * d * d)
        t1 = t + h
        h1 = hess_half_grid[2 * step + 2]
        s1 = amp * math.sin(omega * t1)
        d = th + h * k3 + s1 - theta_star
        k4 = kgain * (2.0 / amp) * math.sin(omega * t1) * (q_star + 0.5 * h1 * d * d)
        th += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out_th, out_y, out_d


@njit(cache=True)
def rk4_window_max(theta_hat0, theta_star, hess, q_star, kdiag, amps, omegas, h, n_steps, stride):
    """Advance a batch of loops, recording the per-window max error norm.

    theta_hat0 (B, n), hess (B, n, n), q_star (B,): one map per draw.
    Window w holds grid indices [w*stride, (w+1)*stride); returns
    (wmax (B, n_windows), theta_hat_final (B, n)).
    """
    b_count, n = theta_hat0.shape
    n_windows = n_steps // stride + 1
    wmax = np.zeros((b_count, n_windows))
    th = theta_hat0.copy()
    sin0 = np.empty(n)
    sinm = np.empty(n)
    sin1 = np.empty(n)
    diff = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)

    for step in range(n_steps + 1):
        w = step // stride
        for b in range(b_count):
            acc = 0.0
            for i in range(n):
                e = th[b, i] - theta_star[i]
                acc += e * e
            nrm = math.sqrt(acc)
            if nrm > wmax[b, w]:
                wmax[b, w] = nrm
        if step == n_steps:
            break

        t = step * h
        tm = t + 0.5 * h
        t1 = t + h
        for i in range(n):
            sin0[i] = math.sin(omegas[i] * t)
            sinm[i] = math.sin(omegas[i] * tm)
            sin1[i] = math.sin(omegas[i] * t1)
        for b in range(b_count):
            # stage 1
            y = q_star[b]
            for i in range(n):
                diff[i] = th[b, i] + amps[i] * sin0[i] - theta_star[i]
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += hess[b, i, j] * diff[j]
                y += 0.5 * diff[i] * acc
            for i in range(n):
                k1[i] = kdiag[i] * (2.0 / amps[i]) * sin0[i] * y
            # stage 2
            y = q_star[b]
            for i in range(n):
                diff[i] = th[b, i] + 0.5 * h * k1[i] + amps[i] * sinm[i] - theta_star[i]
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += hess[b, i, j] * diff[j]
                y += 0.5 * diff[i] * acc
            for i in range(n):
                k2[i] = kdiag[i] * (2.0 / amps[i]) * sinm[i] * y
            # stage 3
            y = q_star[b]
            for i in range(n):
                diff[i] = th[b, i] + 0.5 * h * k2[i] + amps[i] * sinm[i] - theta_star[i]
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += hess[b, i, j] * diff[j]
                y += 0.5 * diff[i] * acc
            for i in range(n):
                k3[i] = kdiag[i] * (2.0 / amps[i]) * sinm[i] * y
            # stage 4
            y = q_star[b]
            for i in range(n):
                diff[i] = th[b, i] + h * k3[i] + amps[i] * sin1[i] - theta_star[i]
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += hess[b, i, j] * diff[j]
                y += 0.5 * diff[i] * acc
            for i in range(n):
                k4[i] = kdiag[i] * (2.0 / amps[i]) * sin1[i] * y
            for i in range(n):
                th[b, i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return wmax, th
