"""Independent brute-force verifiers used by the test suite and the CLI
verify mode: a bisection re-solver for the closed-form inequalities,
matrix-power / matrix-exponential norm sweeps against the certified decay,
and the envelope sweep harness that simulates random draws from a
certificate's declared uncertainty family and measures the margin to the
certified envelope.

Draws are seeded (ES_CERTIFY_SEED overrides the default) so reports are
reproducible.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from escert import _kernels
from escert.cert_ct import CtCertificate, envelope_ct
from escert.cert_dt import DtCertificate, envelope_dt
from escert.lmi import matrix_exp, spectral_norm
from escert.quadmap import DitherSpec, QuadraticMap, dither_m, dither_s

DEFAULT_SEED = 20230815


def default_seed() -> int:
    env = os.environ.get("ES_CERTIFY_SEED")
    return int(env) if env else DEFAULT_SEED


def bisect_inequality(pred: Callable[[float], bool], lo: float, hi: float, tol: float) -> float:
    """Boundary of a monotone predicate: pred(lo) must hold, pred(hi) must not."""
    if not pred(lo):
        raise ValueError("predicate must hold at the lower bracket")
    if pred(hi):
        raise ValueError("predicate must fail at the upper bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def norm_power_sweep(a, count: int, bound: Callable[[int], float]) -> float:
    """max over k = 0..count of ||A^k|| / bound(k)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    acc = np.eye(a.shape[0])
    worst = spectral_norm(acc) / bound(0)
    for k in range(1, count + 1):
        acc = acc @ a
        worst = max(worst, spectral_norm(acc) / bound(k))
    return worst


def exp_decay_sweep(a, t_end: float, points: int, bound: Callable[[float], float]) -> float:
    """max over a uniform grid of ||exp(A t)|| / bound(t).

    The grid exponentials are accumulated as powers of exp(A dt), which is
    exact for commuting increments.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    dt = t_end / points
    step = matrix_exp(a * dt)
    acc = np.eye(a.shape[0])
    worst = 1.0 / bound(0.0)
    for k in range(1, points + 1):
        acc = acc @ step
        worst = max(worst, spectral_norm(acc) / bound(k * dt))
    return worst


def random_symmetric_bounded(rng: np.random.Generator, n: int, kappa: float) -> np.ndarray:
    """Symmetric Gaussian direction scaled to a uniform random norm in [0, kappa]."""
    if kappa == 0.0:
        return np.zeros((n, n))
    g = rng.normal(size=(n, n))
    s = 0.5 * (g + g.T)
    nrm = spectral_norm(s)
    if nrm == 0.0:
        return np.zeros((n, n))
    return s * (kappa * rng.uniform() / nrm)


def random_in_ball(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    direction = rng.normal(size=n)
    nrm = float(np.linalg.norm(direction))
    if nrm == 0.0:
        return np.zeros(n)
    return direction / nrm * radius * rng.uniform() ** (1.0 / n)


def draw_member_map(rng: np.random.Generator, cert) -> QuadraticMap:
    """A map from the certificate's declared uncertainty family, extremum at 0.

    LMI routes draw nominal-plus-bounded-perturbation Hessians; the
    diagonal routes draw diagonal Hessians with entries in [h_min, h_max].
    """
    unc = cert.uncertainty
    n = unc.n
    q_star = rng.uniform(-unc.q_star_max, unc.q_star_max) if unc.q_star_max > 0 else 0.0
    if cert.route in ("theorem1", "theorem2"):
        for _ in range(64):
            h = unc.hessian_nominal + random_symmetric_bounded(rng, n, unc.kappa)
            if float(np.linalg.eigvalsh(h)[0]) > 0:
                break
        else:
            raise RuntimeError("could not draw a positive definite family member")
    else:
        h = np.diag(rng.uniform(unc.h_min, unc.h_max, size=n))
    return QuadraticMap(q_star, np.zeros(n), h)


@dataclass(frozen=True)
class SweepReport:
    config_digest: str
    worst_margin: float
    worst_location: float
    samples: int
    violation: bool

    def to_json_dict(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "worst_margin": self.worst_margin,
            "worst_location": self.worst_location,
            "samples": self.samples,
            "violation": self.violation,
        }


def _digest(*parts) -> str:
    text = "|".join(repr(p) for p in parts)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def ct_window_norms(
    qmaps: list[QuadraticMap],
    dither: DitherSpec,
    gains,
    theta_hat0: np.ndarray,
    t_end: float,
    step_divisor: int = 64,
) -> tuple[np.ndarray, np.ndarray]:
    """Batched run returning per-window max error norms and window-end times.

    Windows are one dither period long so the first window is exactly the
    pre-averaging branch of the envelopes.
    """
    eps = dither.period
    h = eps / step_divisor
    stride = step_divisor
    n_steps = int(math.ceil(t_end / h))
    b = theta_hat0.shape[0]
    n = theta_hat0.shape[1]
    hess = np.ascontiguousarray(np.stack([m.hessian for m in qmaps]))
    q_star = np.array([m.q_star for m in qmaps])
    theta_star = qmaps[0].theta_star.copy()
    if any(not np.array_equal(m.theta_star, theta_star) for m in qmaps):
        raise ValueError("batched runs share one extremum point")
    wmax, _final = _kernels.rk4_window_max(
        np.ascontiguousarray(theta_hat0, dtype=float),
        theta_star,
        hess,
        q_star,
        gains.gains.copy(),
        dither.amplitudes.copy(),
        dither.omega,
        h,
        n_steps,
        stride,
    )
    n_windows = wmax.shape[1]
    last_idx = np.minimum((np.arange(n_windows) + 1) * stride - 1, n_steps)
    return wmax, last_idx * h


def dt_norm_series(
    qmaps: list[QuadraticMap],
    dither: DitherSpec,
    gains,
    epsilon: float,
    theta_hat0: np.ndarray,
    k_end: int,
) -> np.ndarray:
    """Batched recursion returning |theta_tilde(k)| for k = 0..k_end; (B, k_end+1)."""
    b, n = theta_hat0.shape
    hess = np.stack([m.hessian for m in qmaps])
    q_star = np.array([m.q_star for m in qmaps])
    theta_star = np.stack([m.theta_star for m in qmaps])
    th = np.array(theta_hat0, dtype=float)
    lg = gains.gains
    norms = np.empty((b, k_end + 1))
    steps = np.arange(k_end + 1)
    s_all = dither_s(dither, steps)
    m_all = dither_m(dither, steps)
    for k in range(k_end + 1):
        tilde = th - theta_star
        norms[:, k] = np.linalg.norm(tilde, axis=1)
        if k == k_end:
            break
        d = th + s_all[k] - theta_star
        y = q_star + 0.5 * np.einsum("bi,bij,bj->b", d, hess, d)
        th = th + epsilon * (lg * m_all[k]) * y[:, None]
    return norms


def envelope_sweep(
    cert,
    draws: int = 20,
    seed: Optional[int] = None,
    sim_dither: Optional[DitherSpec] = None,
    decay_spans: float = 5.0,
    step_divisor: int = 64,
) -> SweepReport:
    """Simulate `draws` family members from random initial errors and report
    the worst (envelope - |error|) margin over the horizon.

    A negative margin means a certified-envelope violation.  The horizon
    covers decay_spans multiples of the certified decay time.  Continuous
    margins are taken per window against the envelope at the window end
    (the envelope is non-increasing, so this is conservative by at most one
    window's decay).
    """
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    if isinstance(cert, CtCertificate):
        return _envelope_sweep_ct(cert, draws, rng, sim_dither, decay_spans, step_divisor)
    if isinstance(cert, DtCertificate):
        return _envelope_sweep_dt(cert, draws, rng, sim_dither, decay_spans)
    raise TypeError("cert must be a CtCertificate or DtCertificate")


def _envelope_sweep_ct(cert, draws, rng, sim_dither, decay_spans, step_divisor):
    eps = cert.epsilon
    if sim_dither is None:
        sim_dither = DitherSpec(cert.dither.amplitudes, cert.dither.freq_indices, eps)
    n = cert.uncertainty.n
    theta0 = np.stack([random_in_ball(rng, n, cert.sigma0) for _ in range(draws)])
    qmaps = [draw_member_map(rng, cert) for _ in range(draws)]
    t_end = max(decay_spans / cert.delta, 2.0 * eps)
    wmax, t_last = ct_window_norms(qmaps, sim_dither, cert.gains, theta0, t_end, step_divisor)
    theta0_norms = np.linalg.norm(theta0, axis=1)
    env = np.stack([envelope_ct(cert, t0n, t_last) for t0n in theta0_norms])
    margins = env - wmax
    worst_flat = int(np.argmin(margins))
    bi, wi = np.unravel_index(worst_flat, margins.shape)
    worst = float(margins[bi, wi])
    digest = _digest("ct", cert.route, cert.epsilon, cert.sigma0, cert.sigma, draws, n)
    return SweepReport(digest, worst, float(t_last[wi]), draws, worst <= 0.0)


def _envelope_sweep_dt(cert, draws, rng, sim_dither, decay_spans):
    eps = cert.epsilon
    if sim_dither is None:
        sim_dither = cert.dither
    n = cert.uncertainty.n
    theta0 = np.stack([random_in_ball(rng, n, cert.sigma0) for _ in range(draws)])
    qmaps = [draw_member_map(rng, cert) for _ in range(draws)]
    k_end = int(math.ceil(decay_spans / (cert.lam * eps))) + cert.period
    norms = dt_norm_series(qmaps, sim_dither, cert.gains, eps, theta0, k_end)
    theta0_norms = np.linalg.norm(theta0, axis=1)
    ks = np.arange(k_end + 1)
    env = np.stack([envelope_dt(cert, t0n, ks) for t0n in theta0_norms])
    margins = env - norms
    worst_flat = int(np.argmin(margins))
    bi, ki = np.unravel_index(worst_flat, margins.shape)
    worst = float(margins[bi, ki])
    digest = _digest("dt", cert.route, cert.epsilon, cert.sigma0, cert.sigma, draws, n)
    return SweepReport(digest, worst, float(ki), draws, worst <= 0.0)


def enters_and_remains(norm_maxima: np.ndarray, locations: np.ndarray, radius: float,
                       settle_fraction: float = 0.95):
    """Location after which the error stays inside the radius for good.

    During the decay the norm may oscillate across the threshold, so the
    entry point is one past the *last* excursion; it must occur within
    settle_fraction of the horizon (otherwise the run is inconclusive).
    Returns (entry_location, tail_max).
    """
    inside = norm_maxima < radius
    if not inside[-1] or not inside.any():
        raise AssertionError(f"trajectory does not end inside the radius {radius}")
    above = np.nonzero(~inside)[0]
    entry = int(above[-1]) + 1 if above.size else 0
    if entry > settle_fraction * (norm_maxima.size - 1):
        raise AssertionError(
            f"trajectory only enters the radius {radius} at the end of the horizon"
        )
    tail = norm_maxima[entry:]
    return float(locations[entry]), float(tail.max())
