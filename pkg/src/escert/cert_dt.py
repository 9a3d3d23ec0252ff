"""Discrete-time practical-stability certificates.

Mirror of the continuous routes with window-length factors (period T):

* ``theorem2``      - general Hessian uncertainty; the decay-rate block
  inequality itself depends on the period bound, so the largest admissible
  period is found by outer bisection with an inner feasibility re-check.
* ``corollary2``    - declared-diagonal Hessian, lambda = h_min * min|l_i|.
* ``scalar_remark`` - scalar loops, tighter constants.

Decay is geometric with factor (1 - lambda * eps); every route enforces
lambda * eps < 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from escert.errors import InfeasibleError
from escert.lmi import LmiCertificateInput, assert_hurwitz, check_phi1_dt, search_certificate
from escert.quadmap import DitherSpec, GainSpec, UncertaintyModel

ROUTES_DT = ("theorem2", "corollary2", "scalar_remark")

EPSILON_CAP = 1e3
EPS_BISECT_TOL = 1e-6
SIGMA_BISECT_TOL = 1e-10
UB_STOP_TOL = 1e-9
UB_MAX_ITER = 100
_RATE_SLACK = 1e-9  # keeps lambda * eps strictly below 1


@dataclass(frozen=True)
class DtDeltas:
    d: float
    d1: float
    d2: float
    d3: float

    @property
    def sum3(self) -> float:
        return self.d1 + self.d2 + self.d3

    def to_json_dict(self) -> dict:
        return {"D": self.d, "D1": self.d1, "D2": self.d2, "D3": self.d3}


def _resolve_period(dither: DitherSpec, period: Optional[int]) -> int:
    t = int(dither.period) if period is None else int(period)
    if t < 2:
        raise ValueError("window length must be an integer >= 2 (length-1 windows average nothing)")
    return t


def compute_deltas_dt(
    uncertainty: UncertaintyModel,
    gains: GainSpec,
    dither: DitherSpec,
    sigma: float,
    period: Optional[int] = None,
) -> DtDeltas:
    """Same structure as the continuous constants; d1..d3 carry T - 1."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    t = _resolve_period(dither, period)
    a = dither.amplitudes
    lg = gains.gains
    amp_norm = math.sqrt(float(np.sum(a * a)))
    gain_ratio = math.sqrt(float(np.sum(4.0 * lg * lg / (a * a))))
    h_max = uncertainty.h_max
    d = (uncertainty.q_star_max + 0.5 * h_max * (sigma + amp_norm) ** 2) * gain_ratio
    d1 = 0.5 * (t - 1) * h_max * float(np.max(np.abs(lg)))
    d2 = 0.5 * (t - 1) * sigma * h_max * gain_ratio
    d3 = 0.5 * (t - 1) * h_max * gain_ratio * amp_norm
    return DtDeltas(d, d1, d2, d3)


def scalar_delta_dt(uncertainty: UncertaintyModel, gains: GainSpec, dither: DitherSpec, sigma: float) -> float:
    if dither.n != 1 or gains.n != 1:
        raise ValueError("scalar route needs n = 1")
    a = abs(float(dither.amplitudes[0]))
    lg = abs(float(gains.gains[0]))
    return (uncertainty.q_star_max + 0.5 * uncertainty.h_max * (sigma + a) ** 2) * 2.0 * lg / a


def _phi_theorem2(sigma, sigma0, epsilon, deltas_fn, lam, p, t):
    d = deltas_fn(sigma)
    lhs = math.sqrt(p) * (sigma0 + epsilon * d.d * (3.0 * (t - 1) * lam + 2.0 * d.sum3) / (2.0 * lam))
    return lhs + 0.5 * (t - 1) * epsilon * d.d - sigma


def _phi_corollary2(sigma, sigma0, epsilon, deltas_fn, lam, t):
    d = deltas_fn(sigma)
    return sigma0 + epsilon * d.d * (d.sum3 + 2.0 * (t - 1) * lam) / lam - sigma


def _phi_scalar(sigma, sigma0, epsilon, delta_fn, amp, t):
    d = delta_fn(sigma)
    return sigma0 + epsilon * d * (t - 1) * (7.0 * amp + 2.0 * sigma) / (2.0 * amp) - sigma


def epsilon_star_theorem2(
    uncertainty: UncertaintyModel,
    gains: GainSpec,
    dither: DitherSpec,
    sigma0: float,
    sigma: float,
    lmi_cert: LmiCertificateInput,
    period: Optional[int] = None,
    cap: float = EPSILON_CAP,
) -> float:
    """Outer bisection on the period bound with the block inequality
    re-checked at every candidate (its extra terms grow affinely with the
    bound, so feasibility is monotone)."""
    t = _resolve_period(dither, period)
    lam, p = lmi_cert.rate, lmi_cert.p
    if sigma * sigma <= p * sigma0 * sigma0:
        raise InfeasibleError(f"need sigma^2 > p sigma0^2 (sigma={sigma}, p={p}, sigma0={sigma0})")
    deltas_fn = lambda s: compute_deltas_dt(uncertainty, gains, dither, s, t)

    def admissible(eps: float) -> bool:
        if lam * eps >= 1.0:
            return False
        if _phi_theorem2(sigma, sigma0, eps, deltas_fn, lam, p, t) >= 0.0:
            return False
        return check_phi1_dt(replace(lmi_cert, epsilon_star=eps)).feasible

    hi = min(cap, (1.0 - _RATE_SLACK) / lam)
    lo = 0.0
    if not admissible(min(hi, EPS_BISECT_TOL)):
        raise InfeasibleError("theorem2 inequality infeasible even for a vanishing period")
    if admissible(hi):
        return hi
    while hi - lo > EPS_BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def epsilon_star_corollary2(
    uncertainty: UncertaintyModel,
    gains: GainSpec,
    dither: DitherSpec,
    sigma0: float,
    sigma: float,
    period: Optional[int] = None,
    lambda_override: Optional[float] = None,
    cap: float = EPSILON_CAP,
) -> tuple[float, float]:
    if not uncertainty.diagonal_hessian:
        raise ValueError("corollary2 requires a diagonal-Hessian uncertainty declaration")
    if sigma <= sigma0:
        raise InfeasibleError("need sigma > sigma0")
    t = _resolve_period(dither, period)
    lam = uncertainty.h_min * float(np.min(np.abs(gains.gains))) if lambda_override is None else float(lambda_override)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    d = compute_deltas_dt(uncertainty, gains, dither, sigma, t)
    if d.d == 0.0:
        return min(cap, (1.0 - _RATE_SLACK) / lam), lam
    eps = (sigma - sigma0) * lam / (d.d * (d.sum3 + 2.0 * (t - 1) * lam))
    return min(eps, cap, (1.0 - _RATE_SLACK) / lam), lam


def epsilon_star_scalar_dt(
    uncertainty: UncertaintyModel,
    gains: GainSpec,
    dither: DitherSpec,
    sigma0: float,
    sigma: float,
    period: Optional[int] = None,
    lambda_override: Optional[float] = None,
    cap: float = EPSILON_CAP,
) -> tuple[float, float]:
    if dither.n != 1:
        raise ValueError("scalar_remark route needs n = 1")
    if sigma <= sigma0:
        raise InfeasibleError("need sigma > sigma0")
    t = _resolve_period(dither, period)
    amp = abs(float(dither.amplitudes[0]))
    lam = abs(float(gains.gains[0])) * uncertainty.h_min if lambda_override is None else float(lambda_override)
    d = scalar_delta_dt(uncertainty, gains, dither, sigma)
    if d == 0.0:
        return min(cap, (1.0 - _RATE_SLACK) / lam), lam
    eps = (sigma - sigma0) * 2.0 * amp / (d * (t - 1) * (7.0 * amp + 2.0 * sigma))
    return min(eps, cap, (1.0 - _RATE_SLACK) / lam), lam


@dataclass(frozen=True)
class DtUbResult:
    ub: float
    sigma_final: float
    iterations: int
    history: tuple[float, ...]


def _smallest_sigma(phi, sigma_upper: float) -> float:
    hi = sigma_upper
    if phi(hi) > 1e-9 * max(1.0, sigma_upper):
        raise InfeasibleError("route inequality infeasible at the certified sigma")
    lo = 0.0
    tol = SIGMA_BISECT_TOL * max(1.0, sigma_upper)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if phi(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def ultimate_bound_dt(
    route: str,
    uncertainty: UncertaintyModel,
    gains: GainSpec,
    dither: DitherSpec,
    sigma0: float,
    epsilon: float,
    sigma_upper: float,
    period: Optional[int] = None,
    beta_frac: float = 0.1,
    lambda_override: Optional[float] = None,
    lmi_cert: Optional[LmiCertificateInput] = None,
) -> DtUbResult:
    """Same shrink-the-ball iteration as the continuous side, with the
    discrete ball radii."""
    if route not in ROUTES_DT:
        raise ValueError(f"unknown route {route!r}")
    if not 0.0 < beta_frac < 1.0:
        raise ValueError("beta_frac must lie in (0, 1)")
    t = _resolve_period(dither, period)
    if route == "theorem2":
        if lmi_cert is None:
            raise ValueError("theorem2 route needs an LMI certificate input")
        lam, p = lmi_cert.rate, lmi_cert.p
    else:
        if lambda_override is not None:
            lam = float(lambda_override)
        elif route == "corollary2":
            lam = uncertainty.h_min * float(np.min(np.abs(gains.gains)))
        else:
            lam = abs(float(gains.gains[0])) * uncertainty.h_min
        p = 1.0
    if lam * epsilon >= 1.0:
        raise InfeasibleError("need lambda * epsilon < 1")

    if route == "scalar_remark":
        amp = abs(float(dither.amplitudes[0]))
        delta_fn = lambda s: scalar_delta_dt(uncertainty, gains, dither, s)
        phi_at = lambda s, s0: _phi_scalar(s, s0, epsilon, delta_fn, amp, t)
        ball = lambda s: epsilon * delta_fn(s) * (t - 1) * (2.0 * amp + s) / amp
    else:
        deltas_fn = lambda s: compute_deltas_dt(uncertainty, gains, dither, s, t)
        if route == "theorem2":
            phi_at = lambda s, s0: _phi_theorem2(s, s0, epsilon, deltas_fn, lam, p, t)
            ball = lambda s: epsilon * deltas_fn(s).d * (
                0.5 * (t - 1) + math.sqrt(p) * deltas_fn(s).sum3 / lam
            )
        else:
            phi_at = lambda s, s0: _phi_corollary2(s, s0, epsilon, deltas_fn, lam, t)
            ball = lambda s: epsilon * deltas_fn(s).d * (2.0 * deltas_fn(s).sum3 + (t - 1) * lam) / (2.0 * lam)

    sigma0_cur = sigma0
    history: list[float] = []
    sigma_min = sigma_upper
    for _ in range(UB_MAX_ITER):
        sigma_min = _smallest_sigma(lambda s: phi_at(s, sigma0_cur), sigma_upper)
        ub = ball(sigma_min)
        if history and ub > history[-1] + 1e-15:
            ub = history[-1]
        done = bool(history) and abs(history[-1] - ub) < UB_STOP_TOL
        history.append(ub)
        beta = beta_frac * sigma0_cur
        if done or ub >= sigma0_cur - beta:
            break
        sigma0_cur = ub + beta
    return DtUbResult(ub=history[-1], sigma_final=sigma_min, iterations=len(history), history=tuple(history))


@dataclass(frozen=True)
class DtCertificate:
    route: str
    sigma0: float
    sigma: float
    lam: float
    p: float
    epsilon_star: float
    epsilon: float
    deltas: DtDeltas
    ub: float
    sigma_final: float
    period: int
    uncertainty: UncertaintyModel
    gains: GainSpec
    dither: DitherSpec
    lmi: Optional[LmiCertificateInput] = None

    def __post_init__(self):
        if self.route not in ROUTES_DT:
            raise ValueError(f"unknown route {self.route!r}")
        if not (self.sigma > self.sigma0 > 0):
            raise ValueError("need sigma > sigma0 > 0")
        if self.lam * self.epsilon_star >= 1.0:
            raise ValueError("need lambda * epsilon_star < 1")
        if self.ub >= self.sigma:
            raise ValueError("ultimate bound must undershoot sigma")
        if self.period < 2:
            raise ValueError("period must be >= 2")

    def to_json_dict(self) -> dict:
        return {
            "domain": "discrete",
            "route": self.route,
            "lambda": self.lam,
            "p": self.p,
            "epsilon_star": self.epsilon_star,
            "epsilon": self.epsilon,
            "sigma0": self.sigma0,
            "sigma": self.sigma,
            "sigma_final": self.sigma_final,
            "deltas": self.deltas.to_json_dict(),
            "ub": self.ub,
            "T": self.period,
            "problem": {
                "uncertainty": {
                    "q_star_max": self.uncertainty.q_star_max,
                    "hessian_nominal": self.uncertainty.hessian_nominal.tolist(),
                    "kappa": self.uncertainty.kappa,
                    "h_min": self.uncertainty.h_min,
                    "h_max": self.uncertainty.h_max,
                    "sigma0": self.uncertainty.sigma0,
                    "diagonal_hessian": self.uncertainty.diagonal_hessian,
                },
                "gains": self.gains.gains.tolist(),
                "dither": {
                    "amplitudes": self.dither.amplitudes.tolist(),
                    "freq_indices": self.dither.freq_indices.tolist(),
                    "period": self.dither.period,
                    "domain": self.dither.domain,
                },
            },
        }


def envelope_dt(cert: DtCertificate, theta0_norm: float, k) -> np.ndarray:
    """Certified bound on |theta_tilde(k)|; first branch covers k < T - 1."""
    kk = np.asarray(k, dtype=float)
    eps = cert.epsilon
    t = cert.period
    d = cert.deltas.d
    lam = cert.lam
    if cert.route == "scalar_remark":
        amp = abs(float(cert.dither.amplitudes[0]))
        tail = eps * d * (t - 1) * (2.0 * amp + cert.sigma) / amp
        head = 1.0
    elif cert.route == "corollary2":
        tail = eps * d * (2.0 * cert.deltas.sum3 + (t - 1) * lam) / (2.0 * lam)
        head = 1.0
    else:
        tail = eps * d * cert.deltas.sum3 * math.sqrt(cert.p) / lam + 0.5 * (t - 1) * eps * d
        head = math.sqrt(cert.p)
    first = theta0_norm + eps * (t - 1) * d
    decayed = head * (1.0 - lam * eps) ** (kk - t + 1) * (theta0_norm + 1.5 * (t - 1) * eps * d) + tail
    return np.where(kk < t - 1, first, decayed)


def certify_dt(
    uncertainty: UncertaintyModel,
    gains: GainSpec,
    dither: DitherSpec,
    sigma: float,
    sigma0: Optional[float] = None,
    route: str = "corollary2",
    period: Optional[int] = None,
    epsilon: Optional[float] = None,
    lmi_cert: Optional[LmiCertificateInput] = None,
    lambda_override: Optional[float] = None,
    beta_frac: float = 0.1,
) -> DtCertificate:
    if route not in ROUTES_DT:
        raise ValueError(f"unknown route {route!r}")
    sigma0 = uncertainty.sigma0 if sigma0 is None else float(sigma0)
    assert_hurwitz(gains, uncertainty.hessian_nominal)
    t = _resolve_period(dither, period)
    p = 1.0
    if route == "theorem2":
        if lmi_cert is None:
            lmi_cert = search_certificate(uncertainty, gains, mode="dt", epsilon_star_hint=epsilon or 0.0)
        eps_star = epsilon_star_theorem2(uncertainty, gains, dither, sigma0, sigma, lmi_cert, t)
        lam, p = lmi_cert.rate, lmi_cert.p
        lmi_cert = replace(lmi_cert, epsilon_star=eps_star)
    elif route == "corollary2":
        eps_star, lam = epsilon_star_corollary2(uncertainty, gains, dither, sigma0, sigma, t, lambda_override)
    else:
        eps_star, lam = epsilon_star_scalar_dt(uncertainty, gains, dither, sigma0, sigma, t, lambda_override)
    eps = eps_star if epsilon is None else float(epsilon)
    if eps > eps_star * (1 + 1e-12):
        raise InfeasibleError(f"operating period {eps} exceeds the certified bound {eps_star}")
    ub_res = ultimate_bound_dt(
        route,
        uncertainty,
        gains,
        dither,
        sigma0,
        eps,
        sigma_upper=sigma,
        period=t,
        beta_frac=beta_frac,
        lambda_override=lam if route != "theorem2" else None,
        lmi_cert=lmi_cert,
    )
    deltas = compute_deltas_dt(uncertainty, gains, dither, sigma, t)
    if route == "scalar_remark":
        deltas = DtDeltas(scalar_delta_dt(uncertainty, gains, dither, sigma), deltas.d1, deltas.d2, deltas.d3)
    return DtCertificate(
        route=route,
        sigma0=sigma0,
        sigma=sigma,
        lam=lam,
        p=p,
        epsilon_star=eps_star,
        epsilon=eps,
        deltas=deltas,
        ub=ub_res.ub,
        sigma_final=ub_res.sigma_final,
        period=t,
        uncertainty=uncertainty,
        gains=gains,
        dither=dither,
        lmi=lmi_cert,
    )
