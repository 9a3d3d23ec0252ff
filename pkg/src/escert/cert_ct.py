"""Continuous-time practical-stability certificates.

Three routes produce the largest admissible dither period, a decay rate
and an ultimate bound on the seeking error:

* ``theorem1``   - general Hessian uncertainty; needs a feasible decay-rate
  LMI point (quadratic form P with condition ratio p, rate delta).
* ``corollary1`` - declared-diagonal Hessian; delta = h_min * min|k_i|, no
  LMI, condition ratio 1.
* ``remark3``    - scalar loops only; tighter constants from the closed
  form of the scalar fundamental solution.

Each route is a closed-form inequality linear in the period, solved
exactly; `ultimate_bound_ct` then shrinks the bound by alternating a
smallest-feasible-sigma solve with a reset of the initial ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from escert.errors import InfeasibleError
from escert.lmi import LmiCertificateInput, assert_hurwitz, check_phi1_ct, search_certificate
from escert.quadmap import DitherSpec, GainSpec, UncertaintyModel

ROUTES_CT = ("theorem1", "corollary1", "remark3")

EPSILON_CAP = 1e3  # reported instead of infinity when the disturbance bound vanishes
SIGMA_BISECT_TOL = 1e-10
UB_STOP_TOL = 1e-9
UB_MAX_ITER = 100


@dataclass(frozen=True)
class CtDeltas:
    """Disturbance-bound constants: d bounds the error derivative, d1/d2/d3
    bound the three windowed correction terms (per unit of d * period)."""

    d: float
    d1: float
    d2: float
    d3: float

    @property
    def sum3(self) -> float:
        return self.d1 + self.d2 + self.d3

    def to_json_dict(self) -> dict:
        return {"D": self.d, "D1": self.d1, "D2": self.d2, "D3": self.d3}


def compute_deltas_ct(
    uncertainty: UncertaintyModel, gains: GainSpec, dither: DitherSpec, sigma: float
) -> CtDeltas:
    """Bound constants at error radius sigma.

    d  = [qM + hM/2 (sigma + sqrt(sum a_i^2))^2] sqrt(sum 4 k_i^2 / a_i^2)
    d1 = hM max|k_i| / 2
    d2 = sigma hM/2 sqrt(sum 4 k_i^2 / a_i^2)
    d3 = hM/2 sqrt(sum 4 k_i^2 / a_i^2) sqrt(sum a_i^2)
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    a = dither.amplitudes
    k = gains.gains
    if a.size != k.size:
        raise ValueError("dither and gains dimensions disagree")
    amp_norm = math.sqrt(float(np.sum(a * a)))
    gain_ratio = math.sqrt(float(np.sum(4.0 * k * k / (a * a))))
    h_max = uncertainty.h_max
    d = (uncertainty.q_star_max + 0.5 * h_max * (sigma + amp_norm) ** 2) * gain_ratio
    d1 = 0.5 * h_max * float(np.max(np.abs(k)))
    d2 = 0.5 * sigma * h_max * gain_ratio
    d3 = 0.5 * h_max * gain_ratio * amp_norm
    return CtDeltas(d, d1, d2, d3)


def scalar_delta_ct(uncertainty: UncertaintyModel, gains: GainSpec, dither: DitherSpec, sigma: float) -> float:
    """Scalar-route bound [qM + hM/2 (sigma + |a|)^2] * 2|K|/|a| (n = 1)."""
    if dither.n != 1 or gains.n != 1:
        raise ValueError("scalar route needs n = 1")
    a = abs(float(dither.amplitudes[0]))
    k = abs(float(gains.gains[0]))
    return (uncertainty.q_star_max + 0.5 * uncertainty.h_max * (sigma + a) ** 2) * 2.0 * k / a


def _phi_theorem1(sigma, sigma0, epsilon, deltas_fn, delta, p):
    d = deltas_fn(sigma)
    lhs = math.sqrt(p) * (sigma0 + epsilon * d.d * (2.0 * d.sum3 + 3.0 * delta) / (2.0 * delta))
    return lhs + 0.5 * epsilon * d.d - sigma


def _phi_corollary1(sigma, sigma0, epsilon, deltas_fn, delta):
    d = deltas_fn(sigma)
    return sigma0 + epsilon * d.d * (d.sum3 + 2.0 * delta) / delta - sigma


def _phi_remark3(sigma, sigma0, epsilon, delta_fn, amp):
    d = delta_fn(sigma)
    return sigma0 + epsilon * d * (7.0 * amp + 2.0 * sigma) / (2.0 * amp) - sigma


def epsilon_star_theorem1(
    uncertainty: UncertaintyModel,
    gains: GainSpec,
    dither: DitherSpec,
    sigma0: float,
    sigma: float,
    lmi_cert: LmiCertificateInput,
    cap: float = EPSILON_CAP,
) -> float:
    """Largest period satisfying the general-route inequality (linear in it)."""
    verdict = check_phi1_ct(lmi_cert)
    if not verdict.feasible:
        raise InfeasibleError("decay-rate LMI point is not feasible")
    p, delta = lmi_cert.p, lmi_cert.rate
    if sigma * sigma <= p * sigma0 * sigma0:
        raise InfeasibleError(f"need sigma^2 > p sigma0^2 (sigma={sigma}, p={p}, sigma0={sigma0})")
    d = compute_deltas_ct(uncertainty, gains, dither, sigma)
    if d.d == 0.0:
        return cap
    denom = math.sqrt(p) * d.d * (2.0 * d.sum3 + 3.0 * delta) / (2.0 * delta) + 0.5 * d.d
    return min((sigma - math.sqrt(p) * sigma0) / denom, cap)


def epsilon_star_corollary1(
    uncertainty: UncertaintyModel,
    gains: GainSpec,
    dither: DitherSpec,
    sigma0: float,
    sigma: float,
    delta_override: Optional[float] = None,
    cap: float = EPSILON_CAP,
) -> tuple[float, float]:
    """Diagonal-Hessian route; returns (epsilon_star, delta)."""
    if not uncertainty.diagonal_hessian:
        raise ValueError("corollary1 requires a diagonal-Hessian uncertainty declaration")
    if sigma <= sigma0:
        raise InfeasibleError("need sigma > sigma0")
    delta = uncertainty.h_min * float(np.min(np.abs(gains.gains))) if delta_override is None else float(delta_override)
    if delta <= 0:
        raise ValueError("delta must be positive")
    d = compute_deltas_ct(uncertainty, gains, dither, sigma)
    if d.d == 0.0:
        return cap, delta
    eps = (sigma - sigma0) * delta / (d.d * (d.sum3 + 2.0 * delta))
    return min(eps, cap), delta


def epsilon_star_remark3(
    uncertainty: UncertaintyModel,
    gains: GainSpec,
    dither: DitherSpec,
    sigma0: float,
    sigma: float,
    delta_override: Optional[float] = None,
    cap: float = EPSILON_CAP,
) -> tuple[float, float]:
    """Scalar route; returns (epsilon_star, delta)."""
    if dither.n != 1:
        raise ValueError("remark3 route needs n = 1")
    if sigma <= sigma0:
        raise InfeasibleError("need sigma > sigma0")
    amp = abs(float(dither.amplitudes[0]))
    delta = abs(float(gains.gains[0])) * uncertainty.h_min if delta_override is None else float(delta_override)
    d = scalar_delta_ct(uncertainty, gains, dither, sigma)
    if d == 0.0:
        return cap, delta
    eps = (sigma - sigma0) * 2.0 * amp / (d * (7.0 * amp + 2.0 * sigma))
    return min(eps, cap), delta


@dataclass(frozen=True)
class UbResult:
    ub: float
    sigma_final: float
    iterations: int
    history: tuple[float, ...]


def _smallest_sigma(phi, sigma_upper: float) -> float:
    """Leftmost sigma in (0, sigma_upper] with phi(sigma) <= 0, by bisection.

    phi is positive at 0+ (it starts at sigma0) and must be non-positive at
    the upper bracket (the operating period is admissible there); a hair of
    slack covers operation exactly at the certified period bound.
    """
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


def ultimate_bound_ct(
    route: str,
    uncertainty: UncertaintyModel,
    gains: GainSpec,
    dither: DitherSpec,
    sigma0: float,
    epsilon: float,
    sigma_upper: float,
    beta_frac: float = 0.1,
    delta_override: Optional[float] = None,
    lmi_cert: Optional[LmiCertificateInput] = None,
) -> UbResult:
    """Iteratively shrink the attractive-ball radius at a fixed period.

    Each pass finds the smallest sigma for which the route inequality holds
    at the current initial ball, evaluates the ball radius there, and, if
    the radius undershoots the initial ball by more than beta = beta_frac *
    sigma0, restarts from the smaller ball.  The produced sequence is
    non-increasing; stops on a sub-1e-9 change or after 100 passes.
    """
    if route not in ROUTES_CT:
        raise ValueError(f"unknown route {route!r}")
    if not 0.0 < beta_frac < 1.0:
        raise ValueError("beta_frac must lie in (0, 1)")
    if route == "theorem1":
        if lmi_cert is None:
            raise ValueError("theorem1 route needs an LMI certificate input")
        delta, p = lmi_cert.rate, lmi_cert.p
    elif route == "corollary1":
        delta = uncertainty.h_min * float(np.min(np.abs(gains.gains))) if delta_override is None else float(delta_override)
        p = 1.0
    else:
        delta = abs(float(gains.gains[0])) * uncertainty.h_min if delta_override is None else float(delta_override)
        p = 1.0

    if route == "remark3":
        amp = abs(float(dither.amplitudes[0]))
        delta_fn = lambda s: scalar_delta_ct(uncertainty, gains, dither, s)
        phi_at = lambda s, s0: _phi_remark3(s, s0, epsilon, delta_fn, amp)
        ball = lambda s: epsilon * delta_fn(s) * (2.0 * amp + s) / amp
    else:
        deltas_fn = lambda s: compute_deltas_ct(uncertainty, gains, dither, s)
        if route == "theorem1":
            phi_at = lambda s, s0: _phi_theorem1(s, s0, epsilon, deltas_fn, delta, p)
        else:
            phi_at = lambda s, s0: _phi_corollary1(s, s0, epsilon, deltas_fn, delta)
        ball = lambda s: (
            epsilon
            * deltas_fn(s).d
            * (2.0 * deltas_fn(s).sum3 * math.sqrt(p) + delta)
            / (2.0 * delta)
        )

    sigma0_cur = sigma0
    history: list[float] = []
    sigma_min = sigma_upper
    for _ in range(UB_MAX_ITER):
        sigma_min = _smallest_sigma(lambda s: phi_at(s, sigma0_cur), sigma_upper)
        ub = ball(sigma_min)
        if history and ub > history[-1] + 1e-15:
            # the construction is monotone; guard against pathological input
            ub = history[-1]
        done = bool(history) and abs(history[-1] - ub) < UB_STOP_TOL
        history.append(ub)
        beta = beta_frac * sigma0_cur
        if done or ub >= sigma0_cur - beta:
            break
        sigma0_cur = ub + beta
    return UbResult(ub=history[-1], sigma_final=sigma_min, iterations=len(history), history=tuple(history))


@dataclass(frozen=True)
class CtCertificate:
    """Everything needed to evaluate and re-verify the certified envelope."""

    route: str
    sigma0: float
    sigma: float
    delta: float
    p: float
    epsilon_star: float
    epsilon: float
    deltas: CtDeltas
    ub: float
    sigma_final: float
    uncertainty: UncertaintyModel
    gains: GainSpec
    dither: DitherSpec
    lmi: Optional[LmiCertificateInput] = None

    def __post_init__(self):
        if self.route not in ROUTES_CT:
            raise ValueError(f"unknown route {self.route!r}")
        if not (self.sigma > self.sigma0 > 0):
            raise ValueError("need sigma > sigma0 > 0")
        if self.epsilon_star <= 0 or self.epsilon <= 0:
            raise ValueError("periods must be positive")
        if self.ub >= self.sigma:
            raise ValueError("ultimate bound must undershoot sigma")
        if self.route == "remark3" and self.dither.n != 1:
            raise ValueError("remark3 certificates are scalar-only")
        if self.route == "corollary1" and not self.uncertainty.diagonal_hessian:
            raise ValueError("corollary1 certificates need the diagonal declaration")

    def to_json_dict(self) -> dict:
        out = {
            "domain": "continuous",
            "route": self.route,
            "delta": self.delta,
            "p": self.p,
            "epsilon_star": self.epsilon_star,
            "epsilon": self.epsilon,
            "sigma0": self.sigma0,
            "sigma": self.sigma,
            "sigma_final": self.sigma_final,
            "deltas": self.deltas.to_json_dict(),
            "ub": self.ub,
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
        return out


def envelope_ct(cert: CtCertificate, theta0_norm: float, t) -> np.ndarray:
    """Certified bound on |theta_tilde(t)| for |theta_tilde(0)| = theta0_norm.

    Constant theta0 + eps*d during the first period; afterwards an
    exponential with rate delta on top of the attractive-ball radius.
    """
    tt = np.asarray(t, dtype=float)
    eps = cert.epsilon
    d = cert.deltas.d
    if cert.route == "remark3":
        amp = abs(float(cert.dither.amplitudes[0]))
        tail = eps * d * (2.0 * amp + cert.sigma) / amp
        head = math.sqrt(cert.p)  # p == 1 for this route
    elif cert.route == "corollary1":
        tail = eps * d * (2.0 * cert.deltas.sum3 + cert.delta) / (2.0 * cert.delta)
        head = 1.0
    else:
        tail = eps * d * (2.0 * cert.deltas.sum3 * math.sqrt(cert.p) + cert.delta) / (2.0 * cert.delta)
        head = math.sqrt(cert.p)
    first = theta0_norm + eps * d
    decayed = head * np.exp(-cert.delta * (tt - eps)) * (theta0_norm + 1.5 * eps * d) + tail
    return np.where(tt < eps, first, decayed)


def certify_ct(
    uncertainty: UncertaintyModel,
    gains: GainSpec,
    dither: DitherSpec,
    sigma: float,
    sigma0: Optional[float] = None,
    route: str = "corollary1",
    epsilon: Optional[float] = None,
    lmi_cert: Optional[LmiCertificateInput] = None,
    delta_override: Optional[float] = None,
    beta_frac: float = 0.1,
) -> CtCertificate:
    """One-call certificate: period bound, decay rate and iterated ultimate bound."""
    if route not in ROUTES_CT:
        raise ValueError(f"unknown route {route!r}")
    sigma0 = uncertainty.sigma0 if sigma0 is None else float(sigma0)
    assert_hurwitz(gains, uncertainty.hessian_nominal)
    p = 1.0
    if route == "theorem1":
        if lmi_cert is None:
            lmi_cert = search_certificate(uncertainty, gains, mode="ct")
        eps_star = epsilon_star_theorem1(uncertainty, gains, dither, sigma0, sigma, lmi_cert)
        delta, p = lmi_cert.rate, lmi_cert.p
    elif route == "corollary1":
        eps_star, delta = epsilon_star_corollary1(uncertainty, gains, dither, sigma0, sigma, delta_override)
    else:
        eps_star, delta = epsilon_star_remark3(uncertainty, gains, dither, sigma0, sigma, delta_override)
    eps = eps_star if epsilon is None else float(epsilon)
    if eps > eps_star * (1 + 1e-12):
        raise InfeasibleError(f"operating period {eps} exceeds the certified bound {eps_star}")
    ub_res = ultimate_bound_ct(
        route,
        uncertainty,
        gains,
        dither,
        sigma0,
        eps,
        sigma_upper=sigma,
        beta_frac=beta_frac,
        delta_override=delta if route != "theorem1" else None,
        lmi_cert=lmi_cert,
    )
    deltas = compute_deltas_ct(uncertainty, gains, dither, sigma)
    if route == "remark3":
        # the scalar route carries its own (tighter) derivative bound
        deltas = CtDeltas(scalar_delta_ct(uncertainty, gains, dither, sigma), deltas.d1, deltas.d2, deltas.d3)
    return CtCertificate(
        route=route,
        sigma0=sigma0,
        sigma=sigma,
        delta=delta,
        p=p,
        epsilon_star=eps_star,
        epsilon=eps,
        deltas=deltas,
        ub=ub_res.ub,
        sigma_final=ub_res.sigma_final,
        uncertainty=uncertainty,
        gains=gains,
        dither=dither,
        lmi=lmi_cert,
    )
