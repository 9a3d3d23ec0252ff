"""Quadratic static maps, sinusoidal dither signals, and the uncertainty
model shared by the simulators and the certificate routines.

The map is y = q* + 0.5 (theta - theta*)' H (theta - theta*) with H
symmetric positive definite (minimization convention).  Dither vectors come
in probing/demodulation pairs S, M whose products average to the identity
over one period; `dither_identities` measures how well a given spec
satisfies the averaging identities that the certificates rely on.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

MAX_DIM = 16

_SYM_WARN_TOL = 1e-9
_SYM_HARD_TOL = 1e-12


class DimensionError(ValueError):
    pass


def _vector(x, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if v.size == 0 or v.size > MAX_DIM:
        raise DimensionError(f"{name} must have 1..{MAX_DIM} entries, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def symmetrize(m, name: str = "matrix") -> np.ndarray:
    """Return (M + M')/2, warning if the asymmetry exceeds 1e-9 relative.

    Inputs read from files carry rounding noise; anything beyond the warning
    threshold is still accepted, but the relative asymmetry must not exceed
    what a symmetric matrix plus format rounding can produce.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    scale = max(float(np.max(np.abs(a))), 1.0)
    asym = float(np.max(np.abs(a - a.T))) / scale
    if asym > _SYM_WARN_TOL:
        warnings.warn(f"{name} asymmetry {asym:.3e} exceeds {_SYM_WARN_TOL:.0e}; symmetrizing")
    return 0.5 * (a + a.T)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _sym_pd_check(h: np.ndarray, name: str) -> None:
    # Cholesky is the cheapest airtight positive-definiteness test.
    try:
        np.linalg.cholesky(h)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} is not positive definite") from None


@dataclass(frozen=True)
class QuadraticMap:
    """Ground-truth map: extremum value, extremum point, Hessian."""

    q_star: float
    theta_star: np.ndarray
    hessian: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q_star", float(self.q_star))
        ts = _vector(self.theta_star, "theta_star")
        h = symmetrize(self.hessian, "hessian")
        if h.shape[0] != ts.size:
            raise DimensionError(
                f"hessian is {h.shape[0]}x{h.shape[0]} but theta_star has {ts.size} entries"
            )
        _sym_pd_check(h, "hessian")
        object.__setattr__(self, "theta_star", _freeze(ts))
        object.__setattr__(self, "hessian", _freeze(h))

    @property
    def n(self) -> int:
        return self.theta_star.size


def evaluate_map(qmap: QuadraticMap, theta) -> float:
    """y = q* + 0.5 (theta - theta*)' H (theta - theta*)."""
    th = np.asarray(theta, dtype=float)
    if th.shape != (qmap.n,):
        raise DimensionError(f"theta has shape {th.shape}, expected ({qmap.n},)")
    d = th - qmap.theta_star
    return float(qmap.q_star + 0.5 * d @ qmap.hessian @ d)


@dataclass(frozen=True)
class UncertaintyModel:
    """What the certification side is allowed to know about the map.

    q_star_max bounds |q*|; the true Hessian is hessian_nominal + D with
    ||D|| <= kappa; h_min/h_max bracket the Hessian magnitude used by the
    closed-form routes (for the diagonal routes they must bracket the
    diagonal entries for the certified decay to be sound); sigma0 is the
    radius of the initial-error ball.  diagonal_hessian declares that the
    unknown Hessian is diagonal, unlocking the LMI-free routes.
    """

    q_star_max: float
    hessian_nominal: np.ndarray
    kappa: float
    h_min: float
    h_max: float
    sigma0: float
    diagonal_hessian: bool = False

    def __post_init__(self):
        hbar = symmetrize(self.hessian_nominal, "hessian_nominal")
        _sym_pd_check(hbar, "hessian_nominal")
        object.__setattr__(self, "hessian_nominal", _freeze(hbar))
        for name in ("q_star_max", "kappa", "h_min", "h_max", "sigma0"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.q_star_max < 0:
            raise ValueError("q_star_max must be >= 0")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if not (0 < self.h_min <= self.h_max):
            raise ValueError("need 0 < h_min <= h_max")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be > 0")
        norm_bar = float(np.linalg.norm(hbar, 2))
        if self.h_min > norm_bar + self.kappa + 1e-12:
            raise ValueError(
                f"h_min={self.h_min} exceeds ||hessian_nominal|| + kappa = {norm_bar + self.kappa}"
            )

    @property
    def n(self) -> int:
        return self.hessian_nominal.shape[0]


@dataclass(frozen=True)
class DitherSpec:
    """Sinusoidal dither: amplitudes a_i and integer frequency indices.

    Continuous domain: component i of S is a_i sin(2 pi f_i t / period)
    with positive, pairwise-distinct indices f_i and real period > 0.
    Discrete domain: a_i sin(2 pi f_i k / period) with nonzero integer
    indices, integer period T >= 2 and |2 f_i / T| <= 1.  The strict
    condition is |2 f_i / T| < 1; equality (e.g. T = 2, f = 1) makes the
    signal vanish at every integer step and is accepted with a warning
    because several benchmark certificates are quoted that way.
    """

    amplitudes: np.ndarray
    freq_indices: np.ndarray
    period: float
    domain: str = "continuous"

    def __post_init__(self):
        amps = _vector(self.amplitudes, "amplitudes")
        if np.any(amps == 0.0):
            raise ValueError("amplitudes must be nonzero")
        idx_f = np.atleast_1d(np.asarray(self.freq_indices))
        if idx_f.shape != amps.shape:
            raise DimensionError("freq_indices and amplitudes must have the same length")
        idx = idx_f.astype(int)
        if np.any(idx != idx_f):
            raise ValueError("freq_indices must be integers (irrational frequency ratios are rejected)")
        if len(set(idx.tolist())) != idx.size:
            raise ValueError("freq_indices must be pairwise distinct")
        if self.domain not in ("continuous", "discrete"):
            raise ValueError(f"domain must be 'continuous' or 'discrete', got {self.domain!r}")
        if self.domain == "continuous":
            if np.any(idx <= 0):
                raise ValueError("continuous freq_indices must be positive")
            period = float(self.period)
            if not (period > 0 and math.isfinite(period)):
                raise ValueError("continuous period must be a positive real")
        else:
            if np.any(idx == 0):
                raise ValueError("discrete freq_indices must be nonzero")
            period = int(self.period)
            if period != self.period or period < 2:
                raise ValueError("discrete period must be an integer >= 2")
            ratio = 2.0 * np.abs(idx) / period
            if np.any(ratio > 1.0 + 1e-12):
                raise ValueError("discrete indices must satisfy |2 f_i / period| <= 1")
            if np.any(np.isclose(ratio, 1.0)):
                warnings.warn(
                    "dither frequency at the Nyquist limit (|2 f / T| = 1): "
                    "the signal is identically zero on the integer grid"
                )
            mags = np.abs(idx)
            if len(set(mags.tolist())) != mags.size:
                warnings.warn(
                    "freq_indices contain an opposite-sign pair; the demodulation "
                    "identity sum(M S') = T I fails for such pairs (see dither_identities)"
                )
        object.__setattr__(self, "amplitudes", _freeze(amps))
        object.__setattr__(self, "freq_indices", _freeze(idx))
        object.__setattr__(self, "period", period)

    @property
    def n(self) -> int:
        return self.amplitudes.size

    @property
    def omega(self) -> np.ndarray:
        """Angular frequencies 2 pi f_i / period."""
        return 2.0 * np.pi * self.freq_indices / self.period


def default_dither_ct(n: int, epsilon: float, amplitudes) -> DitherSpec:
    """Continuous spec with indices 1..n (smallest distinct choice)."""
    return DitherSpec(amplitudes=amplitudes, freq_indices=np.arange(1, n + 1), period=epsilon)


def default_dither_dt(n: int, amplitudes, period: int | None = None) -> DitherSpec:
    """Discrete spec with indices 1..n; period defaults to 2n+1 so that
    |2 f_i / T| < 1 holds strictly for every component."""
    t = 2 * n + 1 if period is None else int(period)
    if t <= 2 * n:
        raise ValueError(f"period {t} too small for indices 1..{n}; need period > {2 * n}")
    return DitherSpec(amplitudes=amplitudes, freq_indices=np.arange(1, n + 1), period=t, domain="discrete")


def dither_s(spec: DitherSpec, t):
    """Probing vector S(t); component i is a_i sin(omega_i t).

    Scalar t gives an (n,) vector; a 1-D array of times gives (m, n).
    """
    tt = np.asarray(t, dtype=float)
    if tt.ndim == 0:
        return spec.amplitudes * np.sin(spec.omega * float(tt))
    return spec.amplitudes * np.sin(np.outer(tt, spec.omega))


def dither_m(spec: DitherSpec, t):
    """Demodulation vector M(t); component i is (2/a_i) sin(omega_i t)."""
    tt = np.asarray(t, dtype=float)
    if tt.ndim == 0:
        return (2.0 / spec.amplitudes) * np.sin(spec.omega * float(tt))
    return (2.0 / spec.amplitudes) * np.sin(np.outer(tt, spec.omega))


@dataclass(frozen=True)
class DitherIdentityReport:
    """Max absolute deviations of the averaging identities over one period.

    zero_mean:      each component of S (and hence M) integrates/sums to 0
    demodulation:   integral of M S' equals period * I (entrywise deviation)
    triple_product: every product of three components' sines integrates/sums to 0
    """

    zero_mean: float
    demodulation: float
    triple_product: float
    domain: str
    points_per_period: int = 0

    @property
    def worst(self) -> float:
        return max(self.zero_mean, self.demodulation, self.triple_product)

    def to_json_dict(self) -> dict:
        return {
            "zero_mean": self.zero_mean,
            "demodulation": self.demodulation,
            "triple_product": self.triple_product,
            "domain": self.domain,
            "points_per_period": self.points_per_period,
            "worst": self.worst,
        }


def _trapz(values: np.ndarray, dx: float) -> np.ndarray:
    # values sampled on a closed uniform grid, integration along axis 0
    return dx * (values.sum(axis=0) - 0.5 * (values[0] + values[-1]))


def dither_identities(spec: DitherSpec, points_per_period: int = 4096) -> DitherIdentityReport:
    """Numerically verify the averaging identities for one full period.

    Deviations are reported, never raised: a spec with an opposite-sign
    index pair is legal to simulate but shows up here with a demodulation
    deviation of order period * a_j / a_i.
    """
    n = spec.n
    if spec.domain == "continuous":
        eps = spec.period
        m = int(points_per_period)
        ts = np.linspace(0.0, eps, m + 1)
        sines = np.sin(np.outer(ts, spec.omega))          # (m+1, n)
        dx = eps / m
        zero_mean = float(np.max(np.abs(_trapz(sines, dx))))
        ms = np.einsum("ti,tj->tij", (2.0 / spec.amplitudes) * sines, spec.amplitudes * sines)
        demod = float(np.max(np.abs(_trapz(ms, dx) - eps * np.eye(n))))
        triple = 0.0
        for i in range(n):
            for j in range(i, n):
                prod2 = sines[:, i] * sines[:, j]
                for k in range(j, n):
                    dev = abs(float(_trapz(prod2 * sines[:, k], dx)))
                    triple = max(triple, dev)
        return DitherIdentityReport(zero_mean, demod, triple, "continuous", m)

    t = int(spec.period)
    zero_mean = 0.0
    demod = 0.0
    triple = 0.0
    for k0 in (0, 1, 2):  # window invariance: any T consecutive samples
        ks = np.arange(k0, k0 + t)
        sines = np.sin(np.outer(ks, spec.omega))          # (T, n)
        zero_mean = max(zero_mean, float(np.max(np.abs(sines.sum(axis=0)))))
        ms = np.einsum("ti,tj->tij", (2.0 / spec.amplitudes) * sines, spec.amplitudes * sines)
        demod = max(demod, float(np.max(np.abs(ms.sum(axis=0) - t * np.eye(n)))))
        for i in range(n):
            for j in range(i, n):
                prod2 = sines[:, i] * sines[:, j]
                for kk in range(j, n):
                    triple = max(triple, abs(float(np.sum(prod2 * sines[:, kk]))))
    return DitherIdentityReport(zero_mean, demod, triple, "discrete", t)


@dataclass(frozen=True)
class GainSpec:
    """Diagonal adaptation gain; every entry strictly negative."""

    gains: np.ndarray

    def __post_init__(self):
        g = _vector(self.gains, "gains")
        if np.any(g >= 0.0):
            raise ValueError("all gains must be strictly negative")
        object.__setattr__(self, "gains", _freeze(g))

    @property
    def n(self) -> int:
        return self.gains.size

    def matrix(self) -> np.ndarray:
        return np.diag(self.gains)
