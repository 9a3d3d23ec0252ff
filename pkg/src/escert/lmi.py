"""Small dense symmetric linear-algebra kernel and the decay-rate LMI.

Everything here is sized for the loop dimensions this package supports
(n <= 16, LMI blocks up to 32x32): a cyclic Jacobi eigensolver, a dense
Lyapunov solve over the n(n+1)/2 symmetric unknowns, a Pade(6)
scaling-and-squaring matrix exponential, and feasibility verdicts for the
block matrix that certifies a decay rate under norm-bounded Hessian
uncertainty.  No external solver: the inequalities have scalar unknowns
once the quadratic-form matrix is seeded, so feasibility is an eigenvalue
sign check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from escert.errors import InfeasibleError
from escert.quadmap import GainSpec, UncertaintyModel, symmetrize

_OFFDIAG_TOL = 1e-12
_MARGIN_TOL = 1e-9

_ZETA_LO = 1e-6
_ZETA_HI = 1e6


@njit(cache=True)
def _jacobi_kernel(a, v, rel_tol, max_sweeps):
    n = a.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    scale = math.sqrt(scale)
    if scale == 0.0:
        return 0
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        if math.sqrt(off) <= rel_tol * scale:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-300:
                    t = 0.0
                elif abs(apq) * 1e15 < abs(diff):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                app = a[p, p]
                a[p, p] = app - t * apq
                a[q, q] = a[q, q] + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    if i != p and i != q:
                        aip = a[i, p]
                        aiq = a[i, q]
                        a[i, p] = aip - s * (aiq + tau * aip)
                        a[p, i] = a[i, p]
                        a[i, q] = aiq + s * (aip - tau * aiq)
                        a[q, i] = a[i, q]
                for i in range(n):
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = vip - s * (viq + tau * vip)
                    v[i, q] = viq + s * (vip - tau * viq)
    return max_sweeps


def jacobi_eigh(m, rel_tol: float = _OFFDIAG_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below rel_tol times
    the matrix norm.  Returns eigenvalues ascending and the matching
    eigenvector columns.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    if n > 32:
        raise ValueError("eigensolver is sized for blocks up to 32x32")
    asym = float(np.max(np.abs(a - a.T))) if n else 0.0
    scale = max(float(np.max(np.abs(a))), 1.0) if n else 1.0
    if asym > 1e-10 * scale:
        raise ValueError(f"matrix is not symmetric (asymmetry {asym:.3e})")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    _jacobi_kernel(a, v, rel_tol, 64)
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def sym_eigs(m, rel_tol: float = _OFFDIAG_TOL) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending."""
    return jacobi_eigh(m, rel_tol)[0]


def spectral_norm(m) -> float:
    """Induced 2-norm; closed form for n <= 2, Jacobi otherwise."""
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        return abs(float(a))
    if a.shape == (1,) or a.shape == (1, 1):
        return abs(float(a.reshape(())))
    g = a.T @ a
    if g.shape == (2, 2):
        t = 0.5 * (g[0, 0] + g[1, 1])
        d = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
        lam = t + math.sqrt(max(t * t - d, 0.0))
        return math.sqrt(max(lam, 0.0))
    return math.sqrt(max(float(sym_eigs(g)[-1]), 0.0))


def gain_product_eigs(gains: GainSpec, hessian) -> np.ndarray:
    """Eigenvalues of K H for diagonal negative K and symmetric H, ascending.

    K H is similar to -sqrt(-K) H sqrt(-K), so the spectrum is real and the
    Hurwitz check reduces to a symmetric eigenvalue problem.
    """
    h = symmetrize(hessian, "hessian")
    d = np.sqrt(-gains.gains)
    s = (d[:, None] * h) * d[None, :]
    return -sym_eigs(s)[::-1]


def assert_hurwitz(gains: GainSpec, hessian, label: str = "gain * hessian") -> None:
    top = float(gain_product_eigs(gains, hessian)[-1])
    if top >= 0.0:
        raise ValueError(f"{label} is not Hurwitz (max eigenvalue real part {top:.3e})")


def solve_lyapunov(a, q) -> np.ndarray:
    """Solve A' P + P A = -Q for symmetric P > 0, Q > 0, A Hurwitz.

    Dense solve over the n(n+1)/2 upper-triangle unknowns.  A singular
    system or an indefinite/negative solution means A was not Hurwitz.
    """
    a = np.asarray(a, dtype=float)
    q = symmetrize(q, "Q")
    n = a.shape[0]
    if a.shape != (n, n) or q.shape != (n, n):
        raise ValueError("A and Q must be square with matching shapes")
    pairs = [(r, s) for r in range(n) for s in range(r, n)]
    index = {pair: i for i, pair in enumerate(pairs)}
    m = len(pairs)
    sys_mat = np.zeros((m, m))
    rhs = np.empty(m)
    for row, (r, s) in enumerate(pairs):
        rhs[row] = -q[r, s]
        for k in range(n):
            # (A'P)_{rs} = sum_k A_{kr} P_{ks};  (PA)_{rs} = sum_k P_{rk} A_{ks}
            sys_mat[row, index[(min(k, s), max(k, s))]] += a[k, r]
            sys_mat[row, index[(min(r, k), max(r, k))]] += a[k, s]
    try:
        sol = np.linalg.solve(sys_mat, rhs)
    except np.linalg.LinAlgError:
        raise InfeasibleError("Lyapunov system singular: A is not Hurwitz") from None
    p = np.empty((n, n))
    for (r, s), i in index.items():
        p[r, s] = sol[i]
        p[s, r] = sol[i]
    if float(sym_eigs(p)[0]) <= 0.0:
        raise InfeasibleError("Lyapunov solution not positive definite: A is not Hurwitz")
    return p


def normalize_p(p) -> tuple[np.ndarray, float]:
    """Rescale P > 0 so its spectrum sits in [1, p]; returns (P/lam_min, p)."""
    p = symmetrize(p, "P")
    w = sym_eigs(p)
    lo, hi = float(w[0]), float(w[-1])
    if lo <= 0.0:
        raise ValueError("P must be positive definite")
    return p / lo, hi / lo


# Pade(6) numerator coefficients for exp; denominator uses alternating signs.
_PADE6 = (1.0, 1 / 2, 5 / 44, 1 / 66, 1 / 792, 1 / 15840, 1 / 665280)


def matrix_exp(m) -> np.ndarray:
    """exp(M) by scaling-and-squaring with a diagonal Pade(6) approximant."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    norm = float(np.max(np.abs(a).sum(axis=1))) if a.size else 0.0
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0)
    a = a / (2.0 ** squarings)
    n = a.shape[0]
    powers = [np.eye(n)]
    for _ in range(6):
        powers.append(powers[-1] @ a)
    num = sum(c * pk for c, pk in zip(_PADE6, powers))
    den = sum(c * ((-1) ** k) * pk for k, (c, pk) in enumerate(zip(_PADE6, powers)))
    x = np.linalg.solve(den, num)
    for _ in range(squarings):
        x = x @ x
    return x


@dataclass(frozen=True)
class LmiCertificateInput:
    """A feasible point of the decay-rate LMI, normalized so I <= P <= p I.

    rate is the continuous decay delta, or the discrete lambda when
    epsilon_star is set (the discrete block matrix depends on the dither
    period bound, so the verdict is tied to that epsilon).
    """

    p_matrix: np.ndarray
    p: float
    zeta: float
    rate: float
    uncertainty: UncertaintyModel
    gains: GainSpec
    epsilon_star: Optional[float] = None
    margin: float = 0.0

    def __post_init__(self):
        pm = symmetrize(self.p_matrix, "P")
        w = sym_eigs(pm)
        if w[0] < 1.0 - 1e-9 or w[-1] > self.p + 1e-9 * max(self.p, 1.0):
            raise ValueError("P must be normalized with spectrum in [1, p]")
        pm = pm.copy()
        pm.flags.writeable = False
        object.__setattr__(self, "p_matrix", pm)
        for name in ("p", "zeta", "rate"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.zeta <= 0.0:
            raise ValueError("zeta must be > 0")
        if self.rate <= 0.0:
            raise ValueError("rate must be > 0")


@dataclass(frozen=True)
class Phi1Verdict:
    feasible: bool
    margin: float  # -lambda_max of the assembled block matrix


def _phi1_ct_matrix(p_matrix, zeta, rate, uncertainty, gains) -> np.ndarray:
    n = uncertainty.n
    kmat = gains.matrix()
    a = kmat @ uncertainty.hessian_nominal
    phi11 = a.T @ p_matrix + p_matrix @ a + 2.0 * rate * p_matrix
    phi11 += zeta * uncertainty.kappa ** 2 * np.eye(n)
    phi12 = p_matrix @ kmat
    phi22 = -zeta * np.eye(n)
    return np.block([[phi11, phi12], [phi12.T, phi22]])


def _phi1_dt_matrix(p_matrix, zeta, rate, eps_star, uncertainty, gains) -> np.ndarray:
    n = uncertainty.n
    lmat = gains.matrix()
    a = lmat @ uncertainty.hessian_nominal
    phi11 = a.T @ p_matrix + p_matrix @ a + eps_star * (a.T @ p_matrix @ a)
    phi11 += 2.0 * rate * p_matrix + zeta * uncertainty.kappa ** 2 * np.eye(n)
    phi12 = p_matrix @ lmat + eps_star * (a.T @ p_matrix @ lmat)
    phi22 = -zeta * np.eye(n) + eps_star * (lmat.T @ p_matrix @ lmat)
    return np.block([[phi11, phi12], [phi12.T, phi22]])


def check_phi1_ct(inp: LmiCertificateInput, margin_tol: float = _MARGIN_TOL) -> Phi1Verdict:
    """Feasibility of the continuous decay-rate block inequality."""
    phi = _phi1_ct_matrix(inp.p_matrix, inp.zeta, inp.rate, inp.uncertainty, inp.gains)
    margin = -float(sym_eigs(phi)[-1])
    return Phi1Verdict(margin > margin_tol, margin)


def check_phi1_dt(inp: LmiCertificateInput, margin_tol: float = _MARGIN_TOL) -> Phi1Verdict:
    """Feasibility of the discrete decay-rate block inequality at inp.epsilon_star."""
    if inp.epsilon_star is None:
        raise ValueError("discrete verdict needs epsilon_star on the certificate input")
    if inp.rate * inp.epsilon_star >= 1.0:
        raise ValueError("need rate * epsilon_star < 1")
    phi = _phi1_dt_matrix(inp.p_matrix, inp.zeta, inp.rate, inp.epsilon_star, inp.uncertainty, inp.gains)
    margin = -float(sym_eigs(phi)[-1])
    return Phi1Verdict(margin > margin_tol, margin)


def _best_zeta_margin(build_phi, grid_points: int = 25, refine_iters: int = 48) -> tuple[float, float]:
    """Maximize the feasibility margin over zeta on a log scale.

    Coarse log grid to bracket the optimum (robust when the margin is not
    unimodal), then golden-section refinement inside the bracket.
    """
    logs = np.linspace(math.log(_ZETA_LO), math.log(_ZETA_HI), grid_points)
    margins = [-float(sym_eigs(build_phi(math.exp(lz)))[-1]) for lz in logs]
    best = int(np.argmax(margins))
    lo = logs[max(best - 1, 0)]
    hi = logs[min(best + 1, grid_points - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1 = -float(sym_eigs(build_phi(math.exp(x1)))[-1])
    f2 = -float(sym_eigs(build_phi(math.exp(x2)))[-1])
    for _ in range(refine_iters):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = -float(sym_eigs(build_phi(math.exp(x1)))[-1])
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = -float(sym_eigs(build_phi(math.exp(x2)))[-1])
    zeta = math.exp(x1 if f1 >= f2 else x2)
    return zeta, max(f1, f2, margins[best])


def _candidate_p_matrices(a: np.ndarray) -> list[tuple[np.ndarray, float]]:
    cands: list[tuple[np.ndarray, float]] = []
    cands.append(normalize_p(solve_lyapunov(a, np.eye(a.shape[0]))))
    sym_a = 0.5 * (a + a.T)
    if float(sym_eigs(sym_a)[-1]) < 0.0:
        # symmetric part already decays: the identity is a valid (and
        # perfectly conditioned) quadratic form
        cands.append((np.eye(a.shape[0]), 1.0))
    return cands


def search_certificate(
    uncertainty: UncertaintyModel,
    gains: GainSpec,
    mode: str = "ct",
    epsilon_star_hint: Optional[float] = None,
    rate_rel_tol: float = 1e-4,
) -> LmiCertificateInput:
    """Largest certified decay rate over the seeded quadratic-form family.

    Seeds P from the dense Lyapunov solve (plus the identity when the
    symmetric part of K Hbar already decays), normalizes, then bisects the
    rate with an inner zeta search maximizing the feasibility margin.
    Richer P families are out of scope; the returned certificate is the
    best over the seeds.
    """
    if mode not in ("ct", "dt"):
        raise ValueError("mode must be 'ct' or 'dt'")
    if mode == "dt" and epsilon_star_hint is None:
        epsilon_star_hint = 0.0
    assert_hurwitz(gains, uncertainty.hessian_nominal)
    a = gains.matrix() @ uncertainty.hessian_nominal
    rate_upper = 2.0 * float(np.max(np.abs(sym_eigs(0.5 * (a + a.T)))))
    if mode == "dt" and epsilon_star_hint and epsilon_star_hint > 0.0:
        rate_upper = min(rate_upper, (1.0 - 1e-9) / epsilon_star_hint)

    def margin_at(p_matrix, rate):
        if mode == "ct":
            build = lambda z: _phi1_ct_matrix(p_matrix, z, rate, uncertainty, gains)
        else:
            build = lambda z: _phi1_dt_matrix(
                p_matrix, z, rate, epsilon_star_hint, uncertainty, gains
            )
        return _best_zeta_margin(build)

    best: Optional[LmiCertificateInput] = None
    for p_matrix, p in _candidate_p_matrices(a):
        lo = rate_upper * 1e-9
        zeta_lo, m_lo = margin_at(p_matrix, lo)
        if m_lo <= _MARGIN_TOL:
            continue
        zeta_hi, m_hi = margin_at(p_matrix, rate_upper)
        if m_hi > _MARGIN_TOL:
            rate, zeta, margin = rate_upper, zeta_hi, m_hi
        else:
            hi = rate_upper
            zeta, margin = zeta_lo, m_lo
            while hi - lo > rate_rel_tol * hi:
                mid = 0.5 * (lo + hi)
                zmid, mmid = margin_at(p_matrix, mid)
                if mmid > _MARGIN_TOL:
                    lo, zeta, margin = mid, zmid, mmid
                else:
                    hi = mid
            rate = lo
        cand = LmiCertificateInput(
            p_matrix=p_matrix,
            p=p,
            zeta=zeta,
            rate=rate,
            uncertainty=uncertainty,
            gains=gains,
            epsilon_star=epsilon_star_hint if mode == "dt" else None,
            margin=margin,
        )
        if best is None or cand.rate > best.rate or (cand.rate == best.rate and cand.p < best.p):
            best = cand
    if best is None:
        raise InfeasibleError("decay-rate LMI infeasible even as the rate tends to zero")
    return best
