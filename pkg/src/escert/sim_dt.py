"""Discrete-time seeking recursion and its exact transformation diagnostics.

The recursion theta_hat(k+1) = theta_hat(k) + eps L M(k) y(k) is iterated
exactly (no discretization error), so the windowed transformation to
z(k+1) = (I + eps L H) z(k) + eps L H g(k) - eps y1(k) - eps y2(k) is an
algebraic identity whenever the dither satisfies the averaging identities;
`residual_dt` is the rounding-level check of that fact.  All window sums
run over the literal index ranges of the transformation, no reindexing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from escert.errors import SimulationDiverged
from escert.quadmap import DitherSpec, GainSpec, QuadraticMap, dither_m, dither_s


@dataclass(frozen=True)
class DtSimConfig:
    map: QuadraticMap
    dither: DitherSpec
    gains: GainSpec
    epsilon: float
    theta_hat0: np.ndarray
    k_end: int

    def __post_init__(self):
        if self.dither.domain != "discrete":
            raise ValueError("DtSimConfig needs a discrete dither spec")
        n = self.map.n
        if not (self.dither.n == n == self.gains.n):
            raise ValueError("map, dither and gains dimensions disagree")
        th0 = np.asarray(self.theta_hat0, dtype=float).reshape(-1)
        if th0.size != n:
            raise ValueError(f"theta_hat0 must have {n} entries")
        th0 = th0.copy()
        th0.flags.writeable = False
        object.__setattr__(self, "theta_hat0", th0)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "k_end", int(self.k_end))
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must lie in (0, 1)")
        if self.k_end < self.dither.period - 1:
            raise ValueError("k_end must be at least period - 1")


@dataclass
class DtTrajectory:
    """theta_bar[j] = theta_tilde[j+1] - theta_tilde[j], exactly.  The
    diagnostic arrays are NaN before index period - 1."""

    theta_hat: np.ndarray
    theta_tilde: np.ndarray
    theta_bar: np.ndarray
    y: np.ndarray
    epsilon: float
    period: int
    g: Optional[np.ndarray] = None
    y1: Optional[np.ndarray] = None
    y2: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.theta_hat.shape[1]

    @property
    def k_end(self) -> int:
        return self.theta_hat.shape[0] - 1

    def theta_tilde_norm(self) -> np.ndarray:
        return np.linalg.norm(self.theta_tilde, axis=1)

    def has_diagnostics(self) -> bool:
        return self.g is not None

    def write_csv(self, path) -> None:
        steps = np.arange(self.theta_hat.shape[0])
        cols = [steps.astype(float)]
        header = ["k"]
        for i in range(self.n):
            cols.append(self.theta_hat[:, i])
            header.append(f"theta_hat_{i + 1}")
        cols.append(self.theta_tilde_norm())
        header.append("theta_tilde_norm")
        cols.append(self.y)
        header.append("y")
        if self.has_diagnostics():
            for name, arr in (("G_norm", self.g), ("Y1_norm", self.y1), ("Y2_norm", self.y2), ("z_norm", self.z)):
                cols.append(np.linalg.norm(arr, axis=1))
                header.append(name)
        data = np.column_stack(cols)
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in data:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def simulate_dt(config: DtSimConfig) -> DtTrajectory:
    """Iterate the recursion for k = 0..k_end."""
    n = config.map.n
    k_end = config.k_end
    th = np.empty((k_end + 1, n))
    y = np.empty(k_end + 1)
    th[0] = config.theta_hat0
    lg = config.gains.gains
    eps = config.epsilon
    hess = config.map.hessian
    tstar = config.map.theta_star
    qstar = config.map.q_star
    steps = np.arange(k_end + 1)
    s_all = dither_s(config.dither, steps)
    m_all = dither_m(config.dither, steps)
    for k in range(k_end + 1):
        d = th[k] + s_all[k] - tstar
        y[k] = qstar + 0.5 * d @ hess @ d
        if k == k_end:
            break
        th[k + 1] = th[k] + eps * lg * m_all[k] * y[k]
        if not np.all(np.isfinite(th[k + 1])):
            raise SimulationDiverged(k + 1)
    tilde = th - tstar
    return DtTrajectory(
        theta_hat=th,
        theta_tilde=tilde,
        theta_bar=tilde[1:] - tilde[:-1],
        y=y,
        epsilon=eps,
        period=int(config.dither.period),
    )


def compute_transformation_dt(
    traj: DtTrajectory, dither: DitherSpec, gains: GainSpec, qmap: QuadraticMap
) -> DtTrajectory:
    """Attach the exact window sums g, y1, y2 and z for k >= period - 1."""
    t = int(dither.period)
    k_end = traj.k_end
    n = traj.n
    hess = qmap.hessian
    steps = np.arange(k_end + 1)
    lm = gains.gains * dither_m(dither, steps)
    s_all = dither_s(dither, steps)
    tilde = traj.theta_tilde
    bar = traj.theta_bar
    g = np.full((k_end + 1, n), np.nan)
    y1 = np.full((k_end + 1, n), np.nan)
    y2 = np.full((k_end + 1, n), np.nan)
    for k in range(t - 1, k_end + 1):
        g_acc = np.zeros(n)
        y1_acc = np.zeros(n)
        y2_acc = np.zeros(n)
        for i in range(k - t + 1, k):
            for j in range(i, k):
                g_acc += bar[j]
                y1_acc += lm[i] * ((tilde[k] + tilde[i]) @ hess @ bar[j])
                y2_acc += lm[i] * (s_all[i] @ hess @ bar[j])
        g[k] = g_acc / t
        y1[k] = y1_acc / (2.0 * t)
        y2[k] = y2_acc / t
    z = tilde - g
    return replace(traj, g=g, y1=y1, y2=y2, z=z)


def residual_dt(traj: DtTrajectory, gains: GainSpec, qmap: QuadraticMap, epsilon: float) -> np.ndarray:
    """Norm of z(k+1) - [(I + eps L H) z(k) + eps L H g(k) - eps y1(k) - eps y2(k)].

    Rounding-level for any trajectory whose dither satisfies the averaging
    identities; NaN outside [period - 1, k_end - 1].
    """
    if not traj.has_diagnostics():
        raise ValueError("run compute_transformation_dt first")
    t = traj.period
    k_end = traj.k_end
    lh = gains.matrix() @ qmap.hessian
    res = np.full(k_end + 1, np.nan)
    lo, hi = t - 1, k_end
    step = (
        traj.z[lo:hi]
        + epsilon * (traj.z[lo:hi] + traj.g[lo:hi]) @ lh.T
        - epsilon * traj.y1[lo:hi]
        - epsilon * traj.y2[lo:hi]
    )
    res[lo:hi] = np.linalg.norm(traj.z[lo + 1 : hi + 1] - step, axis=1)
    return res
