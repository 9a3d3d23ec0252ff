"""Extremum-seeking loops on quadratic static maps: simulation and
quantitative practical-stability certificates (largest admissible dither
period, decay rate, ultimate bound) under extremum-value and Hessian
uncertainty, in continuous and discrete time."""

from escert.quadmap import (
    QuadraticMap,
    UncertaintyModel,
    DitherSpec,
    GainSpec,
    evaluate_map,
    dither_s,
    dither_m,
    dither_identities,
)
from escert.sim_ct import CtSimConfig, Trajectory, simulate_ct, compute_transformation_ct, residual_ct
from escert.sim_dt import DtSimConfig, DtTrajectory, simulate_dt, compute_transformation_dt, residual_dt
from escert.cert_ct import CtCertificate, certify_ct
from escert.cert_dt import DtCertificate, certify_dt

__all__ = [
    "QuadraticMap",
    "UncertaintyModel",
    "DitherSpec",
    "GainSpec",
    "evaluate_map",
    "dither_s",
    "dither_m",
    "dither_identities",
    "CtSimConfig",
    "Trajectory",
    "simulate_ct",
    "compute_transformation_ct",
    "residual_ct",
    "DtSimConfig",
    "DtTrajectory",
    "simulate_dt",
    "compute_transformation_dt",
    "residual_dt",
    "CtCertificate",
    "certify_ct",
    "DtCertificate",
    "certify_dt",
]

__version__ = "0.1.0"
