"""Line-parameter estimation and instrument-transformer calibration over PMU-monitored trees."""

from .grid import (Branch, Bus, ConnectedTree, ITClassSpec, IT_CLASSES, LineParams, RatioError,
                   RqmLocation, it_class, path_finder, sample_ratio_error)
from .harness import AreReport, are, field_consistency, run_campaign, sweep
from .ibslic import CfrEstimate, CorrectionFactorSet, average_rqm_branch_factors, ib_slic
from .placement import rqm_placement
from .quantizer import QuantizationConfig, f_w, injectivity_check, quantize, sqrt_w
from .regression import RegressionSystem, build_system
from .swslic import SystemEstimate, branch_correction_factors, compute_lambda, estimate_rho, sw_slic
from .synth import (BranchMeasurements, NoiseConfig, SynthConfig, TrajectoryProfile, corrupt,
                    generate_trajectories, synthesize_campaign, true_branch_currents)
from .tls import TlsSolution, tls_solve

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "Bus",
    "ConnectedTree",
    "ITClassSpec",
    "IT_CLASSES",
    "LineParams",
    "RatioError",
    "RqmLocation",
    "it_class",
    "path_finder",
    "sample_ratio_error",
    "AreReport",
    "are",
    "field_consistency",
    "run_campaign",
    "sweep",
    "CfrEstimate",
    "CorrectionFactorSet",
    "average_rqm_branch_factors",
    "ib_slic",
    "rqm_placement",
    "QuantizationConfig",
    "f_w",
    "injectivity_check",
    "quantize",
    "sqrt_w",
    "RegressionSystem",
    "build_system",
    "SystemEstimate",
    "branch_correction_factors",
    "compute_lambda",
    "estimate_rho",
    "sw_slic",
    "BranchMeasurements",
    "NoiseConfig",
    "SynthConfig",
    "TrajectoryProfile",
    "corrupt",
    "generate_trajectories",
    "synthesize_campaign",
    "true_branch_currents",
    "TlsSolution",
    "tls_solve",
]
