"""Interconnection strategies, Cramer-Rao bounds and recursive ML estimators for
internal self-calibration of large antenna arrays."""

from .kernels import BACKEND
from .topology import (
    CalibrationPathTable,
    InterconnectionStrategy,
    build_combined,
    build_daisy_chain,
    build_star,
    compute_paths,
    enumerate_spanning_trees,
    validate_effective,
)
from .rfmodel import ChannelModel, MeasurementSet, RfGainSet, generate_gains, snr_to_noise_variance, synthesize_measurements
from .fisher import (
    CrlbReport,
    FisherMatrix,
    apply_jacobian,
    build_fim,
    crlb_closed_form,
    crlb_numerical,
    elementary_update,
    star_rewiring_sequence,
)
from .estimators import (
    FullCalibrationEstimate,
    RelativeCalibrationEstimate,
    estimate_full,
    estimate_relative,
    residual_full,
    residual_relative,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CalibrationPathTable",
    "InterconnectionStrategy",
    "build_combined",
    "build_daisy_chain",
    "build_star",
    "compute_paths",
    "enumerate_spanning_trees",
    "validate_effective",
    "ChannelModel",
    "MeasurementSet",
    "RfGainSet",
    "generate_gains",
    "snr_to_noise_variance",
    "synthesize_measurements",
    "CrlbReport",
    "FisherMatrix",
    "apply_jacobian",
    "build_fim",
    "crlb_closed_form",
    "crlb_numerical",
    "elementary_update",
    "star_rewiring_sequence",
    "FullCalibrationEstimate",
    "RelativeCalibrationEstimate",
    "estimate_full",
    "estimate_relative",
    "residual_full",
    "residual_relative",
    "__version__",
]
