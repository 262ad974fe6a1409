"""Recursive maximum-likelihood estimators for full and relative calibration on tree strategies.

The single-measurement-set functions walk the calibration paths level by
level in plain Python. The ``*_batch`` functions do the same over many
trials at once through :mod:`selfcal.kernels` and are what the Monte Carlo
harness uses.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateMeasurementError, PropagationSingularityError, StructuralInputError
from .rfmodel import MeasurementSet, _pairs
from .topology import CalibrationPathTable, InterconnectionStrategy

SINGULARITY_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class FullCalibrationEstimate:
    alpha_hat: np.ndarray
    beta_hat: np.ndarray
    reference: int

    def alpha(self, m: int) -> complex:
        return complex(self.alpha_hat[m - 1])

    def beta(self, m: int) -> complex:
        return complex(self.beta_hat[m - 1])

    def to_dict(self) -> dict:
        return {
            "mode": "full",
            "reference": self.reference,
            "alpha": {str(m + 1): v for m, v in enumerate(_pairs(self.alpha_hat))},
            "beta": {str(m + 1): v for m, v in enumerate(_pairs(self.beta_hat))},
        }


@dataclass(frozen=True, eq=False)
class RelativeCalibrationEstimate:
    c_hat: np.ndarray
    reference: int

    def c(self, m: int) -> complex:
        return complex(self.c_hat[m - 1])

    def to_dict(self) -> dict:
        return {
            "mode": "relative",
            "reference": self.reference,
            "c": {str(m + 1): v for m, v in enumerate(_pairs(self.c_hat))},
        }


def dumps_estimate(estimate) -> str:
    return json.dumps(estimate.to_dict(), indent=2, sort_keys=True)


def _check_alignment(measurements: MeasurementSet, paths: CalibrationPathTable) -> None:
    s = measurements.strategy
    if s.antenna_count != paths.antenna_count or s.reference != paths.reference:
        raise StructuralInputError("measurement set and path table disagree on M or the reference antenna")
    for m, p in paths.parent.items():
        if not s.adjacency[m - 1, p - 1]:
            raise StructuralInputError(f"path table uses line ({m}, {p}) which is not interconnected")


def estimate_full(
    measurements: MeasurementSet,
    paths: CalibrationPathTable,
    known: tuple[complex, complex],
    h: complex,
) -> FullCalibrationEstimate:
    """Recover every alpha_m and beta_m from the reference outward along the calibration paths."""
    _check_alignment(measurements, paths)
    if h == 0:
        raise ValueError("line gain h must be nonzero")
    alpha_f, beta_f = complex(known[0]), complex(known[1])
    tiny_a = SINGULARITY_RTOL * abs(alpha_f)
    tiny_b = SINGULARITY_RTOL * abs(beta_f)
    M, f = paths.antenna_count, paths.reference
    alpha_hat = np.zeros(M, dtype=np.complex128)
    beta_hat = np.zeros(M, dtype=np.complex128)
    alpha_hat[f - 1], beta_hat[f - 1] = alpha_f, beta_f
    Y = measurements.Y
    for m, p in paths.order():
        bp, ap = beta_hat[p - 1], alpha_hat[p - 1]
        if abs(bp) <= tiny_b or abs(ap) <= tiny_a:
            raise PropagationSingularityError(
                f"estimate at antenna {p} is ~0 while resolving antenna {m} (path {_path(paths, m)})"
            )
        alpha_hat[m - 1] = Y[p - 1, m - 1] / (h * bp)
        beta_hat[m - 1] = Y[m - 1, p - 1] / (h * ap)
    return FullCalibrationEstimate(alpha_hat, beta_hat, f)


def estimate_relative(
    measurements: MeasurementSet,
    paths: CalibrationPathTable,
    known: complex,
) -> RelativeCalibrationEstimate:
    """Recover c_m = beta_m / alpha_m by chaining measurement ratios; needs no line gains."""
    _check_alignment(measurements, paths)
    M, f = paths.antenna_count, paths.reference
    c_hat = np.zeros(M, dtype=np.complex128)
    c_hat[f - 1] = known
    Y = measurements.Y
    for m, p in paths.order():
        denom = Y[p - 1, m - 1]
        if denom == 0:
            raise DegenerateMeasurementError(f"measurement y[{p},{m}] is zero (path {_path(paths, m)})")
        c_hat[m - 1] = Y[m - 1, p - 1] / denom * c_hat[p - 1]
    return RelativeCalibrationEstimate(c_hat, f)


def _path(paths: CalibrationPathTable, m: int) -> str:
    hops = [m]
    while hops[-1] != paths.reference:
        hops.append(paths.parent[hops[-1]])
    return "-".join(map(str, hops))


def residual_full(
    estimate: FullCalibrationEstimate,
    measurements: MeasurementSet,
    strategy: InterconnectionStrategy | None = None,
    h: complex | None = None,
) -> float:
    """Squared Frobenius misfit ``sum |y_pq - h beta_p alpha_q|^2`` over interconnected pairs."""
    strategy = strategy or measurements.strategy
    h = measurements.channel.h if h is None else h
    p, q = np.nonzero(strategy.adjacency)
    model = h * estimate.beta_hat[p] * estimate.alpha_hat[q]
    return float(np.sum(np.abs(measurements.Y[p, q] - model) ** 2))


def residual_relative(
    estimate: RelativeCalibrationEstimate,
    measurements: MeasurementSet,
    strategy: InterconnectionStrategy | None = None,
) -> float:
    """``min over symmetric Psi`` of ``sum |y_pq - c_p psi_pq|^2``, evaluated in closed form per line."""
    strategy = strategy or measurements.strategy
    edges = np.asarray(strategy.edges, dtype=np.int64) - 1
    p, q = edges[:, 0], edges[:, 1]
    c = estimate.c_hat
    Y = measurements.Y
    num = np.abs(Y[p, q] * c[q] - Y[q, p] * c[p]) ** 2
    return float(np.sum(num / (np.abs(c[p]) ** 2 + np.abs(c[q]) ** 2)))


def estimate_full_batch(paths: CalibrationPathTable, y_down, y_up, alpha_f, beta_f, h):
    """Batched full calibration. ``y_down[:, k]`` = y(parent_k, child_k), ``y_up`` the reverse.

    Columns follow ``paths.order()``. Returns ``(alpha_hat, beta_hat, bad)``;
    rows flagged in ``bad`` hit a singular propagation step and hold garbage.
    """
    children, parents = paths.order_arrays()
    tiny_a = SINGULARITY_RTOL * float(np.min(np.abs(alpha_f)))
    tiny_b = SINGULARITY_RTOL * float(np.min(np.abs(beta_f)))
    return kernels.full_recursion(
        children, parents, y_down, y_up, alpha_f, beta_f, complex(h),
        paths.reference - 1, paths.antenna_count, tiny_a, tiny_b,
    )


def estimate_relative_batch(paths: CalibrationPathTable, y_down, y_up, c_f):
    children, parents = paths.order_arrays()
    return kernels.relative_recursion(
        children, parents, y_down, y_up, c_f, paths.reference - 1, paths.antenna_count
    )
