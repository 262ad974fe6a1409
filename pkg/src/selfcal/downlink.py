"""TDD downlink with reciprocity calibration: DL channel estimates, MF/ZF precoding, spectral efficiency."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficientError, SingularCompensationError
from .estimators import (
    FullCalibrationEstimate,
    RelativeCalibrationEstimate,
    estimate_full_batch,
    estimate_relative_batch,
)
from .rfmodel import ChannelModel, RfGainSet, complex_normal, edge_measurements, random_phase_gains, snr_to_noise_variance
from .topology import compute_paths, parse_strategy_spec

CSV_COLUMNS = ["strategy", "scheme", "calibration_snr_db", "avg_sum_se", "stderr", "draws"]
BASELINES = ("perfect", "uncalibrated")


@dataclass(frozen=True, eq=False)
class SystemChannels:
    """Physical channel plus BS and MS RF gains (diagonals stored as vectors)."""

    H_phy: np.ndarray
    t_bs: np.ndarray
    r_bs: np.ndarray
    t_ms: np.ndarray
    r_ms: np.ndarray

    @classmethod
    def draw(cls, rng: np.random.Generator, K: int, gains: RfGainSet, t_ms=None, r_ms=None) -> "SystemChannels":
        H = complex_normal(rng, (K, gains.M), 1.0)
        ones = np.ones(K, dtype=np.complex128)
        return cls(H, gains.alpha, gains.beta,
                   ones if t_ms is None else np.asarray(t_ms, dtype=np.complex128),
                   ones if r_ms is None else np.asarray(r_ms, dtype=np.complex128))

    @property
    def K(self) -> int:
        return self.H_phy.shape[0]

    @property
    def H_dl(self) -> np.ndarray:
        """K x M: R_MS H_PHY T_BS."""
        return self.r_ms[:, None] * self.H_phy * self.t_bs[None, :]

    @property
    def H_ul(self) -> np.ndarray:
        """M x K, with H_UL^T = T_MS H_PHY R_BS."""
        return (self.t_ms[:, None] * self.H_phy * self.r_bs[None, :]).T


def estimate_dl_channel(H_ul: np.ndarray, calibration, gains: RfGainSet | None = None) -> np.ndarray:
    """DL channel estimate from the UL channel.

    ``calibration`` is a full or relative estimate, ``"none"`` (plain
    transpose) or ``"perfect"`` (exact compensation with the true ``gains``).
    """
    Ht = np.asarray(H_ul).T
    if calibration is None or calibration == "none":
        return Ht.copy()
    if isinstance(calibration, str) and calibration == "perfect":
        if gains is None:
            raise ValueError("perfect calibration needs the true gain set")
        return Ht * (gains.alpha / gains.beta)[None, :]
    if isinstance(calibration, FullCalibrationEstimate):
        comp_num, comp_den = calibration.alpha_hat, calibration.beta_hat
    elif isinstance(calibration, RelativeCalibrationEstimate):
        comp_num, comp_den = np.ones_like(calibration.c_hat), calibration.c_hat
    else:
        raise TypeError(f"unsupported calibration {calibration!r}")
    if np.any(comp_den == 0):
        bad = [int(i) + 1 for i in np.flatnonzero(comp_den == 0)]
        raise SingularCompensationError(f"zero calibration coefficient at antennas {bad}")
    return Ht * (comp_num / comp_den)[None, :]


def precode(H_hat: np.ndarray, scheme: str) -> tuple[np.ndarray, float]:
    """Precoder ``W`` (M x K) and its power normaliser ``gamma = Tr(W^H W)``."""
    scheme = scheme.lower()
    if scheme == "mf":
        W = H_hat.conj().T
    elif scheme == "zf":
        gram = H_hat @ H_hat.conj().T
        if np.linalg.cond(gram) > 1e12:
            raise RankDeficientError("ZF Gram matrix is rank deficient")
        W = H_hat.conj().T @ np.linalg.inv(gram)
    else:
        raise ValueError(f"unknown precoding scheme {scheme!r}")
    return W, float(np.real(np.trace(W.conj().T @ W)))


@dataclass
class PrecodingReport:
    scheme: str
    se_per_user: np.ndarray
    sum_se: float
    gamma: float


def spectral_efficiency(H_dl_true: np.ndarray, W: np.ndarray, gamma: float, noise_var: float = 1.0,
                        scheme: str = "") -> PrecodingReport:
    """Per-user log2(1 + SINR) with the diagonal of H W as signal and off-diagonals as interference."""
    G = H_dl_true @ W
    power = np.abs(G) ** 2
    signal = np.diag(power)
    interference = power.sum(axis=1) - signal
    if gamma <= 0:
        # only reachable with W = 0: nothing is transmitted
        se = np.zeros(G.shape[0])
    else:
        se = np.log2(1.0 + signal / (interference + gamma * noise_var))
    return PrecodingReport(scheme, se, float(se.sum()), float(gamma))


def _batched_sum_se(H_true: np.ndarray, H_hat: np.ndarray, scheme: str, noise_var: float) -> np.ndarray:
    """Vectorised :func:`precode` + :func:`spectral_efficiency` over a stack of draws."""
    Hh = H_hat.conj().transpose(0, 2, 1)
    if scheme == "mf":
        W = Hh
    else:
        W = Hh @ np.linalg.inv(H_hat @ Hh)
    gamma = np.real(np.einsum("dmk,dmk->d", W.conj(), W))
    power = np.abs(H_true @ W) ** 2
    signal = np.diagonal(power, axis1=1, axis2=2)
    interference = power.sum(axis=2) - signal
    sinr = signal / (interference + gamma[:, None] * noise_var)
    return np.log2(1.0 + sinr).sum(axis=1)


@dataclass
class DlConfig:
    M: int = 32
    K: int = 6
    f: int = 17
    strategies: list[str] = field(default_factory=lambda: ["star", "combined:3", "daisy"])
    snr_grid_db: list[float] = field(default_factory=lambda: [10.0, 20.0, 30.0, 40.0])
    schemes: list[str] = field(default_factory=lambda: ["mf", "zf"])
    draws: int = 1000
    mode: str = "full"
    a: float = 1.0
    b: float = 1.0
    h: complex = 1.0
    sigma_h_sq: float = 0.0
    noise_var: float = 1.0
    seed: int = 0


@dataclass
class DlRow:
    strategy: str
    scheme: str
    calibration_snr_db: float
    avg_sum_se: float
    stderr: float
    draws: int
    exclusions: int = 0
    samples: np.ndarray = field(default=None, repr=False)


@dataclass
class DlResult:
    config: DlConfig
    rows: list[DlRow]

    def row(self, strategy: str, scheme: str, snr_db: float) -> DlRow:
        for r in self.rows:
            if r.strategy == strategy and r.scheme == scheme and r.calibration_snr_db == snr_db:
                return r
        raise KeyError((strategy, scheme, snr_db))

    def paired_gap(self, better: str, worse: str, scheme: str, snr_db: float) -> tuple[float, float]:
        """Mean and standard error of the per-draw SE difference ``better - worse`` (same channel draws)."""
        a = self.row(better, scheme, snr_db).samples
        b = self.row(worse, scheme, snr_db).samples
        ok = np.isfinite(a) & np.isfinite(b)
        diff = a[ok] - b[ok]
        return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(diff.size))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([r.strategy, r.scheme, repr(float(r.calibration_snr_db)), repr(r.avg_sum_se), repr(r.stderr), r.draws])
        return buf.getvalue()


def run_dl_experiment(config: DlConfig) -> DlResult:
    """Average sum SE per (strategy, scheme, calibration SNR), plus perfect-CSI and uncalibrated baselines.

    Channels and RF gains are drawn once and shared by every strategy and SNR
    point, so all curves are compared on the same draws.
    """
    M, K, f, D = config.M, config.K, config.f, config.draws
    root = np.random.SeedSequence([config.seed, 0])
    rng = np.random.default_rng(root)
    alpha, beta = random_phase_gains(rng, (D, M), config.a, config.b)
    H = complex_normal(rng, (D, K, M), 1.0)
    H_dl = H * alpha[:, None, :]
    H_ul_t = H * beta[:, None, :]  # identity MS gains

    estimates: dict[tuple[str, float], tuple[np.ndarray, np.ndarray]] = {}
    for snr in config.snr_grid_db:
        estimates[("perfect", snr)] = (H_dl, np.ones(D, dtype=bool))
        estimates[("uncalibrated", snr)] = (H_ul_t, np.ones(D, dtype=bool))
    for s_idx, spec in enumerate(config.strategies):
        paths = compute_paths(parse_strategy_spec(spec, M, f))
        children, parents = paths.order_arrays()
        for snr_idx, snr in enumerate(config.snr_grid_db):
            srng = np.random.default_rng(np.random.SeedSequence([config.seed, 1, s_idx, snr_idx]))
            channel = ChannelModel(config.h, config.sigma_h_sq, snr_to_noise_variance(snr, config.a, config.b, config.h))
            y_down, y_up, _ = edge_measurements(srng, alpha, beta, parents, children, channel)
            if config.mode == "full":
                a_hat, b_hat, bad = estimate_full_batch(paths, y_down, y_up, alpha[:, f - 1], beta[:, f - 1], config.h)
                comp = a_hat / np.where(b_hat == 0, np.nan, b_hat)
            else:
                c = beta[:, f - 1] / alpha[:, f - 1]
                c_hat, bad = estimate_relative_batch(paths, y_down, y_up, c)
                comp = 1.0 / np.where(c_hat == 0, np.nan, c_hat)
            bad = bad | ~np.isfinite(comp).all(axis=1)
            comp = np.where(bad[:, None], 1.0, comp)
            estimates[(spec, snr)] = (H_ul_t * comp[:, None, :], ~bad)

    rows = []
    names = ["perfect", *config.strategies, "uncalibrated"]
    for scheme in config.schemes:
        for name in names:
            for snr in config.snr_grid_db:
                H_hat, ok = estimates[(name, snr)]
                se = _batched_sum_se(H_dl, H_hat, scheme.lower(), config.noise_var)
                se = np.where(ok, se, np.nan)
                good = se[ok]
                rows.append(DlRow(
                    strategy=name, scheme=scheme.lower(), calibration_snr_db=float(snr),
                    avg_sum_se=float(good.mean()), stderr=float(good.std(ddof=1) / math.sqrt(good.size)) if good.size > 1 else float("nan"),
                    draws=D, exclusions=int((~ok).sum()), samples=se,
                ))
    return DlResult(config, rows)
