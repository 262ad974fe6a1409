"""Seeded Monte Carlo sweeps of estimator MSE against the closed-form CRLB."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimators import estimate_full_batch, estimate_relative_batch
from .fisher import crlb_closed_form
from .rfmodel import ChannelModel, complex_normal, edge_measurements, random_phase_gains, snr_to_noise_variance
from .topology import compute_paths, parse_strategy_spec

log = logging.getLogger(__name__)

CSV_COLUMNS = ["strategy", "snr_db", "mode", "sigma_h_sq", "avg_mse", "avg_crlb", "stderr", "trials", "exclusions"]


@dataclass
class SweepConfig:
    M: int
    f: int
    strategies: list[str]
    snr_grid_db: list[float]
    trials: int = 10_000
    sigma_h_sq: float = 0.0
    a: float = 1.0
    b: float = 1.0
    mode: str = "full"
    base_seed: int = 0
    h: complex = 1.0
    redraw_distortion: bool = True
    block_size: int = 2000
    workers: int = 1

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.snr_grid_db:
            raise ValueError("SNR grid is empty")
        if self.mode not in ("full", "relative"):
            raise ValueError(f"mode must be 'full' or 'relative', got {self.mode!r}")
        if self.a <= 0 or self.b <= 0:
            raise ValueError("amplitudes must be positive")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["h"] = [complex(self.h).real, complex(self.h).imag]
        return d


@dataclass
class SweepPoint:
    strategy: str
    snr_db: float
    mode: str
    sigma_h_sq: float
    avg_mse: float
    avg_crlb: float
    stderr: float
    trials: int
    exclusions: int
    # per ordinary antenna (ascending index); full mode has alpha then beta
    mse_per_antenna: dict[str, dict[int, float]] = field(default_factory=dict)
    crlb_per_antenna: dict[str, dict[int, float]] = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.avg_mse / self.avg_crlb


@dataclass
class SweepResult:
    config: SweepConfig
    points: list[SweepPoint]

    def point(self, strategy: str, snr_db: float) -> SweepPoint:
        for p in self.points:
            if p.strategy == strategy and p.snr_db == snr_db:
                return p
        raise KeyError((strategy, snr_db))

    @property
    def strategies(self) -> list[str]:
        return list(dict.fromkeys(p.strategy for p in self.points))

    @property
    def exclusion_rate(self) -> float:
        total = sum(p.trials for p in self.points)
        return sum(p.exclusions for p in self.points) / total if total else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for p in self.points:
            writer.writerow([
                p.strategy, repr(float(p.snr_db)), p.mode, repr(float(p.sigma_h_sq)),
                repr(p.avg_mse), repr(p.avg_crlb), repr(p.stderr), p.trials, p.exclusions,
            ])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {"config": self.config.to_dict(), "points": [asdict(p) for p in self.points]},
            indent=2,
            sort_keys=True,
        )


@dataclass
class _Partial:
    count: int
    excluded: int
    sum_mean: float
    sum_mean_sq: float
    per_antenna: np.ndarray


def _block_seed(cfg: SweepConfig, s_idx: int, snr_idx: int, block: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.base_seed, s_idx, snr_idx, block])


def _run_block(cfg: SweepConfig, paths, s_idx: int, snr_idx: int, block: int, size: int,
               channel: ChannelModel, fixed_lines) -> _Partial:
    rng = np.random.default_rng(_block_seed(cfg, s_idx, snr_idx, block))
    M, f = cfg.M, cfg.f - 1
    alpha, beta = random_phase_gains(rng, (size, M), cfg.a, cfg.b)
    children, parents = paths.order_arrays()
    y_down, y_up, _ = edge_measurements(rng, alpha, beta, parents, children, channel, h_line=fixed_lines)
    keep = np.arange(M) != f
    if cfg.mode == "full":
        a_hat, b_hat, bad = estimate_full_batch(paths, y_down, y_up, alpha[:, f], beta[:, f], channel.h)
        err = np.concatenate([np.abs(a_hat - alpha)[:, keep] ** 2, np.abs(b_hat - beta)[:, keep] ** 2], axis=1)
    else:
        c = beta / alpha
        c_hat, bad = estimate_relative_batch(paths, y_down, y_up, c[:, f])
        err = np.abs(c_hat - c)[:, keep] ** 2
    good = err[~bad]
    means = good.mean(axis=1)
    return _Partial(
        count=int(good.shape[0]),
        excluded=int(bad.sum()),
        sum_mean=float(means.sum()),
        sum_mean_sq=float((means**2).sum()),
        per_antenna=good.sum(axis=0),
    )


def run_sweep(config: SweepConfig) -> SweepResult:
    """MSE of the recursive estimators and the matching CRLB for every (strategy, SNR) point."""
    config.validate()
    M, f = config.M, config.f
    strategies = [parse_strategy_spec(spec, M, f) for spec in config.strategies]
    path_tables = [compute_paths(s) for s in strategies]
    n_blocks = math.ceil(config.trials / config.block_size)
    sizes = [min(config.block_size, config.trials - k * config.block_size) for k in range(n_blocks)]

    tasks = []
    for s_idx, paths in enumerate(path_tables):
        fixed_lines = None
        if not config.redraw_distortion and config.sigma_h_sq > 0:
            drng = np.random.default_rng(np.random.SeedSequence([config.base_seed, s_idx, 2**31 - 1]))
            fixed_lines = config.h + complex_normal(drng, (1, M - 1), config.sigma_h_sq)
        for snr_idx, snr in enumerate(config.snr_grid_db):
            channel = ChannelModel(config.h, config.sigma_h_sq, snr_to_noise_variance(snr, config.a, config.b, config.h))
            for block, size in enumerate(sizes):
                tasks.append((config, paths, s_idx, snr_idx, block, size, channel, fixed_lines))

    workers = max(1, int(config.workers))
    if workers == 1:
        partials = [_run_block(*t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(lambda t: _run_block(*t), tasks))

    points = []
    it = iter(partials)
    ordinary = [m for m in range(1, M + 1) if m != f]
    for s_idx, (spec, paths) in enumerate(zip(config.strategies, path_tables)):
        for snr_idx, snr in enumerate(config.snr_grid_db):
            blocks = [next(it) for _ in sizes]
            count = sum(b.count for b in blocks)
            excluded = sum(b.excluded for b in blocks)
            if excluded:
                log.warning("%s @ %s dB: excluded %d of %d trials (estimator singularity)", spec, snr, excluded, config.trials)
            total = sum(b.sum_mean for b in blocks)
            total_sq = sum(b.sum_mean_sq for b in blocks)
            per_antenna = sum(b.per_antenna for b in blocks)
            mean = total / count if count else float("nan")
            var = (total_sq - count * mean**2) / (count - 1) if count > 1 else float("nan")
            stderr = math.sqrt(max(var, 0.0) / count) if count > 1 else float("nan")

            channel = ChannelModel(config.h, 0.0, snr_to_noise_variance(snr, config.a, config.b, config.h))
            bound = crlb_closed_form(paths, config.a, config.b, channel)
            per_ant = per_antenna / count if count else per_antenna * np.nan
            n = M - 1
            if config.mode == "full":
                avg_crlb = bound.mean_full()
                mse_map = {
                    "alpha": {m: float(per_ant[i]) for i, m in enumerate(ordinary)},
                    "beta": {m: float(per_ant[i + n]) for i, m in enumerate(ordinary)},
                }
                crlb_map = {"alpha": dict(bound.crlb_alpha), "beta": dict(bound.crlb_beta)}
            else:
                avg_crlb = bound.mean_relative()
                mse_map = {"c": {m: float(per_ant[i]) for i, m in enumerate(ordinary)}}
                crlb_map = {"c": dict(bound.crlb_relative)}
            points.append(SweepPoint(
                strategy=spec, snr_db=float(snr), mode=config.mode, sigma_h_sq=float(config.sigma_h_sq),
                avg_mse=float(mean), avg_crlb=float(avg_crlb), stderr=float(stderr),
                trials=config.trials, exclusions=excluded,
                mse_per_antenna=mse_map, crlb_per_antenna=crlb_map,
            ))
    return SweepResult(config, points)


@dataclass
class RankingRow:
    snr_db: float
    by_mse: list[str]
    by_crlb: list[str]
    inversion: bool


def compare_strategies(result: SweepResult) -> list[RankingRow]:
    """Rank strategies at each SNR by average MSE and by average CRLB; flag disagreements."""
    rows = []
    for snr in dict.fromkeys(p.snr_db for p in result.points):
        pts = [p for p in result.points if p.snr_db == snr]
        by_mse = [p.strategy for p in sorted(pts, key=lambda p: p.avg_mse)]
        by_crlb = [p.strategy for p in sorted(pts, key=lambda p: p.avg_crlb)]
        rows.append(RankingRow(snr, by_mse, by_crlb, by_mse != by_crlb))
    return rows
