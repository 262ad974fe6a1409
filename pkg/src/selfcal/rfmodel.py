"""RF gains, line channels and synthetic calibration measurements."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import IneffectiveStrategyError, StructuralInputError
from .topology import InterconnectionStrategy, validate_effective


def complex_normal(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    """CN(0, var) samples: independent real and imaginary parts, each of variance var/2."""
    z = rng.standard_normal(shape + (2,) if isinstance(shape, tuple) else (shape, 2))
    return np.sqrt(var / 2.0) * (z[..., 0] + 1j * z[..., 1])


@dataclass(frozen=True, eq=False)
class RfGainSet:
    alpha: np.ndarray
    beta: np.ndarray
    reference: int

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=np.complex128).ravel()
        beta = np.array(self.beta, dtype=np.complex128).ravel()
        if alpha.shape != beta.shape:
            raise StructuralInputError("alpha and beta must have the same length")
        if not 1 <= int(self.reference) <= alpha.size:
            raise StructuralInputError(f"reference {self.reference} outside [1, {alpha.size}]")
        alpha.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "reference", int(self.reference))

    @property
    def M(self) -> int:
        return self.alpha.size

    @property
    def c(self) -> np.ndarray:
        """Relative coefficients beta/alpha."""
        return self.beta / self.alpha

    @property
    def known(self) -> tuple[complex, complex]:
        f = self.reference - 1
        return complex(self.alpha[f]), complex(self.beta[f])

    def amplitudes(self, tol: float = 1e-9) -> tuple[float, float] | None:
        """Common ``(a, b)`` if all |alpha| and all |beta| agree within ``tol`` (relative), else None."""
        ma, mb = np.abs(self.alpha), np.abs(self.beta)
        a, b = float(ma[0]), float(mb[0])
        if np.allclose(ma, a, rtol=tol, atol=0) and np.allclose(mb, b, rtol=tol, atol=0):
            return a, b
        return None

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "reference": self.reference,
            "alpha": _pairs(self.alpha),
            "beta": _pairs(self.beta),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RfGainSet":
        return cls(_unpairs(data["alpha"]), _unpairs(data["beta"]), data["reference"])


@dataclass(frozen=True)
class ChannelModel:
    """Nominal line gain ``h``, per-line distortion variance and AWGN variance."""

    h: complex = 1.0 + 0.0j
    sigma_h_sq: float = 0.0
    sigma_n_sq: float = 1.0

    def __post_init__(self):
        if self.sigma_h_sq < 0:
            raise ValueError("sigma_h_sq must be >= 0")
        if self.sigma_n_sq < 0:
            raise ValueError("sigma_n_sq must be >= 0")
        object.__setattr__(self, "h", complex(self.h))

    def to_dict(self) -> dict:
        return {"h": [self.h.real, self.h.imag], "sigma_h_sq": self.sigma_h_sq, "sigma_n_sq": self.sigma_n_sq}

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelModel":
        h = data.get("h", [1.0, 0.0])
        return cls(complex(h[0], h[1]), float(data.get("sigma_h_sq", 0.0)), float(data.get("sigma_n_sq", 1.0)))


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """``Y[p-1, q-1]`` is the signal received at antenna p from antenna q.

    Entries off the interconnection support are NaN and never read.
    ``line_gains`` holds the realized h_{p,q} (zero off the support).
    """

    Y: np.ndarray
    strategy: InterconnectionStrategy
    channel: ChannelModel
    line_gains: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        Y = np.array(self.Y, dtype=np.complex128)
        Y.setflags(write=False)
        object.__setattr__(self, "Y", Y)

    def y(self, p: int, q: int) -> complex:
        if not self.strategy.adjacency[p - 1, q - 1]:
            raise StructuralInputError(f"antennas {p} and {q} are not interconnected")
        return complex(self.Y[p - 1, q - 1])

    @property
    def support(self) -> np.ndarray:
        return self.strategy.adjacency

    def to_dict(self) -> dict:
        M = self.strategy.antenna_count
        entries = [
            [p, q, [float(self.Y[p - 1, q - 1].real), float(self.Y[p - 1, q - 1].imag)]]
            for p in range(1, M + 1)
            for q in range(1, M + 1)
            if self.strategy.adjacency[p - 1, q - 1]
        ]
        return {
            "M": M,
            "reference": self.strategy.reference,
            "edges": [list(e) for e in self.strategy.edges],
            "channel": self.channel.to_dict(),
            "measurements": entries,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeasurementSet":
        M, f = int(data["M"]), int(data["reference"])
        strategy = InterconnectionStrategy.from_edges(M, f, [tuple(e) for e in data["edges"]])
        Y = np.full((M, M), np.nan + 1j * np.nan, dtype=np.complex128)
        for p, q, (re, im) in data["measurements"]:
            if not strategy.adjacency[p - 1, q - 1]:
                raise StructuralInputError(f"measurement ({p}, {q}) is not on an interconnected pair")
            Y[p - 1, q - 1] = complex(re, im)
        return cls(Y, strategy, ChannelModel.from_dict(data.get("channel", {})))


def _pairs(z: np.ndarray) -> list[list[float]]:
    return [[float(v.real), float(v.imag)] for v in np.asarray(z).ravel()]


def _unpairs(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    return arr[:, 0] + 1j * arr[:, 1]


def dumps(obj) -> str:
    """Deterministic JSON for any object with ``to_dict``."""
    return json.dumps(obj.to_dict(), indent=2, sort_keys=True)


def random_phase_gains(rng: np.random.Generator, shape, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    phi = rng.uniform(-np.pi, np.pi, size=shape)
    psi = rng.uniform(-np.pi, np.pi, size=shape)
    return a * np.exp(1j * phi), b * np.exp(1j * psi)


def generate_gains(M: int, f: int, a: float = 1.0, b: float = 1.0, seed=None) -> RfGainSet:
    """Equal-amplitude gains with i.i.d. uniform phases on [-pi, pi]."""
    if a <= 0 or b <= 0:
        raise ValueError(f"gain amplitudes must be positive, got a={a}, b={b}")
    rng = np.random.default_rng(seed)
    alpha, beta = random_phase_gains(rng, M, a, b)
    return RfGainSet(alpha, beta, f)


def edge_measurements(rng, alpha, beta, first, second, channel: ChannelModel, h_line=None):
    """Noisy measurements over a batch of gain draws for each line ``(first[k], second[k])``.

    ``alpha``/``beta`` have shape (T, M). Returns ``(y_fs, y_sf, h_line)`` each
    of shape (T, K) where ``y_fs[:, k]`` is received at ``first[k]`` from
    ``second[k]``. The line distortion is drawn once per line and shared by
    both directions; the two noise terms are independent. Pass ``h_line``
    to reuse a previously drawn set of line gains instead of drawing one.
    """
    alpha = np.atleast_2d(alpha)
    beta = np.atleast_2d(beta)
    shape = (alpha.shape[0], len(first))
    if h_line is None:
        h_line = np.full(shape, channel.h, dtype=np.complex128)
        if channel.sigma_h_sq > 0:
            h_line = h_line + complex_normal(rng, shape, channel.sigma_h_sq)
    else:
        h_line = np.broadcast_to(np.asarray(h_line, dtype=np.complex128), shape)
    y_fs = beta[:, first] * h_line * alpha[:, second]
    y_sf = beta[:, second] * h_line * alpha[:, first]
    if channel.sigma_n_sq > 0:
        y_fs = y_fs + complex_normal(rng, shape, channel.sigma_n_sq)
        y_sf = y_sf + complex_normal(rng, shape, channel.sigma_n_sq)
    return y_fs, y_sf, h_line


def synthesize_measurements(
    gains: RfGainSet, strategy: InterconnectionStrategy, channel: ChannelModel, seed=None
) -> MeasurementSet:
    if not validate_effective(strategy):
        raise IneffectiveStrategyError("strategy leaves some ordinary antenna without a calibration path")
    if gains.M != strategy.antenna_count:
        raise StructuralInputError(f"gain set has {gains.M} antennas, strategy has {strategy.antenna_count}")
    rng = np.random.default_rng(seed)
    edges = np.asarray(strategy.edges, dtype=np.int64) - 1
    p, q = edges[:, 0], edges[:, 1]
    y_pq, y_qp, h_line = edge_measurements(rng, gains.alpha[None, :], gains.beta[None, :], p, q, channel)
    M = strategy.antenna_count
    Y = np.full((M, M), np.nan + 1j * np.nan, dtype=np.complex128)
    Y[p, q] = y_pq[0]
    Y[q, p] = y_qp[0]
    H = np.zeros((M, M), dtype=np.complex128)
    H[p, q] = H[q, p] = h_line[0]
    return MeasurementSet(Y, strategy, channel, H)


def snr_to_noise_variance(snr_db: float, a: float = 1.0, b: float = 1.0, h: complex = 1.0) -> float:
    """Noise variance giving per-measurement SNR a^2 b^2 |h|^2 / sigma_n^2 = 10^(snr_db/10)."""
    return a**2 * b**2 * abs(h) ** 2 / 10.0 ** (snr_db / 10.0)
