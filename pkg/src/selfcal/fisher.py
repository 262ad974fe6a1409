"""Fisher information, Cramer-Rao bounds and elementary FIM updates for tree strategies.

Parameter ordering: all transmit gains of the ordinary antennas (ascending
antenna index), then all receive gains in the same order. Row ``i`` of the
alpha block belongs to the i-th ordinary antenna; its beta row is ``i + M - 1``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    AmplitudeAssumptionError,
    IneffectiveStrategyError,
    PreconditionError,
    SingularFisherError,
    StructuralInputError,
)
from .rfmodel import ChannelModel, RfGainSet
from .topology import (
    CalibrationPathTable,
    InterconnectionStrategy,
    compute_paths,
    is_tree,
    rewire,
    validate_effective,
)

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class ParameterIndex:
    """Bijection between ordinary antennas and rows of the parameter vector."""

    antenna_count: int
    reference: int

    @property
    def ordinary(self) -> list[int]:
        return [m for m in range(1, self.antenna_count + 1) if m != self.reference]

    @property
    def size(self) -> int:
        return 2 * (self.antenna_count - 1)

    def alpha_row(self, m: int) -> int:
        if m == self.reference or not 1 <= m <= self.antenna_count:
            raise StructuralInputError(f"antenna {m} is not an ordinary antenna")
        return m - 1 if m < self.reference else m - 2

    def beta_row(self, m: int) -> int:
        return self.alpha_row(m) + self.antenna_count - 1

    def theta(self, gains: RfGainSet) -> np.ndarray:
        mask = np.arange(gains.M) != self.reference - 1
        return np.concatenate([gains.alpha[mask], gains.beta[mask]])


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    """``J = scale * [[A, D^H], [D, B]]`` together with the inputs it was built from."""

    J: np.ndarray
    scale: float
    strategy: InterconnectionStrategy
    gains: RfGainSet
    channel: ChannelModel

    @property
    def index(self) -> ParameterIndex:
        return ParameterIndex(self.strategy.antenna_count, self.strategy.reference)

    def blocks(self):
        n = self.strategy.antenna_count - 1
        Jn = self.J / self.scale
        return Jn[:n, :n], Jn[:n, n:], Jn[n:, :n], Jn[n:, n:]


@dataclass
class CrlbReport:
    crlb_alpha: dict[int, float]
    crlb_beta: dict[int, float]
    crlb_relative: dict[int, float]
    depth: dict[int, int] | None = None
    condition_number: float | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def trace_objective(self) -> float:
        return float(sum(self.crlb_alpha.values()) + sum(self.crlb_beta.values()))

    @property
    def antennas(self) -> list[int]:
        return sorted(self.crlb_alpha)

    def mean_full(self) -> float:
        return self.trace_objective / (2 * len(self.crlb_alpha))

    def mean_relative(self) -> float:
        return float(np.mean(list(self.crlb_relative.values())))

    def rows(self) -> list[dict]:
        return [
            {
                "antenna": m,
                "d_m": "" if self.depth is None else self.depth[m],
                "crlb_alpha": self.crlb_alpha[m],
                "crlb_beta": self.crlb_beta[m],
                "crlb_relative": self.crlb_relative[m],
            }
            for m in self.antennas
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, ["antenna", "d_m", "crlb_alpha", "crlb_beta", "crlb_relative"], lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "rows": self.rows(),
            "trace_objective": self.trace_objective,
            "condition_number": self.condition_number,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def build_fim(gains: RfGainSet, strategy: InterconnectionStrategy, channel: ChannelModel) -> FisherMatrix:
    """Fisher information of the ordinary antennas' gains under a common line gain ``h``."""
    if gains.M != strategy.antenna_count or gains.reference != strategy.reference:
        raise StructuralInputError("gain set and strategy disagree on M or the reference antenna")
    if not validate_effective(strategy):
        raise IneffectiveStrategyError(
            "strategy is not effective (some ordinary antenna has no calibration path); J would be singular"
        )
    if channel.sigma_n_sq <= 0:
        raise ValueError("Fisher information needs sigma_n_sq > 0")
    f = strategy.reference - 1
    keep = np.arange(strategy.antenna_count) != f
    adj = strategy.adjacency.astype(float)
    alpha, beta = gains.alpha, gains.beta
    A = np.diag(adj[keep] @ np.abs(beta) ** 2)
    B = np.diag(adj[keep] @ np.abs(alpha) ** 2)
    D = beta[keep][:, None] * adj[np.ix_(keep, keep)] * np.conj(alpha[keep])[None, :]
    scale = abs(channel.h) ** 2 / channel.sigma_n_sq
    J = scale * np.block([[A, D.conj().T], [D, B]])
    return FisherMatrix(J, scale, strategy, gains, channel)


def invert_fim(fim: FisherMatrix) -> tuple[np.ndarray, float]:
    """Hermitian inverse of ``J`` plus its 2-norm condition number."""
    cond = float(np.linalg.cond(fim.J))
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularFisherError(
            f"Fisher matrix condition number {cond:.3g} exceeds {CONDITION_LIMIT:.0e}; "
            "check that the strategy gives every ordinary antenna a calibration path"
        )
    try:
        factor = scipy.linalg.cho_factor(fim.J)
    except np.linalg.LinAlgError as exc:
        raise SingularFisherError(f"Fisher matrix is not positive definite: {exc}") from None
    inv = scipy.linalg.cho_solve(factor, np.eye(fim.J.shape[0], dtype=fim.J.dtype))
    return 0.5 * (inv + inv.conj().T), cond


def relative_jacobian(gains: RfGainSet) -> np.ndarray:
    """Derivative of c_m = beta_m / alpha_m with respect to the parameter vector."""
    f = gains.reference - 1
    keep = np.arange(gains.M) != f
    alpha, beta = gains.alpha[keep], gains.beta[keep]
    if np.any(alpha == 0):
        raise ZeroDivisionError("alpha_m = 0 makes the relative coefficient undefined")
    n = gains.M - 1
    G = np.zeros((n, 2 * n), dtype=np.complex128)
    rows = np.arange(n)
    G[rows, rows] = -beta / alpha**2
    G[rows, rows + n] = 1.0 / alpha
    return G


def apply_jacobian(crlb_theta: np.ndarray, gains: RfGainSet) -> dict[int, float]:
    """Per-antenna relative-calibration bounds from the full parameter CRLB matrix."""
    G = relative_jacobian(gains)
    C = G @ crlb_theta @ G.conj().T
    idx = ParameterIndex(gains.M, gains.reference)
    diag = np.real(np.diag(C))
    return {m: float(diag[i]) for i, m in enumerate(idx.ordinary)}


def crlb_numerical(fim: FisherMatrix) -> CrlbReport:
    inv, cond = invert_fim(fim)
    idx = fim.index
    diag = np.real(np.diag(inv))
    ordinary = idx.ordinary
    n = len(ordinary)
    depth = None
    if is_tree(fim.strategy):
        depth = compute_paths(fim.strategy).depth
    return CrlbReport(
        crlb_alpha={m: float(diag[i]) for i, m in enumerate(ordinary)},
        crlb_beta={m: float(diag[i + n]) for i, m in enumerate(ordinary)},
        crlb_relative=apply_jacobian(inv, fim.gains),
        depth=depth,
        condition_number=cond,
        matrix=inv,
    )


def crlb_closed_form(
    paths: CalibrationPathTable,
    a: float,
    b: float,
    channel: ChannelModel,
    gains: RfGainSet | None = None,
) -> CrlbReport:
    """Closed-form bounds for a tree under equal gain amplitudes: (d_m + 1) times the star bound."""
    if a <= 0 or b <= 0:
        raise ValueError("amplitudes must be positive")
    if gains is not None:
        amps = gains.amplitudes(1e-9)
        if amps is None or not np.isclose(amps[0], a, rtol=1e-9) or not np.isclose(amps[1], b, rtol=1e-9):
            raise AmplitudeAssumptionError(
                "closed form needs |alpha_m| = a and |beta_m| = b for every antenna (within 1e-9)"
            )
    noise = channel.sigma_n_sq / abs(channel.h) ** 2
    ca, cb, cr = {}, {}, {}
    for m, d in paths.depth.items():
        ca[m] = (d + 1) * noise / b**2
        cb[m] = (d + 1) * noise / a**2
        cr[m] = 2 * (d + 1) * noise / a**4
    return CrlbReport(ca, cb, cr, depth=dict(paths.depth))


def elementary_matrix(size: int, i: int, j: int, c: complex) -> np.ndarray:
    """``I + c e_i e_j^T``: on the left adds c times row j to row i, on the right c times column i to column j."""
    L = np.eye(size, dtype=np.complex128)
    L[i, j] += c
    return L


def elementary_factors(fim: FisherMatrix, n: int, u: int) -> tuple[np.ndarray, np.ndarray]:
    """Left and right factors that null the coupling between leaf ``n`` and its ordinary neighbour ``u``."""
    strategy = fim.strategy
    f = strategy.reference
    if n == f or u == f:
        raise PreconditionError(f"antennas {n} and {u} must both be ordinary (reference is {f})")
    if strategy.neighbors(n) != [u]:
        raise PreconditionError(f"antenna {n} must be connected only to antenna {u}; neighbours are {strategy.neighbors(n)}")
    idx = fim.index
    nb, nbp = idx.alpha_row(n), idx.beta_row(n)
    ub, ubp = idx.alpha_row(u), idx.beta_row(u)
    alpha, beta = fim.gains.alpha, fim.gains.beta
    an, bn, au, bu = alpha[n - 1], beta[n - 1], alpha[u - 1], beta[u - 1]
    # pivots: J[nb, nb] = |beta_u|^2 (= b^2) and J[nbp, nbp] = |alpha_u|^2 (= a^2), unscaled
    b2 = abs(bu) ** 2
    a2 = abs(au) ** 2
    size = idx.size
    L = elementary_matrix(size, ubp, nb, -bu * np.conj(an) / b2) @ elementary_matrix(size, ub, nbp, -np.conj(bn) * au / a2)
    Lp = elementary_matrix(size, nbp, ub, -bn * np.conj(au) / a2) @ elementary_matrix(size, nb, ubp, -np.conj(bu) * an / b2)
    return L, Lp


def elementary_update(fim: FisherMatrix, n: int, u: int, gains: RfGainSet | None = None) -> FisherMatrix:
    """Apply ``L J L'`` for the rewiring (n, u) -> (n, f); returns the FIM of the rewired strategy."""
    if gains is not None and gains is not fim.gains:
        fim = FisherMatrix(fim.J, fim.scale, fim.strategy, gains, fim.channel)
    L, Lp = elementary_factors(fim, n, u)
    J = L @ fim.J @ Lp
    return FisherMatrix(J, fim.scale, rewire(fim.strategy, n, u), fim.gains, fim.channel)


def star_rewiring_sequence(strategy: InterconnectionStrategy) -> list[tuple[int, int]]:
    """Leaf-rewiring steps that turn a tree into the star at its reference antenna.

    Each step picks the smallest ordinary antenna whose only neighbour is
    another ordinary antenna.
    """
    if not is_tree(strategy):
        raise PreconditionError("rewiring sequence is defined for tree strategies only")
    f = strategy.reference
    steps: list[tuple[int, int]] = []
    current = strategy
    while True:
        candidates = [
            (m, current.neighbors(m)[0])
            for m in current.ordinary
            if current.degree(m) == 1 and current.neighbors(m)[0] != f
        ]
        if not candidates:
            break
        n, u = candidates[0]
        steps.append((n, u))
        current = rewire(current, n, u)
    return steps


def batched_trace_objective(edges: np.ndarray, gains: RfGainSet, channel: ChannelModel) -> np.ndarray:
    """``Tr(J^-1)`` for a stack of tree edge lists (0-based, shape (B, M-1, 2)) sharing one gain set.

    Same matrix as :func:`build_fim`, assembled for many strategies at once.
    """
    edges = np.asarray(edges, dtype=np.int64)
    B, M = edges.shape[0], gains.M
    adj = np.zeros((B, M, M))
    rows = np.repeat(np.arange(B), edges.shape[1])
    adj[rows, edges[:, :, 0].ravel(), edges[:, :, 1].ravel()] = 1.0
    adj[rows, edges[:, :, 1].ravel(), edges[:, :, 0].ravel()] = 1.0
    keep = np.arange(M) != gains.reference - 1
    n = M - 1
    sub = adj[:, keep]
    J = np.zeros((B, 2 * n, 2 * n), dtype=np.complex128)
    diag = np.arange(n)
    J[:, diag, diag] = sub @ np.abs(gains.beta) ** 2
    J[:, diag + n, diag + n] = sub @ np.abs(gains.alpha) ** 2
    D = gains.beta[keep][None, :, None] * sub[:, :, keep] * np.conj(gains.alpha[keep])[None, None, :]
    J[:, n:, :n] = D
    J[:, :n, n:] = D.conj().transpose(0, 2, 1)
    J *= abs(channel.h) ** 2 / channel.sigma_n_sq
    inv = np.linalg.inv(J)
    return np.real(np.trace(inv, axis1=1, axis2=2))
