"""Interconnection strategies: construction, validation, calibration paths, enumeration.

Antenna indices are 1-based everywhere in this module's public surface.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import kernels
from .errors import (
    EnumerationCapError,
    NotATreeError,
    StructuralInputError,
)

DEFAULT_ENUMERATION_CAP = 8


@dataclass(frozen=True, eq=False)
class InterconnectionStrategy:
    """Transmission-line wiring among ``antenna_count`` ports, with reference antenna ``reference``.

    ``adjacency`` is an M x M boolean matrix. It is stored read-only; build a
    new strategy to change the wiring.
    """

    antenna_count: int
    reference: int
    adjacency: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = int(self.antenna_count)
        if m < 2:
            raise StructuralInputError(f"need at least 2 antennas, got {m}")
        if not 1 <= int(self.reference) <= m:
            raise StructuralInputError(f"reference {self.reference} outside [1, {m}]")
        adj = np.array(self.adjacency, dtype=bool, copy=True)
        if adj.shape != (m, m):
            raise StructuralInputError(f"adjacency must be {m}x{m}, got {adj.shape}")
        adj.setflags(write=False)
        object.__setattr__(self, "antenna_count", m)
        object.__setattr__(self, "reference", int(self.reference))
        object.__setattr__(self, "adjacency", adj)

    @classmethod
    def from_edges(cls, antenna_count: int, reference: int, edges: Iterable[tuple[int, int]]):
        adj = np.zeros((antenna_count, antenna_count), dtype=bool)
        for p, q in edges:
            p, q = int(p), int(q)
            if not (1 <= p <= antenna_count and 1 <= q <= antenna_count):
                raise StructuralInputError(f"edge ({p}, {q}) outside [1, {antenna_count}]")
            if p == q:
                raise StructuralInputError(f"self-loop on antenna {p}")
            adj[p - 1, q - 1] = adj[q - 1, p - 1] = True
        return cls(antenna_count, reference, adj)

    @property
    def M(self) -> int:
        return self.antenna_count

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as sorted 1-based ``(p, q)`` pairs with ``p < q``."""
        p, q = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(a) + 1, int(b) + 1) for a, b in zip(p, q)]

    @property
    def edge_count(self) -> int:
        return int(np.triu(self.adjacency, 1).sum())

    def neighbors(self, m: int) -> list[int]:
        return [int(i) + 1 for i in np.flatnonzero(self.adjacency[m - 1])]

    def degree(self, m: int) -> int:
        return int(self.adjacency[m - 1].sum())

    @property
    def ordinary(self) -> list[int]:
        return [m for m in range(1, self.antenna_count + 1) if m != self.reference]

    def is_star(self) -> bool:
        f = self.reference - 1
        return self.edge_count == self.antenna_count - 1 and bool(
            self.adjacency[f, np.arange(self.antenna_count) != f].all()
        )

    def _key(self):
        return (self.antenna_count, self.reference, tuple(self.edges))

    def __eq__(self, other):
        if not isinstance(other, InterconnectionStrategy):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


@dataclass(frozen=True)
class CalibrationPathTable:
    """Per-antenna calibration-path data for a tree strategy.

    ``depth[m]`` counts intermediate antennas between ``m`` and the reference,
    ``parent[m]`` is the next hop toward the reference, and ``levels[r]`` lists
    the antennas with depth ``r`` in ascending order.
    """

    antenna_count: int
    reference: int
    depth: dict[int, int]
    parent: dict[int, int]
    levels: tuple[tuple[int, ...], ...]

    @property
    def d_max(self) -> int:
        return len(self.levels) - 1

    def order(self) -> list[tuple[int, int]]:
        """``(antenna, parent)`` pairs in processing order: level by level, ascending within a level."""
        return [(m, self.parent[m]) for level in self.levels for m in level]

    def order_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """0-based children/parents arrays in processing order (kernel input)."""
        pairs = self.order()
        children = np.array([c - 1 for c, _ in pairs], dtype=np.int64)
        parents = np.array([p - 1 for _, p in pairs], dtype=np.int64)
        return children, parents

    def depth_array(self) -> np.ndarray:
        """Depths of the ordinary antennas in ascending antenna order."""
        return np.array([self.depth[m] for m in sorted(self.depth)], dtype=np.int64)


def check_structure(strategy: InterconnectionStrategy) -> None:
    adj = strategy.adjacency
    if not np.array_equal(adj, adj.T):
        raise StructuralInputError("adjacency matrix is not symmetric")
    if adj.diagonal().any():
        bad = [int(i) + 1 for i in np.flatnonzero(adj.diagonal())]
        raise StructuralInputError(f"self-loops on antennas {bad}")


def _hop_distances(strategy: InterconnectionStrategy) -> np.ndarray:
    m = strategy.antenna_count
    root = strategy.reference - 1
    dist = np.full(m, -1, dtype=np.int64)
    dist[root] = 0
    queue = deque([root])
    adj = strategy.adjacency
    while queue:
        v = queue.popleft()
        for w in np.flatnonzero(adj[v]):
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(int(w))
    return dist


def validate_effective(strategy: InterconnectionStrategy) -> bool:
    """True iff every ordinary antenna has a calibration path to the reference."""
    check_structure(strategy)
    return bool((_hop_distances(strategy) >= 0).all())


def is_tree(strategy: InterconnectionStrategy) -> bool:
    return strategy.edge_count == strategy.antenna_count - 1 and validate_effective(strategy)


def _check_reference(m: int, f: int) -> None:
    if m < 2:
        raise StructuralInputError(f"need at least 2 antennas, got {m}")
    if not 1 <= f <= m:
        raise StructuralInputError(f"reference {f} outside [1, {m}]")


def build_star(M: int, f: int) -> InterconnectionStrategy:
    _check_reference(M, f)
    return InterconnectionStrategy.from_edges(M, f, [(m, f) for m in range(1, M + 1) if m != f])


def build_daisy_chain(M: int, f: int) -> InterconnectionStrategy:
    _check_reference(M, f)
    return InterconnectionStrategy.from_edges(M, f, [(m, m + 1) for m in range(1, M)])


def build_combined(M: int, f: int, z: int) -> InterconnectionStrategy:
    """Chain over ``[f-z, f+z]``; antennas below/above the window hang off its end antennas."""
    _check_reference(M, f)
    if z < 0 or f - z < 1 or f + z > M:
        raise StructuralInputError(f"window [f-z, f+z] = [{f - z}, {f + z}] exceeds [1, {M}]")
    lo, hi = f - z, f + z
    edges = [(m, m + 1) for m in range(lo, hi)]
    edges += [(m, lo) for m in range(1, lo)]
    edges += [(m, hi) for m in range(hi + 1, M + 1)]
    return InterconnectionStrategy.from_edges(M, f, edges)


def rewire(strategy: InterconnectionStrategy, n: int, u: int) -> InterconnectionStrategy:
    """Replace line (n, u) by line (n, f)."""
    adj = np.array(strategy.adjacency)
    f = strategy.reference
    if not adj[n - 1, u - 1]:
        raise StructuralInputError(f"antennas {n} and {u} are not interconnected")
    adj[n - 1, u - 1] = adj[u - 1, n - 1] = False
    adj[n - 1, f - 1] = adj[f - 1, n - 1] = True
    return InterconnectionStrategy(strategy.antenna_count, f, adj)


def compute_paths(strategy: InterconnectionStrategy) -> CalibrationPathTable:
    check_structure(strategy)
    m = strategy.antenna_count
    if strategy.edge_count != m - 1:
        raise NotATreeError(f"strategy has {strategy.edge_count} lines; a tree on {m} antennas has {m - 1}")
    dist = _hop_distances(strategy)
    if (dist < 0).any():
        missing = [int(i) + 1 for i in np.flatnonzero(dist < 0)]
        raise NotATreeError(f"antennas {missing} have no path to reference {strategy.reference}")
    f = strategy.reference
    depth: dict[int, int] = {}
    parent: dict[int, int] = {}
    for idx in range(m):
        if idx == f - 1:
            continue
        depth[idx + 1] = int(dist[idx]) - 1
        # in a tree exactly one neighbour is one hop closer to the reference
        nbrs = np.flatnonzero(strategy.adjacency[idx])
        parent[idx + 1] = int(nbrs[dist[nbrs] == dist[idx] - 1][0]) + 1
    d_max = max(depth.values())
    levels = tuple(tuple(sorted(a for a, d in depth.items() if d == r)) for r in range(d_max + 1))
    return CalibrationPathTable(m, f, depth, parent, levels)


def prufer_to_edges(seq: Iterable[int], M: int) -> list[tuple[int, int]]:
    """Decode a 1-based Prüfer sequence of length M-2 into 1-based edges."""
    if M == 2:
        return [(1, 2)]
    codes = np.asarray([int(v) - 1 for v in seq], dtype=np.int64).reshape(1, max(M - 2, 0))
    edges = kernels.prufer_decode_batch(codes, M)[0]
    return [(int(p) + 1, int(q) + 1) for p, q in edges]


def _check_cap(M: int, cap: int) -> None:
    if M > cap:
        raise EnumerationCapError(
            f"refusing to enumerate {M}^{M - 2} = {M ** (M - 2):,} trees for M={M}; cap is M <= {cap}"
        )


def enumerate_tree_edges(M: int, *, cap: int = DEFAULT_ENUMERATION_CAP, batch: int = 65536) -> Iterator[np.ndarray]:
    """Yield 0-based edge arrays of shape (B, M-1, 2), covering every labeled tree once."""
    if M < 2:
        raise StructuralInputError(f"need at least 2 antennas, got {M}")
    _check_cap(M, cap)
    if M == 2:
        yield np.array([[[0, 1]]], dtype=np.int64)
        return
    codes = itertools.product(range(M), repeat=M - 2)
    while True:
        chunk = np.fromiter(itertools.chain.from_iterable(itertools.islice(codes, batch)), dtype=np.int64)
        if chunk.size == 0:
            return
        yield kernels.prufer_decode_batch(chunk.reshape(-1, M - 2), M)


def enumerate_spanning_trees(M: int, f: int, *, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[InterconnectionStrategy]:
    """Every spanning tree on M antennas (Cayley count M^(M-2)), reference ``f``."""
    _check_reference(M, f)
    for block in enumerate_tree_edges(M, cap=cap):
        for edges in block:
            adj = np.zeros((M, M), dtype=bool)
            adj[edges[:, 0], edges[:, 1]] = True
            adj[edges[:, 1], edges[:, 0]] = True
            yield InterconnectionStrategy(M, f, adj)


def parse_strategy_spec(spec: str, M: int, f: int) -> InterconnectionStrategy:
    """``star | daisy | combined:<z> | file:<path>``."""
    spec = spec.strip()
    if spec == "star":
        return build_star(M, f)
    if spec in ("daisy", "daisy_chain"):
        return build_daisy_chain(M, f)
    if spec.startswith("combined:"):
        try:
            z = int(spec.split(":", 1)[1])
        except ValueError:
            raise StructuralInputError(f"bad combined spec {spec!r}; expected combined:<z>") from None
        return build_combined(M, f, z)
    if spec.startswith("file:"):
        strategy = read_strategy(spec.split(":", 1)[1])
        if strategy.antenna_count != M or strategy.reference != f:
            raise StructuralInputError(
                f"strategy file has M={strategy.antenna_count}, f={strategy.reference}; expected M={M}, f={f}"
            )
        return strategy
    raise StructuralInputError(f"unknown strategy spec {spec!r}")


def parse_strategy_text(text: str) -> InterconnectionStrategy:
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 2:
        raise StructuralInputError("first line must be 'M f'")
    try:
        m, f = int(lines[0][0]), int(lines[0][1])
        pairs = [(int(a), int(b)) for a, b in lines[1:]]
    except ValueError as exc:
        raise StructuralInputError(f"malformed strategy file: {exc}") from None
    seen: set[tuple[int, int]] = set()
    for p, q in pairs:
        if p == q:
            raise StructuralInputError(f"self-loop edge ({p}, {q})")
        key = (min(p, q), max(p, q))
        if key in seen:
            raise StructuralInputError(f"duplicate edge ({p}, {q})")
        seen.add(key)
    return InterconnectionStrategy.from_edges(m, f, pairs)


def read_strategy(path) -> InterconnectionStrategy:
    return parse_strategy_text(Path(path).read_text(encoding="utf-8"))


def format_strategy(strategy: InterconnectionStrategy) -> str:
    out = [f"{strategy.antenna_count} {strategy.reference}"]
    out += [f"{p} {q}" for p, q in strategy.edges]
    return "\n".join(out) + "\n"


def write_strategy(strategy: InterconnectionStrategy, path) -> None:
    Path(path).write_text(format_strategy(strategy), encoding="utf-8")
