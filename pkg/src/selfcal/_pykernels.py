"""Pure NumPy/Python implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors them loop for
loop. All indices here are 0-based.
"""
from __future__ import annotations

import heapq
from collections import deque

import numpy as np

BACKEND = "python"


def prufer_decode_batch(codes: np.ndarray, n: int) -> np.ndarray:
    """Decode Prüfer sequences (rows of ``codes``) into edge lists of shape (N, n-1, 2)."""
    if n < 3:
        raise ValueError("Prüfer decoding needs n >= 3")
    codes = np.ascontiguousarray(codes, dtype=np.int64).reshape(-1, max(n - 2, 0))
    out = np.empty((codes.shape[0], n - 1, 2), dtype=np.int64)
    for row in range(codes.shape[0]):
        seq = codes[row]
        degree = [1] * n
        for v in seq:
            degree[v] += 1
        leaves = [v for v in range(n) if degree[v] == 1]
        heapq.heapify(leaves)
        for k, v in enumerate(seq):
            leaf = heapq.heappop(leaves)
            out[row, k, 0] = leaf
            out[row, k, 1] = v
            degree[v] -= 1
            if degree[v] == 1:
                heapq.heappush(leaves, v)
        u = heapq.heappop(leaves)
        w = heapq.heappop(leaves)
        out[row, n - 2, 0] = u
        out[row, n - 2, 1] = w
    return out


def depths_batch(edges: np.ndarray, n: int, root: int) -> np.ndarray:
    """Hop depth minus one from ``root`` for every tree in ``edges``; root gets -1."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, n - 1, 2)
    out = np.empty((edges.shape[0], n), dtype=np.int64)
    for row in range(edges.shape[0]):
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for p, q in edges[row]:
            nbrs[p].append(q)
            nbrs[q].append(p)
        dist = [-1] * n
        dist[root] = 0
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for w in nbrs[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        out[row] = np.asarray(dist) - 1
    return out


def full_recursion(children, parents, y_down, y_up, alpha_f, beta_f, h, ref, m, tiny_a, tiny_b):
    """Level-ordered full-calibration recursion over a batch of trials.

    ``y_down[:, k]`` is the measurement at ``parents[k]`` from ``children[k]``,
    ``y_up[:, k]`` the reverse direction. Returns ``(alpha_hat, beta_hat, bad)``.
    """
    y_down = np.atleast_2d(y_down)
    y_up = np.atleast_2d(y_up)
    trials = y_down.shape[0]
    alpha_hat = np.zeros((trials, m), dtype=np.complex128)
    beta_hat = np.zeros((trials, m), dtype=np.complex128)
    alpha_hat[:, ref] = alpha_f
    beta_hat[:, ref] = beta_f
    bad = np.zeros(trials, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(len(children)):
            c, p = children[k], parents[k]
            bp = beta_hat[:, p]
            ap = alpha_hat[:, p]
            bad |= (np.abs(bp) < tiny_b) | (np.abs(ap) < tiny_a)
            alpha_hat[:, c] = y_down[:, k] / (h * bp)
            beta_hat[:, c] = y_up[:, k] / (h * ap)
    bad |= ~(np.isfinite(alpha_hat).all(axis=1) & np.isfinite(beta_hat).all(axis=1))
    return alpha_hat, beta_hat, bad


def relative_recursion(children, parents, y_down, y_up, c_f, ref, m):
    """Level-ordered relative-calibration recursion; returns ``(c_hat, bad)``."""
    y_down = np.atleast_2d(y_down)
    y_up = np.atleast_2d(y_up)
    trials = y_down.shape[0]
    c_hat = np.zeros((trials, m), dtype=np.complex128)
    c_hat[:, ref] = c_f
    bad = np.zeros(trials, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(len(children)):
            c, p = children[k], parents[k]
            bad |= y_down[:, k] == 0
            c_hat[:, c] = y_up[:, k] / y_down[:, k] * c_hat[:, p]
    bad |= ~np.isfinite(c_hat).all(axis=1)
    return c_hat, bad
