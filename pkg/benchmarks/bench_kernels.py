"""Compare the compiled kernels with the pure-Python fallback.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``. Each kernel is
timed on the same inputs under both backends and the outputs are checked to
agree before any timing is reported.
"""
import argparse
import itertools
import timeit

import numpy as np

from selfcal import _pykernels, kernels
from selfcal.rfmodel import ChannelModel, edge_measurements, random_phase_gains
from selfcal.topology import build_daisy_chain, compute_paths


def cases():
    n = 8
    codes = np.array(list(itertools.product(range(n), repeat=n - 2)), dtype=np.int64)
    edges = _pykernels.prufer_decode_batch(codes, n)

    rng = np.random.default_rng(0)
    M, trials = 32, 10_000
    paths = compute_paths(build_daisy_chain(M, 17))
    children, parents = paths.order_arrays()
    alpha, beta = random_phase_gains(rng, (trials, M), 1.0, 1.0)
    y_down, y_up, _ = edge_measurements(rng, alpha, beta, parents, children, ChannelModel(1.0, 0.0, 0.01))
    f = paths.reference - 1
    c_f = beta[:, f] / alpha[:, f]

    return {
        f"prufer decode, all {codes.shape[0]} trees on {n} nodes": (
            lambda k: k.prufer_decode_batch(codes, n)),
        f"tree depths, {edges.shape[0]} trees": (
            lambda k: k.depths_batch(edges, n, 0)),
        f"full recursion, daisy M={M}, {trials} trials": (
            lambda k: k.full_recursion(children, parents, y_down, y_up, alpha[:, f], beta[:, f],
                                       1.0 + 0j, f, M, 1e-12, 1e-12)),
        f"relative recursion, daisy M={M}, {trials} trials": (
            lambda k: k.relative_recursion(children, parents, y_down, y_up, c_f, f, M)),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-14)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    compiled = kernels.compiled_backend()
    if compiled is None:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'kernel':55s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, fn in cases().items():
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat))
        if compiled is None:
            print(f"{name:55s} {t_py:11.4f} {'-':>11s} {'-':>8s}")
            continue
        if not same(fn(_pykernels), fn(compiled)):
            raise SystemExit(f"backends disagree on {name}")
        t_c = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat))
        print(f"{name:55s} {t_py:11.4f} {t_c:11.4f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
