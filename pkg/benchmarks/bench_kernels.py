"""Benchmark the compiled kernel backend against the numpy fallback.

Run from the repository root after `python setup.py build_ext --inplace`:

    python benchmarks/bench_kernels.py
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from hgcl.kernels import available_backends  # noqa: E402


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; run `python setup.py build_ext --inplace`")
        return 1

    rng = np.random.default_rng(0)
    k = -1.0
    ball = rng.uniform(-0.35, 0.35, (20_000, 16))
    ball2 = rng.uniform(-0.35, 0.35, (20_000, 16))
    small = np.ascontiguousarray(ball[:800])
    spatial = rng.uniform(-2.0, 2.0, (20_000, 16))
    hyp = backends["numpy"].lorentz_exp0_rows(spatial, k)
    hyp2 = backends["numpy"].lorentz_exp0_rows(rng.uniform(-2, 2, (20_000, 16)), k)
    hsmall = np.ascontiguousarray(hyp[:800])

    # path-with-chords graph, n = 3000
    n = 3000
    edges = [(i, i + 1) for i in range(n - 1)] + [(i, i + 37) for i in range(0, n - 37, 41)]
    rows = np.array([e[0] for e in edges] + [e[1] for e in edges])
    cols = np.array([e[1] for e in edges] + [e[0] for e in edges])
    from scipy import sparse
    adj = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    indptr = adj.indptr.astype(np.int64)
    indices = adj.indices.astype(np.int64)

    # distance matrix of a 60-node subgraph via its own adjacency
    sub = adj[:60, :60].tocsr()
    d60 = backends["numpy"].bfs_all_pairs(sub.indptr.astype(np.int64),
                                          sub.indices.astype(np.int64), 60).astype(float)
    quads = rng.integers(0, 60, (200_000, 4))
    quads = quads[(quads[:, 0] != quads[:, 1]) & (quads[:, 0] != quads[:, 2])
                  & (quads[:, 0] != quads[:, 3]) & (quads[:, 1] != quads[:, 2])
                  & (quads[:, 1] != quads[:, 3]) & (quads[:, 2] != quads[:, 3])]

    cases = [
        ("mobius_add (20k x 16)", "mobius_add", (ball, ball2, k)),
        ("poincare_dist_rows (20k x 16)", "poincare_dist_rows", (ball, ball2, k)),
        ("poincare_pairwise (800 x 800)", "poincare_pairwise_dist", (small, small, k)),
        ("poincare_exp0 (20k x 16)", "poincare_exp0_rows", (spatial * 0.1, k)),
        ("poincare_log0 (20k x 16)", "poincare_log0_rows", (ball, k)),
        ("lorentz_dist_rows (20k x 17)", "lorentz_dist_rows", (hyp, hyp2, k)),
        ("lorentz_pairwise (800 x 800)", "lorentz_pairwise_dist", (hsmall, hsmall, k)),
        ("lorentz_exp0 (20k x 16)", "lorentz_exp0_rows", (spatial, k)),
        ("lorentz_log0 (20k x 17)", "lorentz_log0_rows", (hyp, k)),
        ("bfs_all_pairs (n=3000)", "bfs_all_pairs", (indptr, indices, n)),
        ("four_point exact (n=60)", "four_point_delta_exact", (d60,)),
        (f"four_point quads ({len(quads)})", "four_point_delta_quads", (d60, quads)),
    ]

    print(f"{'kernel':38s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}")
    for label, fname, args in cases:
        t_np = timeit(getattr(backends["numpy"], fname), *args)
        t_c = timeit(getattr(backends["compiled"], fname), *args)
        print(f"{label:38s} {t_np * 1e3:9.2f}ms {t_c * 1e3:9.2f}ms {t_np / t_c:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
