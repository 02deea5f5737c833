"""Time the numba kernels against their numpy fallbacks.

Workloads mirror how the package actually calls each kernel: topology kernels
run once per molecule over a batch of small graphs, the pair sum sees one
dataset-sized embedding matrix, and scatter-add sees one batched message pass.
Every timed pair is also cross-checked for agreement.

Run:  python benchmarks/bench_kernels.py [--graphs N] [--nodes N] [--dim D]
"""

import argparse
import time

import numpy as np

from molprobe import _kernels


def rand_csr(rng, n):
    """Molecule-like graph: a random tree plus a couple of ring closures."""
    edges = {(int(rng.integers(i)), i) for i in range(1, n)}
    for _ in range(int(rng.integers(0, 3))):
        u, v = sorted(rng.choice(n, size=2, replace=False).tolist())
        if u != v:
            edges.add((u, v))
    neigh = [[] for _ in range(n)]
    for u, v in edges:
        neigh[u].append(v)
        neigh[v].append(u)
    indptr = np.zeros(n + 1, dtype=np.int64)
    for u in range(n):
        indptr[u + 1] = indptr[u] + len(neigh[u])
    indices = np.array([v for vs in neigh for v in sorted(vs)], dtype=np.int64)
    return indptr, indices


def best_of(fn, repeat):
    fn()  # warmup, includes any jit compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--graphs", type=int, default=2000, help="molecule count for per-graph kernels")
    ap.add_argument("--nodes", type=int, default=18, help="atoms per molecule")
    ap.add_argument("--dim", type=int, default=300, help="embedding width")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not _kernels.NUMBA_ENABLED:
        print("numba backend unavailable (MOLPROBE_NUMBA or missing package); timing numpy only")

    rng = np.random.default_rng(0)
    graphs = [rand_csr(rng, args.nodes) for _ in range(args.graphs)]
    z = rng.normal(size=(1500, args.dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    n_nodes = args.graphs * args.nodes
    idx = rng.integers(0, n_nodes, size=4 * n_nodes)
    vals = rng.normal(size=(idx.shape[0], args.dim))

    def per_graph(fn):
        return lambda: [fn(indptr, indices, args.nodes) for indptr, indices in graphs]

    def scatter(fn):
        def run():
            out = np.zeros((n_nodes, args.dim))
            fn(out, idx, vals)
            return out

        return run

    cases = [
        ("bfs_eccentricities", per_graph(_kernels.bfs_eccentricities_np),
         per_graph(_kernels.bfs_eccentricities_nb) if _kernels.NUMBA_ENABLED else None),
        ("component_labels", per_graph(_kernels.component_labels_np),
         per_graph(_kernels.component_labels_nb) if _kernels.NUMBA_ENABLED else None),
        ("triangle_counts", per_graph(_kernels.triangle_counts_np),
         per_graph(_kernels.triangle_counts_nb) if _kernels.NUMBA_ENABLED else None),
        ("gaussian_pair_sum", lambda: _kernels.gaussian_pair_sum_np(z, 2.0),
         (lambda: _kernels.gaussian_pair_sum_nb(z, 2.0)) if _kernels.NUMBA_ENABLED else None),
        ("scatter_add_rows", scatter(_kernels.scatter_add_rows_np),
         scatter(_kernels.scatter_add_rows_nb) if _kernels.NUMBA_ENABLED else None),
    ]

    print(f"{args.graphs} graphs x {args.nodes} nodes, embeddings 1500x{args.dim}, "
          f"scatter {idx.shape[0]}x{args.dim}; best of {args.repeat}")
    print(f"{'kernel':<20} {'numpy':>10} {'numba':>10} {'speedup':>8}  agree")
    for name, np_fn, nb_fn in cases:
        t_np = best_of(np_fn, args.repeat)
        if nb_fn is None:
            print(f"{name:<20} {t_np * 1e3:>8.1f}ms {'-':>10} {'-':>8}")
            continue
        t_nb = best_of(nb_fn, args.repeat)
        a, b = np_fn(), nb_fn()
        if isinstance(a, list):
            agree = all(np.array_equal(x, y) for x, y in zip(a, b))
        elif isinstance(a, float):
            agree = abs(a - b) <= 1e-9 * max(1.0, abs(b))
        else:
            agree = np.allclose(a, b, rtol=0.0, atol=1e-10)
        print(f"{name:<20} {t_np * 1e3:>8.1f}ms {t_nb * 1e3:>8.1f}ms {t_np / t_nb:>7.1f}x  {'ok' if agree else 'MISMATCH'}")


if __name__ == "__main__":
    main()
