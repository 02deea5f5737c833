"""Topology statistics over molecular graphs.

Three families, matching how they are consumed as probe targets:

* node level: degree, eigenvector centrality, clustering coefficient
* graph level: diameter, independent cycle count, vertex connectivity,
  degree assortativity
* node-pair level: link indicator, Jaccard coefficient, truncated Katz index

Conventions for awkward graphs are pinned here once: centrality is computed
per connected component and unit-normalised within each, with isolated nodes
at 0; diameter is taken over the largest component; assortativity returns
None when every node has the same degree; connectivity of a disconnected
graph is 0 and of a single node is an error.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from . import _kernels
from .graph import MolecularGraph, connected_components, perceive_rings

LOGGER = logging.getLogger(__name__)

NODE_METRICS = ("degree", "centrality", "clustering")
GRAPH_METRICS = ("diameter", "cycles", "connectivity", "assortativity")
PAIR_METRICS = ("link", "jaccard", "katz")
ALL_METRICS = NODE_METRICS + GRAPH_METRICS + PAIR_METRICS


class PowerIterationError(RuntimeError):
    pass


def node_degrees(g: MolecularGraph) -> np.ndarray:
    return np.array([g.degree(u) for u in range(g.n_atoms)], dtype=np.int64)


def eigenvector_centrality(
    g: MolecularGraph, tol: float = 1e-12, max_iter: int = 50_000
) -> np.ndarray:
    """Dominant-eigenvector score per node, power iteration per component.

    Each component's slice has unit Euclidean norm; single-node components
    score 0. Bipartite components make plain power iteration oscillate with
    period two; that is detected and a +0.5 diagonal shift switched on, which
    leaves the leading eigenvector untouched but separates the eigenvalue
    pair. Raises :class:`PowerIterationError` when ``max_iter`` is exhausted.
    """
    out = np.zeros(g.n_atoms, dtype=np.float64)
    adj = g.adjacency_matrix()
    for comp in connected_components(g):
        if len(comp) < 2:
            continue
        idx = np.array(comp, dtype=np.int64)
        sub = adj[np.ix_(idx, idx)]
        x = np.full(len(comp), 1.0 / np.sqrt(len(comp)))
        prev = x
        damped = False
        for _ in range(max_iter):
            y = sub @ x
            if damped:
                y = y + 0.5 * x
            norm = float(np.linalg.norm(y))
            y /= norm
            if np.max(np.abs(y - x)) < tol:
                x = y
                break
            if not damped and np.max(np.abs(y - prev)) < tol:
                damped = True
            prev = x
            x = y
        else:
            raise PowerIterationError(
                f"eigenvector centrality did not converge in {max_iter} iterations"
            )
        out[idx] = x
    return out


def clustering_coefficients(g: MolecularGraph) -> np.ndarray:
    """Fraction of closed neighbour pairs per node; degree < 2 scores 0."""
    indptr, indices = g.to_csr()
    tri = _kernels.triangle_counts(indptr, indices, g.n_atoms)
    deg = node_degrees(g)
    out = np.zeros(g.n_atoms, dtype=np.float64)
    mask = deg >= 2
    pairs = deg[mask] * (deg[mask] - 1) / 2.0
    out[mask] = tri[mask] / pairs
    return out


def graph_diameter(g: MolecularGraph) -> int:
    """Longest shortest path within the largest component (ties: the max)."""
    if g.n_atoms == 0:
        raise ValueError("diameter undefined for the empty graph")
    indptr, indices = g.to_csr()
    ecc = _kernels.bfs_eccentricities(indptr, indices, g.n_atoms)
    comps = connected_components(g)
    biggest = max(len(c) for c in comps)
    return max(
        max(int(ecc[i]) for i in c) for c in comps if len(c) == biggest
    )


def cycle_count(g: MolecularGraph) -> int:
    """Number of independent cycles (size of the perceived ring set)."""
    return len(perceive_rings(g).rings)


def _max_vertex_disjoint_paths(g: MolecularGraph, s: int, t: int) -> int:
    """Menger count via unit-capacity max flow on the node-split digraph."""
    n = g.n_atoms
    big = n + 1

    def node_in(u):
        return 2 * u

    def node_out(u):
        return 2 * u + 1

    cap: dict[tuple[int, int], int] = {}
    for u in range(n):
        cap[(node_in(u), node_out(u))] = big if u in (s, t) else 1
        cap[(node_out(u), node_in(u))] = 0
    for b in g.bonds:
        for a, c in ((b.u, b.v), (b.v, b.u)):
            cap[(node_out(a), node_in(c))] = big
            cap.setdefault((node_in(c), node_out(a)), 0)
    adj: dict[int, list[int]] = {}
    for (x, y) in cap:
        adj.setdefault(x, []).append(y)

    src, dst = node_out(s), node_in(t)
    flow = 0
    while True:
        parent = {src: -1}
        queue = [src]
        head = 0
        while head < len(queue) and dst not in parent:
            x = queue[head]
            head += 1
            for y in adj.get(x, ()):
                if y not in parent and cap[(x, y)] > 0:
                    parent[y] = x
                    queue.append(y)
        if dst not in parent:
            return flow
        y = dst
        while parent[y] != -1:
            x = parent[y]
            cap[(x, y)] -= 1
            cap[(y, x)] += 1
            y = x
        flow += 1


def vertex_connectivity(g: MolecularGraph) -> int:
    """Minimum number of node removals that disconnect the graph.

    Complete graphs return n - 1, disconnected graphs 0. Single-node graphs
    have nothing to disconnect and raise ValueError.
    """
    n = g.n_atoms
    if n <= 1:
        raise ValueError("vertex connectivity undefined for graphs with one node")
    if len(connected_components(g)) > 1:
        return 0
    if g.n_bonds == n * (n - 1) // 2:
        return n - 1
    best = n - 1
    for u in range(n):
        for v in range(u + 1, n):
            if g.has_bond(u, v):
                continue
            best = min(best, _max_vertex_disjoint_paths(g, u, v))
            if best == 0:
                return 0
    return best


def degree_assortativity(g: MolecularGraph) -> float | None:
    """Pearson correlation of endpoint degrees over directed edges.

    None when there are no bonds or when the degree spread is zero on either
    side (regular graphs and stars reduce to a constant vector).
    """
    if g.n_bonds == 0:
        return None
    deg = node_degrees(g).astype(np.float64)
    xs = np.empty(2 * g.n_bonds)
    ys = np.empty(2 * g.n_bonds)
    for i, b in enumerate(g.bonds):
        xs[2 * i], ys[2 * i] = deg[b.u], deg[b.v]
        xs[2 * i + 1], ys[2 * i + 1] = deg[b.v], deg[b.u]
    xs -= xs.mean()
    ys -= ys.mean()
    vx = float(xs @ xs)
    vy = float(ys @ ys)
    if vx == 0.0 or vy == 0.0:
        return None
    return float(xs @ ys / np.sqrt(vx * vy))


def link_label(g: MolecularGraph, u: int, v: int) -> int:
    return int(g.has_bond(u, v))


def jaccard_coefficient(g: MolecularGraph, u: int, v: int) -> float:
    """|N(u) ∩ N(v)| / |N(u) ∪ N(v)|; two isolated nodes score 0."""
    nu = set(g.neighbors(u))
    nv = set(g.neighbors(v))
    union = nu | nv
    if not union:
        return 0.0
    return len(nu & nv) / len(union)


def katz_index(
    g: MolecularGraph, u: int, v: int, beta: float = 1.0, max_length: int | None = None
) -> float:
    """Walk-count similarity: sum over lengths l of beta^l * (#walks u->v).

    The default attenuation of 1 weights every length equally, so the series
    is truncated rather than summed to convergence; ``max_length`` defaults
    to the atom count.
    """
    L = g.n_atoms if max_length is None else max_length
    adj = g.adjacency_matrix()
    x = np.zeros(g.n_atoms)
    x[u] = 1.0
    total = 0.0
    scale = 1.0
    for _ in range(L):
        x = adj @ x
        scale *= beta
        total += scale * x[v]
    return float(total)


# -- batch computation and emission ------------------------------------------


def all_pairs(g: MolecularGraph) -> list[tuple[int, int]]:
    return [(u, v) for u in range(g.n_atoms) for v in range(u + 1, g.n_atoms)]


def compute_node_metric(molecules, name: str) -> list[np.ndarray]:
    fn = {
        "degree": node_degrees,
        "centrality": eigenvector_centrality,
        "clustering": clustering_coefficients,
    }[name]
    return [fn(g) for g in molecules]


def compute_graph_metric(molecules, name: str) -> list[float | None]:
    fn = {
        "diameter": graph_diameter,
        "cycles": cycle_count,
        "connectivity": vertex_connectivity,
        "assortativity": degree_assortativity,
    }[name]
    out: list[float | None] = []
    for g in molecules:
        try:
            out.append(fn(g))
        except ValueError:
            out.append(None)
    return out


def compute_pair_metric(molecules, name: str, pairs) -> list[float]:
    fn = {
        "link": link_label,
        "jaccard": jaccard_coefficient,
        "katz": katz_index,
    }[name]
    return [float(fn(molecules[m], u, v)) for m, u, v in pairs]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))  # canonical text even for numpy scalars
    return str(v)


def write_histogram(path, name: str, values, bins: int = 50) -> None:
    vals = np.asarray([v for v in values if v is not None], dtype=np.float64)
    skipped = len(values) - vals.shape[0]
    if vals.size:
        counts, edges = np.histogram(vals, bins=bins)
    else:
        counts, edges = np.zeros(bins, dtype=np.int64), np.linspace(0.0, 1.0, bins + 1)
    doc = {
        "metric": name,
        "count": int(vals.size),
        "skipped": int(skipped),
        "bin_edges": [float(e) for e in edges],
        "counts": [int(c) for c in counts],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def emit_stats(molecules, out_dir, metrics=None, pairs=None, bins: int = 50) -> list[Path]:
    """Write one CSV and one histogram JSON per requested metric.

    ``pairs`` are (molecule, u, v) triples for the pair metrics; when absent
    every unordered pair of every molecule is used. Undefined graph-level
    values leave the CSV cell empty and are counted as skipped in the
    histogram sidecar. Returns the paths written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chosen = list(metrics) if metrics else list(ALL_METRICS)
    written: list[Path] = []
    for name in chosen:
        if name not in ALL_METRICS:
            raise ValueError(f"unknown metric {name!r}")
        csv_path = out / f"{name}.csv"
        hist_path = out / f"{name}_hist.json"
        if name in NODE_METRICS:
            per_mol = compute_node_metric(molecules, name)
            rows = ["molecule,atom,value"]
            flat: list[float] = []
            for m, arr in enumerate(per_mol):
                for a, v in enumerate(arr.tolist()):
                    rows.append(f"{m},{a},{_fmt(v)}")
                    flat.append(v)
            values = flat
        elif name in GRAPH_METRICS:
            values = compute_graph_metric(molecules, name)
            rows = ["molecule,value"]
            rows += [f"{m},{_fmt(v)}" for m, v in enumerate(values)]
        else:
            if pairs is None:
                pairs_local = [
                    (m, u, v) for m, g in enumerate(molecules) for u, v in all_pairs(g)
                ]
            else:
                pairs_local = list(pairs)
            values = compute_pair_metric(molecules, name, pairs_local)
            rows = ["molecule,u,v,value"]
            rows += [
                f"{m},{u},{v},{_fmt(val)}"
                for (m, u, v), val in zip(pairs_local, values)
            ]
        csv_path.write_text("\n".join(rows) + "\n")
        write_histogram(hist_path, name, values, bins=bins)
        written += [csv_path, hist_path]
    return written
