"""Molecular graph container, ring perception, and canonical hashing.

Graphs are heavy-atom only: hydrogens live in per-atom counts, never as
nodes. Instances are treated as immutable once built; the only mutation is
the one-shot ring cache filled by :func:`perceive_rings`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import _kernels

BOND_ORDERS = ("single", "double", "triple", "aromatic")
ORDER_CODES = {name: i for i, name in enumerate(BOND_ORDERS)}


@dataclass(frozen=True)
class Atom:
    """One heavy atom: element symbol, aromaticity, charge, bracket H count.

    ``explicit_h`` is the hydrogen count spelled out in a bracket token; atoms
    written bare carry 0 here and get their hydrogens from valence rules.
    """

    element: str
    aromatic: bool = False
    formal_charge: int = 0
    explicit_h: int = 0

    def __post_init__(self) -> None:
        if not self.element or not self.element[0].isupper():
            raise ValueError(f"bad element symbol {self.element!r}")
        if self.explicit_h < 0:
            raise ValueError("explicit_h must be non-negative")


@dataclass(frozen=True)
class Bond:
    u: int
    v: int
    order: str = "single"

    def __post_init__(self) -> None:
        if self.u == self.v:
            raise ValueError("bond endpoints must be distinct")
        if self.order not in ORDER_CODES:
            raise ValueError(f"unknown bond order {self.order!r}")


class MolecularGraph:
    """Undirected labelled graph over :class:`Atom` and :class:`Bond`."""

    def __init__(self, atoms, bonds):
        self.atoms: tuple[Atom, ...] = tuple(atoms)
        self.bonds: tuple[Bond, ...] = tuple(bonds)
        n = len(self.atoms)
        seen: set[tuple[int, int]] = set()
        nbrs: list[list[int]] = [[] for _ in range(n)]
        order_of: dict[tuple[int, int], str] = {}
        for b in self.bonds:
            if not (0 <= b.u < n and 0 <= b.v < n):
                raise ValueError(f"bond ({b.u}, {b.v}) out of range for {n} atoms")
            key = (min(b.u, b.v), max(b.u, b.v))
            if key in seen:
                raise ValueError(f"duplicate bond between atoms {key[0]} and {key[1]}")
            seen.add(key)
            nbrs[b.u].append(b.v)
            nbrs[b.v].append(b.u)
            order_of[key] = b.order
        self._neighbors: tuple[tuple[int, ...], ...] = tuple(
            tuple(sorted(ns)) for ns in nbrs
        )
        self._order_of = order_of
        self._rings: tuple[tuple[int, ...], ...] | None = None
        self._csr: tuple[np.ndarray, np.ndarray] | None = None

    # -- basic accessors ----------------------------------------------------

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self._neighbors[u]

    def degree(self, u: int) -> int:
        return len(self._neighbors[u])

    def has_bond(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._order_of

    def bond_order(self, u: int, v: int) -> str:
        return self._order_of[(min(u, v), max(u, v))]

    @property
    def rings(self) -> tuple[tuple[int, ...], ...]:
        if self._rings is None:
            raise RuntimeError("rings not perceived yet, call perceive_rings first")
        return self._rings

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n_atoms, self.n_atoms), dtype=np.float64)
        for b in self.bonds:
            a[b.u, b.v] = 1.0
            a[b.v, b.u] = 1.0
        return a

    def to_csr(self) -> tuple[np.ndarray, np.ndarray]:
        if self._csr is None:
            indptr = np.zeros(self.n_atoms + 1, dtype=np.int64)
            for u in range(self.n_atoms):
                indptr[u + 1] = indptr[u] + len(self._neighbors[u])
            indices = np.empty(indptr[-1], dtype=np.int64)
            for u in range(self.n_atoms):
                indices[indptr[u] : indptr[u + 1]] = self._neighbors[u]
            self._csr = (indptr, indices)
        return self._csr


def connected_components(g: MolecularGraph) -> list[list[int]]:
    """Node index lists per component, each sorted, ordered by smallest member."""
    if g.n_atoms == 0:
        return []
    indptr, indices = g.to_csr()
    labels = _kernels.component_labels(indptr, indices, g.n_atoms)
    groups: dict[int, list[int]] = {}
    for node, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(node)
    return [groups[k] for k in sorted(groups)]


def subgraph(g: MolecularGraph, keep) -> tuple[MolecularGraph, list[int]]:
    """Induced subgraph on ``keep`` (old indices); returns it plus the old-index map."""
    keep = sorted(set(keep))
    pos = {old: new for new, old in enumerate(keep)}
    atoms = [g.atoms[i] for i in keep]
    bonds = [
        Bond(pos[b.u], pos[b.v], b.order)
        for b in g.bonds
        if b.u in pos and b.v in pos
    ]
    return MolecularGraph(atoms, bonds), keep


# -- ring perception --------------------------------------------------------


def _biconnected_edge_groups(g: MolecularGraph) -> list[list[tuple[int, int]]]:
    """Edge sets of biconnected components (iterative lowpoint DFS)."""
    n = g.n_atoms
    disc = [-1] * n
    low = [0] * n
    parent = [-1] * n
    stack: list[tuple[int, int]] = []
    groups: list[list[tuple[int, int]]] = []
    timer = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        work = [(root, iter(g.neighbors(root)))]
        disc[root] = low[root] = timer
        timer += 1
        while work:
            u, it = work[-1]
            advanced = False
            for v in it:
                if disc[v] < 0:
                    parent[v] = u
                    stack.append((u, v))
                    disc[v] = low[v] = timer
                    timer += 1
                    work.append((v, iter(g.neighbors(v))))
                    advanced = True
                    break
                if v != parent[u] and disc[v] < disc[u]:
                    stack.append((u, v))
                    if disc[v] < low[u]:
                        low[u] = disc[v]
            if advanced:
                continue
            work.pop()
            if work:
                p = work[-1][0]
                if low[u] < low[p]:
                    low[p] = low[u]
                if low[u] >= disc[p]:
                    # everything discovered inside u's subtree, then (p, u)
                    comp = []
                    while stack and disc[stack[-1][0]] >= disc[u]:
                        comp.append(stack.pop())
                    comp.append(stack.pop())
                    groups.append(comp)
    return groups


def _shortest_paths(nodes, nbrs, src):
    """BFS tree from src restricted to ``nodes``: dist and parent dicts."""
    dist = {src: 0}
    par = {src: -1}
    queue = [src]
    head = 0
    while head < len(queue):
        u = queue[head]
        head += 1
        for v in nbrs[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                par[v] = u
                queue.append(v)
    return dist, par


def _path_edges(par, x):
    """Edges and vertices on the tree path from x back to the BFS root."""
    edges = set()
    nodes = {x}
    while par[x] != -1:
        p = par[x]
        edges.add((min(x, p), max(x, p)))
        nodes.add(p)
        x = p
    return edges, nodes


def _cycle_vertices(edge_set) -> tuple[int, ...]:
    """Order a simple cycle's vertices, canonically rotated and directed."""
    adj: dict[int, list[int]] = {}
    for u, v in edge_set:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    start = min(adj)
    a, b = sorted(adj[start])
    walk = [start, a]
    while walk[-1] != start:
        u = walk[-1]
        prev = walk[-2]
        nxt = adj[u][0] if adj[u][0] != prev else adj[u][1]
        walk.append(nxt)
    return tuple(walk[:-1])


def _min_cycle_basis_edges(edges: list[tuple[int, int]]) -> list[frozenset]:
    """Minimum cycle basis of one biconnected component, Horton-style.

    Candidates are shortest-path cycles through every (vertex, edge) pair,
    scanned shortest-first through GF(2) elimination. Fundamental cycles of
    one BFS tree are appended as a completion guarantee.
    """
    nodes = sorted({u for e in edges for u in e})
    rank = len(edges) - len(nodes) + 1
    if rank <= 0:
        return []
    nbrs = {u: [] for u in nodes}
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    for u in nbrs:
        nbrs[u].sort()

    edge_pos = {e: i for i, e in enumerate(sorted(edges))}
    candidates: set[frozenset] = set()

    trees = {}
    for v in nodes:
        trees[v] = _shortest_paths(nodes, nbrs, v)
    for v in nodes:
        dist, par = trees[v]
        for (x, y) in edges:
            px, nx_ = _path_edges(par, x)
            py, ny_ = _path_edges(par, y)
            if nx_ & ny_ != {v}:
                continue  # paths must meet only at v to close a simple cycle
            exy = (min(x, y), max(x, y))
            if exy in px or exy in py:
                continue
            candidates.add(frozenset(px | py | {exy}))

    # Fundamental cycles of the BFS tree rooted at the smallest node keep the
    # candidate pool spanning even where tie-broken shortest paths overlap.
    dist, par = trees[nodes[0]]
    tree_edges = {(min(u, p), max(u, p)) for u, p in par.items() if p != -1}
    for e in edges:
        if e in tree_edges:
            continue
        pe, _ = _path_edges(par, e[0])
        pf, _ = _path_edges(par, e[1])
        candidates.add(frozenset((pe ^ pf) | {e}))

    def sort_key(cyc):
        return (len(cyc), tuple(sorted(edge_pos[e] for e in cyc)))

    basis: list[frozenset] = []
    table: dict[int, int] = {}  # pivot bit -> reduced vector
    for cyc in sorted(candidates, key=sort_key):
        vec = 0
        for e in cyc:
            vec |= 1 << edge_pos[e]
        while vec:
            piv = vec.bit_length() - 1
            if piv not in table:
                table[piv] = vec
                basis.append(cyc)
                break
            vec ^= table[piv]
        if len(basis) == rank:
            break
    return basis


def perceive_rings(g: MolecularGraph) -> MolecularGraph:
    """Fill the ring cache with a minimum cycle basis; idempotent.

    One entry per independent cycle (circuit rank many in total), each a tuple
    of atom indices in cycle order starting from its smallest member.
    """
    if g._rings is not None:
        return g
    rings: list[tuple[int, ...]] = []
    for comp_edges in _biconnected_edge_groups(g):
        uniq = sorted({(min(u, v), max(u, v)) for u, v in comp_edges})
        for cyc in _min_cycle_basis_edges(uniq):
            rings.append(_cycle_vertices(cyc))
    rings.sort(key=lambda r: (len(r), r))
    g._rings = tuple(rings)
    return g


def ring_membership(g: MolecularGraph) -> np.ndarray:
    """Boolean per atom: appears in at least one perceived ring."""
    perceive_rings(g)
    mask = np.zeros(g.n_atoms, dtype=bool)
    for ring in g.rings:
        mask[list(ring)] = True
    return mask


# -- canonical hashing ------------------------------------------------------


def _h64(text: str) -> int:
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def canonical_hash(g: MolecularGraph) -> int:
    """64-bit isomorphism-invariant digest of the labelled graph.

    Iterative neighbourhood refinement over (element, aromatic) seeds and
    bond-order-tagged neighbour labels, folded into a final digest together
    with the atom and bond counts. Equal digests are expected (not
    guaranteed) to mean isomorphic graphs; collisions are possible but must
    be vanishingly rare on small-molecule corpora.
    """
    n = g.n_atoms
    if n == 0:
        return _h64("empty")
    labels = [_h64(f"{a.element}|{int(a.aromatic)}") for a in g.atoms]
    partitions = len(set(labels))
    for _ in range(n):
        nxt = []
        for u in range(n):
            ring = sorted(
                (ORDER_CODES[g.bond_order(u, v)], labels[v]) for v in g.neighbors(u)
            )
            nxt.append(_h64(f"{labels[u]}|" + ",".join(f"{c}:{h}" for c, h in ring)))
        labels = nxt
        count = len(set(labels))
        if count == partitions:
            break
        partitions = count
    body = ",".join(str(h) for h in sorted(labels))
    return _h64(f"{n}|{g.n_bonds}|{body}")


# -- diagnostics ------------------------------------------------------------


def dump(g: MolecularGraph) -> str:
    """Line-oriented description of atoms, bonds, and perceived rings."""
    perceive_rings(g)
    lines = [f"molecule atoms={g.n_atoms} bonds={g.n_bonds} rings={len(g.rings)}"]
    for i, a in enumerate(g.atoms):
        lines.append(
            f"atom {i} element={a.element} aromatic={int(a.aromatic)} "
            f"charge={a.formal_charge:+d} explicit_h={a.explicit_h} degree={g.degree(i)}"
        )
    for b in sorted(g.bonds, key=lambda b: (min(b.u, b.v), max(b.u, b.v))):
        lines.append(f"bond {min(b.u, b.v)} {max(b.u, b.v)} order={b.order}")
    for idx, ring in enumerate(g.rings):
        lines.append(f"ring {idx} atoms=" + ",".join(str(a) for a in ring))
    return "\n".join(lines) + "\n"
