"""Substructure counting and count/label association ranking.

Patterns live in a deliberately small language: each pattern atom carries an
element whitelist plus optional aromatic and in-ring flags, each pattern bond
an order whitelist. Matching is backtracking search for induced embeddings,
deduplicated by matched atom set, so a benzene ring counts once rather than
12 automorphic relabelings. Single-atom patterns in ``atoms`` mode count
matching atoms directly (halogens).

The shipped registry (``data/substructures.json``) holds 24 patterns; each
entry documents its intended chemistry in a note plus one reference molecule
that must match and one that must not.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .graph import Atom, MolecularGraph, ring_membership
from .graph import BOND_ORDERS

__all__ = [
    "AtomPattern",
    "BondPattern",
    "Pattern",
    "RegistryEntry",
    "load_registry",
    "match_pattern",
    "find_embeddings",
    "count_all",
    "count_matrix",
    "cramers_v",
    "contingency",
    "association_matrix",
    "rank_substructures",
    "write_counts_csv",
    "write_v_table_csv",
]


@dataclass(frozen=True)
class AtomPattern:
    elements: frozenset | None = None
    aromatic: bool | None = None
    in_ring: bool | None = None

    def matches(self, atom: Atom, ring_flag: bool) -> bool:
        if self.elements is not None and atom.element not in self.elements:
            return False
        if self.aromatic is not None and atom.aromatic != self.aromatic:
            return False
        if self.in_ring is not None and bool(ring_flag) != self.in_ring:
            return False
        return True


@dataclass(frozen=True)
class BondPattern:
    u: int
    v: int
    orders: frozenset | None = None

    def accepts(self, order: str) -> bool:
        return self.orders is None or order in self.orders


@dataclass(frozen=True)
class Pattern:
    name: str
    atoms: tuple = ()
    bonds: tuple = ()
    mode: str = "embeddings"  # "atoms" counts matching atoms of a 1-atom pattern

    def __post_init__(self):
        if not self.atoms:
            raise ValueError(f"pattern {self.name!r} has no atoms")
        if self.mode not in ("embeddings", "atoms"):
            raise ValueError(f"pattern {self.name!r}: unknown mode {self.mode!r}")
        if self.mode == "atoms" and (len(self.atoms) != 1 or self.bonds):
            raise ValueError(f"pattern {self.name!r}: atoms mode needs a single atom")
        seen = set()
        adj = {i: [] for i in range(len(self.atoms))}
        for b in self.bonds:
            if not (0 <= b.u < len(self.atoms)) or not (0 <= b.v < len(self.atoms)):
                raise ValueError(f"pattern {self.name!r}: bond index out of range")
            if b.u == b.v:
                raise ValueError(f"pattern {self.name!r}: self-bond")
            key = (min(b.u, b.v), max(b.u, b.v))
            if key in seen:
                raise ValueError(f"pattern {self.name!r}: duplicate bond {key}")
            seen.add(key)
            adj[b.u].append(b.v)
            adj[b.v].append(b.u)
        if len(self.atoms) > 1:
            reached = {0}
            frontier = [0]
            while frontier:
                u = frontier.pop()
                for v in adj[u]:
                    if v not in reached:
                        reached.add(v)
                        frontier.append(v)
            if len(reached) != len(self.atoms):
                raise ValueError(f"pattern {self.name!r} is not connected")


@dataclass(frozen=True)
class RegistryEntry:
    pattern: Pattern
    positive: str
    positive_count: int
    negative: str
    note: str = ""


def _pattern_from_dict(d: dict) -> Pattern:
    atoms = []
    for a in d.get("atoms", ()):
        atoms.append(
            AtomPattern(
                elements=frozenset(a["elements"]) if a.get("elements") else None,
                aromatic=a.get("aromatic"),
                in_ring=a.get("in_ring"),
            )
        )
    bonds = []
    for b in d.get("bonds", ()):
        orders = b.get("orders")
        if orders is not None:
            bad = set(orders) - set(BOND_ORDERS)
            if bad:
                raise ValueError(f"pattern {d.get('name')!r}: unknown orders {sorted(bad)}")
        u, v = b["between"]
        bonds.append(BondPattern(u, v, frozenset(orders) if orders else None))
    return Pattern(
        name=d["name"],
        atoms=tuple(atoms),
        bonds=tuple(bonds),
        mode=d.get("mode", "embeddings"),
    )


_REGISTRY_CACHE: dict[str, tuple] = {}


def load_registry(path=None) -> tuple[RegistryEntry, ...]:
    """Registry entries in fixed file order; default is the packaged set."""
    key = str(path) if path is not None else "<default>"
    if key in _REGISTRY_CACHE:
        return _REGISTRY_CACHE[key]
    if path is None:
        raw = resources.files("molprobe").joinpath("data/substructures.json").read_text()
    else:
        raw = Path(path).read_text()
    entries = []
    names = set()
    for d in json.loads(raw):
        pat = _pattern_from_dict(d)
        if pat.name in names:
            raise ValueError(f"duplicate pattern name {pat.name!r}")
        names.add(pat.name)
        entries.append(
            RegistryEntry(
                pattern=pat,
                positive=d["positive"],
                positive_count=int(d.get("positive_count", 1)),
                negative=d["negative"],
                note=d.get("note", ""),
            )
        )
    result = tuple(entries)
    _REGISTRY_CACHE[key] = result
    return result


def registry_names(entries=None) -> list[str]:
    entries = load_registry() if entries is None else entries
    return [e.pattern.name for e in entries]


# -- matching ----------------------------------------------------------------


def _search_order(p: Pattern):
    """BFS order over pattern atoms plus, per position, an earlier neighbour."""
    n = len(p.atoms)
    adj = {i: set() for i in range(n)}
    for b in p.bonds:
        adj[b.u].add(b.v)
        adj[b.v].add(b.u)
    order = [0]
    anchor = [None]
    placed = {0}
    queue = [0]
    while queue:
        u = queue.pop(0)
        for v in sorted(adj[u]):
            if v not in placed:
                placed.add(v)
                order.append(v)
                anchor.append(u)
                queue.append(v)
    return order, anchor


def find_embeddings(g: MolecularGraph, p: Pattern) -> list[tuple[int, ...]]:
    """Distinct induced embeddings as graph-atom tuples (pattern slot order).

    Two embeddings hitting the same atom set count once; the first mapping
    found represents the set.
    """
    if p.mode == "atoms":
        raise ValueError("atom-count patterns have no embeddings, use match_pattern")
    n = len(p.atoms)
    if n > g.n_atoms:
        return []
    needs_ring = any(a.in_ring is not None for a in p.atoms)
    ring_flags = ring_membership(g) if needs_ring else np.zeros(g.n_atoms, dtype=bool)
    pbonds = {}
    for b in p.bonds:
        pbonds[(min(b.u, b.v), max(b.u, b.v))] = b
    order, anchor = _search_order(p)

    mapping: dict[int, int] = {}
    used = [False] * g.n_atoms
    seen_sets: set = set()
    results: list[tuple[int, ...]] = []

    def place(k: int) -> None:
        if k == n:
            key = frozenset(mapping.values())
            if key not in seen_sets:
                seen_sets.add(key)
                results.append(tuple(mapping[i] for i in range(n)))
            return
        p_idx = order[k]
        cands = (
            range(g.n_atoms) if k == 0 else g.neighbors(mapping[anchor[k]])
        )
        for w in cands:
            if used[w]:
                continue
            if not p.atoms[p_idx].matches(g.atoms[w], bool(ring_flags[w])):
                continue
            ok = True
            for earlier in order[:k]:
                bp = pbonds.get((min(p_idx, earlier), max(p_idx, earlier)))
                mapped = mapping[earlier]
                if bp is not None:
                    if not g.has_bond(w, mapped) or not bp.accepts(
                        g.bond_order(w, mapped)
                    ):
                        ok = False
                        break
                elif g.has_bond(w, mapped):
                    ok = False  # induced embedding: extra graph bond forbidden
                    break
            if not ok:
                continue
            mapping[p_idx] = w
            used[w] = True
            place(k + 1)
            used[w] = False
            del mapping[p_idx]

    place(0)
    return results


def match_pattern(g: MolecularGraph, p: Pattern) -> int:
    """Number of matches of p in g (induced embeddings, atom-set dedup)."""
    if p.mode == "atoms":
        ap = p.atoms[0]
        needs_ring = ap.in_ring is not None
        flags = ring_membership(g) if needs_ring else np.zeros(g.n_atoms, dtype=bool)
        return sum(
            1 for i, a in enumerate(g.atoms) if ap.matches(a, bool(flags[i]))
        )
    return len(find_embeddings(g, p))


def count_all(g: MolecularGraph, entries=None) -> np.ndarray:
    """Count vector over the registry order."""
    entries = load_registry() if entries is None else entries
    return np.array([match_pattern(g, e.pattern) for e in entries], dtype=np.int64)


def count_matrix(molecules, entries=None) -> np.ndarray:
    entries = load_registry() if entries is None else entries
    if not molecules:
        return np.zeros((0, len(entries)), dtype=np.int64)
    return np.stack([count_all(g, entries) for g in molecules])


# -- Cramér's V and ranking ---------------------------------------------------


def cramers_v(table) -> float | None:
    """Association strength in [0, 1] from a contingency table.

    Zero-margin rows and columns are dropped first; a table left with fewer
    than two rows or columns has no defined association and yields None.
    """
    t = np.asarray(table, dtype=np.float64)
    if t.ndim != 2:
        raise ValueError("contingency table must be 2-D")
    t = t[t.sum(axis=1) > 0, :]
    if t.size:
        t = t[:, t.sum(axis=0) > 0]
    if t.shape[0] < 2 or t.shape[1] < 2:
        return None
    n = t.sum()
    expected = np.outer(t.sum(axis=1), t.sum(axis=0)) / n
    chi2 = float(((t - expected) ** 2 / expected).sum())
    k = min(t.shape[0] - 1, t.shape[1] - 1)
    return float(np.sqrt(chi2 / (n * k)))


def contingency(counts, labels, cap: int = 10) -> np.ndarray:
    """Count-category x label table; counts above ``cap`` pool into one bucket."""
    c = np.minimum(np.asarray(counts, dtype=np.int64), cap)
    y = np.asarray(labels, dtype=np.int64)
    if c.shape != y.shape:
        raise ValueError("counts and labels must align")
    rows = np.unique(c)
    cols = np.unique(y)
    table = np.zeros((rows.shape[0], cols.shape[0]), dtype=np.int64)
    ri = np.searchsorted(rows, c)
    ci = np.searchsorted(cols, y)
    np.add.at(table, (ri, ci), 1)
    return table


def association_matrix(counts: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Cramér's V per (substructure, task); NaN where undefined or unlabeled.

    ``labels`` may contain NaN for missing entries, which are excluded
    pairwise per task before the table is built.
    """
    counts = np.asarray(counts)
    labels = np.asarray(labels, dtype=np.float64)
    if labels.ndim == 1:
        labels = labels[:, None]
    n_sub = counts.shape[1]
    n_task = labels.shape[1]
    out = np.full((n_sub, n_task), np.nan)
    for t in range(n_task):
        mask = np.isfinite(labels[:, t])
        if not mask.any():
            continue
        y = np.rint(labels[mask, t]).astype(np.int64)
        for s in range(n_sub):
            v = cramers_v(contingency(counts[mask, s], y))
            if v is not None:
                out[s, t] = v
    return out


def rank_substructures(assoc, names, mode: str = "task") -> list[tuple[str, float]]:
    """Order substructures by mean V, strongest first.

    ``assoc`` is one (S, T) association matrix or a list of them (one per
    dataset). ``mode="task"`` pools every defined (dataset, task) value;
    ``mode="dataset"`` averages within each dataset first, then across
    datasets. Names with no defined value anywhere are left out.
    """
    if mode not in ("task", "dataset"):
        raise ValueError(f"unknown ranking mode {mode!r}")
    mats = [np.asarray(a, dtype=np.float64) for a in (assoc if isinstance(assoc, (list, tuple)) else [assoc])]
    ranked = []
    for s, name in enumerate(names):
        if mode == "task":
            pool = np.concatenate([m[s] for m in mats])
            defined = pool[np.isfinite(pool)]
            if defined.size == 0:
                continue
            ranked.append((name, float(defined.mean())))
        else:
            per_data = []
            for m in mats:
                row = m[s][np.isfinite(m[s])]
                if row.size:
                    per_data.append(row.mean())
            if not per_data:
                continue
            ranked.append((name, float(np.mean(per_data))))
    ranked.sort(key=lambda kv: (-kv[1], kv[0]))
    return ranked


# -- emission -----------------------------------------------------------------


def write_counts_csv(path, counts: np.ndarray, names=None) -> None:
    names = registry_names() if names is None else list(names)
    rows = ["molecule," + ",".join(names)]
    for m, row in enumerate(np.asarray(counts)):
        rows.append(f"{m}," + ",".join(str(int(v)) for v in row))
    Path(path).write_text("\n".join(rows) + "\n")


def write_v_table_csv(path, assoc_by_dataset: dict, names) -> None:
    """Rows: substructures; columns: per-dataset mean V plus the two averages."""
    datasets = list(assoc_by_dataset)
    header = ["substructure"] + datasets + ["avg_task", "avg_data"]
    task_rank = dict(
        rank_substructures(list(assoc_by_dataset.values()), names, mode="task")
    )
    data_rank = dict(
        rank_substructures(list(assoc_by_dataset.values()), names, mode="dataset")
    )
    lines = [",".join(header)]
    for s, name in enumerate(names):
        cells = [name]
        for ds in datasets:
            row = np.asarray(assoc_by_dataset[ds])[s]
            defined = row[np.isfinite(row)]
            cells.append(repr(float(defined.mean())) if defined.size else "")
        cells.append(repr(task_rank[name]) if name in task_rank else "")
        cells.append(repr(data_rank[name]) if name in data_rank else "")
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
