"""Numeric kernels shared by the graph statistics and embedding modules.

Two interchangeable backends: numba-jitted loops and pure numpy. Selection
happens once at import time through the ``MOLPROBE_NUMBA`` environment
variable:

* unset or ``auto``: use numba when importable, else fall back to numpy
* ``1`` / ``true`` / ``on``: require numba, raise if it is missing
* ``0`` / ``false`` / ``off``: force the numpy path

Both backends produce the same values up to floating-point summation order.
The numpy variants are kept importable under ``*_np`` names (and the jitted
ones under ``*_nb`` when available) so they can be cross-checked and timed
against each other.
"""

from __future__ import annotations

import logging
import os

import numpy as np

LOGGER = logging.getLogger(__name__)

_TRUE = ("1", "true", "on", "yes")
_FALSE = ("0", "false", "off", "no")


def _resolve_backend() -> bool:
    raw = os.environ.get("MOLPROBE_NUMBA")
    val = "" if raw is None else raw.strip().lower()
    if val in ("", "auto"):
        try:
            import numba  # noqa: F401
        except ImportError:
            LOGGER.debug("numba not importable, using numpy kernels")
            return False
        return True
    if val in _TRUE:
        import numba  # noqa: F401  # let the ImportError surface

        return True
    if val in _FALSE:
        return False
    raise ValueError(
        f"MOLPROBE_NUMBA={raw!r} not understood, expected one of 0/1/auto"
    )


NUMBA_ENABLED = _resolve_backend()


def backend() -> str:
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# numpy implementations


def bfs_eccentricities_np(indptr: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    adj = np.zeros((n, n), dtype=bool)
    for u in range(n):
        adj[u, indices[indptr[u] : indptr[u + 1]]] = True
    dist = np.full((n, n), -1, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    reached = np.eye(n, dtype=bool)
    frontier = np.eye(n, dtype=bool)
    for d in range(1, n):
        frontier = (frontier @ adj) & ~reached
        if not frontier.any():
            break
        dist[frontier] = d
        reached |= frontier
    # unreachable entries stay -1 and never win the row max: d(u, u) = 0
    return dist.max(axis=1)


def component_labels_np(indptr: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    adj = np.eye(n, dtype=bool)
    for u in range(n):
        adj[u, indices[indptr[u] : indptr[u + 1]]] = True
    reach = adj
    while True:
        nxt = reach @ reach
        if (nxt == reach).all():
            break
        reach = nxt
    # label = smallest reachable index, identical to the flood-fill convention
    return reach.argmax(axis=1).astype(np.int64)


def triangle_counts_np(indptr: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    adj = np.zeros((n, n), dtype=np.int64)
    for u in range(n):
        adj[u, indices[indptr[u] : indptr[u + 1]]] = 1
    paths3 = adj @ adj @ adj
    return np.diagonal(paths3) // 2


def gaussian_pair_sum_np(z: np.ndarray, t: float, chunk: int = 512) -> float:
    n = z.shape[0]
    if n < 2:
        return 0.0
    sq = np.einsum("ij,ij->i", z, z)
    total = 0.0
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (z[lo:hi] @ z.T)
        np.maximum(d2, 0.0, out=d2)
        cols = np.arange(n)[None, :]
        rows = np.arange(lo, hi)[:, None]
        mask = cols > rows
        total += float(np.exp(-t * d2[mask]).sum())
    return total


def scatter_add_rows_np(out: np.ndarray, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    np.add.at(out, idx, vals)
    return out


# ---------------------------------------------------------------------------
# numba implementations

if NUMBA_ENABLED:
    from numba import njit

    @njit(cache=True)
    def _bfs_ecc_impl(indptr, indices, n):  # pragma: no cover - jitted
        ecc = np.zeros(n, dtype=np.int64)
        dist = np.empty(n, dtype=np.int64)
        queue = np.empty(n, dtype=np.int64)
        for s in range(n):
            dist[:] = -1
            dist[s] = 0
            queue[0] = s
            head = 0
            tail = 1
            far = 0
            while head < tail:
                u = queue[head]
                head += 1
                du = dist[u]
                if du > far:
                    far = du
                for k in range(indptr[u], indptr[u + 1]):
                    v = indices[k]
                    if dist[v] < 0:
                        dist[v] = du + 1
                        queue[tail] = v
                        tail += 1
            ecc[s] = far
        return ecc

    @njit(cache=True)
    def _components_impl(indptr, indices, n):  # pragma: no cover - jitted
        label = np.full(n, -1, dtype=np.int64)
        queue = np.empty(n, dtype=np.int64)
        for root in range(n):
            if label[root] >= 0:
                continue
            label[root] = root
            queue[0] = root
            head = 0
            tail = 1
            while head < tail:
                u = queue[head]
                head += 1
                for k in range(indptr[u], indptr[u + 1]):
                    v = indices[k]
                    if label[v] < 0:
                        label[v] = root
                        queue[tail] = v
                        tail += 1
        return label

    @njit(cache=True)
    def _triangles_impl(indptr, indices, n):  # pragma: no cover - jitted
        tri = np.zeros(n, dtype=np.int64)
        for u in range(n):
            cnt = 0
            for a in range(indptr[u], indptr[u + 1]):
                v = indices[a]
                for b in range(a + 1, indptr[u + 1]):
                    w = indices[b]
                    for c in range(indptr[v], indptr[v + 1]):
                        if indices[c] == w:
                            cnt += 1
                            break
            tri[u] = cnt
        return tri

    @njit(cache=True)
    def _pair_sum_impl(z, t):  # pragma: no cover - jitted
        n, d = z.shape
        total = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    diff = z[i, k] - z[j, k]
                    s += diff * diff
                total += np.exp(-t * s)
        return total

    @njit(cache=True)
    def _scatter_impl(out, idx, vals):  # pragma: no cover - jitted
        for e in range(idx.shape[0]):
            r = idx[e]
            for k in range(vals.shape[1]):
                out[r, k] += vals[e, k]
        return out

    def bfs_eccentricities_nb(indptr, indices, n):
        return _bfs_ecc_impl(indptr, indices, n)

    def component_labels_nb(indptr, indices, n):
        return _components_impl(indptr, indices, n)

    def triangle_counts_nb(indptr, indices, n):
        return _triangles_impl(indptr, indices, n)

    def gaussian_pair_sum_nb(z, t):
        return float(_pair_sum_impl(z, t))

    def scatter_add_rows_nb(out, idx, vals):
        return _scatter_impl(out, idx, vals)


# ---------------------------------------------------------------------------
# public dispatch


def _csr_args(indptr, indices):
    indptr = np.ascontiguousarray(indptr, dtype=np.int64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    return indptr, indices


def bfs_eccentricities(indptr: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    """Per-node eccentricity (max BFS distance within the node's component)."""
    indptr, indices = _csr_args(indptr, indices)
    if NUMBA_ENABLED:
        return bfs_eccentricities_nb(indptr, indices, n)
    return bfs_eccentricities_np(indptr, indices, n)


def component_labels(indptr: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    """Connected-component label per node, the smallest index in the component."""
    indptr, indices = _csr_args(indptr, indices)
    if NUMBA_ENABLED:
        return component_labels_nb(indptr, indices, n)
    return component_labels_np(indptr, indices, n)


def triangle_counts(indptr: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    """Number of triangles through each node."""
    indptr, indices = _csr_args(indptr, indices)
    if NUMBA_ENABLED:
        return triangle_counts_nb(indptr, indices, n)
    return triangle_counts_np(indptr, indices, n)


def gaussian_pair_sum(z: np.ndarray, t: float) -> float:
    """Sum of exp(-t * ||z_i - z_j||^2) over unordered row pairs i < j."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    if NUMBA_ENABLED:
        return gaussian_pair_sum_nb(z, float(t))
    return gaussian_pair_sum_np(z, float(t))


def scatter_add_rows(out: np.ndarray, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """In-place ``out[idx[e]] += vals[e]`` over rows; returns ``out``."""
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    if NUMBA_ENABLED:
        return scatter_add_rows_nb(out, idx, vals)
    return scatter_add_rows_np(out, idx, vals)
