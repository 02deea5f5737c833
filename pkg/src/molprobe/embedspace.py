"""Geometry diagnostics for embedding matrices.

Three views of an embedding cloud: alignment (do matching molecule pairs sit
close in cosine distance), uniformity (log-mean Gaussian potential on the
unit sphere), and the singular value spectrum (dimensional collapse). Pair
construction works off a label matrix with NaN for unobserved entries.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import gaussian_pair_sum

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class PairSet:
    positive: np.ndarray  # (P, 2) int64 molecule indices, i < j
    negative: np.ndarray  # (Q, 2)
    total_positive: int   # realizable before sampling
    total_negative: int


def _classify_row(row: np.ndarray, rest: np.ndarray):
    """Bool masks over ``rest``: shares >=1 observed task and agrees on all /
    disagrees on at least one."""
    common = np.isfinite(row)[None, :] & np.isfinite(rest)
    with np.errstate(invalid="ignore"):
        equal = rest == row[None, :]
    disagree = common & ~equal
    neg = disagree.any(axis=1)
    pos = common.any(axis=1) & ~neg
    return pos, neg


def _sample_flat(rng: np.random.Generator, total: int, take: int) -> np.ndarray:
    if take >= total:
        return np.arange(total, dtype=np.int64)
    if total <= 4_000_000:
        return np.sort(rng.choice(total, size=take, replace=False)).astype(np.int64)
    seen: set[int] = set()
    out: list[int] = []
    while len(out) < take:
        for v in rng.integers(0, total, size=2 * (take - len(out))):
            iv = int(v)
            if iv not in seen:
                seen.add(iv)
                out.append(iv)
                if len(out) == take:
                    break
    return np.sort(np.asarray(out, dtype=np.int64))


def build_pairs(labels: np.ndarray, count: int, seed: int = 0) -> PairSet:
    """Sample up to ``count`` positive and ``count`` negative molecule pairs.

    A pair is positive when the two label vectors are observed on at least one
    common task and agree on every commonly observed task; negative when they
    disagree somewhere. Pairs with no commonly observed task fall in neither
    class. Fewer realizable pairs than requested yields them all plus a logged
    warning. Output rows are (i, j) with i < j, lexicographically sorted.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if labels.ndim == 1:
        labels = labels[:, None]
    if count < 0:
        raise ValueError("count must be >= 0")
    n = labels.shape[0]
    pos_counts = np.zeros(n, dtype=np.int64)
    neg_counts = np.zeros(n, dtype=np.int64)
    for i in range(n - 1):
        pos, neg = _classify_row(labels[i], labels[i + 1 :])
        pos_counts[i] = int(pos.sum())
        neg_counts[i] = int(neg.sum())
    total_pos = int(pos_counts.sum())
    total_neg = int(neg_counts.sum())
    for label, total in (("positive", total_pos), ("negative", total_neg)):
        if total < count:
            LOGGER.warning("only %d %s pairs realizable of %d requested", total, label, count)
    rng = np.random.default_rng(seed)
    chosen_pos = _sample_flat(rng, total_pos, min(count, total_pos))
    chosen_neg = _sample_flat(rng, total_neg, min(count, total_neg))

    def resolve(chosen: np.ndarray, counts: np.ndarray, kind: str) -> np.ndarray:
        pairs = np.empty((chosen.shape[0], 2), dtype=np.int64)
        starts = np.concatenate(([0], np.cumsum(counts)))
        row = np.searchsorted(starts, chosen, side="right") - 1
        k = 0
        for i in np.unique(row):
            pos, neg = _classify_row(labels[i], labels[i + 1 :])
            js = np.flatnonzero(pos if kind == "positive" else neg) + i + 1
            offs = chosen[row == i] - starts[i]
            for off in offs:
                pairs[k] = (i, js[off])
                k += 1
        return pairs

    return PairSet(
        positive=resolve(chosen_pos, pos_counts, "positive"),
        negative=resolve(chosen_neg, neg_counts, "negative"),
        total_positive=total_pos,
        total_negative=total_neg,
    )


@dataclass(frozen=True)
class AlignmentResult:
    mean_positive: float | None
    mean_negative: float | None
    separation: float | None  # mean_negative - mean_positive
    bin_edges: np.ndarray
    positive_counts: np.ndarray
    negative_counts: np.ndarray
    skipped_positive: int
    skipped_negative: int


def _cosine_distances(values: np.ndarray, pairs: np.ndarray):
    a = values[pairs[:, 0]]
    b = values[pairs[:, 1]]
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    ok = (na > 0) & (nb > 0)
    d = 1.0 - np.sum(a[ok] * b[ok], axis=1) / (na[ok] * nb[ok])
    return np.clip(d, 0.0, 2.0), int((~ok).sum())


def alignment(values: np.ndarray, pairs: PairSet, bins: int = 20) -> AlignmentResult:
    """Cosine-distance profile of positive vs negative pairs, fixed [0, 2] bins.

    Pairs touching a zero-norm embedding are skipped and counted. Separation
    is negative-mean minus positive-mean: larger means matching pairs sit
    closer together than non-matching ones.
    """
    values = np.asarray(values, dtype=np.float64)
    d_pos, skip_pos = _cosine_distances(values, pairs.positive)
    d_neg, skip_neg = _cosine_distances(values, pairs.negative)
    edges = np.linspace(0.0, 2.0, bins + 1)
    mean_pos = float(d_pos.mean()) if d_pos.size else None
    mean_neg = float(d_neg.mean()) if d_neg.size else None
    sep = mean_neg - mean_pos if mean_pos is not None and mean_neg is not None else None
    return AlignmentResult(
        mean_positive=mean_pos,
        mean_negative=mean_neg,
        separation=sep,
        bin_edges=edges,
        positive_counts=np.histogram(d_pos, bins=edges)[0],
        negative_counts=np.histogram(d_neg, bins=edges)[0],
        skipped_positive=skip_pos,
        skipped_negative=skip_neg,
    )


def uniformity(values: np.ndarray, t: float = 2.0) -> float | None:
    """log mean_{i<j} exp(-t * ||zhat_i - zhat_j||^2) over unit-normalised rows.

    0 for identical rows, -4 for orthogonal unit pairs at t=2, bounded below
    by -8 (antipodal). Zero-norm rows are skipped with a warning; fewer than
    two usable rows leaves the value undefined (None).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("expected a 2-D embedding matrix")
    norms = np.linalg.norm(values, axis=1)
    ok = norms > 0
    if int((~ok).sum()):
        LOGGER.warning("uniformity: skipped %d zero-norm rows", int((~ok).sum()))
    z = values[ok] / norms[ok][:, None]
    n = z.shape[0]
    if n < 2:
        LOGGER.info("uniformity undefined for %d usable rows", n)
        return None
    total = gaussian_pair_sum(z, float(t))
    return float(math.log(total / (n * (n - 1) / 2)))


@dataclass(frozen=True)
class SpectrumResult:
    singular_values: np.ndarray   # descending
    log_magnitudes: np.ndarray    # natural log, -inf where sigma == 0
    effective_rank: int
    collapsed: bool
    dim: int
    centered: bool


def spectrum(values: np.ndarray, rel_threshold: float = 1e-6, center: bool = False) -> SpectrumResult:
    """Singular values of the embedding matrix plus a collapse verdict.

    Effective rank counts singular values above rel_threshold times the
    largest; collapse means fewer than dim/2 survive. Centering (subtract the
    column mean) is off by default so the raw matrix is what gets judged.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError("expected a non-empty 2-D matrix")
    if center:
        x = x - x.mean(axis=0)
    sigma = np.linalg.svd(x, compute_uv=False)
    with np.errstate(divide="ignore"):
        logs = np.log(sigma)
    if sigma[0] > 0:
        eff = int((sigma > rel_threshold * sigma[0]).sum())
    else:
        eff = 0
    d = x.shape[1]
    return SpectrumResult(
        singular_values=sigma,
        log_magnitudes=logs,
        effective_rank=eff,
        collapsed=eff < d / 2,
        dim=d,
        centered=center,
    )


# -- file output ---------------------------------------------------------------


def write_alignment_json(result: AlignmentResult, path) -> None:
    doc = {
        "mean_positive": result.mean_positive,
        "mean_negative": result.mean_negative,
        "separation": result.separation,
        "bin_edges": [float(e) for e in result.bin_edges],
        "positive_counts": [int(c) for c in result.positive_counts],
        "negative_counts": [int(c) for c in result.negative_counts],
        "skipped_positive": result.skipped_positive,
        "skipped_negative": result.skipped_negative,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def write_spectrum_csv(result: SpectrumResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "singular_value", "log_magnitude"])
        for i, (s, l) in enumerate(zip(result.singular_values, result.log_magnitudes)):
            w.writerow([i, repr(float(s)), repr(float(l))])


def write_uniformity_csv(rows: dict, path) -> None:
    """``rows`` maps dataset name to {method: value-or-None}."""
    methods = sorted({m for cols in rows.values() for m in cols})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset"] + methods)
        for name in sorted(rows):
            cols = rows[name]
            w.writerow([name] + ["" if cols.get(m) is None else repr(float(cols[m])) for m in methods])
        fh.write("# uniformity at t=2: 0 = fully collapsed, -8 = antipodal bound; typical spreads land in [-4, 0]\n")
