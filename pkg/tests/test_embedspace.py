"""Embedding-space diagnostics: pair semantics, identities, spectra."""

import itertools
import json
import logging

import numpy as np
import pytest

from molprobe.embedspace import (
    PairSet,
    alignment,
    build_pairs,
    spectrum,
    uniformity,
    write_alignment_json,
    write_spectrum_csv,
    write_uniformity_csv,
)


# -- pair construction -----------------------------------------------------------


def brute_pairs(labels):
    """Set-valued reference for the pair classification rule."""
    labels = np.asarray(labels, dtype=np.float64)
    pos, neg = set(), set()
    for i, j in itertools.combinations(range(labels.shape[0]), 2):
        common = np.isfinite(labels[i]) & np.isfinite(labels[j])
        if not common.any():
            continue
        if (labels[i][common] == labels[j][common]).all():
            pos.add((i, j))
        else:
            neg.add((i, j))
    return pos, neg


def as_set(arr):
    return {tuple(r) for r in arr.tolist()}


def test_build_pairs_small_case_semantics():
    nan = np.nan
    labels = np.array(
        [
            [1.0, 0.0],   # 0
            [1.0, nan],   # 1: agrees with 0 on task 0
            [0.0, 0.0],   # 2: disagrees with 0 and 1 on task 0
            [nan, nan],   # 3: observed nowhere, pairs with nobody
            [nan, 0.0],   # 4: agrees with 0 and 2 on task 1; no overlap with 1
        ]
    )
    got = build_pairs(labels, count=100)
    want_pos, want_neg = brute_pairs(labels)
    assert as_set(got.positive) == want_pos == {(0, 1), (0, 4), (2, 4)}
    assert as_set(got.negative) == want_neg == {(0, 2), (1, 2)}
    assert got.total_positive == 3
    assert got.total_negative == 2
    # rows come out sorted with i < j
    assert got.positive.tolist() == sorted(got.positive.tolist())


def test_build_pairs_identical_rows():
    labels = np.array([[1.0], [1.0]])
    got = build_pairs(labels, count=5)
    assert got.positive.tolist() == [[0, 1]]
    assert got.negative.shape == (0, 2)


def test_build_pairs_warns_when_short(caplog):
    labels = np.array([[0.0], [1.0], [2.0]])  # all pairs disagree
    with caplog.at_level(logging.WARNING, logger="molprobe.embedspace"):
        got = build_pairs(labels, count=10)
    assert got.positive.shape == (0, 2)
    assert got.negative.shape == (3, 2)
    assert any("positive pairs realizable" in r.message for r in caplog.records)


def test_build_pairs_sampling_is_deterministic_and_valid():
    rng = np.random.default_rng(0)
    labels = rng.choice([0.0, 1.0, np.nan], size=(60, 3), p=[0.4, 0.4, 0.2])
    a = build_pairs(labels, count=40, seed=7)
    b = build_pairs(labels, count=40, seed=7)
    assert a.positive.tobytes() == b.positive.tobytes()
    assert a.negative.tobytes() == b.negative.tobytes()
    c = build_pairs(labels, count=40, seed=8)
    assert c.positive.tobytes() != a.positive.tobytes()

    want_pos, want_neg = brute_pairs(labels)
    assert a.total_positive == len(want_pos)
    assert a.total_negative == len(want_neg)
    assert as_set(a.positive) <= want_pos
    assert as_set(a.negative) <= want_neg
    assert a.positive.shape == (40, 2)
    assert len(as_set(a.positive)) == 40  # no duplicates


def test_build_pairs_one_dim_labels_and_bad_count():
    got = build_pairs(np.array([0.0, 0.0, 1.0]), count=10)
    assert as_set(got.positive) == {(0, 1)}
    assert as_set(got.negative) == {(0, 2), (1, 2)}
    with pytest.raises(ValueError):
        build_pairs(np.array([[0.0]]), count=-1)


# -- alignment ---------------------------------------------------------------------


def test_alignment_separates_constructed_clusters():
    # two perpendicular clusters; matching pairs inside each, mismatches across
    values = np.array([[1.0, 0.0], [1.0, 0.01], [0.0, 1.0], [0.01, 1.0]])
    pairs = PairSet(
        positive=np.array([[0, 1], [2, 3]]),
        negative=np.array([[0, 2], [1, 3], [0, 3]]),
        total_positive=2,
        total_negative=3,
    )
    res = alignment(values, pairs)
    assert res.mean_positive < 1e-4
    assert res.mean_negative == pytest.approx(1.0, abs=0.02)
    assert res.separation == pytest.approx(res.mean_negative - res.mean_positive)
    assert res.positive_counts.sum() == 2
    assert res.negative_counts.sum() == 3
    assert res.bin_edges[0] == 0.0 and res.bin_edges[-1] == 2.0


def test_alignment_skips_zero_norm_rows():
    values = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    pairs = PairSet(
        positive=np.array([[0, 1]]),
        negative=np.array([[1, 2]]),
        total_positive=1,
        total_negative=1,
    )
    res = alignment(values, pairs)
    assert res.mean_positive is None
    assert res.skipped_positive == 1
    assert res.separation is None
    assert res.mean_negative == pytest.approx(1.0)


def test_alignment_antipodal_distance_reaches_two():
    values = np.array([[1.0, 0.0], [-1.0, 0.0]])
    pairs = PairSet(
        positive=np.array([[0, 1]]),
        negative=np.zeros((0, 2), dtype=np.int64),
        total_positive=1,
        total_negative=0,
    )
    res = alignment(values, pairs)
    assert res.mean_positive == pytest.approx(2.0, abs=1e-12)
    # the top bin is closed, so the antipodal pair is counted, not dropped
    assert res.positive_counts[-1] == 1


# -- uniformity ----------------------------------------------------------------------


def test_uniformity_identities():
    identical = np.tile([0.3, 0.4, 1.2], (6, 1))
    assert uniformity(identical) == pytest.approx(0.0, abs=1e-12)
    orthogonal = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert uniformity(orthogonal, t=2.0) == pytest.approx(-4.0, abs=1e-9)
    antipodal = np.array([[1.0, 0.0], [-1.0, 0.0]])
    assert uniformity(antipodal, t=2.0) == pytest.approx(-8.0, abs=1e-9)


def test_uniformity_scale_invariance():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20, 5))
    scaled = x * rng.uniform(0.1, 30.0, size=(20, 1))
    assert uniformity(scaled) == pytest.approx(uniformity(x), abs=1e-10)


def test_uniformity_skips_zero_rows_and_undefined(caplog):
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with caplog.at_level(logging.WARNING, logger="molprobe.embedspace"):
        val = uniformity(x)
    assert val == pytest.approx(-4.0, abs=1e-9)
    assert any("zero-norm" in r.message for r in caplog.records)

    assert uniformity(np.array([[1.0, 0.0]])) is None
    assert uniformity(np.array([[0.0, 0.0], [1.0, 0.0]])) is None
    with pytest.raises(ValueError):
        uniformity(np.ones(4))


# -- spectrum ------------------------------------------------------------------------


def test_spectrum_rank_one_collapse():
    rng = np.random.default_rng(3)
    outer = np.outer(rng.normal(size=30), rng.normal(size=8))
    res = spectrum(outer)
    assert res.effective_rank == 1
    assert res.collapsed
    assert res.dim == 8
    assert np.isneginf(res.log_magnitudes[1:]).all() or (
        res.singular_values[1:] < 1e-6 * res.singular_values[0]
    ).all()


def test_spectrum_full_rank_not_collapsed():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(50, 6))
    res = spectrum(x)
    assert res.effective_rank == 6
    assert not res.collapsed
    assert np.all(np.diff(res.singular_values) <= 0)
    np.testing.assert_allclose(res.log_magnitudes, np.log(res.singular_values))


def test_spectrum_matches_gram_eigenvalues():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(12, 4))
    res = spectrum(x)
    eig = np.sort(np.linalg.eigvalsh(x.T @ x))[::-1]
    np.testing.assert_allclose(res.singular_values**2, eig, rtol=1e-9, atol=1e-9)


def test_spectrum_rotation_invariance():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(20, 5))
    q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    np.testing.assert_allclose(
        spectrum(x @ q).singular_values, spectrum(x).singular_values, rtol=1e-9, atol=1e-9
    )


def test_spectrum_centering_kills_constant_direction():
    x = np.ones((10, 3)) * 5.0
    raw = spectrum(x)
    assert raw.effective_rank == 1
    centered = spectrum(x, center=True)
    assert centered.effective_rank == 0
    assert centered.collapsed
    assert centered.centered


def test_spectrum_rejects_empty():
    with pytest.raises(ValueError):
        spectrum(np.zeros((0, 4)))
    with pytest.raises(ValueError):
        spectrum(np.ones(3))


# -- file output -----------------------------------------------------------------------


def test_write_alignment_json(tmp_path):
    values = np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0]])
    pairs = PairSet(
        positive=np.array([[0, 1]]),
        negative=np.array([[0, 2]]),
        total_positive=1,
        total_negative=1,
    )
    path = tmp_path / "alignment.json"
    write_alignment_json(alignment(values, pairs), path)
    doc = json.loads(path.read_text())
    assert doc["separation"] == pytest.approx(doc["mean_negative"] - doc["mean_positive"])
    assert len(doc["bin_edges"]) == 21
    assert sum(doc["positive_counts"]) == 1


def test_write_spectrum_csv(tmp_path):
    res = spectrum(np.eye(3))
    path = tmp_path / "spectrum.csv"
    write_spectrum_csv(res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,singular_value,log_magnitude"
    assert lines[1] == "0,1.0,0.0"
    assert len(lines) == 4


def test_write_uniformity_csv(tmp_path):
    path = tmp_path / "uniformity.csv"
    write_uniformity_csv(
        {"b": {"m1": -3.5, "m2": None}, "a": {"m1": -1.0, "m2": -2.0}}, path
    )
    lines = path.read_text().splitlines()
    assert lines[0] == "dataset,m1,m2"
    assert lines[1] == "a,-1.0,-2.0"
    assert lines[2] == "b,-3.5,"  # None stays an empty cell
    assert lines[3].startswith("#")
