"""Topology statistics against the brute-force oracles, plus pinned conventions."""

import numpy as np
import pytest

import oracles
from synth import random_graph

from molprobe.graph import Atom, Bond, MolecularGraph
from molprobe.graphstats import (
    PowerIterationError,
    all_pairs,
    clustering_coefficients,
    compute_graph_metric,
    compute_node_metric,
    compute_pair_metric,
    degree_assortativity,
    eigenvector_centrality,
    emit_stats,
    graph_diameter,
    jaccard_coefficient,
    katz_index,
    link_label,
    node_degrees,
    vertex_connectivity,
)
from molprobe.smiles import parse_smiles


def graph_of(n, edges):
    return MolecularGraph([Atom("C") for _ in range(n)], [Bond(u, v) for u, v in edges])


@pytest.fixture(scope="module")
def small_graphs():
    rng = np.random.default_rng(1234)
    return [random_graph(rng, int(rng.integers(2, 8))) for _ in range(60)]


# -- oracle equivalence --------------------------------------------------------


def test_node_metrics_match_oracle(small_graphs, corpus_graphs):
    for g in small_graphs + corpus_graphs:
        adj = oracles.adjacency(g)
        assert np.array_equal(node_degrees(g), adj.sum(axis=1).astype(int))
        got = eigenvector_centrality(g)
        np.testing.assert_allclose(got, oracles.centrality(adj), atol=1e-8)
        np.testing.assert_allclose(
            clustering_coefficients(g), oracles.clustering(adj), atol=1e-12
        )


def test_graph_metrics_match_oracle(small_graphs, corpus_graphs):
    for g in small_graphs + corpus_graphs:
        adj = oracles.adjacency(g)
        assert graph_diameter(g) == oracles.diameter(adj)
        assert compute_graph_metric([g], "cycles")[0] == oracles.circuit_rank(adj)

        got = degree_assortativity(g)
        want = oracles.assortativity(adj)
        if want is None:
            assert got is None
        else:
            assert got == pytest.approx(want, abs=1e-10)

        if g.n_atoms >= 2:
            got_k = vertex_connectivity(g)
            want_k = oracles.vertex_connectivity(adj, max_k=3)
            if want_k is None:
                assert got_k > 3
            else:
                assert got_k == want_k


def test_pair_metrics_match_oracle(small_graphs):
    rng = np.random.default_rng(7)
    for g in small_graphs:
        adj = oracles.adjacency(g)
        for _ in range(8):
            u = int(rng.integers(g.n_atoms))
            v = int(rng.integers(g.n_atoms - 1))
            v += v >= u
            assert link_label(g, u, v) == int(adj[u, v])
            assert jaccard_coefficient(g, u, v) == pytest.approx(
                oracles.jaccard(adj, u, v), abs=1e-12
            )
            assert katz_index(g, u, v) == pytest.approx(
                oracles.katz(adj, u, v), rel=1e-9
            )
            assert katz_index(g, u, v, beta=0.5, max_length=4) == pytest.approx(
                oracles.katz(adj, u, v, beta=0.5, length=4), rel=1e-9
            )


# -- pinned conventions for awkward graphs --------------------------------------


def test_connectivity_conventions():
    with pytest.raises(ValueError):
        vertex_connectivity(graph_of(1, []))
    assert vertex_connectivity(graph_of(4, [(0, 1), (2, 3)])) == 0
    complete = graph_of(4, [(u, v) for u in range(4) for v in range(u + 1, 4)])
    assert vertex_connectivity(complete) == 3
    ring = graph_of(5, [(i, (i + 1) % 5) for i in range(5)])
    assert vertex_connectivity(ring) == 2
    path = graph_of(4, [(0, 1), (1, 2), (2, 3)])
    assert vertex_connectivity(path) == 1


def test_compute_graph_metric_maps_undefined_to_none():
    mols = [parse_smiles("C"), parse_smiles("CC")]
    assert compute_graph_metric(mols, "connectivity") == [None, 1]


def test_centrality_per_component_norms():
    g = graph_of(7, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    got = eigenvector_centrality(g)
    assert np.linalg.norm(got[:3]) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(got[3:6]) == pytest.approx(1.0, abs=1e-12)
    assert got[6] == 0.0
    np.testing.assert_allclose(got, oracles.centrality(oracles.adjacency(g)), atol=1e-8)


def test_centrality_bipartite_star():
    # period-two oscillation must trip the damped path, not the iteration cap
    g = graph_of(4, [(0, 1), (0, 2), (0, 3)])
    got = eigenvector_centrality(g)
    want = np.array([np.sqrt(3.0), 1.0, 1.0, 1.0]) / np.sqrt(6.0)
    np.testing.assert_allclose(got, want, atol=1e-8)


def test_power_iteration_cap_raises():
    with pytest.raises(PowerIterationError):
        eigenvector_centrality(graph_of(3, [(0, 1), (1, 2)]), max_iter=1)


def test_clustering_conventions():
    triangle = graph_of(3, [(0, 1), (1, 2), (2, 0)])
    assert clustering_coefficients(triangle).tolist() == [1.0, 1.0, 1.0]
    star = graph_of(4, [(0, 1), (0, 2), (0, 3)])
    assert clustering_coefficients(star).tolist() == [0.0, 0.0, 0.0, 0.0]


def test_diameter_conventions():
    with pytest.raises(ValueError):
        graph_diameter(graph_of(0, []))
    assert graph_diameter(graph_of(1, [])) == 0
    # equal-size components: the worse eccentricity wins
    tie = graph_of(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5)])
    assert graph_diameter(tie) == 2
    # smaller component ignored even when it is nearby
    skew = graph_of(7, [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 4)])
    assert graph_diameter(skew) == 3


def test_assortativity_values():
    path3 = graph_of(3, [(0, 1), (1, 2)])
    assert degree_assortativity(path3) == -1.0
    ring = graph_of(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert degree_assortativity(ring) is None
    assert degree_assortativity(graph_of(2, [(0, 1)])) is None
    assert degree_assortativity(graph_of(3, [])) is None


def test_katz_truncation():
    path3 = graph_of(3, [(0, 1), (1, 2)])
    assert katz_index(path3, 0, 2, max_length=1) == 0.0
    assert katz_index(path3, 0, 2, max_length=2) == 1.0
    assert katz_index(path3, 0, 2, beta=0.5, max_length=3) == 0.25


def test_jaccard_conventions():
    ring = graph_of(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert jaccard_coefficient(ring, 0, 2) == 1.0
    assert jaccard_coefficient(ring, 0, 1) == 0.0
    assert jaccard_coefficient(graph_of(2, []), 0, 1) == 0.0


def test_all_pairs_order():
    assert all_pairs(graph_of(3, [])) == [(0, 1), (0, 2), (1, 2)]


def test_compute_metric_dispatch():
    mols = [graph_of(3, [(0, 1), (1, 2)])]
    assert compute_node_metric(mols, "degree")[0].tolist() == [1, 2, 1]
    vals = compute_pair_metric(mols, "link", [(0, 0, 1), (0, 0, 2)])
    assert vals == [1.0, 0.0]


# -- emission ------------------------------------------------------------------


def test_emit_stats_files_and_skips(tmp_path):
    mols = [parse_smiles("CCO"), parse_smiles("C1CC1"), parse_smiles("[NH4+].[Cl-]")]
    paths = emit_stats(
        mols,
        tmp_path,
        metrics=["degree", "assortativity", "jaccard"],
        pairs=[(0, 0, 1), (2, 0, 1)],
    )
    assert all(p.exists() for p in paths)

    deg = (tmp_path / "degree.csv").read_text().splitlines()
    assert deg[0] == "molecule,atom,value"
    assert deg[1] == "0,0,1"

    # the regular triangle and the bondless salt are undefined: empty cells,
    # counted as skipped in the histogram sidecar
    assort = (tmp_path / "assortativity.csv").read_text().splitlines()
    assert assort == ["molecule,value", "0,-1.0", "1,", "2,"]
    import json

    hist = json.loads((tmp_path / "assortativity_hist.json").read_text())
    assert hist["skipped"] == 2
    assert hist["count"] == 1

    jac = (tmp_path / "jaccard.csv").read_text().splitlines()
    assert len(jac) == 3  # header plus the two requested pairs


def test_emit_stats_rejects_unknown_metric(tmp_path):
    with pytest.raises(ValueError, match="unknown metric"):
        emit_stats([parse_smiles("CC")], tmp_path, metrics=["pagerank"])
