"""Dataset IO, scaffold splitting, task expansion, and the suite driver."""

import json
import logging

import numpy as np
import pytest

from molprobe.graph import canonical_hash
from molprobe.pipeline import (
    Dataset,
    SuiteConfig,
    TASK_FAMILIES,
    bemis_murcko_scaffold,
    config_hash,
    emit_report,
    expand_tasks,
    load_dataset,
    read_config,
    run_suite,
    sample_node_pairs,
    scaffold_key,
    scaffold_split,
    write_split_csv,
)
from molprobe.smiles import parse_smiles
from molprobe.substructure import registry_names


def make_dataset(smiles, targets=None, target_names=(), name="toy"):
    graphs = [parse_smiles(s) for s in smiles]
    if targets is None:
        targets = np.zeros((len(graphs), 0))
    return Dataset(
        name=name,
        graphs=graphs,
        smiles=list(smiles),
        targets=np.asarray(targets, dtype=np.float64),
        target_names=list(target_names),
    )


# -- CSV loading -----------------------------------------------------------------


def test_load_dataset_autodetects_smiles_column(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("Target,SMILES\n1.5,CCO\n,C1CC1\nx,CC\n")
    ds = load_dataset(path)
    assert ds.name == "toy"
    assert ds.n_molecules == 3
    assert ds.target_names == ["Target"]
    assert ds.targets[0, 0] == 1.5
    assert np.isnan(ds.targets[1, 0])  # blank cell
    assert np.isnan(ds.targets[2, 0])  # non-numeric cell


def test_load_dataset_skips_bad_rows(tmp_path, caplog):
    path = tmp_path / "mixed.csv"
    path.write_text("smiles,y\nCCO,1\nnot_a_molecule,2\nCC,3\nCCC\n")
    with caplog.at_level(logging.WARNING, logger="molprobe.pipeline"):
        ds = load_dataset(path)
    assert ds.n_molecules == 2
    assert ds.n_skipped == 2  # one parse failure, one short row
    assert any("unparseable" in r.message for r in caplog.records)


def test_load_dataset_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError, match="header"):
        load_dataset(empty)

    no_col = tmp_path / "nocol.csv"
    no_col.write_text("structure,y\nCCO,1\n")
    with pytest.raises(ValueError, match="no 'smiles' column"):
        load_dataset(no_col)
    ds = load_dataset(no_col, smiles_column="structure")
    assert ds.n_molecules == 1
    with pytest.raises(ValueError, match="not in header"):
        load_dataset(no_col, smiles_column="mol")


# -- scaffolds ---------------------------------------------------------------------


def test_bemis_murcko_examples():
    assert bemis_murcko_scaffold(parse_smiles("CCO")).n_atoms == 0
    assert bemis_murcko_scaffold(parse_smiles("Cc1ccccc1")).n_atoms == 6
    # the linker atom between two rings survives pruning
    assert bemis_murcko_scaffold(parse_smiles("C(c1ccccc1)c1ccccc1")).n_atoms == 13
    # aspirin strips to its one ring
    assert bemis_murcko_scaffold(parse_smiles("CC(=O)Oc1ccccc1C(=O)O")).n_atoms == 6


def test_scaffold_key_groups_decorated_variants():
    benzene_like = [scaffold_key(parse_smiles(s)) for s in ("Cc1ccccc1", "Oc1ccccc1", "c1ccccc1")]
    assert len(set(benzene_like)) == 1
    assert scaffold_key(parse_smiles("c1ccncc1")) != benzene_like[0]
    # all acyclic molecules share the empty scaffold
    assert scaffold_key(parse_smiles("CCO")) == scaffold_key(parse_smiles("NC(=O)N"))
    for k in benzene_like:
        assert 0 <= k < 2**63
    assert benzene_like[0] == canonical_hash(parse_smiles("c1ccccc1")) & (2**63 - 1)


SCAFFOLD_CORES = [
    "C1CC1", "C1CCC1", "C1CCCC1", "C1CCCCC1", "C1CCCCCC1",
    "C1CO1", "C1CCO1", "C1CCOC1", "C1CCNC1", "c1ccccc1",
]


def varied_dataset(rng, name="synthetic"):
    smiles = []
    for core in rng.permutation(SCAFFOLD_CORES)[: rng.integers(4, len(SCAFFOLD_CORES) + 1)]:
        for k in range(int(rng.integers(2, 7))):
            smiles.append("C" * k + core)
    return make_dataset(smiles, name=name)


def test_scaffold_split_integrity_random_datasets():
    rng = np.random.default_rng(42)
    for trial in range(40):
        ds = varied_dataset(rng, name=f"d{trial}")
        split = scaffold_split(ds)
        n = ds.n_molecules
        groups = {}
        for i, k in enumerate(split.scaffold_keys.tolist()):
            groups.setdefault(k, []).append(i)
        for members in groups.values():
            tags = {int(split.tags[i]) for i in members}
            assert len(tags) == 1, "scaffold group split across subsets"
        largest = max(len(m) for m in groups.values())
        for frac, count in zip((0.8, 0.1, 0.1), split.counts()):
            assert abs(count / n - frac) <= largest / n + 1e-9


def test_scaffold_split_deterministic_and_seed_blind():
    rng = np.random.default_rng(7)
    ds = varied_dataset(rng)
    a = scaffold_split(ds, seed=0)
    b = scaffold_split(ds, seed=123)
    assert a.to_bytes() == b.to_bytes()


def test_scaffold_split_validation_and_warnings(caplog):
    ds = make_dataset(["CCO", "CCC", "CCN"])
    with pytest.raises(ValueError, match="sum to 1"):
        scaffold_split(ds, fractions=(0.5, 0.2, 0.2))
    with pytest.raises(ValueError, match="three"):
        scaffold_split(ds, fractions=(0.8, 0.2))
    # one scaffold group swallows everything: valid and test end up empty
    with caplog.at_level(logging.WARNING, logger="molprobe.pipeline"):
        split = scaffold_split(ds)
    assert split.counts() == (3, 0, 0)
    assert sum("split is empty" in r.message for r in caplog.records) == 2


def test_write_split_csv(tmp_path):
    ds = make_dataset(["Cc1ccccc1", "CCO", "CCC"])
    split = scaffold_split(ds)
    path = tmp_path / "split.csv"
    write_split_csv(split, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "molecule,scaffold,split"
    assert len(lines) == 4
    assert lines[1].split(",")[2] in ("train", "valid", "test")


# -- pair sampling -------------------------------------------------------------------


def test_sample_node_pairs_shape_and_bounds():
    graphs = [parse_smiles(s) for s in ("C", "CCO", "C1CC1", "CC")]
    pairs = sample_node_pairs(graphs, 500, seed=3)
    assert pairs.shape == (500, 3)
    assert 0 not in set(pairs[:, 0].tolist())  # single atom is ineligible
    for m, u, v in pairs.tolist():
        assert u != v
        assert 0 <= u < graphs[m].n_atoms
        assert 0 <= v < graphs[m].n_atoms
    again = sample_node_pairs(graphs, 500, seed=3)
    assert again.tobytes() == pairs.tobytes()


def test_sample_node_pairs_pool_and_errors():
    graphs = [parse_smiles(s) for s in ("CCO", "C", "CCC")]
    pairs = sample_node_pairs(graphs, 50, seed=0, pool=[2])
    assert set(pairs[:, 0].tolist()) == {2}
    with pytest.raises(ValueError, match="two atoms"):
        sample_node_pairs(graphs, 10, pool=[1])
    with pytest.raises(ValueError):
        sample_node_pairs(graphs, -1)


# -- configuration -------------------------------------------------------------------


def test_read_config_typed_keys(tmp_path):
    path = tmp_path / "suite.cfg"
    path.write_text(
        """
        # comment line
        datasets = a.csv, b.csv
        seeds = 0, 1, 2
        tasks = topology, counts
        epochs = 40        # trailing comment
        learning_rate = 0.01
        fractions = 0.6, 0.2, 0.2
        readout = sum
        jobs = 2
        """
    )
    cfg = read_config(path)
    assert cfg["datasets"] == ("a.csv", "b.csv")
    assert cfg["seeds"] == (0, 1, 2)
    assert cfg["tasks"] == ("topology", "counts")
    assert cfg["epochs"] == 40
    assert cfg["learning_rate"] == 0.01
    assert cfg["fractions"] == (0.6, 0.2, 0.2)
    assert cfg["readout"] == "sum"
    assert cfg["jobs"] == 2


def test_read_config_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("epochs\n")
    with pytest.raises(ValueError, match="key=value"):
        read_config(bad)
    unknown = tmp_path / "unknown.cfg"
    unknown.write_text("optimizer = adam\n")
    with pytest.raises(ValueError, match="unknown key"):
        read_config(unknown)


def test_suite_config_validation():
    with pytest.raises(ValueError, match="dataset"):
        SuiteConfig(datasets=())
    with pytest.raises(ValueError, match="seed"):
        SuiteConfig(datasets=("a.csv",), seeds=())
    with pytest.raises(ValueError, match="pair_count"):
        SuiteConfig(datasets=("a.csv",), pair_count=0)


def test_config_hash_tracks_content():
    a = SuiteConfig(datasets=("a.csv",))
    b = SuiteConfig(datasets=("a.csv",))
    c = SuiteConfig(datasets=("a.csv",), epochs=7)
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)


# -- task expansion -------------------------------------------------------------------


@pytest.fixture()
def labeled_dataset():
    targets = np.array(
        [[1.0, 0.3], [0.0, 1.7], [np.nan, 2.4], [1.0, np.nan]]
    )
    return make_dataset(
        ["Cc1ccccc1", "CCO", "C1CC1", "CCC"],
        targets=targets,
        target_names=["act", "conc"],
    )


def test_expand_tasks_families(labeled_dataset):
    names = registry_names()
    cfg = SuiteConfig(datasets=("x",), tasks=TASK_FAMILIES)
    specs = expand_tasks(cfg, labeled_dataset, names)
    by_name = {s.name: s for s in specs}
    assert len(by_name) == 10 + len(names) + 2 + 1

    assert by_name["degree"].kind == "multiclass"
    assert by_name["degree"].classes == 7
    assert by_name["link"].kind == "binary_classification"
    assert by_name["connectivity"].level == "graph"
    assert by_name["count:benzene"].level == "graph"
    assert by_name["target:act"].kind == "binary_classification"
    assert by_name["target:conc"].kind == "regression"
    assert by_name["baseline:act"].kind == "binary_classification"
    assert "baseline:conc" not in by_name  # not binary, no baseline


def test_expand_tasks_explicit_and_errors(labeled_dataset):
    names = registry_names()

    def expand(*tasks):
        return expand_tasks(SuiteConfig(datasets=("x",), tasks=tasks), labeled_dataset, names)

    assert [s.name for s in expand("degree", "topology")] == [
        "degree", "centrality", "clustering", "link", "jaccard", "katz",
        "diameter", "cycles", "connectivity", "assortativity",
    ]
    with pytest.raises(ValueError, match="unknown substructure"):
        expand("count:ketone")
    with pytest.raises(ValueError, match="unknown target column"):
        expand("target:potency")
    with pytest.raises(ValueError, match="binary"):
        expand("baseline:conc")
    with pytest.raises(ValueError, match="unknown task"):
        expand("pagerank")


# -- end-to-end suite ------------------------------------------------------------------


def suite_csv(tmp_path):
    """Ten 5-member ring scaffolds plus three bare atoms (deliberately pairless)."""
    rows = ["smiles,y,conc"]
    rng = np.random.default_rng(0)
    for core in SCAFFOLD_CORES:
        ring_atoms = parse_smiles(core).n_atoms
        for k in range(5):
            s = "C" * k + core
            rows.append(f"{s},{int(ring_atoms > 4)},{np.round(rng.uniform(0, 5), 3)}")
    for atom in ("C", "O", "N"):
        rows.append(f"{atom},0,1.0")
    path = tmp_path / "rings.csv"
    path.write_text("\n".join(rows) + "\n")
    return path


def small_config(path, out_dir, jobs=1):
    return SuiteConfig(
        datasets=(str(path),),
        seeds=(0, 1),
        tasks=("degree", "link", "cycles", "target:y", "baseline:y"),
        layers=2,
        hidden_dim=24,
        hidden_layers=0,
        epochs=4,
        batch_size=64,
        pair_count=300,
        jobs=jobs,
        out_dir=str(out_dir),
    )


def test_run_suite_isolates_cell_failures(tmp_path):
    path = suite_csv(tmp_path)
    result = run_suite(small_config(path, tmp_path / "out"))
    entry = result.report["datasets"]["rings"]
    assert entry["split_counts"]["train"] > 0
    assert entry["split_counts"]["valid"] > 0
    assert entry["split_counts"]["test"] > 0

    # the test split holds only the bare atoms, so pair sampling cannot work there
    link = entry["tasks"]["link"]
    assert "per_seed" not in link
    assert set(link["errors"]) == {"0", "1"}
    assert result.failures == 2

    for task in ("degree", "cycles", "target:y", "baseline:y"):
        t = entry["tasks"][task]
        assert set(t["per_seed"]) == {"0", "1"}, task
        assert "errors" not in t, task
    assert entry["tasks"]["degree"]["summary"]["cross_entropy"]["n"] == 2
    assert entry["embedspace"]["alignment"] is not None
    assert entry["substructure_rank"]
    assert entry["tasks"]["baseline:y"]["per_seed"]["0"]["best_epoch"] >= 0


def test_run_suite_dataset_failure_keeps_going(tmp_path):
    good = suite_csv(tmp_path)
    cfg = SuiteConfig(
        datasets=(str(tmp_path / "missing.csv"), str(good)),
        seeds=(0,),
        tasks=("cycles",),
        layers=1,
        hidden_dim=8,
        hidden_layers=0,
        epochs=2,
        out_dir=str(tmp_path / "out2"),
    )
    result = run_suite(cfg)
    assert "error" in result.report["datasets"]["missing"]
    assert "tasks" in result.report["datasets"]["rings"]
    assert result.failures == 1


def test_emit_report_is_deterministic(tmp_path):
    path = suite_csv(tmp_path)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    emit_report(run_suite(small_config(path, out_a)), out_a)
    emit_report(run_suite(small_config(path, out_b)), out_b)

    names_a = sorted(p.name for p in out_a.iterdir())
    names_b = sorted(p.name for p in out_b.iterdir())
    assert names_a == names_b
    assert "report.json" in names_a and "manifest.json" in names_a
    assert "scores.csv" in names_a and "split_rings.csv" in names_a
    for name in names_a:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name

    manifest = json.loads((out_a / "manifest.json").read_text())
    assert sorted(manifest["files"]) == names_a
    assert manifest["files"][-1] == "manifest.json"
    assert manifest["n_failures"] == 2

    scores = (out_a / "scores.csv").read_text().splitlines()
    assert scores[0] == "dataset,task,seed,metric,value"
    assert not any(row.startswith("rings,link,") for row in scores[1:])
    assert any(row.startswith("rings,degree,0,cross_entropy,") for row in scores[1:])


def test_run_suite_threaded_matches_serial(tmp_path):
    path = suite_csv(tmp_path)
    serial = run_suite(small_config(path, tmp_path / "s"))
    threaded = run_suite(small_config(path, tmp_path / "t", jobs=4))
    assert serial.report["datasets"] == threaded.report["datasets"]
