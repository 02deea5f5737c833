"""Dataset loading, scaffold splits, and the probe-suite driver.

The suite ties everything together: parse a CSV of SMILES plus targets,
scaffold-split it, run a random encoder over the molecules, train probes for
every requested task and seed, and emit a deterministic report directory.
Reruns with the same config must produce byte-identical files, so nothing
here may depend on wall clock, filesystem order, or thread scheduling.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels, embedspace, graphstats, substructure
from ._version import __version__
from .encoder import EncoderConfig, encode_dataset, init_random
from .graph import MolecularGraph, canonical_hash, subgraph
from .probe import ProbeConfig, aggregate_scores, build_probe, evaluate_probe, train_probe
from .smiles import SmilesError, parse_smiles

LOGGER = logging.getLogger(__name__)

TRAIN, VALID, TEST = 0, 1, 2
SPLIT_NAMES = ("train", "valid", "test")

DEGREE_CLASSES = 7  # degrees 0..6, higher clipped


@dataclass
class Dataset:
    name: str
    graphs: list
    smiles: list
    targets: np.ndarray       # (N, T) float64, NaN = missing
    target_names: list
    n_skipped: int = 0        # input rows dropped for unparseable SMILES

    @property
    def n_molecules(self) -> int:
        return len(self.graphs)


def load_dataset(path, smiles_column: str | None = None, name: str | None = None) -> Dataset:
    """Read a MoleculeNet-style CSV: one SMILES column, the rest targets.

    Rows whose SMILES does not parse are dropped and counted. Blank target
    cells become NaN; so do non-numeric cells, with a warning.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, header required") from None
        rows = list(reader)
    if smiles_column is None:
        candidates = [h for h in header if h.strip().lower() == "smiles"]
        if not candidates:
            raise ValueError(f"{path}: no 'smiles' column; pass smiles_column")
        smiles_column = candidates[0]
    if smiles_column not in header:
        raise ValueError(f"{path}: column {smiles_column!r} not in header")
    si = header.index(smiles_column)
    target_names = [h for i, h in enumerate(header) if i != si]

    graphs = []
    smiles = []
    targets = []
    skipped = 0
    bad_cells = 0
    for row in rows:
        if len(row) != len(header):
            skipped += 1
            continue
        try:
            g = parse_smiles(row[si])
        except SmilesError:
            skipped += 1
            continue
        vals = []
        for i, cell in enumerate(row):
            if i == si:
                continue
            cell = cell.strip()
            if not cell:
                vals.append(np.nan)
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                vals.append(np.nan)
                bad_cells += 1
        graphs.append(g)
        smiles.append(row[si])
        targets.append(vals)
    if skipped:
        LOGGER.warning("%s: skipped %d rows with unparseable SMILES", path.name, skipped)
    if bad_cells:
        LOGGER.warning("%s: %d non-numeric target cells treated as missing", path.name, bad_cells)
    mat = (
        np.asarray(targets, dtype=np.float64)
        if targets
        else np.zeros((0, len(target_names)))
    )
    if mat.ndim == 1:
        mat = mat.reshape(len(graphs), len(target_names))
    return Dataset(
        name=name or path.stem,
        graphs=graphs,
        smiles=smiles,
        targets=mat,
        target_names=target_names,
        n_skipped=skipped,
    )


def bemis_murcko_scaffold(g: MolecularGraph) -> MolecularGraph:
    """Ring systems plus the chains connecting them; side chains pruned away.

    Implemented as repeated deletion of atoms with at most one neighbour.
    Ring atoms always keep degree >= 2, and atoms on a ring-to-ring linker
    always lie on a path between ring atoms, so exactly the dangling trees
    disappear. Acyclic molecules reduce to the empty graph.
    """
    current = g
    while current.n_atoms:
        degs = [len(current.neighbors(i)) for i in range(current.n_atoms)]
        alive = [i for i, d in enumerate(degs) if d > 1]
        if len(alive) == current.n_atoms:
            break
        current, _ = subgraph(current, alive)
    return current


def scaffold_key(g: MolecularGraph) -> int:
    # masked to 63 bits so keys fit signed int64 arrays
    return canonical_hash(bemis_murcko_scaffold(g)) & (2**63 - 1)


@dataclass(frozen=True)
class SplitAssignment:
    tags: np.ndarray           # (N,) uint8, 0 train / 1 valid / 2 test
    scaffold_keys: np.ndarray  # (N,) int64
    fractions: tuple           # requested

    def indices(self, which: int) -> np.ndarray:
        return np.flatnonzero(self.tags == which)

    def counts(self) -> tuple:
        return tuple(int((self.tags == w).sum()) for w in (TRAIN, VALID, TEST))

    def to_bytes(self) -> bytes:
        return self.tags.tobytes() + self.scaffold_keys.tobytes()


def scaffold_split(dataset: Dataset, fractions=(0.8, 0.1, 0.1), seed: int = 0) -> SplitAssignment:
    """Greedy scaffold-grouped split; whole groups, never a scaffold across splits.

    Groups go in size-descending order (ties broken by scaffold key) to train
    until it holds at least the train fraction, then to valid until
    train+valid reaches its mark, remainder to test. Achieved fractions can
    therefore miss the request by up to (largest group)/N. Deterministic for
    a given dataset; ``seed`` is accepted for interface symmetry only.
    """
    del seed
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError("fractions must be three non-negative numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    n = dataset.n_molecules
    keys = np.asarray([scaffold_key(g) for g in dataset.graphs], dtype=np.int64)
    groups: dict[int, list[int]] = {}
    for i, k in enumerate(keys.tolist()):
        groups.setdefault(k, []).append(i)
    order = sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    tags = np.zeros(n, dtype=np.uint8)
    t_train = fractions[0] * n
    t_valid = (fractions[0] + fractions[1]) * n
    c_train = 0
    c_valid = 0
    for _, members in order:
        if c_train < t_train:
            tag = TRAIN
            c_train += len(members)
        elif c_train + c_valid < t_valid:
            tag = VALID
            c_valid += len(members)
        else:
            tag = TEST
        for i in members:
            tags[i] = tag
    out = SplitAssignment(tags=tags, scaffold_keys=keys, fractions=tuple(fractions))
    for w, nm in zip((VALID, TEST), ("valid", "test")):
        if n and not (tags == w).any():
            LOGGER.warning("%s: %s split is empty (scaffold groups too coarse)", dataset.name, nm)
    return out


def write_split_csv(assignment: SplitAssignment, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["molecule", "scaffold", "split"])
        for i, (tag, key) in enumerate(zip(assignment.tags, assignment.scaffold_keys)):
            w.writerow([i, int(key), SPLIT_NAMES[tag]])


def sample_node_pairs(graphs, count: int, seed: int = 0, pool=None) -> np.ndarray:
    """(count, 3) rows of (molecule, u, v), u != v, drawn with replacement.

    Molecules are drawn uniformly from those with at least two atoms; an
    empty pool is an error.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    idx = list(range(len(graphs))) if pool is None else list(pool)
    eligible = np.asarray([i for i in idx if graphs[i].n_atoms >= 2], dtype=np.int64)
    if eligible.size == 0:
        raise ValueError("no molecule with at least two atoms to sample pairs from")
    rng = np.random.default_rng(seed)
    mols = eligible[rng.integers(0, eligible.size, size=count)]
    sizes = np.asarray([graphs[m].n_atoms for m in mols], dtype=np.int64)
    u = rng.integers(0, sizes)
    v = rng.integers(0, sizes - 1)
    v = v + (v >= u)
    return np.stack([mols, u, v], axis=1).astype(np.int64)


# -- suite configuration --------------------------------------------------------


TASK_FAMILIES = ("topology", "counts", "targets", "baselines")


@dataclass(frozen=True)
class SuiteConfig:
    datasets: tuple
    seeds: tuple = (0, 1, 2)
    tasks: tuple = TASK_FAMILIES
    layers: int = 5
    hidden_dim: int = 300
    readout: str = "mean"
    hidden_layers: int = 1
    width: int = 600
    epochs: int = 100
    learning_rate: float = 1e-3
    batch_size: int = 256
    pair_count: int = 10000
    fractions: tuple = (0.8, 0.1, 0.1)
    jobs: int = 1
    out_dir: str = "suite_out"

    def __post_init__(self) -> None:
        if not self.datasets:
            raise ValueError("at least one dataset is required")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.pair_count < 1:
            raise ValueError("pair_count must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")

    def probe_config(self, seed: int, task_kind: str, classes: int = 2) -> ProbeConfig:
        return ProbeConfig(
            hidden_layers=self.hidden_layers,
            width=self.width,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            seed=seed,
            task_kind=task_kind,
            classes=classes,
        )


_LIST_KEYS = {"datasets", "tasks"}
_INT_LIST_KEYS = {"seeds"}
_INT_KEYS = {"layers", "hidden_dim", "hidden_layers", "width", "epochs", "batch_size", "pair_count", "jobs"}
_FLOAT_KEYS = {"learning_rate"}
_STR_KEYS = {"readout", "out_dir"}


def read_config(path) -> dict:
    """Line-oriented ``key = value`` file; '#' starts a comment."""
    out: dict = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in _LIST_KEYS:
            out[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in _INT_LIST_KEYS:
            out[key] = tuple(int(v) for v in value.split(",") if v.strip())
        elif key in _INT_KEYS:
            out[key] = int(value)
        elif key in _FLOAT_KEYS:
            out[key] = float(value)
        elif key in _STR_KEYS:
            out[key] = value
        elif key == "fractions":
            parts = tuple(float(v) for v in value.split(",") if v.strip())
            out[key] = parts
        else:
            raise ValueError(f"{path}:{ln}: unknown key {key!r}")
    return out


def config_dict(cfg: SuiteConfig) -> dict:
    return {
        "datasets": list(cfg.datasets),
        "seeds": list(cfg.seeds),
        "tasks": list(cfg.tasks),
        "layers": cfg.layers,
        "hidden_dim": cfg.hidden_dim,
        "readout": cfg.readout,
        "hidden_layers": cfg.hidden_layers,
        "width": cfg.width,
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "pair_count": cfg.pair_count,
        "fractions": list(cfg.fractions),
        "jobs": cfg.jobs,
    }


def config_hash(cfg: SuiteConfig) -> str:
    blob = json.dumps(config_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# -- task construction -----------------------------------------------------------


@dataclass
class TaskSpec:
    name: str
    level: str        # node | pair | graph
    kind: str         # regression | binary_classification | multiclass
    classes: int = 2


def _is_binary(col: np.ndarray) -> bool:
    vals = col[np.isfinite(col)]
    return vals.size > 0 and np.isin(vals, (0.0, 1.0)).all()


def expand_tasks(cfg: SuiteConfig, ds: Dataset, names) -> list[TaskSpec]:
    """Resolve family aliases and explicit task names against one dataset."""
    specs: list[TaskSpec] = []
    selected = list(cfg.tasks)

    def add_topology():
        specs.append(TaskSpec("degree", "node", "multiclass", DEGREE_CLASSES))
        specs.append(TaskSpec("centrality", "node", "regression"))
        specs.append(TaskSpec("clustering", "node", "regression"))
        specs.append(TaskSpec("link", "pair", "binary_classification"))
        specs.append(TaskSpec("jaccard", "pair", "regression"))
        specs.append(TaskSpec("katz", "pair", "regression"))
        for m in graphstats.GRAPH_METRICS:
            specs.append(TaskSpec(m, "graph", "regression"))

    def add_counts():
        for nm in names:
            specs.append(TaskSpec(f"count:{nm}", "graph", "regression"))

    def add_targets():
        for t, nm in enumerate(ds.target_names):
            kind = "binary_classification" if _is_binary(ds.targets[:, t]) else "regression"
            specs.append(TaskSpec(f"target:{nm}", "graph", kind))

    def add_baselines():
        for t, nm in enumerate(ds.target_names):
            if _is_binary(ds.targets[:, t]):
                specs.append(TaskSpec(f"baseline:{nm}", "graph", "binary_classification"))

    for token in selected:
        if token == "topology":
            add_topology()
        elif token == "counts":
            add_counts()
        elif token == "targets":
            add_targets()
        elif token == "baselines":
            add_baselines()
        elif token in graphstats.NODE_METRICS:
            kind = "multiclass" if token == "degree" else "regression"
            specs.append(TaskSpec(token, "node", kind, DEGREE_CLASSES))
        elif token in graphstats.PAIR_METRICS:
            kind = "binary_classification" if token == "link" else "regression"
            specs.append(TaskSpec(token, "pair", kind))
        elif token in graphstats.GRAPH_METRICS:
            specs.append(TaskSpec(token, "graph", "regression"))
        elif token.startswith(("count:", "target:", "baseline:")):
            prefix, _, rest = token.partition(":")
            if prefix == "count":
                if rest not in names:
                    raise ValueError(f"unknown substructure {rest!r}")
                specs.append(TaskSpec(token, "graph", "regression"))
            else:
                if rest not in ds.target_names:
                    raise ValueError(f"unknown target column {rest!r}")
                t = ds.target_names.index(rest)
                binary = _is_binary(ds.targets[:, t])
                if prefix == "baseline" and not binary:
                    raise ValueError(f"baseline needs a binary target, {rest!r} is not")
                kind = "binary_classification" if binary else "regression"
                specs.append(TaskSpec(token, "graph", kind))
        else:
            raise ValueError(f"unknown task {token!r}")
    seen = set()
    unique = []
    for s in specs:
        if s.name not in seen:
            seen.add(s.name)
            unique.append(s)
    return unique


@dataclass
class _DatasetContext:
    """Everything derivable from a dataset before any probe runs."""

    ds: Dataset
    split: SplitAssignment
    node_values: dict      # seed -> (n_nodes, d) final-layer node embeddings
    graph_values: dict     # seed -> (n_mols, d) final-layer graph embeddings
    node_mol: np.ndarray   # (n_nodes,) molecule index per node row
    node_offsets: np.ndarray
    counts_matrix: np.ndarray
    node_targets: dict     # metric -> (values (n_nodes,), mask)
    graph_targets: dict    # metric -> (values (n_mols,), mask)
    pairs: dict            # (split tag, seed) -> (count, 3) samples


def _node_target_arrays(ds: Dataset, needed) -> dict:
    offsets = np.concatenate(([0], np.cumsum([g.n_atoms for g in ds.graphs])))
    n_nodes = int(offsets[-1])
    out = {}
    for metric in graphstats.NODE_METRICS:
        if metric not in needed:
            continue
        vals = np.full(n_nodes, np.nan)
        for m, g in enumerate(ds.graphs):
            try:
                if metric == "degree":
                    v = graphstats.node_degrees(g).astype(np.float64)
                elif metric == "centrality":
                    v = graphstats.eigenvector_centrality(g)
                else:
                    v = graphstats.clustering_coefficients(g)
            except (graphstats.PowerIterationError, ValueError):
                continue
            vals[offsets[m] : offsets[m + 1]] = v
        out[metric] = vals
    return out


def _graph_target_arrays(ds: Dataset, names, counts: np.ndarray, needed) -> dict:
    # only materialize what a requested task will read: connectivity in
    # particular is a max-flow per non-adjacent pair and must not run unasked
    out = {}
    for metric in graphstats.GRAPH_METRICS:
        if metric not in needed:
            continue
        col = graphstats.compute_graph_metric(ds.graphs, metric)
        out[metric] = np.asarray(
            [np.nan if v is None else float(v) for v in col], dtype=np.float64
        )
    for j, nm in enumerate(names):
        key = f"count:{nm}"
        if key in needed:
            out[key] = counts[:, j].astype(np.float64)
    for t, nm in enumerate(ds.target_names):
        for key in (f"target:{nm}", f"baseline:{nm}"):
            if key in needed:
                out[key] = ds.targets[:, t]
    return out


def _pair_features(node_values: np.ndarray, offsets: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    zu = node_values[offsets[pairs[:, 0]] + pairs[:, 1]]
    zv = node_values[offsets[pairs[:, 0]] + pairs[:, 2]]
    return np.concatenate([zu, zv, zu * zv], axis=1)


def _pair_targets(ds: Dataset, name: str, pairs: np.ndarray) -> np.ndarray:
    vals = np.empty(pairs.shape[0], dtype=np.float64)
    for i, (m, u, v) in enumerate(pairs.tolist()):
        g = ds.graphs[m]
        if name == "link":
            vals[i] = graphstats.link_label(g, u, v)
        elif name == "jaccard":
            vals[i] = graphstats.jaccard_coefficient(g, u, v)
        else:
            vals[i] = graphstats.katz_index(g, u, v)
    return vals


def _prepare_dataset(cfg: SuiteConfig, ds: Dataset, names, specs) -> _DatasetContext:
    if ds.n_molecules < 3:
        raise ValueError(f"{ds.name}: need at least 3 molecules to split")
    needed = {s.name for s in specs}
    split = scaffold_split(ds, cfg.fractions)
    counts = substructure.count_matrix(ds.graphs)
    node_values = {}
    graph_values = {}
    node_mol = None
    for seed in cfg.seeds:
        enc = init_random(
            EncoderConfig(layers=cfg.layers, hidden_dim=cfg.hidden_dim, seed=seed, readout=cfg.readout)
        )
        node_layers, graph_layers = encode_dataset(enc, ds.graphs)
        node_values[seed] = node_layers[-1].values
        graph_values[seed] = graph_layers[-1].values
        if node_mol is None:
            node_mol = node_layers[-1].alignment[:, 0]
    offsets = np.concatenate(([0], np.cumsum([g.n_atoms for g in ds.graphs]))).astype(np.int64)
    pairs = {}
    if any(s.level == "pair" for s in specs):
        for seed in cfg.seeds:
            for tag in (TRAIN, VALID, TEST):
                pool = split.indices(tag)
                try:
                    pairs[(tag, seed)] = sample_node_pairs(
                        ds.graphs, cfg.pair_count, seed=seed * 1000 + tag, pool=pool
                    )
                except ValueError:
                    pairs[(tag, seed)] = None
    return _DatasetContext(
        ds=ds,
        split=split,
        node_values=node_values,
        graph_values=graph_values,
        node_mol=node_mol,
        node_offsets=offsets,
        counts_matrix=counts,
        node_targets=_node_target_arrays(ds, needed),
        graph_targets=_graph_target_arrays(ds, names, counts, needed),
        pairs=pairs,
    )


def _run_cell(cfg: SuiteConfig, ctx: _DatasetContext, spec: TaskSpec, seed: int) -> dict:
    """Train and score one (dataset, task, seed) probe."""
    ds = ctx.ds
    split = ctx.split
    if spec.level == "node":
        values = ctx.node_values[seed]
        raw = ctx.node_targets[spec.name]
        mol_of_row = ctx.node_mol
    elif spec.level == "graph":
        if spec.name.startswith("baseline:"):
            values = ctx.counts_matrix.astype(np.float64)
        else:
            values = ctx.graph_values[seed]
        raw = ctx.graph_targets[spec.name]
        mol_of_row = np.arange(ds.n_molecules, dtype=np.int64)
    else:
        parts = {}
        for tag in (TRAIN, VALID, TEST):
            sampled = ctx.pairs[(tag, seed)]
            if sampled is None:
                raise ValueError(f"{SPLIT_NAMES[tag]} split has no molecule with two atoms")
            x = _pair_features(ctx.node_values[seed], ctx.node_offsets, sampled)
            y = _pair_targets(ds, spec.name, sampled)
            parts[tag] = (x, y)
        return _fit_and_score(cfg, spec, seed, parts)

    defined = np.isfinite(raw)
    parts = {}
    for tag in (TRAIN, VALID, TEST):
        rows = (split.tags[mol_of_row] == tag) & defined
        x = values[rows]
        y = raw[rows]
        if spec.kind == "multiclass":
            y = np.clip(y, 0, spec.classes - 1).astype(np.int64)
        parts[tag] = (x, y)
    dropped = int((~defined).sum())
    scores = _fit_and_score(cfg, spec, seed, parts)
    if dropped:
        scores["rows_dropped"] = dropped
    return scores


def _fit_and_score(cfg: SuiteConfig, spec: TaskSpec, seed: int, parts: dict) -> dict:
    for tag in (TRAIN, VALID, TEST):
        if parts[tag][0].shape[0] == 0:
            raise ValueError(f"{SPLIT_NAMES[tag]} split is empty for task {spec.name}")
    hidden = 0 if spec.name.startswith("baseline:") else cfg.hidden_layers
    pconf = ProbeConfig(
        hidden_layers=hidden,
        width=cfg.width,
        epochs=cfg.epochs,
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        seed=seed,
        task_kind=spec.kind,
        classes=spec.classes,
    )
    model = build_probe(pconf, input_dim=parts[TRAIN][0].shape[1])
    result = train_probe(model, parts[TRAIN], parts[VALID], pconf)
    scores = evaluate_probe(result.model, parts[TEST])
    scores["best_epoch"] = result.best_epoch
    y_test = np.asarray(parts[TEST][1], dtype=np.float64)
    if spec.kind == "regression":
        var = float(y_test.var())
        scores["normalized_mse"] = scores["mse"] / var if var > 0 else None
    elif spec.kind == "multiclass":
        scores["normalized_cross_entropy"] = scores["cross_entropy"] / math.log(spec.classes)
    else:
        scores["normalized_cross_entropy"] = scores["cross_entropy"] / math.log(2.0)
    return scores


def _embedspace_block(cfg: SuiteConfig, ctx: _DatasetContext) -> dict:
    seed0 = cfg.seeds[0]
    values = ctx.graph_values[seed0]
    block: dict = {}
    block["uniformity"] = embedspace.uniformity(values)
    spec = embedspace.spectrum(values)
    block["spectrum"] = {
        "effective_rank": spec.effective_rank,
        "collapsed": bool(spec.collapsed),
        "dim": spec.dim,
        "top_singular_value": float(spec.singular_values[0]),
    }
    binary_cols = [
        t for t in range(len(ctx.ds.target_names)) if _is_binary(ctx.ds.targets[:, t])
    ]
    if binary_cols:
        pairset = embedspace.build_pairs(
            ctx.ds.targets[:, binary_cols], cfg.pair_count, seed=seed0
        )
        al = embedspace.alignment(values, pairset)
        block["alignment"] = {
            "mean_positive": al.mean_positive,
            "mean_negative": al.mean_negative,
            "separation": al.separation,
            "skipped_positive": al.skipped_positive,
            "skipped_negative": al.skipped_negative,
            "n_positive": int(pairset.positive.shape[0]),
            "n_negative": int(pairset.negative.shape[0]),
        }
        block["_alignment_result"] = al
    else:
        block["alignment"] = None
    block["_spectrum_result"] = spec
    return block


@dataclass
class SuiteResult:
    config: SuiteConfig
    report: dict
    artifacts: dict      # dataset name -> {"split": ..., "spectrum": ..., "alignment": ...}
    failures: int


def run_suite(cfg: SuiteConfig) -> SuiteResult:
    """Probe every (dataset, task, seed) cell; one failure never kills the run."""
    registry = substructure.load_registry()
    names = substructure.registry_names(registry)
    report: dict = {
        "version": __version__,
        "kernel_backend": _kernels.backend(),
        "config": config_dict(cfg),
        "config_hash": config_hash(cfg),
        "datasets": {},
    }
    artifacts: dict = {}
    failures = 0
    for path in cfg.datasets:
        try:
            ds = load_dataset(path)
            specs = expand_tasks(cfg, ds, names)
            ctx = _prepare_dataset(cfg, ds, names, specs)
        except (OSError, ValueError) as exc:
            report["datasets"][Path(path).stem] = {"error": str(exc)}
            failures += 1
            continue
        entry: dict = {
            "n_molecules": ds.n_molecules,
            "n_skipped": ds.n_skipped,
            "split_counts": dict(zip(SPLIT_NAMES, ctx.split.counts())),
            "tasks": {},
        }

        def one(args):
            spec, seed = args
            try:
                return spec.name, seed, _run_cell(cfg, ctx, spec, seed), None
            except Exception as exc:  # isolate cell failures
                return spec.name, seed, None, f"{type(exc).__name__}: {exc}"

        cells = [(spec, seed) for spec in specs for seed in cfg.seeds]
        if cfg.jobs > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                results = list(pool.map(one, cells))
        else:
            results = [one(c) for c in cells]

        by_task: dict = {}
        for name, seed, scores, err in results:
            by_task.setdefault(name, {})[seed] = (scores, err)
        for spec in specs:
            per_seed = []
            errors = {}
            for seed in cfg.seeds:
                scores, err = by_task[spec.name][seed]
                if err is not None:
                    errors[str(seed)] = err
                    failures += 1
                else:
                    per_seed.append(scores)
            task_entry: dict = {"kind": spec.kind, "level": spec.level}
            if per_seed:
                task_entry["per_seed"] = {
                    str(seed): by_task[spec.name][seed][0]
                    for seed in cfg.seeds
                    if by_task[spec.name][seed][1] is None
                }
                task_entry["summary"] = aggregate_scores(per_seed)
            if errors:
                task_entry["errors"] = errors
            entry["tasks"][spec.name] = task_entry

        space = _embedspace_block(cfg, ctx)
        al_result = space.pop("_alignment_result", None)
        sp_result = space.pop("_spectrum_result")
        entry["embedspace"] = space

        assoc = substructure.association_matrix(ctx.counts_matrix, ds.targets)
        ranked = substructure.rank_substructures(assoc, names, mode="task")
        entry["substructure_rank"] = [{"name": n, "v": v} for n, v in ranked]
        report["datasets"][ds.name] = entry
        artifacts[ds.name] = {
            "split": ctx.split,
            "spectrum": sp_result,
            "alignment": al_result,
            "assoc": assoc,
        }
    report["n_failures"] = failures
    return SuiteResult(config=cfg, report=report, artifacts=artifacts, failures=failures)


# -- report emission -------------------------------------------------------------


def _fmt_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def emit_report(result: SuiteResult, out_dir) -> list:
    """Write the report directory; rerunning the same config is byte-identical.

    No timestamps, no environment echoes beyond version and kernel backend.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(path: Path, text: str):
        path.write_text(text)
        written.append(path)

    report = result.report
    emit(out / "report.json", json.dumps(report, sort_keys=True, indent=1) + "\n")

    rows = []
    for ds_name in sorted(report["datasets"]):
        entry = report["datasets"][ds_name]
        for task in sorted(entry.get("tasks", {})):
            t = entry["tasks"][task]
            for seed in sorted(t.get("per_seed", {}), key=int):
                for metric in sorted(t["per_seed"][seed]):
                    rows.append(
                        f"{ds_name},{task},{seed},{metric},{_fmt_value(t['per_seed'][seed][metric])}"
                    )
    emit(out / "scores.csv", "dataset,task,seed,metric,value\n" + "\n".join(rows) + "\n")

    rows = []
    for ds_name in sorted(report["datasets"]):
        entry = report["datasets"][ds_name]
        for task in sorted(entry.get("tasks", {})):
            t = entry["tasks"][task]
            for metric in sorted(t.get("summary", {})):
                s = t["summary"][metric]
                rows.append(
                    f"{ds_name},{task},{metric},{_fmt_value(s['mean'])},{_fmt_value(s['std'])},{s['n']}"
                )
    emit(out / "summary.csv", "dataset,task,metric,mean,std,n\n" + "\n".join(rows) + "\n")

    rows = []
    for ds_name in sorted(report["datasets"]):
        entry = report["datasets"][ds_name]
        for rank, item in enumerate(entry.get("substructure_rank", []), start=1):
            rows.append(f"{ds_name},{rank},{item['name']},{_fmt_value(item['v'])}")
    emit(out / "ranks.csv", "dataset,rank,substructure,v\n" + "\n".join(rows) + "\n")

    uni_rows = {}
    for ds_name in sorted(report["datasets"]):
        entry = report["datasets"][ds_name]
        if "embedspace" in entry:
            uni_rows[ds_name] = {"random_gin": entry["embedspace"]["uniformity"]}
    if uni_rows:
        embedspace.write_uniformity_csv(uni_rows, out / "uniformity.csv")
        written.append(out / "uniformity.csv")

    for ds_name in sorted(result.artifacts):
        art = result.artifacts[ds_name]
        split_path = out / f"split_{ds_name}.csv"
        write_split_csv(art["split"], split_path)
        written.append(split_path)
        spec_path = out / f"spectrum_{ds_name}.csv"
        embedspace.write_spectrum_csv(art["spectrum"], spec_path)
        written.append(spec_path)
        if art["alignment"] is not None:
            al_path = out / f"alignment_{ds_name}.json"
            embedspace.write_alignment_json(art["alignment"], al_path)
            written.append(al_path)

    manifest = {
        "version": report["version"],
        "kernel_backend": report["kernel_backend"],
        "config_hash": report["config_hash"],
        "seeds": list(result.config.seeds),
        "files": sorted(p.name for p in written) + ["manifest.json"],
        "n_failures": result.failures,
    }
    emit(out / "manifest.json", json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return written
