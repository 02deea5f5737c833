"""Randomly initialised GIN message-passing encoder and embedding storage.

The encoder is untrained by design: it provides the random-weights baseline
whose embeddings the probes are run against. Determinism matters more than
speed here, so all weights come from one seeded generator in a fixed draw
order, and a given (seed, molecule) pair always produces bit-identical
embeddings.

Message passing follows the edge-feature GIN update: each node sums
``h_v + edge_embedding(order)`` over its neighbours, adds its own state, and
feeds the result through a two-layer MLP (width 2d, ReLU inside). Hidden
states pass through an extra ReLU between layers but not after the last one.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .graph import MolecularGraph, ORDER_CODES

ELEMENT_VOCAB = (
    "C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "B",
    "Si", "Se", "As", "Na", "K", "Li", "Ca", "Mg", "Zn", "Fe",
)
UNKNOWN_ELEMENT_ID = len(ELEMENT_VOCAB)
CHARGE_SPAN = 2  # charges clipped to [-2, 2] -> 5 buckets

_MAGIC = b"MPEMB001"


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 5
    hidden_dim: int = 300
    seed: int = 0
    readout: str = "mean"

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.readout not in ("mean", "sum"):
            raise ValueError(f"unknown readout {self.readout!r}")


@dataclass
class EmbeddingMatrix:
    """Embedding rows plus the index map back to molecules (and atoms).

    ``alignment`` is (N, 2) int64 of (molecule, atom) for node level and
    (N,) int64 of molecule indices for graph level.
    """

    values: np.ndarray
    level: str
    layer_index: int
    alignment: np.ndarray
    provenance: str = ""

    def validate(self) -> "EmbeddingMatrix":
        if self.level not in ("node", "graph"):
            raise ValueError(f"bad level {self.level!r}")
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D")
        if not np.isfinite(self.values).all():
            raise ValueError("non-finite embedding values")
        n = self.values.shape[0]
        if self.level == "node":
            if self.alignment.shape != (n, 2):
                raise ValueError("node alignment must be (N, 2)")
            keys = {tuple(r) for r in self.alignment.tolist()}
        else:
            if self.alignment.shape != (n,):
                raise ValueError("graph alignment must be (N,)")
            keys = set(self.alignment.tolist())
        if len(keys) != n:
            raise ValueError("alignment is not injective")
        return self


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


@dataclass
class Encoder:
    config: EncoderConfig
    elem_emb: np.ndarray = field(repr=False, default=None)
    arom_emb: np.ndarray = field(repr=False, default=None)
    charge_emb: np.ndarray = field(repr=False, default=None)
    layers: list = field(repr=False, default_factory=list)


def init_random(config: EncoderConfig) -> Encoder:
    """Build an encoder with Glorot-uniform weights, bit-deterministic per seed.

    Biases start at zero; the draw order (atom embeddings, then per layer the
    edge embedding and the two dense maps) is part of the format and must not
    be reordered.
    """
    rng = np.random.default_rng(config.seed)
    d = config.hidden_dim
    enc = Encoder(config=config)
    enc.elem_emb = _glorot(rng, UNKNOWN_ELEMENT_ID + 1, d)
    enc.arom_emb = _glorot(rng, 2, d)
    enc.charge_emb = _glorot(rng, 2 * CHARGE_SPAN + 1, d)
    for _ in range(config.layers):
        layer = {
            "edge_emb": _glorot(rng, len(ORDER_CODES), d),
            "w1": _glorot(rng, d, 2 * d),
            "b1": np.zeros(2 * d),
            "w2": _glorot(rng, 2 * d, d),
            "b2": np.zeros(d),
        }
        enc.layers.append(layer)
    return enc


def _featurize(molecules):
    """Concatenate all molecules into one node/edge block structure."""
    elem_ids = []
    arom_ids = []
    charge_ids = []
    src = []
    dst = []
    edge_orders = []
    mol_of_node = []
    offsets = [0]
    vocab = {el: i for i, el in enumerate(ELEMENT_VOCAB)}
    for m, g in enumerate(molecules):
        if g.n_atoms == 0:
            raise ValueError(f"molecule {m} is empty")
        base = offsets[-1]
        for a in g.atoms:
            elem_ids.append(vocab.get(a.element, UNKNOWN_ELEMENT_ID))
            arom_ids.append(int(a.aromatic))
            charge_ids.append(
                int(np.clip(a.formal_charge, -CHARGE_SPAN, CHARGE_SPAN)) + CHARGE_SPAN
            )
            mol_of_node.append(m)
        for b in g.bonds:
            code = ORDER_CODES[b.order]
            src += [base + b.u, base + b.v]
            dst += [base + b.v, base + b.u]
            edge_orders += [code, code]
        offsets.append(base + g.n_atoms)
    return (
        np.array(elem_ids, dtype=np.int64),
        np.array(arom_ids, dtype=np.int64),
        np.array(charge_ids, dtype=np.int64),
        np.array(src, dtype=np.int64),
        np.array(dst, dtype=np.int64),
        np.array(edge_orders, dtype=np.int64),
        np.array(mol_of_node, dtype=np.int64),
        np.array(offsets, dtype=np.int64),
    )


def encode_dataset(enc: Encoder, molecules, provenance: str = ""):
    """Per-layer node and graph embeddings for a batch of molecules.

    Returns (node_layers, graph_layers), one :class:`EmbeddingMatrix` per
    message-passing layer each; graph rows are the configured readout of that
    layer's node states.
    """
    molecules = list(molecules)
    elem, arom, charge, src, dst, orders, mol_of_node, offsets = _featurize(molecules)
    n_nodes = elem.shape[0]
    n_mols = len(molecules)
    d = enc.config.hidden_dim
    h = enc.elem_emb[elem] + enc.arom_emb[arom] + enc.charge_emb[charge]

    counts = np.diff(offsets).astype(np.float64)
    node_align = np.stack(
        [mol_of_node, np.concatenate([np.arange(g.n_atoms) for g in molecules])],
        axis=1,
    ).astype(np.int64)
    graph_align = np.arange(n_mols, dtype=np.int64)

    node_layers = []
    graph_layers = []
    n_layers = len(enc.layers)
    for t, layer in enumerate(enc.layers):
        msg = np.zeros((n_nodes, d))
        if src.shape[0]:
            vals = h[src] + layer["edge_emb"][orders]
            _kernels.scatter_add_rows(msg, dst, vals)
        z = (h + msg) @ layer["w1"] + layer["b1"]
        np.maximum(z, 0.0, out=z)
        out = z @ layer["w2"] + layer["b2"]
        h = np.maximum(out, 0.0) if t < n_layers - 1 else out

        pooled = np.zeros((n_mols, d))
        _kernels.scatter_add_rows(pooled, mol_of_node, h)
        if enc.config.readout == "mean":
            pooled /= counts[:, None]
        node_layers.append(
            EmbeddingMatrix(
                values=h.copy(),
                level="node",
                layer_index=t + 1,
                alignment=node_align.copy(),
                provenance=provenance,
            ).validate()
        )
        graph_layers.append(
            EmbeddingMatrix(
                values=pooled,
                level="graph",
                layer_index=t + 1,
                alignment=graph_align.copy(),
                provenance=provenance,
            ).validate()
        )
    return node_layers, graph_layers


def encode(enc: Encoder, g: MolecularGraph):
    """Single-molecule encode: per-layer node matrices plus the final graph row."""
    node_layers, graph_layers = encode_dataset(enc, [g])
    return node_layers, graph_layers[-1]


# -- storage ------------------------------------------------------------------


def save_embeddings(m: EmbeddingMatrix, path) -> None:
    m.validate()
    values = np.ascontiguousarray(m.values, dtype="<f8")
    align = np.ascontiguousarray(m.alignment, dtype="<i8")
    prov = m.provenance.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<IiQQI",
                0 if m.level == "node" else 1,
                m.layer_index,
                values.shape[0],
                values.shape[1],
                len(prov),
            )
        )
        fh.write(prov)
        fh.write(values.tobytes())
        fh.write(align.tobytes())


def load_embeddings(path) -> EmbeddingMatrix:
    blob = Path(path).read_bytes()
    if blob[: len(_MAGIC)] != _MAGIC:
        raise ValueError(f"{path}: not an embedding file (bad magic)")
    off = len(_MAGIC)
    head = struct.calcsize("<IiQQI")
    level_code, layer_index, n, d, prov_len = struct.unpack(
        "<IiQQI", blob[off : off + head]
    )
    off += head
    prov = blob[off : off + prov_len].decode("utf-8")
    off += prov_len
    n_values = n * d
    values = np.frombuffer(blob, dtype="<f8", count=n_values, offset=off).reshape(n, d)
    off += n_values * 8
    n_align = n * 2 if level_code == 0 else n
    align = np.frombuffer(blob, dtype="<i8", count=n_align, offset=off)
    off += n_align * 8
    if off != len(blob):
        raise ValueError(f"{path}: trailing bytes after embedding payload")
    level = "node" if level_code == 0 else "graph"
    align = align.reshape(n, 2) if level == "node" else align
    return EmbeddingMatrix(
        values=values.astype(np.float64),
        level=level,
        layer_index=layer_index,
        alignment=align.astype(np.int64),
        provenance=prov,
    ).validate()


def export_csv(m: EmbeddingMatrix, path) -> None:
    """Plain-text view of an embedding matrix, one row per embedding."""
    cols = [f"c{i}" for i in range(m.values.shape[1])]
    if m.level == "node":
        header = "molecule,atom," + ",".join(cols)
        lines = [header]
        for (mol, atom), row in zip(m.alignment.tolist(), m.values):
            lines.append(f"{mol},{atom}," + ",".join(repr(float(v)) for v in row))
    else:
        header = "molecule," + ",".join(cols)
        lines = [header]
        for mol, row in zip(m.alignment.tolist(), m.values):
            lines.append(f"{mol}," + ",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
