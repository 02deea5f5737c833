"""molprobe: probe-task evaluation of molecular graph embeddings.

Parse SMILES into labelled graphs, compute topology and substructure
targets, embed molecules with a random message-passing encoder, and measure
what linear-ish probes can read back out. Everything is numpy; the few hot
loops switch to compiled kernels when numba is importable (see
MOLPROBE_NUMBA).
"""

from ._kernels import NUMBA_ENABLED, backend
from ._version import __version__
from .embedspace import alignment, build_pairs, spectrum, uniformity
from .encoder import (
    EmbeddingMatrix,
    Encoder,
    EncoderConfig,
    encode,
    encode_dataset,
    init_random,
    load_embeddings,
    save_embeddings,
)
from .graph import Atom, Bond, MolecularGraph, canonical_hash, connected_components, perceive_rings
from .pipeline import (
    Dataset,
    SuiteConfig,
    bemis_murcko_scaffold,
    emit_report,
    load_dataset,
    run_suite,
    sample_node_pairs,
    scaffold_key,
    scaffold_split,
)
from .probe import (
    GradientError,
    ProbeConfig,
    ProbeModel,
    adam_step,
    aggregate_scores,
    build_probe,
    evaluate_probe,
    train_probe,
)
from .smiles import SmilesError, parse_smiles, write_smiles
from .substructure import cramers_v, load_registry, match_pattern, rank_substructures

__all__ = [
    "Atom",
    "Bond",
    "Dataset",
    "EmbeddingMatrix",
    "Encoder",
    "EncoderConfig",
    "GradientError",
    "MolecularGraph",
    "NUMBA_ENABLED",
    "ProbeConfig",
    "ProbeModel",
    "SmilesError",
    "SuiteConfig",
    "__version__",
    "adam_step",
    "aggregate_scores",
    "alignment",
    "backend",
    "bemis_murcko_scaffold",
    "build_pairs",
    "build_probe",
    "canonical_hash",
    "connected_components",
    "cramers_v",
    "emit_report",
    "encode",
    "encode_dataset",
    "evaluate_probe",
    "init_random",
    "load_dataset",
    "load_embeddings",
    "load_registry",
    "match_pattern",
    "parse_smiles",
    "perceive_rings",
    "rank_substructures",
    "run_suite",
    "sample_node_pairs",
    "save_embeddings",
    "scaffold_key",
    "scaffold_split",
    "spectrum",
    "train_probe",
    "uniformity",
    "write_smiles",
]
