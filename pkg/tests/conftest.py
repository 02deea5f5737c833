import pytest

from molprobe.smiles import parse_smiles

from synth import CORPUS


@pytest.fixture(scope="session")
def corpus_graphs():
    return [parse_smiles(s) for s in CORPUS]
