import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from synth import CORPUS, random_molecule

from molprobe.smiles import (
    SmilesError,
    implicit_hydrogens,
    parse_smiles,
    write_smiles,
)


# -- parsing --------------------------------------------------------------------


def test_ethanol_structure():
    g = parse_smiles("CCO")
    assert [a.element for a in g.atoms] == ["C", "C", "O"]
    assert g.n_bonds == 2
    assert g.bond_order(0, 1) == "single"


def test_branching_and_double_bond():
    g = parse_smiles("CC(=O)O")
    assert g.n_atoms == 4
    assert g.bond_order(1, 2) == "double"
    assert g.bond_order(1, 3) == "single"


def test_ring_closure_builds_cycle():
    g = parse_smiles("C1CCCCC1")
    assert g.n_bonds == 6
    assert g.has_bond(0, 5)


def test_aromatic_flags_set():
    g = parse_smiles("c1ccncc1")
    assert all(a.aromatic for a in g.atoms)
    assert all(b.order == "aromatic" for b in g.bonds)
    assert g.atoms[3].element == "N"


def test_two_letter_halogens_and_charge():
    g = parse_smiles("[O-]C(=O)Cl")
    assert g.atoms[0].formal_charge == -1
    assert g.atoms[3].element == "Cl"


def test_bracket_hydrogen_count():
    g = parse_smiles("[NH4+]")
    assert g.atoms[0].explicit_h == 4
    assert g.atoms[0].formal_charge == 1


def test_fragment_separator_makes_disconnected_graph():
    g = parse_smiles("[Na+].[Cl-]")
    assert g.n_atoms == 2
    assert g.n_bonds == 0


def test_percent_ring_closure():
    g = parse_smiles("C%12CCCCC%12")
    assert g.has_bond(0, 5)


def test_isotope_stereo_class_ignored_with_warning(caplog):
    with caplog.at_level(logging.WARNING, logger="molprobe.smiles"):
        g = parse_smiles("[13CH4]")
        parse_smiles("C[C@H](N)O")
        parse_smiles("[CH4:7]")
    assert g.atoms[0].element == "C"
    text = caplog.text.lower()
    assert "isotope" in text
    assert "stereo" in text
    assert "class" in text


def test_directional_bonds_become_single(caplog):
    with caplog.at_level(logging.WARNING, logger="molprobe.smiles"):
        g = parse_smiles("F/C=C/F")
    assert g.bond_order(0, 1) == "single"
    assert g.bond_order(1, 2) == "double"


@pytest.mark.parametrize(
    "text,offset,fragment",
    [
        ("", 0, "empty"),
        ("CC(C", 2, "unclosed branch"),
        ("C1CC", 1, "unclosed ring"),
        ("CC=", 2, "dangling"),
        ("C((C))", 2, "branch"),
        ("Cx", 1, "unexpected"),
        ("[H]", 0, "hydrogen"),
        ("[Xx]", 0, "unknown element"),
        ("C=#C", 2, "two bond symbols"),
        ("C11", 2, "itself"),
        ("C=1CC#1", 6, "conflicting"),
        ("C12CC12", 6, "duplicate bond"),
        ("=C", 0, "no preceding atom"),
        ("C%1C", 1, "two digits"),
    ],
)
def test_error_offsets(text, offset, fragment):
    with pytest.raises(SmilesError) as err:
        parse_smiles(text)
    assert fragment in str(err.value)
    assert err.value.offset == offset


def test_valence_overflow_rejected():
    with pytest.raises(SmilesError, match="valence"):
        parse_smiles("C(C)(C)(C)(C)C")
    with pytest.raises(SmilesError, match="valence"):
        parse_smiles("O=C(O)=O")


def test_charged_bracket_atoms_bypass_valence_rules():
    g = parse_smiles("O=[N+]([O-])C")
    assert g.atoms[1].formal_charge == 1


# -- implicit hydrogens -----------------------------------------------------------


@pytest.mark.parametrize(
    "smiles,index,count",
    [
        ("C", 0, 4),
        ("CC", 0, 3),
        ("C=C", 0, 2),
        ("C#N", 1, 0),
        ("c1ccccc1", 0, 1),
        ("c1ccncc1", 3, 0),
        ("c1ccoc1", 3, 0),
        ("CS(=O)C", 1, 0),
        ("N", 0, 3),
        ("O", 0, 2),
        ("Cl", 0, 1),
    ],
)
def test_implicit_hydrogen_counts(smiles, index, count):
    g = parse_smiles(smiles)
    total = 0.0
    arom = 0
    for v in g.neighbors(index):
        order = g.bond_order(index, v)
        if order == "aromatic":
            arom += 1
            total += 1.0
        else:
            total += {"single": 1.0, "double": 2.0, "triple": 3.0}[order]
    assert implicit_hydrogens(g.atoms[index], total, arom) == count


# -- writing ---------------------------------------------------------------------


def _same_molecule(g1, g2) -> bool:
    return oracles.isomorphic(g1, g2)


def test_round_trip_corpus():
    for s in CORPUS:
        g = parse_smiles(s)
        out = write_smiles(g)
        assert _same_molecule(g, parse_smiles(out)), f"{s} -> {out}"


def test_round_trip_random_molecules():
    rng = np.random.default_rng(8)
    for _ in range(60):
        g = random_molecule(rng, 4, 16)
        out = write_smiles(g)
        assert _same_molecule(g, parse_smiles(out)), out


def test_writer_quotes_charge_and_hydrogens():
    out = write_smiles(parse_smiles("[NH4+].[O-]C"))
    back = parse_smiles(out)
    charges = sorted(a.formal_charge for a in back.atoms)
    assert charges[0] == -1 and charges[-1] == 1
    assert any(a.explicit_h == 4 for a in back.atoms)


def test_writer_single_bond_between_aromatic_atoms():
    g = parse_smiles("c1ccc(-c2ccccc2)cc1")
    out = write_smiles(g)
    assert "-" in out
    assert _same_molecule(g, parse_smiles(out))


def test_writer_handles_many_rings():
    g = parse_smiles("C12C3C4C1C5C2C3C45")  # cubane
    out = write_smiles(g)
    assert _same_molecule(g, parse_smiles(out))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_round_trip_property(seed):
    rng = np.random.default_rng(seed)
    g = random_molecule(rng, 3, 14)
    out = write_smiles(g)
    back = parse_smiles(out)
    assert back.n_atoms == g.n_atoms
    assert back.n_bonds == g.n_bonds
    assert _same_molecule(g, back)
