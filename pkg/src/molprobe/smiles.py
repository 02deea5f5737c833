"""SMILES reader and writer over the heavy-atom graph model.

Supported input: organic-subset atoms, bracket atoms with charge and H
counts, ring closures up to %99, branches, bond symbols ``- = # :``, and
dot-separated fragments. Stereo markers, isotopes, and atom classes are
parsed and dropped with a warning. Hydrogens never become nodes, so ``[H]``
as an atom of its own is rejected.
"""

from __future__ import annotations

import heapq
import logging
import re

from .graph import Atom, Bond, MolecularGraph

LOGGER = logging.getLogger(__name__)

ORGANIC_SUBSET = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
AROMATIC_BARE = ("b", "c", "n", "o", "p", "s")
AROMATIC_BRACKET = ("b", "c", "n", "o", "p", "s", "se", "as", "te")

# Lowest acceptable total valences per element, checked for bare atoms only;
# bracket atoms carry their own H counts and escape the check.
DEFAULT_VALENCES = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

# Extra valence unit an aromatic atom contributes for its in-ring double bond.
# O/S sit in aromatic rings through a lone pair instead, hence 0.
AROMATIC_INCREMENT = {"B": 1, "C": 1, "N": 1, "P": 1, "O": 0, "S": 0, "Se": 0, "As": 1, "Te": 0}

ELEMENTS = frozenset(
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni "
    "Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I "
    "Xe Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt "
    "Au Hg Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr "
    "Rf Db Sg Bh Hs Mt Ds Rg Cn Nh Fl Mc Lv Ts Og".split()
)

BOND_SYMBOLS = {"-": "single", "=": "double", "#": "triple", ":": "aromatic"}
ORDER_VALUE = {"single": 1, "double": 2, "triple": 3}

_BRACKET = re.compile(
    r"""^(?P<isotope>\d+)?
        (?P<element>[A-Z][a-z]?|[a-z]{1,2})
        (?P<stereo>@{1,2})?
        (?P<hcount>H\d*)?
        (?P<charge>[+-]\d+|\++|-+)?
        (?::(?P<cls>\d+))?$""",
    re.X,
)


class SmilesError(ValueError):
    """Parse or write failure; ``offset`` is the byte position in the input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


def _parse_bracket(body: str, offset: int) -> Atom:
    m = _BRACKET.match(body)
    if m is None:
        raise SmilesError(f"malformed bracket atom [{body}]", offset)
    if m.group("isotope"):
        LOGGER.warning("offset %d: isotope %s ignored", offset, m.group("isotope"))
    if m.group("stereo"):
        LOGGER.warning("offset %d: stereo marker %s ignored", offset, m.group("stereo"))
    if m.group("cls"):
        LOGGER.warning("offset %d: atom class :%s ignored", offset, m.group("cls"))
    sym = m.group("element")
    aromatic = sym[0].islower()
    if aromatic:
        if sym not in AROMATIC_BRACKET:
            raise SmilesError(f"element {sym!r} cannot be aromatic", offset)
        element = sym.capitalize()
    else:
        element = sym
    if element == "H":
        raise SmilesError("hydrogen cannot be a graph node, fold it into a bracket H count", offset)
    if element not in ELEMENTS:
        raise SmilesError(f"unknown element {element!r}", offset)
    hcount = 0
    if m.group("hcount"):
        digits = m.group("hcount")[1:]
        hcount = int(digits) if digits else 1
    charge = 0
    if m.group("charge"):
        tok = m.group("charge")
        if len(tok) > 1 and tok[1:].isdigit():
            charge = int(tok[1:]) * (1 if tok[0] == "+" else -1)
        else:
            charge = len(tok) * (1 if tok[0] == "+" else -1)
    return Atom(element, aromatic=aromatic, formal_charge=charge, explicit_h=hcount)


def parse_smiles(text: str) -> MolecularGraph:
    """Parse one SMILES string into a :class:`MolecularGraph`.

    Raises :class:`SmilesError` with a byte offset on malformed input,
    unclosed rings or branches, unknown elements, or valence overflow.
    """
    s = text.strip()
    if not s:
        raise SmilesError("empty SMILES", 0)

    atoms: list[Atom] = []
    offsets: list[int] = []
    bare: list[bool] = []
    bonds: list[Bond] = []
    bonded: set[tuple[int, int]] = set()

    prev: int | None = None
    pending: str | None = None
    pending_off = 0
    stack: list[tuple[int, int]] = []  # (attach atom, offset of '(')
    fresh_branch = False  # '(' seen, no atom yet
    ring_open: dict[int, tuple[int, str | None, int]] = {}

    def add_bond(u: int, v: int, sym: str | None, off: int) -> None:
        key = (min(u, v), max(u, v))
        if key in bonded:
            raise SmilesError(f"duplicate bond between atoms {key[0]} and {key[1]}", off)
        if sym is None:
            order = "aromatic" if atoms[u].aromatic and atoms[v].aromatic else "single"
        else:
            order = sym
        bonded.add(key)
        bonds.append(Bond(u, v, order))

    def attach(atom: Atom, off: int) -> None:
        nonlocal prev, pending, fresh_branch
        atoms.append(atom)
        offsets.append(off)
        idx = len(atoms) - 1
        if prev is not None:
            add_bond(prev, idx, pending, off)
        elif pending is not None:
            raise SmilesError("bond symbol with no preceding atom", pending_off)
        pending = None
        prev = idx
        fresh_branch = False

    i = 0
    n = len(s)
    while i < n:
        ch = s[i]
        if ch == "[":
            j = s.find("]", i)
            if j < 0:
                raise SmilesError("unterminated bracket atom", i)
            attach(_parse_bracket(s[i + 1 : j], i), i)
            bare.append(False)
            i = j + 1
        elif s[i : i + 2] in ("Cl", "Br"):
            attach(Atom(s[i : i + 2]), i)
            bare.append(True)
            i += 2
        elif ch in "BCNOPSFI":
            attach(Atom(ch), i)
            bare.append(True)
            i += 1
        elif ch in AROMATIC_BARE:
            attach(Atom(ch.upper(), aromatic=True), i)
            bare.append(True)
            i += 1
        elif ch in BOND_SYMBOLS or ch in "/\\":
            if pending is not None:
                raise SmilesError("two bond symbols in a row", i)
            if prev is None:
                raise SmilesError("bond symbol with no preceding atom", i)
            if ch in "/\\":
                LOGGER.warning("offset %d: directional bond %r read as single", i, ch)
                pending = "single"
            else:
                pending = BOND_SYMBOLS[ch]
            pending_off = i
            i += 1
        elif ch == "(":
            if prev is None:
                raise SmilesError("branch opened before any atom", i)
            if pending is not None:
                raise SmilesError("bond symbol before branch opening", i)
            if fresh_branch:
                raise SmilesError("branch opened directly inside another '('", i)
            stack.append((prev, i))
            fresh_branch = True
            i += 1
        elif ch == ")":
            if pending is not None:
                raise SmilesError("dangling bond symbol before ')'", pending_off)
            if not stack:
                raise SmilesError("unmatched ')'", i)
            if fresh_branch:
                raise SmilesError("empty branch", i)
            prev = stack.pop()[0]
            i += 1
        elif ch == ".":
            if pending is not None:
                raise SmilesError("bond symbol before fragment separator", pending_off)
            prev = None
            i += 1
        elif ch.isdigit() or ch == "%":
            if ch == "%":
                two = s[i + 1 : i + 3]
                if len(two) != 2 or not two.isdigit():
                    raise SmilesError("'%' needs two digits", i)
                num = int(two)
                width = 3
            else:
                num = int(ch)
                width = 1
            if prev is None:
                raise SmilesError("ring closure before any atom", i)
            if num in ring_open:
                other, sym0, off0 = ring_open.pop(num)
                if other == prev:
                    raise SmilesError(f"ring closure {num} bonds atom {prev} to itself", i)
                if sym0 is not None and pending is not None and sym0 != pending:
                    raise SmilesError(
                        f"ring closure {num} gives conflicting bond orders", i
                    )
                add_bond(other, prev, sym0 if sym0 is not None else pending, i)
            else:
                ring_open[num] = (prev, pending, i)
            pending = None
            i += width
        else:
            raise SmilesError(f"unexpected character {ch!r}", i)

    if pending is not None:
        raise SmilesError("dangling bond symbol at end of input", pending_off)
    if stack:
        raise SmilesError("unclosed branch", stack[-1][1])
    if ring_open:
        num, (_, _, off) = min(ring_open.items(), key=lambda kv: kv[1][2])
        raise SmilesError(f"unclosed ring closure {num}", off)

    _check_valences(atoms, bare, bonds, offsets)
    return MolecularGraph(atoms, bonds)


def _check_valences(atoms, bare, bonds, offsets) -> None:
    total = [0.0] * len(atoms)
    arom = [0] * len(atoms)
    for b in bonds:
        for end in (b.u, b.v):
            if b.order == "aromatic":
                arom[end] += 1
                total[end] += 1
            else:
                total[end] += ORDER_VALUE[b.order]
    for idx, atom in enumerate(atoms):
        if not bare[idx]:
            continue
        t = total[idx]
        if atom.aromatic and arom[idx] > 0:
            t += AROMATIC_INCREMENT[atom.element]
        allowed = DEFAULT_VALENCES[atom.element]
        if t > max(allowed):
            raise SmilesError(
                f"{atom.element} with bond order total {t:g} exceeds valence {max(allowed)}",
                offsets[idx],
            )


def implicit_hydrogens(atom: Atom, order_total: float, aromatic_bonds: int) -> int:
    """Hydrogens a bare organic-subset atom carries at the given bond total."""
    t = order_total
    if atom.aromatic and aromatic_bonds > 0:
        t += AROMATIC_INCREMENT[atom.element]
    for v in DEFAULT_VALENCES[atom.element]:
        if v >= t:
            return int(v - t)
    return 0


# -- writer -----------------------------------------------------------------


def _atom_token(atom: Atom) -> str:
    plain = (
        atom.formal_charge == 0
        and atom.explicit_h == 0
        and atom.element in ORGANIC_SUBSET
        and (not atom.aromatic or atom.element.lower() in AROMATIC_BARE)
    )
    if plain:
        return atom.element.lower() if atom.aromatic else atom.element
    sym = atom.element.lower() if atom.aromatic else atom.element
    h = ""
    if atom.explicit_h == 1:
        h = "H"
    elif atom.explicit_h > 1:
        h = f"H{atom.explicit_h}"
    q = ""
    if atom.formal_charge == 1:
        q = "+"
    elif atom.formal_charge == -1:
        q = "-"
    elif atom.formal_charge > 1:
        q = f"+{atom.formal_charge}"
    elif atom.formal_charge < -1:
        q = str(atom.formal_charge)
    return f"[{sym}{h}{q}]"


def _bond_token(g: MolecularGraph, u: int, v: int) -> str:
    order = g.bond_order(u, v)
    both_aromatic = g.atoms[u].aromatic and g.atoms[v].aromatic
    if order == "single":
        return "-" if both_aromatic else ""
    if order == "aromatic":
        return "" if both_aromatic else ":"
    return {"double": "=", "triple": "#"}[order]


def write_smiles(g: MolecularGraph) -> str:
    """Serialize the graph; re-parsing yields an atom/bond-identical graph."""
    n = g.n_atoms
    if n == 0:
        return ""
    visited = [False] * n
    parent = [-1] * n
    order: list[int] = []
    children: list[list[int]] = [[] for _ in range(n)]
    seen_ring: set[tuple[int, int]] = set()
    roots = []
    for root in range(n):
        if visited[root]:
            continue
        roots.append(root)
        stack = [root]
        visited[root] = True
        while stack:
            u = stack.pop()
            order.append(u)
            if parent[u] >= 0:
                children[parent[u]].append(u)  # pop order equals emission order
            for v in reversed(g.neighbors(u)):
                if not visited[v]:
                    visited[v] = True
                    parent[v] = u
                    stack.append(v)
                elif v != parent[u]:
                    seen_ring.add((min(u, v), max(u, v)))

    # Digit per ring bond, smallest free number first, reused after it closes.
    emit_pos = {u: k for k, u in enumerate(order)}
    ring_bonds = sorted(
        (sorted(e, key=emit_pos.__getitem__) for e in seen_ring),
        key=lambda e: (emit_pos[e[0]], emit_pos[e[1]]),
    )
    open_digits: dict[int, list[tuple[int, int]]] = {}
    close_digits: dict[int, list[tuple[int, int]]] = {}
    free: list[int] = list(range(1, 100))
    heapq.heapify(free)
    in_use: list[tuple[int, int]] = []  # (close position, digit)
    for a, b in ring_bonds:
        start = emit_pos[a]
        while in_use and in_use[0][0] < start:
            heapq.heappush(free, heapq.heappop(in_use)[1])
        if not free:
            raise SmilesError("more than 99 simultaneously open ring closures", 0)
        digit = heapq.heappop(free)
        heapq.heappush(in_use, (emit_pos[b], digit))
        open_digits.setdefault(a, []).append((digit, b))
        close_digits.setdefault(b, []).append((digit, a))

    def digit_token(d: int) -> str:
        return str(d) if d < 10 else f"%{d:02d}"

    def emit(u: int) -> str:
        parts = [_atom_token(g.atoms[u])]
        for d, other in open_digits.get(u, []):
            parts.append(_bond_token(g, u, other) + digit_token(d))
        for d, _ in close_digits.get(u, []):
            parts.append(digit_token(d))
        kids = children[u]
        for k, v in enumerate(kids):
            sub = _bond_token(g, u, v) + emit(v)
            parts.append(f"({sub})" if k < len(kids) - 1 else sub)
        return "".join(parts)

    return ".".join(emit(r) for r in roots)
