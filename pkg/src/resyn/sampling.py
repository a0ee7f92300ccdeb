"""Sample multisets, prefix trees with empirical edge probabilities, and environment chains.

All probabilities are exact rationals; edge probabilities at an internal
vertex sum to exactly 1 by construction.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from .ltl import AtomTable, parse_letter, render_letter

Letter = object  # input letter: frozenset over AP_I, or an opaque hashable


@dataclass(frozen=True)
class SampleMultiset:
    """n sampled input sequences of uniform length L, with multiplicities."""

    length: int
    counts: dict

    def __post_init__(self):
        if not self.counts:
            raise ValueError("sample multiset must be nonempty")
        for seq, c in self.counts.items():
            if len(seq) != self.length:
                raise ValueError("all sampled sequences must have the uniform length")
            if c <= 0:
                raise ValueError("multiplicities must be positive")

    @property
    def n(self) -> int:
        return sum(self.counts.values())


class SampleTree:
    """Prefix tree of a sample multiset; a finite Markov chain with leaf sinks."""

    def __init__(self, multiset: SampleMultiset, letter_order=None):
        self.length = multiset.length
        self.n = multiset.n
        self.count: dict[tuple, int] = {(): self.n}
        children: dict[tuple, set] = {(): set()}
        for seq, c in multiset.counts.items():
            for i in range(1, multiset.length + 1):
                v = tuple(seq[:i])
                self.count[v] = self.count.get(v, 0) + c
                children.setdefault(v, set())
                children[v[:-1]].add(v)
        key = (lambda v: letter_order.index(v[-1])) if letter_order else None
        self.children: dict[tuple, tuple] = {
            v: tuple(sorted(kids, key=key) if key else sorted(kids, key=_default_key))
            for v, kids in children.items()
        }
        self.edge_prob: dict[tuple, Fraction] = {}
        for v, kids in self.children.items():
            for u in kids:
                self.edge_prob[(v, u)] = Fraction(self.count[u], self.count[v])

    @property
    def root(self) -> tuple:
        return ()

    def vertices(self) -> list[tuple]:
        """All prefixes, root first, in canonical (depth, letter) order."""
        return sorted(self.children, key=lambda v: (len(v), [_default_key((x,)) for x in v]))

    def nonroot_vertices(self) -> list[tuple]:
        return [v for v in self.vertices() if v]

    def leaves(self) -> list[tuple]:
        return [v for v in self.vertices() if len(v) == self.length]

    def last_input(self, v: tuple):
        if not v:
            raise ValueError("the root has no incoming letter")
        return v[-1]

    def branches(self) -> list[tuple]:
        return self.leaves()

    def to_multiset(self) -> SampleMultiset:
        return SampleMultiset(self.length, {leaf: self.count[leaf] for leaf in self.leaves()})


def _default_key(v: tuple):
    x = v[-1]
    if isinstance(x, frozenset):
        return (0, sorted(x))
    return (1, str(x))


def build_sample_tree(multiset: SampleMultiset, letter_order=None) -> SampleTree:
    return SampleTree(multiset, letter_order)


def branch_probability(tree: SampleTree, branch: tuple) -> Fraction:
    """Product of edge probabilities along the root-to-leaf path; equals fq(leaf)/n."""
    if len(branch) != tree.length or branch not in tree.count:
        raise ValueError("not a branch of this tree")
    p = Fraction(1)
    for i in range(len(branch)):
        p *= tree.edge_prob[(branch[:i], branch[: i + 1])]
    return p


# ---------------------------------------------------------------------------
# Environment chains


@dataclass(frozen=True)
class EnvChain:
    """Oblivious stochastic input source: a finite Markov chain emitting one letter per step."""

    states: tuple[str, ...]
    init: tuple  # tuple of (Fraction, state)
    trans: dict  # state -> tuple of (Fraction, next state, emitted letter)

    def __post_init__(self):
        if sum(p for p, _ in self.init) != 1:
            raise ValueError("initial probabilities must sum to 1")
        for s in self.states:
            rows = self.trans.get(s, ())
            if sum(p for p, _, _ in rows) != 1:
                raise ValueError(f"outgoing probabilities at {s!r} must sum to 1")


def _draw(rng: random.Random, weighted):
    """Exact categorical draw: integer thresholds over the common denominator."""
    denom = lcm(*[p.denominator for p, *_ in weighted])
    t = rng.randrange(denom)
    acc = 0
    for item in weighted:
        acc += int(item[0] * denom)
        if t < acc:
            return item
    raise AssertionError("probabilities did not cover the unit interval")


def sample_env(env: EnvChain, n: int, length: int, seed: int) -> SampleMultiset:
    """n independent length-L sequences; deterministic for a fixed seed."""
    if n < 1 or length < 1:
        raise ValueError("need n >= 1 and L >= 1")
    rng = random.Random(seed)
    counts: dict[tuple, int] = {}
    for _ in range(n):
        _, state = _draw(rng, env.init)
        seq = []
        for _ in range(length):
            _, state, letter = _draw(rng, env.trans[state])
            seq.append(letter)
        t = tuple(seq)
        counts[t] = counts.get(t, 0) + 1
    return SampleMultiset(length, counts)


# ---------------------------------------------------------------------------
# File formats

_TEMPERATURE_CODES = {"2": frozenset(), "1": None, "0": None, "-1": None}


def temperature_letters() -> dict[str, frozenset]:
    """The case-study shorthand: integer temperatures as valuations over {M1, M2}."""
    return {
        "2": frozenset(),
        "1": frozenset({"M1"}),
        "0": frozenset({"M2"}),
        "-1": frozenset({"M1", "M2"}),
    }


def _parse_input_letter(tok: str, atoms: AtomTable) -> frozenset:
    tok = tok.strip()
    if tok.lstrip("-").isdigit():
        if tuple(atoms.inputs) != ("M1", "M2"):
            raise ValueError("temperature shorthand needs input atoms (M1, M2)")
        table = temperature_letters()
        if tok not in table:
            raise ValueError(f"temperature out of range: {tok}")
        return table[tok]
    return parse_letter(atoms.inputs, tok)


def render_input_letter(letter, atoms: AtomTable, shorthand: bool = False) -> str:
    if shorthand and tuple(atoms.inputs) == ("M1", "M2"):
        for code, val in temperature_letters().items():
            if val == letter:
                return code
    if isinstance(letter, frozenset):
        return render_letter(atoms.inputs, letter)
    return str(letter)


def parse_samples(text: str, atoms: AtomTable) -> SampleMultiset:
    """Lines 'count: l1;l2;...;lL'; letters are signed-atom lists or temperature codes."""
    counts: dict[tuple, int] = {}
    length = None
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        head, _, rest = ln.partition(":")
        seq = tuple(_parse_input_letter(tok, atoms) for tok in rest.split(";"))
        if length is None:
            length = len(seq)
        elif len(seq) != length:
            raise ValueError("ragged sample lengths are not allowed")
        counts[seq] = counts.get(seq, 0) + int(head)
    if length is None:
        raise ValueError("no samples in file")
    return SampleMultiset(length, counts)


def format_samples(multiset: SampleMultiset, atoms: AtomTable, shorthand: bool = False) -> str:
    lines = []
    for seq in sorted(multiset.counts, key=lambda s: [_default_key((x,)) for x in s]):
        body = ";".join(render_input_letter(x, atoms, shorthand) for x in seq)
        lines.append(f"{multiset.counts[seq]}: {body}")
    return "\n".join(lines) + "\n"


def parse_env_chain(text: str, atoms: AtomTable) -> EnvChain:
    """Lines: 'state NAME', 'init STATE P', 'edge STATE P STATE LETTER' with rational P."""
    states: list[str] = []
    init: list[tuple] = []
    trans: dict[str, list] = {}
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        parts = ln.split()
        if parts[0] == "state":
            states.append(parts[1])
            trans.setdefault(parts[1], [])
        elif parts[0] == "init":
            init.append((Fraction(parts[2]), parts[1]))
        elif parts[0] == "edge":
            src, p, dst = parts[1], Fraction(parts[2]), parts[3]
            letter = _parse_input_letter(parts[4], atoms)
            trans.setdefault(src, []).append((p, dst, letter))
        else:
            raise ValueError(f"bad environment line: {ln!r}")
    return EnvChain(tuple(states), tuple(init), {s: tuple(rows) for s, rows in trans.items()})


def format_env_chain(env: EnvChain, atoms: AtomTable, shorthand: bool = False) -> str:
    lines = [f"state {s}" for s in env.states]
    for p, s in env.init:
        lines.append(f"init {s} {p}")
    for s in env.states:
        for p, dst, letter in env.trans[s]:
            lines.append(f"edge {s} {p} {dst} {render_input_letter(letter, atoms, shorthand)}")
    return "\n".join(lines) + "\n"
