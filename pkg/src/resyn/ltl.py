"""LTL formulas over partitioned atomic propositions, plus a lasso-trace semantics oracle.

Formulas are immutable ASTs.  ``G`` and ``F`` are accepted by the parser but
rewritten away immediately (``G p == false R p``, ``F p == true U p``), and
``a -> b`` desugars to ``!a | b``, so the stored node set is exactly:
True, False, Atom, Not, And, Or, Next, Until, Release.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator


class LtlError(ValueError):
    pass


class ParseError(LtlError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


# ---------------------------------------------------------------------------
# Atom table


@dataclass(frozen=True)
class AtomTable:
    """Ordered input/output atomic propositions; fixes the alphabets 2^AP_I and 2^AP_O."""

    inputs: tuple[str, ...]
    outputs: tuple[str, ...]

    def __post_init__(self):
        names = list(self.inputs) + list(self.outputs)
        if len(set(names)) != len(names):
            raise LtlError("atomic proposition names must be unique and disjoint")
        for name in names:
            if not _is_identifier(name):
                raise LtlError(f"bad atom name: {name!r}")

    @property
    def atoms(self) -> tuple[str, ...]:
        return self.inputs + self.outputs

    def is_input(self, name: str) -> bool:
        return name in self.inputs

    def input_letters(self) -> tuple[frozenset[str], ...]:
        return _valuations(self.inputs)

    def output_letters(self) -> tuple[frozenset[str], ...]:
        return _valuations(self.outputs)

    def split(self, valuation: frozenset[str]) -> tuple[frozenset[str], frozenset[str]]:
        """Project a valuation over AP onto the (sigma_I, sigma_O) pair."""
        return (valuation & frozenset(self.inputs), valuation & frozenset(self.outputs))


def _valuations(names: tuple[str, ...]) -> tuple[frozenset[str], ...]:
    # Bitmask counting order: canonical for every serialization in the package.
    out = []
    for mask in range(1 << len(names)):
        out.append(frozenset(n for i, n in enumerate(names) if mask >> i & 1))
    return tuple(out)


def render_letter(names: tuple[str, ...], valuation: frozenset[str]) -> str:
    if not names:
        return "-"
    return ",".join(n if n in valuation else "!" + n for n in names)


def parse_letter(names: tuple[str, ...], text: str) -> frozenset[str]:
    if text == "-":
        return frozenset()
    present = set()
    seen = set()
    for tok in text.split(","):
        tok = tok.strip()
        neg = tok.startswith("!")
        name = tok[1:] if neg else tok
        if name not in names:
            raise LtlError(f"unknown atom in letter: {name!r}")
        if name in seen:
            raise LtlError(f"atom repeated in letter: {name!r}")
        seen.add(name)
        if not neg:
            present.add(name)
    missing = set(names) - seen
    if missing:
        raise LtlError(f"letter leaves atoms unspecified: {sorted(missing)}")
    return frozenset(present)


# ---------------------------------------------------------------------------
# Formula AST


@dataclass(frozen=True)
class Formula:
    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    arg: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Release(Formula):
    left: Formula
    right: Formula


def globally(phi: Formula) -> Formula:
    return Release(FalseF(), phi)


def finally_(phi: Formula) -> Formula:
    return Until(TrueF(), phi)


def implies(a: Formula, b: Formula) -> Formula:
    return Or(Not(a), b)


def subformulas(phi: Formula) -> Iterator[Formula]:
    yield phi
    if isinstance(phi, (Not, Next)):
        yield from subformulas(phi.arg)
    elif isinstance(phi, (And, Or, Until, Release)):
        yield from subformulas(phi.left)
        yield from subformulas(phi.right)


def size(phi: Formula) -> int:
    """Number of AST nodes."""
    return sum(1 for _ in subformulas(phi))


def atoms_of(phi: Formula) -> frozenset[str]:
    return frozenset(f.name for f in subformulas(phi) if isinstance(f, Atom))


_TYPE_RANK = {TrueF: 0, FalseF: 1, Atom: 2, Not: 3, Next: 4, And: 5, Or: 6, Until: 7, Release: 8}


def sort_key(phi: Formula):
    """Total structural order on formulas; used wherever canonical order matters."""
    if isinstance(phi, Atom):
        return (2, phi.name)
    if isinstance(phi, (Not, Next)):
        return (_TYPE_RANK[type(phi)], sort_key(phi.arg))
    if isinstance(phi, (And, Or, Until, Release)):
        return (_TYPE_RANK[type(phi)], sort_key(phi.left), sort_key(phi.right))
    return (_TYPE_RANK[type(phi)],)


# ---------------------------------------------------------------------------
# Parsing

_OPERATOR_CHARS = {"!", "&", "|", "(", ")"}


def _is_identifier(s: str) -> bool:
    if not s or not (s[0].isalpha() or s[0] == "_"):
        return False
    return all(c.isalnum() or c == "_" for c in s)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if text.startswith("->", i):
            toks.append(("IMPL", "->", i))
            i += 2
            continue
        if c in _OPERATOR_CHARS:
            toks.append((c, c, i))
            i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word in ("X", "U", "R", "G", "F", "true", "false"):
                toks.append((word, word, i))
            else:
                toks.append(("ID", word, i))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    toks.append(("EOF", "", len(text)))
    return toks


class _Parser:
    # Precedence, loosest to tightest: ->, |, &, U/R, unary (! X G F).

    def __init__(self, text: str, atoms: AtomTable):
        self.toks = _tokenize(text)
        self.pos = 0
        self.atoms = atoms

    def peek(self):
        return self.toks[self.pos]

    def take(self, kind=None):
        tok = self.toks[self.pos]
        if kind is not None and tok[0] != kind:
            raise ParseError(f"expected {kind}, found {tok[1]!r}", tok[2])
        self.pos += 1
        return tok

    def parse(self) -> Formula:
        phi = self.impl()
        tok = self.peek()
        if tok[0] != "EOF":
            raise ParseError(f"trailing input {tok[1]!r}", tok[2])
        return phi

    def impl(self) -> Formula:
        left = self.disj()
        if self.peek()[0] == "IMPL":
            self.take()
            return implies(left, self.impl())
        return left

    def disj(self) -> Formula:
        phi = self.conj()
        while self.peek()[0] == "|":
            self.take()
            phi = Or(phi, self.conj())
        return phi

    def conj(self) -> Formula:
        phi = self.until()
        while self.peek()[0] == "&":
            self.take()
            phi = And(phi, self.until())
        return phi

    def until(self) -> Formula:
        left = self.unary()
        kind = self.peek()[0]
        if kind in ("U", "R"):
            self.take()
            right = self.until()
            return Until(left, right) if kind == "U" else Release(left, right)
        return left

    def unary(self) -> Formula:
        kind, _, pos = self.peek()
        if kind == "!":
            self.take()
            return Not(self.unary())
        if kind == "X":
            self.take()
            return Next(self.unary())
        if kind == "G":
            self.take()
            return globally(self.unary())
        if kind == "F":
            self.take()
            return finally_(self.unary())
        if kind == "(":
            self.take()
            phi = self.impl()
            self.take(")")
            return phi
        if kind == "true":
            self.take()
            return TrueF()
        if kind == "false":
            self.take()
            return FalseF()
        if kind == "ID":
            _, name, pos = self.take()
            if name not in self.atoms.atoms:
                raise ParseError(f"unknown atom {name!r}", pos)
            return Atom(name)
        raise ParseError(f"unexpected token {self.peek()[1]!r}", pos)


def parse_ltl(text: str, atoms: AtomTable) -> Formula:
    """Parse a formula; every atom must be declared in the table."""
    return _Parser(text, atoms).parse()


_PREC = {Or: 2, And: 3, Until: 4, Release: 4, Not: 5, Next: 5}


def pretty(phi: Formula) -> str:
    """Print a formula so that parse(pretty(phi)) == phi."""
    if isinstance(phi, TrueF):
        return "true"
    if isinstance(phi, FalseF):
        return "false"
    if isinstance(phi, Atom):
        return phi.name
    if isinstance(phi, Not):
        return "!" + _wrap(phi.arg, 5, strict=False)
    if isinstance(phi, Next):
        return "X " + _wrap(phi.arg, 5, strict=False)
    if isinstance(phi, Until):
        return _wrap(phi.left, 4, strict=True) + " U " + _wrap(phi.right, 4, strict=False)
    if isinstance(phi, Release):
        return _wrap(phi.left, 4, strict=True) + " R " + _wrap(phi.right, 4, strict=False)
    if isinstance(phi, And):
        return _wrap(phi.left, 3, strict=False) + " & " + _wrap(phi.right, 3, strict=True)
    if isinstance(phi, Or):
        return _wrap(phi.left, 2, strict=False) + " | " + _wrap(phi.right, 2, strict=True)
    raise LtlError(f"unprintable node {phi!r}")


def _wrap(phi: Formula, parent_prec: int, strict: bool) -> str:
    prec = _PREC.get(type(phi), 6)
    if prec < parent_prec or (strict and prec == parent_prec):
        return "(" + pretty(phi) + ")"
    return pretty(phi)


# ---------------------------------------------------------------------------
# Negation normal form


def to_nnf(phi: Formula) -> Formula:
    """Push negations onto atoms (U/R and And/Or dualities)."""
    if isinstance(phi, (TrueF, FalseF, Atom)):
        return phi
    if isinstance(phi, And):
        return And(to_nnf(phi.left), to_nnf(phi.right))
    if isinstance(phi, Or):
        return Or(to_nnf(phi.left), to_nnf(phi.right))
    if isinstance(phi, Next):
        return Next(to_nnf(phi.arg))
    if isinstance(phi, Until):
        return Until(to_nnf(phi.left), to_nnf(phi.right))
    if isinstance(phi, Release):
        return Release(to_nnf(phi.left), to_nnf(phi.right))
    arg = phi.arg
    if isinstance(arg, TrueF):
        return FalseF()
    if isinstance(arg, FalseF):
        return TrueF()
    if isinstance(arg, Atom):
        return phi
    if isinstance(arg, Not):
        return to_nnf(arg.arg)
    if isinstance(arg, And):
        return Or(to_nnf(Not(arg.left)), to_nnf(Not(arg.right)))
    if isinstance(arg, Or):
        return And(to_nnf(Not(arg.left)), to_nnf(Not(arg.right)))
    if isinstance(arg, Next):
        return Next(to_nnf(Not(arg.arg)))
    if isinstance(arg, Until):
        return Release(to_nnf(Not(arg.left)), to_nnf(Not(arg.right)))
    if isinstance(arg, Release):
        return Until(to_nnf(Not(arg.left)), to_nnf(Not(arg.right)))
    raise LtlError(f"cannot normalize {phi!r}")


def is_nnf(phi: Formula) -> bool:
    return all(isinstance(f.arg, Atom) for f in subformulas(phi) if isinstance(f, Not))


# ---------------------------------------------------------------------------
# Lasso traces and evaluation


@dataclass(frozen=True)
class LassoTrace:
    """Finite representation prefix . loop^omega of an ultimately periodic trace."""

    prefix: tuple[frozenset[str], ...]
    loop: tuple[frozenset[str], ...]

    def __post_init__(self):
        if len(self.loop) < 1:
            raise LtlError("lasso loop must be nonempty")

    @property
    def positions(self) -> int:
        return len(self.prefix) + len(self.loop)

    def valuation(self, i: int) -> frozenset[str]:
        return (self.prefix + self.loop)[i]

    def next_position(self, i: int) -> int:
        return i + 1 if i + 1 < self.positions else len(self.prefix)


def evaluate_on_lasso(phi: Formula, trace: LassoTrace) -> bool:
    """Ground-truth LTL semantics on prefix . loop^omega, evaluated at the first position.

    Truth vectors are computed bottom-up over the finitely many distinct
    positions; U is a least fixpoint and R a greatest fixpoint of their
    one-step unrolling identities, which converge because each iteration is
    monotone over a finite position set.
    """
    n = trace.positions
    nxt = [trace.next_position(i) for i in range(n)]

    def vector(f: Formula) -> list[bool]:
        if isinstance(f, TrueF):
            return [True] * n
        if isinstance(f, FalseF):
            return [False] * n
        if isinstance(f, Atom):
            return [f.name in trace.valuation(i) for i in range(n)]
        if isinstance(f, Not):
            return [not v for v in vector(f.arg)]
        if isinstance(f, And):
            a, b = vector(f.left), vector(f.right)
            return [x and y for x, y in zip(a, b)]
        if isinstance(f, Or):
            a, b = vector(f.left), vector(f.right)
            return [x or y for x, y in zip(a, b)]
        if isinstance(f, Next):
            a = vector(f.arg)
            return [a[nxt[i]] for i in range(n)]
        if isinstance(f, Until):
            a, b = vector(f.left), vector(f.right)
            v = list(b)
            for _ in range(n + 1):
                w = [b[i] or (a[i] and v[nxt[i]]) for i in range(n)]
                if w == v:
                    break
                v = w
            return v
        if isinstance(f, Release):
            a, b = vector(f.left), vector(f.right)
            v = [True] * n
            for _ in range(n + 1):
                w = [b[i] and (a[i] or v[nxt[i]]) for i in range(n)]
                if w == v:
                    break
                v = w
            return v
        raise LtlError(f"cannot evaluate {f!r}")

    return vector(phi)[0]
