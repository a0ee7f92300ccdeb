"""Counting-function determinization of K-coBuchi automata and antichain game solving.

A counting function maps each automaton state to -1 (inactive) or the maximal
number of final-set visits over run prefixes reaching it, saturated at K+1
(rejecting overflow).  The system player wins from a counting function if it
can forever answer every input letter without any state overflowing; that set
is downward closed and is represented by its maximal elements.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .automata import UniversalCoBuchi

CountingFunction = tuple[int, ...]


@dataclass(frozen=True)
class Antichain:
    """Pairwise incomparable counting functions; its downward closure is the winning set."""

    elements: tuple[CountingFunction, ...]
    bound: int

    def __post_init__(self):
        elems = self.elements
        for i, f in enumerate(elems):
            for j, g in enumerate(elems):
                if i != j and leq(f, g):
                    raise ValueError("antichain elements must be pairwise incomparable")
        object.__setattr__(self, "elements", tuple(sorted(elems)))

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)

    def contains(self, f: CountingFunction) -> bool:
        """Downward-closure membership."""
        if self.elements and len(f) != len(self.elements[0]):
            raise ValueError("counting function dimension mismatch")
        return any(leq(f, g) for g in self.elements)


def leq(f: CountingFunction, g: CountingFunction) -> bool:
    return all(a <= b for a, b in zip(f, g))


def max_elements(funcs) -> list[CountingFunction]:
    distinct = set(funcs)
    out: list[CountingFunction] = []
    for f in distinct:
        if any(f != g and leq(f, g) for g in distinct):
            continue
        out.append(f)
    return sorted(out)


def initial_cf(ucw: UniversalCoBuchi, k: int) -> CountingFunction:
    """Initial states start at [state in F]; everything else is inactive."""
    if k < 0:
        raise ValueError("K must be nonnegative")
    return tuple(
        (1 if q in ucw.final else 0) if q in ucw.initial else -1 for q in range(ucw.n_states)
    )


def cf_successor(ucw: UniversalCoBuchi, k: int, f: CountingFunction, letter) -> CountingFunction:
    """One determinization step on the full-alphabet letter (sigma_I, sigma_O)."""
    sigma_i, sigma_o = letter
    return cf_successor_idx(ucw, k, f, ucw.alphabet.index(sigma_i, sigma_o))


def cf_successor_idx(ucw: UniversalCoBuchi, k: int, f: CountingFunction, li: int) -> CountingFunction:
    out = [-1] * ucw.n_states
    cap = k + 1
    for p in range(ucw.n_states):
        fp = f[p]
        if fp < 0:
            continue
        for q in ucw.delta[p][li]:
            v = fp + (1 if q in ucw.final else 0)
            if v > cap:
                v = cap
            if v > out[q]:
                out[q] = v
    return tuple(out)


def is_winning(f: CountingFunction, win: Antichain) -> bool:
    return win.contains(f)


def _pre(ucw: UniversalCoBuchi, g: CountingFunction, li: int, final_mask) -> CountingFunction:
    # Largest f with successor(f, letter) <= g pointwise: each source state is
    # capped by min over its successors of g(q) - [q in F], floored at -1.
    out = []
    for p in range(ucw.n_states):
        best = None
        for q in ucw.delta[p][li]:
            v = g[q] - (1 if final_mask[q] else 0)
            if best is None or v < best:
                best = v
        out.append(max(-1, best))
    return tuple(out)


def _intersect(a: list[CountingFunction], b: list[CountingFunction]) -> list[CountingFunction]:
    meets = {tuple(min(x, y) for x, y in zip(f, g)) for f in a for g in b}
    return max_elements(meets)


def solve_safety_game(ucw: UniversalCoBuchi, k: int) -> Antichain:
    """Maximal winning counting functions for the K-overflow safety game.

    Greatest fixpoint of W = W /\\ CPre(W) computed on maximal elements only:
    CPre(W) = /\\_{sigma_I} \\/_{sigma_O} \\/_{g in ceil(W)} down(pre(g, sigma)).
    """
    if k < 0:
        raise ValueError("K must be nonnegative")
    final_mask = [q in ucw.final for q in range(ucw.n_states)]
    n_out = len(ucw.alphabet.outputs)
    top = [tuple(k for _ in range(ucw.n_states))]

    current = top
    while True:
        per_input: list[list[CountingFunction]] = []
        for ii in range(len(ucw.alphabet.inputs)):
            candidates = []
            for oi in range(n_out):
                li = ii * n_out + oi
                for g in current:
                    candidates.append(_pre(ucw, g, li, final_mask))
            per_input.append(max_elements(candidates))
        cpre = per_input[0] if per_input else top
        for nxt in per_input[1:]:
            cpre = _intersect(cpre, nxt)
        new = _intersect(current, cpre)
        if new == current:
            return Antichain(tuple(current), k)
        current = new


def find_minimal_K(
    ucw: UniversalCoBuchi, k_max: int = 8
) -> Optional[tuple[int, Antichain]]:
    """Smallest K <= k_max whose winning region contains the initial counting function."""
    for k in range(k_max + 1):
        win = solve_safety_game(ucw, k)
        if win.contains(initial_cf(ucw, k)):
            return k, win
    return None


def format_antichain(chain: Antichain) -> str:
    lines = []
    for f in chain.elements:
        lines.append(" ".join(f"q{i}:{v}" for i, v in enumerate(f)))
    return "\n".join(lines) + "\n"


def parse_antichain(text: str, bound: int) -> Antichain:
    elems = []
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln:
            continue
        vals = []
        for tok in ln.split():
            name, _, v = tok.partition(":")
            vals.append((int(name[1:]), int(v)))
        vals.sort()
        elems.append(tuple(v for _, v in vals))
    return Antichain(tuple(elems), bound)
