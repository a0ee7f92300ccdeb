"""Shared test oracles and generators, independent of the implementation paths they check."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from resyn.automata import Alphabet, UniversalCoBuchi
from resyn.ltl import (
    And,
    Atom,
    AtomTable,
    FalseF,
    LassoTrace,
    Next,
    Not,
    Or,
    Release,
    TrueF,
    Until,
)
from resyn.machines import MealyMachine, RewardMachine
from resyn.optimize import ProblemInstance
from resyn.safety import initial_cf, solve_safety_game
from resyn.sampling import EnvChain, SampleMultiset, build_sample_tree

# ---------------------------------------------------------------------------
# Exhaustive formula and lasso enumeration

TEST_ATOMS = AtomTable(("a", "b"), ())
VALUATIONS = TEST_ATOMS.input_letters()  # canonical order, 4 valuations


def formulas_up_to(max_size: int):
    """Every NNF formula up to the given node count over atoms a, b
    (True/False/atom leaves; negation only on atoms; X, And, Or, U, R)."""
    by_size: dict[int, list] = {1: [TrueF(), FalseF(), Atom("a"), Atom("b")]}
    for s in range(2, max_size + 1):
        cur = [Next(f) for f in by_size[s - 1]]
        if s == 2:
            cur += [Not(Atom("a")), Not(Atom("b"))]
        for ls in range(1, s - 1):
            rs = s - 1 - ls
            for fl in by_size[ls]:
                for fr in by_size[rs]:
                    cur += [And(fl, fr), Or(fl, fr), Until(fl, fr), Release(fl, fr)]
        by_size[s] = cur
    return [f for s in range(1, max_size + 1) for f in by_size[s]]


def lassos_up_to(max_prefix: int, max_loop: int):
    """Every lasso over the two test atoms with bounded prefix and loop lengths."""
    out = []
    for pl in range(max_prefix + 1):
        for ll in range(1, max_loop + 1):
            for pre in itertools.product(VALUATIONS, repeat=pl):
                for loop in itertools.product(VALUATIONS, repeat=ll):
                    out.append(LassoTrace(tuple(pre), tuple(loop)))
    return out


class BulkLassoEvaluator:
    """Vectorized ground-truth LTL evaluation over a fixed lasso family.

    Each lasso occupies an 8-bit stride of one big integer, one bit per
    position; boolean connectives are bitwise operations, X is a shift with
    per-group loop-wrap fixups, and U/R iterate their unrolling identities to
    their fixpoints.  Agreement of this evaluator with the plain recursive
    ``evaluate_on_lasso`` is itself asserted by the test suite.
    """

    STRIDE = 8

    def __init__(self, lassos):
        self.lassos = lassos
        self.n = len(lassos)
        self.full = 0
        atom_bits = {a: 0 for a in TEST_ATOMS.atoms}
        keep = 0
        groups: dict[tuple[int, int], int] = {}
        for idx, t in enumerate(lassos):
            base = idx * self.STRIDE
            m = t.positions
            pl = len(t.prefix)
            for pos in range(m):
                bit = 1 << (base + pos)
                self.full |= bit
                for a in t.valuation(pos):
                    atom_bits[a] |= bit
                if pos < m - 1:
                    keep |= bit
            groups.setdefault((pl, m - pl), 0)
            groups[(pl, m - pl)] |= 1 << (base + pl)
        self.atom_vec = atom_bits
        self._keep = keep  # positions whose successor is the following bit
        self._wrap = [(src_mask, ll - 1) for (pl, ll), src_mask in sorted(groups.items())]
        self._memo: dict = {}

    def shift_next(self, v: int) -> int:
        out = (v >> 1) & self._keep
        for src_mask, shift in self._wrap:
            out |= (v & src_mask) << shift
        return out

    def vector(self, phi) -> int:
        got = self._memo.get(phi)
        if got is not None:
            return got
        if isinstance(phi, TrueF):
            res = self.full
        elif isinstance(phi, FalseF):
            res = 0
        elif isinstance(phi, Atom):
            res = self.atom_vec[phi.name]
        elif isinstance(phi, Not):
            res = ~self.vector(phi.arg) & self.full
        elif isinstance(phi, And):
            res = self.vector(phi.left) & self.vector(phi.right)
        elif isinstance(phi, Or):
            res = self.vector(phi.left) | self.vector(phi.right)
        elif isinstance(phi, Next):
            res = self.shift_next(self.vector(phi.arg))
        elif isinstance(phi, Until):
            a, b = self.vector(phi.left), self.vector(phi.right)
            res = b
            while True:
                nxt = b | (a & self.shift_next(res))
                if nxt == res:
                    break
                res = nxt
        elif isinstance(phi, Release):
            a, b = self.vector(phi.left), self.vector(phi.right)
            res = self.full
            while True:
                nxt = b & (a | self.shift_next(res))
                if nxt == res:
                    break
                res = nxt
        else:
            raise TypeError(f"cannot evaluate {phi!r}")
        self._memo[phi] = res
        return res

    _LSB_TABLE = bytes(ord("1") if byte & 1 else ord("0") for byte in range(256))

    def truth_at_start(self, phi) -> int:
        """Packed bits: bit i = phi holds at position 1 of lasso i."""
        v = self.vector(phi)
        raw = v.to_bytes(self.n, "little").translate(self._LSB_TABLE)
        return int(raw[::-1], 2)


# ---------------------------------------------------------------------------
# Explicit-enumeration safety-game oracle


def enumerate_win_explicit(ucw: UniversalCoBuchi, k: int):
    """Winning counting functions over the explicit counting-function graph.

    Backward attractor to the overflow set: a function is losing iff it
    overflows or some input leaves only losing successors; the winning set is
    the complement.  Linear in the (small) explicit game graph, so it stays an
    independent check of the antichain solver.
    """
    from resyn.safety import cf_successor_idx

    n_in = len(ucw.alphabet.inputs)
    n_out = len(ucw.alphabet.outputs)
    space = list(itertools.product(range(-1, k + 2), repeat=ucw.n_states))
    overflow = {f for f in space if f and max(f) > k}
    rev: dict = {}
    safe_count: dict = {}
    for f in space:
        if f in overflow:
            continue
        for ii in range(n_in):
            safe_count[(f, ii)] = n_out
            for oi in range(n_out):
                g = cf_successor_idx(ucw, k, f, ii * n_out + oi)
                rev.setdefault(g, []).append((f, ii))
    losing = set(overflow)
    work = sorted(overflow)
    while work:
        g = work.pop()
        for f, ii in rev.get(g, ()):
            if f in losing:
                continue
            safe_count[(f, ii)] -= 1
            if safe_count[(f, ii)] == 0:
                losing.add(f)
                work.append(f)
    return {f for f in space if f not in losing}


# ---------------------------------------------------------------------------
# Random structure generators (all seeded by the caller)


def random_ucw(rng: random.Random, max_states=4, n_inputs=2, n_outputs=2) -> UniversalCoBuchi:
    n = rng.randint(1, max_states)
    alphabet = Alphabet(tuple(f"i{x}" for x in range(n_inputs)), tuple(f"o{x}" for x in range(n_outputs)))
    delta = tuple(
        tuple(
            tuple(sorted(rng.sample(range(n), rng.randint(1, min(2, n)))))
            for _ in range(len(alphabet))
        )
        for _ in range(n)
    )
    initial = frozenset(rng.sample(range(n), rng.randint(1, n)))
    final = frozenset(q for q in range(n) if rng.random() < 0.4)
    return UniversalCoBuchi(alphabet=alphabet, n_states=n, initial=initial, final=final, delta=delta)


def random_tree(rng: random.Random, letters, max_n=5, max_len=3):
    length = rng.randint(1, max_len)
    n = rng.randint(1, max_n)
    counts: dict[tuple, int] = {}
    for _ in range(n):
        seq = tuple(rng.choice(letters) for _ in range(length))
        counts[seq] = counts.get(seq, 0) + 1
    return build_sample_tree(SampleMultiset(length, counts), letter_order=list(letters))


def random_reward_machine(rng: random.Random, inputs, outputs, max_states=3, lo=-2, hi=2) -> RewardMachine:
    n = rng.randint(1, max_states)
    trans, reward = {}, {}
    for s in range(n):
        for i in inputs:
            for o in outputs:
                trans[(s, (i, o))] = rng.randrange(n)
                reward[(s, (i, o))] = rng.randint(lo, hi)
    return RewardMachine(n, 0, trans, reward)


def random_instance(rng: random.Random, max_states=5, max_vertices=12, max_rm_states=3):
    """Random problem instance with a winning initial counting function."""
    while True:
        ucw = random_ucw(rng, max_states=max_states)
        k = rng.randint(0, 2)
        win = solve_safety_game(ucw, k)
        if not win.contains(initial_cf(ucw, k)):
            continue
        letters = list(ucw.alphabet.inputs)
        for _ in range(20):
            tree = random_tree(rng, letters, max_n=4, max_len=3)
            if len(tree.vertices()) <= max_vertices:
                break
        else:
            continue
        rm = random_reward_machine(rng, ucw.alphabet.inputs, ucw.alphabet.outputs, max_rm_states)
        return ProblemInstance(ucw, k, win, rm, tree)


def random_mealy(rng: random.Random, inputs, outputs, max_states=3) -> MealyMachine:
    n = rng.randint(1, max_states)
    trans, out = {}, {}
    for m in range(n):
        for i in inputs:
            trans[(m, i)] = rng.randrange(n)
            out[(m, i)] = rng.choice(outputs)
    return MealyMachine(n, 0, trans, out)


def random_env_chain(rng: random.Random, letters, max_states=4) -> EnvChain:
    """Random chain with a guaranteed cycle through all states (single recurrent class)."""
    n = rng.randint(1, max_states)
    names = tuple(f"s{x}" for x in range(n))
    trans = {}
    for i, s in enumerate(names):
        succs = [(i + 1) % n] + [rng.randrange(n) for _ in range(rng.randint(0, 2))]
        weights = [rng.randint(1, 4) for _ in succs]
        total = sum(weights)
        trans[s] = tuple(
            (Fraction(w, total), names[j], rng.choice(letters)) for w, j in zip(weights, succs)
        )
    return EnvChain(names, ((Fraction(1), names[0]),), trans)


def machine_trace_lasso(machine: MealyMachine, input_prefix, input_loop):
    """The ultimately periodic trace a Mealy machine produces on a lasso input.

    After the prefix, the (machine state, loop position) pair must repeat;
    the valuations between the first and second occurrence form the trace loop.
    """
    from resyn.ltl import LassoTrace

    state = machine.initial
    prefix_vals = []
    for letter in input_prefix:
        state, out = machine.step(state, letter)
        prefix_vals.append(letter | out)
    seen = {}
    vals = []
    pos = 0
    while (state, pos) not in seen:
        seen[(state, pos)] = len(vals)
        letter = input_loop[pos]
        state, out = machine.step(state, letter)
        vals.append(letter | out)
        pos = (pos + 1) % len(input_loop)
    start = seen[(state, pos)]
    return LassoTrace(tuple(prefix_vals) + tuple(vals[:start]), tuple(vals[start:]))


def mis_size(vertices, edges) -> int:
    best = 0
    vs = list(vertices)
    for mask in range(1 << len(vs)):
        sel = {vs[i] for i in range(len(vs)) if mask >> i & 1}
        if not any(e <= sel for e in edges):
            best = max(best, len(sel))
    return best


def random_graph(rng: random.Random, max_vertices=8, p_edge=0.4):
    from resyn.hardness import Graph

    n = rng.randint(1, max_vertices)
    vs = tuple(f"u{i}" for i in range(n))
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p_edge:
                edges.add(frozenset({vs[i], vs[j]}))
    return Graph(vs, frozenset(edges))
