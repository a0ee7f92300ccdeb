"""Nondeterministic Buchi and universal coBuchi automata over a factored alphabet.

The pipeline for a hard-constraint formula is: negate, normalize, build an NBW
by tableau expansion, then read the same structure universally (dualize), which
accepts exactly the complement language.  Top-level conjunctions may instead be
translated per conjunct and unioned, since a union of universal automata
accepts the intersection of their languages.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .ltl import (
    And,
    Atom,
    AtomTable,
    FalseF,
    Formula,
    LassoTrace,
    Next,
    Not,
    Or,
    Release,
    TrueF,
    Until,
    is_nnf,
    parse_letter,
    render_letter,
    sort_key,
    to_nnf,
)


class AutomatonTooLarge(Exception):
    """Raised when a construction exceeds its state budget instead of truncating."""


DEFAULT_STATE_CAP = 4096


@dataclass(frozen=True)
class Alphabet:
    """Product alphabet Sigma_I x Sigma_O; letters are opaque hashables."""

    inputs: tuple
    outputs: tuple

    def __post_init__(self):
        object.__setattr__(self, "_input_index", {x: i for i, x in enumerate(self.inputs)})
        object.__setattr__(self, "_output_index", {x: i for i, x in enumerate(self.outputs)})

    @classmethod
    def from_atoms(cls, atoms: AtomTable) -> "Alphabet":
        return cls(atoms.input_letters(), atoms.output_letters())

    def __len__(self) -> int:
        return len(self.inputs) * len(self.outputs)

    def index(self, sigma_i, sigma_o) -> int:
        return self._input_index[sigma_i] * len(self.outputs) + self._output_index[sigma_o]

    def pair(self, letter_index: int):
        ii, oi = divmod(letter_index, len(self.outputs))
        return self.inputs[ii], self.outputs[oi]


@dataclass(frozen=True)
class Nbw:
    """Existential-branching Buchi automaton; empty successor sets kill a run."""

    alphabet: Alphabet
    n_states: int
    initial: frozenset[int]
    buchi: frozenset[int]
    delta: tuple[tuple[tuple[int, ...], ...], ...]  # delta[q][letter_index]
    labels: tuple = ()


@dataclass(frozen=True)
class UniversalCoBuchi:
    """Universal-branching automaton; delta is total and nonempty-valued."""

    alphabet: Alphabet
    n_states: int
    initial: frozenset[int]
    final: frozenset[int]
    delta: tuple[tuple[tuple[int, ...], ...], ...]
    labels: tuple = ()

    def __post_init__(self):
        for q in range(self.n_states):
            for succ in self.delta[q]:
                if not succ:
                    raise ValueError("universal automaton transitions must be nonempty")


# ---------------------------------------------------------------------------
# Tableau construction

# Expansion of an obligation set against one valuation: all ways to satisfy the
# obligations now, each yielding next-step obligations plus the set of Until
# subformulas whose fulfillment was postponed.  Shared across constructions.


@lru_cache(maxsize=None)
def _expand(obligations: frozenset, valuation: frozenset) -> tuple:
    results = set()

    def go(todo: tuple, nxt: frozenset, pend: frozenset):
        if not todo:
            results.add((nxt, pend))
            return
        f, rest = todo[0], todo[1:]
        if isinstance(f, TrueF):
            go(rest, nxt, pend)
        elif isinstance(f, FalseF):
            return
        elif isinstance(f, Atom):
            if f.name in valuation:
                go(rest, nxt, pend)
        elif isinstance(f, Not):
            if f.arg.name not in valuation:
                go(rest, nxt, pend)
        elif isinstance(f, And):
            go((f.left, f.right) + rest, nxt, pend)
        elif isinstance(f, Or):
            go((f.left,) + rest, nxt, pend)
            go((f.right,) + rest, nxt, pend)
        elif isinstance(f, Next):
            go(rest, nxt | {f.arg}, pend)
        elif isinstance(f, Until):
            go((f.right,) + rest, nxt, pend)
            go((f.left,) + rest, nxt | {f}, pend | {f})
        elif isinstance(f, Release):
            go((f.left, f.right) + rest, nxt, pend)
            go((f.right,) + rest, nxt | {f}, pend)
        else:
            raise ValueError(f"unexpected node {f!r}")

    go(tuple(sorted(obligations, key=sort_key)), frozenset(), frozenset())
    return tuple(sorted(results, key=lambda r: (sorted(map(sort_key, r[0])), sorted(map(sort_key, r[1])))))


def ltl_to_nbw(phi: Formula, atoms: AtomTable, cap: int = DEFAULT_STATE_CAP) -> Nbw:
    """Tableau NBW with L(result) = [[phi]]; phi must be in NNF.

    Generalized-Buchi acceptance (one set per Until subformula) is folded into
    a single set with an index counter plus a wrap bit; F is the set of states
    whose incoming transition wrapped the counter.
    """
    if not is_nnf(phi):
        raise ValueError("ltl_to_nbw requires a formula in negation normal form")
    u_list = sorted((f for f in set(_closure(phi)) if isinstance(f, Until)), key=sort_key)
    k = len(u_list)
    alphabet = Alphabet.from_atoms(atoms)
    valuations = [si | so for si in alphabet.inputs for so in alphabet.outputs]

    init = (frozenset([phi]), 0, 0)
    index = {init: 0}
    states = [init]
    delta: list[list[tuple[int, ...]]] = []
    work = [init]
    while work:
        obl, i, _bit = state = work.pop()
        row: list[tuple[int, ...]] = []
        for val in valuations:
            succs = []
            for nxt, pend in _expand(obl, val):
                if k == 0 or u_list[i] not in pend:
                    i2 = (i + 1) % k if k else 0
                    bit2 = 1 if (k == 0 or i == k - 1) else 0
                else:
                    i2, bit2 = i, 0
                succ = (nxt, i2, bit2)
                if succ not in index:
                    if len(states) >= cap:
                        raise AutomatonTooLarge(f"NBW construction exceeded {cap} states")
                    index[succ] = len(states)
                    states.append(succ)
                    work.append(succ)
                succs.append(index[succ])
            row.append(tuple(sorted(set(succs))))
        while len(delta) <= index[state]:
            delta.append([])
        delta[index[state]] = row

    return Nbw(
        alphabet=alphabet,
        n_states=len(states),
        initial=frozenset([0]),
        buchi=frozenset(i for i, (_, _, bit) in enumerate(states) if bit == 1),
        delta=tuple(tuple(row) for row in delta),
        labels=tuple(states),
    )


def _closure(phi: Formula):
    yield phi
    if isinstance(phi, (Not, Next)):
        yield from _closure(phi.arg)
    elif isinstance(phi, (And, Or, Until, Release)):
        yield from _closure(phi.left)
        yield from _closure(phi.right)


def dualize(nbw: Nbw) -> UniversalCoBuchi:
    """Read the NBW structure universally: the result accepts the complement.

    Where the NBW has no successor the dual routes to a fresh accepting sink
    (non-final, self-loop), so the universal transition function is total.
    """
    needs_sink = any(not succ for row in nbw.delta for succ in row)
    n = nbw.n_states + (1 if needs_sink else 0)
    sink = nbw.n_states
    delta = []
    for q in range(nbw.n_states):
        delta.append(tuple(succ if succ else (sink,) for succ in nbw.delta[q]))
    if needs_sink:
        delta.append(tuple((sink,) for _ in range(len(nbw.alphabet))))
    labels = nbw.labels + (("sink",),) if needs_sink and nbw.labels else nbw.labels
    return UniversalCoBuchi(
        alphabet=nbw.alphabet,
        n_states=n,
        initial=nbw.initial,
        final=nbw.buchi,
        delta=tuple(delta),
        labels=labels,
    )


def conjuncts(phi: Formula) -> list[Formula]:
    if isinstance(phi, And):
        return conjuncts(phi.left) + conjuncts(phi.right)
    return [phi]


def union_ucw(parts: list[UniversalCoBuchi]) -> UniversalCoBuchi:
    """Disjoint union; universal branching makes this the language intersection."""
    if not parts:
        raise ValueError("union of zero automata")
    alphabet = parts[0].alphabet
    if any(p.alphabet != alphabet for p in parts):
        raise ValueError("alphabet mismatch in union")
    delta = []
    initial = []
    final = []
    labels = []
    offset = 0
    for p in parts:
        for q in range(p.n_states):
            delta.append(tuple(tuple(s + offset for s in succ) for succ in p.delta[q]))
        initial.extend(q + offset for q in p.initial)
        final.extend(q + offset for q in p.final)
        labels.extend(p.labels if p.labels else [None] * p.n_states)
        offset += p.n_states
    return UniversalCoBuchi(
        alphabet=alphabet,
        n_states=offset,
        initial=frozenset(initial),
        final=frozenset(final),
        delta=tuple(delta),
        labels=tuple(labels),
    )


def ucw_for_formula(
    phi: Formula,
    atoms: AtomTable,
    cap: int = DEFAULT_STATE_CAP,
    split_conjunctions: bool = True,
) -> UniversalCoBuchi:
    """Universal coBuchi automaton accepting exactly the traces satisfying phi."""
    parts = conjuncts(phi) if split_conjunctions else [phi]
    return union_ucw([dualize(ltl_to_nbw(to_nnf(Not(c)), atoms, cap)) for c in parts])


# ---------------------------------------------------------------------------
# Lasso acceptance


def _trace_letter_indices(alphabet: Alphabet, atoms: AtomTable, trace: LassoTrace):
    def idx(valuation):
        si, so = atoms.split(valuation)
        extra = valuation - si - so
        if extra:
            raise ValueError(f"trace valuation mentions undeclared atoms {sorted(extra)}")
        return alphabet.index(si, so)

    return [idx(v) for v in trace.prefix], [idx(v) for v in trace.loop]


def _succ_masks(delta, n_letters: int, n_states: int):
    masks = []
    for li in range(n_letters):
        row = []
        for q in range(n_states):
            m = 0
            for s in delta[q][li]:
                m |= 1 << s
            row.append(m)
        masks.append(row)
    return masks


def _image(mask: int, succ_row) -> int:
    out = 0
    while mask:
        low = mask & -mask
        out |= succ_row[low.bit_length() - 1]
        mask ^= low
    return out


def _good_mask_for_loop(succ_masks, final_mask: int, n_states: int, loop: tuple) -> int:
    """States q such that some run from (q, loop position 0) visits F infinitely often."""
    k = len(loop)
    n_nodes = n_states * k

    def node_succs(node):
        q, j = divmod(node, k)
        m = succ_masks[loop[j]][q]
        j2 = (j + 1) % k
        out = []
        while m:
            low = m & -m
            out.append((low.bit_length() - 1) * k + j2)
            m ^= low
        return out

    adj = [node_succs(v) for v in range(n_nodes)]

    # Iterative Tarjan; cycle nodes = members of an SCC that is nontrivial or self-looping.
    index_of = [-1] * n_nodes
    low = [0] * n_nodes
    on_stack = [False] * n_nodes
    stack: list[int] = []
    scc_id = [-1] * n_nodes
    counter = 0
    n_sccs = 0
    scc_members: list[list[int]] = []
    for root in range(n_nodes):
        if index_of[root] != -1:
            continue
        call = [(root, 0)]
        while call:
            v, pi = call[-1]
            if pi == 0:
                index_of[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for j in range(pi, len(adj[v])):
                w = adj[v][j]
                if index_of[w] == -1:
                    call[-1] = (v, j + 1)
                    call.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index_of[w])
            if advanced:
                continue
            call.pop()
            if call:
                pv = call[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == index_of[v]:
                members = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    scc_id[w] = n_sccs
                    members.append(w)
                    if w == v:
                        break
                scc_members.append(members)
                n_sccs += 1

    target = [False] * n_nodes
    for members in scc_members:
        cyclic = len(members) > 1 or any(m in adj[m] for m in members)
        if cyclic and any(final_mask >> (m // k) & 1 for m in members):
            for m in members:
                target[m] = True

    # Backward BFS: nodes that can reach a target node.
    radj: list[list[int]] = [[] for _ in range(n_nodes)]
    for v in range(n_nodes):
        for w in adj[v]:
            radj[w].append(v)
    reach = list(target)
    frontier = [v for v in range(n_nodes) if target[v]]
    while frontier:
        w = frontier.pop()
        for v in radj[w]:
            if not reach[v]:
                reach[v] = True
                frontier.append(v)

    good = 0
    for q in range(n_states):
        if reach[q * k]:
            good |= 1 << q
    return good


class IndexedLassoFamily:
    """A family of lassos pre-converted to letter indices over one alphabet.

    Distinct prefixes and distinct loops are interned so that checking many
    lassos against one automaton costs one state-image per distinct prefix
    and one cycle analysis per distinct loop.
    """

    def __init__(self, alphabet: Alphabet, atoms: AtomTable, traces):
        prefix_id: dict[tuple, int] = {}
        loop_id: dict[tuple, int] = {}
        self.pairs: list[tuple[int, int]] = []
        for trace in traces:
            prefix, loop = _trace_letter_indices(alphabet, atoms, trace)
            p, l = tuple(prefix), tuple(loop)
            if p not in prefix_id:
                prefix_id[p] = len(prefix_id)
            if l not in loop_id:
                loop_id[l] = len(loop_id)
            self.pairs.append((prefix_id[p], loop_id[l]))
        self.prefixes = list(prefix_id)
        self.loops = list(loop_id)

    @classmethod
    def from_letter_indices(cls, lassos) -> "IndexedLassoFamily":
        """Build directly from (prefix, loop) tuples of letter indices."""
        family = cls.__new__(cls)
        family.prefixes = [tuple(p) for p, _ in lassos]
        family.loops = [tuple(l) for _, l in lassos]
        family.pairs = [(i, i) for i in range(len(lassos))]
        return family


def _run_family(n_states, delta, initial, fset, n_letters, family: IndexedLassoFamily) -> int:
    """Packed bits: bit i set iff some run on family lasso i visits F infinitely often."""
    succ = _succ_masks(delta, n_letters, n_states)
    init_mask = 0
    for q in initial:
        init_mask |= 1 << q
    final_mask = 0
    for q in fset:
        final_mask |= 1 << q

    image_of: dict[tuple, int] = {(): init_mask}

    def prefix_image(prefix: tuple) -> int:
        got = image_of.get(prefix)
        if got is None:
            got = _image(prefix_image(prefix[:-1]), succ[prefix[-1]])
            image_of[prefix] = got
        return got

    images = [prefix_image(p) for p in family.prefixes]
    goods = [_good_mask_for_loop(succ, final_mask, n_states, l) for l in family.loops]
    data = bytearray()
    for p, l in family.pairs:
        data.append(48 + (1 if images[p] & goods[l] else 0))
    data.reverse()
    return int(bytes(data), 2) if data else 0


def nbw_accepts_lasso(nbw: Nbw, atoms: AtomTable, trace: LassoTrace) -> bool:
    family = IndexedLassoFamily(nbw.alphabet, atoms, [trace])
    return bool(_run_family(nbw.n_states, nbw.delta, nbw.initial, nbw.buchi, len(nbw.alphabet), family) & 1)


def ucw_accepts_lasso(ucw: UniversalCoBuchi, atoms: AtomTable, trace: LassoTrace) -> bool:
    """True iff no run on prefix . loop^omega visits the final set infinitely often."""
    return bool(ucw_accepts_lassos_bulk(ucw, atoms, [trace]) & 1)


def ucw_accepts_lassos_bulk(ucw: UniversalCoBuchi, atoms: AtomTable, traces) -> int:
    """Packed acceptance bits (bit i = traces[i] accepted) with shared analysis."""
    family = IndexedLassoFamily(ucw.alphabet, atoms, traces)
    return ucw_accepts_family(ucw, family)


def ucw_accepts_family(ucw: UniversalCoBuchi, family: IndexedLassoFamily) -> int:
    rejected = _run_family(ucw.n_states, ucw.delta, ucw.initial, ucw.final, len(ucw.alphabet), family)
    all_ones = (1 << len(family.pairs)) - 1
    return all_ones & ~rejected


# ---------------------------------------------------------------------------
# Text format (normative for golden tests)


def format_ucw(ucw: UniversalCoBuchi, atoms: AtomTable) -> str:
    lines = [f"states {ucw.n_states}"]
    lines.append("initial " + " ".join(str(q) for q in sorted(ucw.initial)))
    lines.append("final " + " ".join(str(q) for q in sorted(ucw.final)))
    for q in range(ucw.n_states):
        for li in range(len(ucw.alphabet)):
            si, so = ucw.alphabet.pair(li)
            letter = render_letter(atoms.atoms, si | so)
            dsts = " ".join(str(d) for d in ucw.delta[q][li])
            lines.append(f"{q} {letter} {dsts}")
    return "\n".join(lines) + "\n"


def parse_ucw(text: str, atoms: AtomTable) -> UniversalCoBuchi:
    alphabet = Alphabet.from_atoms(atoms)
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines or not lines[0].startswith("states "):
        raise ValueError("automaton file must start with a 'states N' line")
    n = int(lines[0].split()[1])
    initial = frozenset(int(t) for t in lines[1].split()[1:])
    final = frozenset(int(t) for t in lines[2].split()[1:])
    delta = [[() for _ in range(len(alphabet))] for _ in range(n)]
    for ln in lines[3:]:
        parts = ln.split()
        q = int(parts[0])
        valuation = parse_letter(atoms.atoms, parts[1])
        si, so = atoms.split(valuation)
        li = alphabet.index(si, so)
        delta[q][li] = tuple(int(t) for t in parts[2:])
    return UniversalCoBuchi(
        alphabet=alphabet,
        n_states=n,
        initial=initial,
        final=final,
        delta=tuple(tuple(row) for row in delta),
    )
