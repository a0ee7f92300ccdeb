"""Completion of a partial strategy into a full controller, and exact evaluation.

Off the sampled prefixes the controller only ever picks outputs that keep the
counting function inside the winning region (one always exists, by the
fixpoint property of the region), so the result realizes the hard constraints
and reproduces the partial strategy verbatim on every sample branch.  Among
the safe outputs it imitates the sampled decisions: outputs are ranked by the
frequency-weighted vote of what the strategy chose in the same (reward state,
input) situation across the tree, then by immediate transition reward, then
by canonical output order.  A purely myopic immediate-reward rule is not
enough here: it never enters reward states that only pay off later (warnings
in the case study), which collapses its long-run value onto the do-nothing
baseline.
"""

from __future__ import annotations

import random
from fractions import Fraction
from math import lcm
from typing import Optional

from .automata import UniversalCoBuchi
from .linalg import solve_exact
from .machines import MachineError, MealyMachine, PartialStrategy, RewardMachine
from .safety import Antichain, cf_successor_idx, initial_cf
from .sampling import EnvChain, SampleTree

STATE_CAP = 100_000


def complete_strategy(
    strategy: PartialStrategy,
    tree: Optional[SampleTree],
    ucw: UniversalCoBuchi,
    k: int,
    win: Antichain,
    reward_machine: RewardMachine,
    minimize: bool = True,
) -> MealyMachine:
    """Extend a realizability-preserving strategy into a complete Mealy machine.

    Pass ``tree=None`` (with an empty strategy) to extract a pure winning
    controller from the safety game alone.
    """
    inputs = ucw.alphabet.inputs
    outputs = ucw.alphabet.outputs
    rm = reward_machine
    start = initial_cf(ucw, k)
    if not win.contains(start):
        raise MachineError("initial counting function is not winning")

    # Annotate sample vertices with the counting function and reward state
    # reached by following the strategy; fail on an infeasible strategy.
    # Along the way, tally the strategy's choices per (reward state, input).
    cf_at: dict[tuple, tuple] = {(): start}
    s_at: dict[tuple, int] = {(): rm.initial}
    votes: dict = {}
    if tree is not None:
        for v in tree.vertices():
            if not v:
                continue
            u = v[:-1]
            o = strategy.output(v)
            li = ucw.alphabet.index(v[-1], o)
            nxt = cf_successor_idx(ucw, k, cf_at[u], li)
            if not win.contains(nxt):
                raise MachineError(f"strategy leaves the winning region at {v!r}")
            cf_at[v] = nxt
            s_at[v] = rm.step(s_at[u], (v[-1], o))[0]
            tally = votes.setdefault((s_at[u], v[-1]), {})
            tally[o] = tally.get(o, 0) + tree.count[v]

    def off_sample(cf: tuple, s: int, i):
        tally = votes.get((s, i), {})
        best = None
        for oi, o in enumerate(outputs):
            li = ucw.alphabet.index(i, o)
            nxt = cf_successor_idx(ucw, k, cf, li)
            if not win.contains(nxt):
                continue
            rank = (-tally.get(o, 0), -rm.reward[(s, (i, o))], oi)
            if best is None or rank < best[0]:
                best = (rank, o, nxt, rm.trans[(s, (i, o))])
        if best is None:
            raise MachineError("no winning output; the antichain violates its fixpoint property")
        return best[1], best[2], best[3]

    root = ("tree", ()) if tree is not None else ("off", start, rm.initial)
    index: dict = {root: 0}
    order = [root]
    trans: dict = {}
    out: dict = {}
    work = [root]
    while work:
        state = work.pop(0)
        si = index[state]
        for i in inputs:
            if state[0] == "tree":
                v = state[1]
                child = v + (i,)
                if child in tree.children.get(v, ()):
                    o = strategy.output(child)
                    succ = ("tree", child)
                else:
                    o, cf2, s2 = off_sample(cf_at[v], s_at[v], i)
                    succ = ("off", cf2, s2)
            else:
                _, cf, s = state
                o, cf2, s2 = off_sample(cf, s, i)
                succ = ("off", cf2, s2)
            if succ not in index:
                if len(order) >= STATE_CAP:
                    raise MachineError("completed machine exceeds the state cap")
                index[succ] = len(order)
                order.append(succ)
                work.append(succ)
            trans[(si, i)] = index[succ]
            out[(si, i)] = o
    machine = MealyMachine(len(order), 0, trans, out)
    return minimize_mealy(machine, inputs) if minimize else machine


def minimize_mealy(machine: MealyMachine, input_letters) -> MealyMachine:
    """Standard partition refinement on output rows, then successor-block rows."""
    inputs = tuple(input_letters)
    n = machine.n_states

    def out_row(m):
        return tuple(machine.out[(m, i)] for i in inputs)

    signature = {m: out_row(m) for m in range(n)}
    block = _blocks_from_signature(n, signature)
    while True:
        signature = {
            m: (block[m], tuple(block[machine.trans[(m, i)]] for i in inputs)) for m in range(n)
        }
        new_block = _blocks_from_signature(n, signature)
        if new_block == block:
            break
        block = new_block

    reps = sorted(set(block.values()))
    renum = {b: i for i, b in enumerate(reps)}
    trans, out = {}, {}
    for m in range(n):
        for i in inputs:
            trans[(renum[block[m]], i)] = renum[block[machine.trans[(m, i)]]]
            out[(renum[block[m]], i)] = machine.out[(m, i)]
    return MealyMachine(len(reps), renum[block[machine.initial]], trans, out)


def _blocks_from_signature(n, signature):
    first: dict = {}
    block = {}
    for m in range(n):
        sig = signature[m]
        if sig not in first:
            first[sig] = m
        block[m] = first[sig]
    return block


def verify_realizes(machine: MealyMachine, ucw: UniversalCoBuchi, k: int) -> bool:
    """Sweep the product of the machine with the counting-function automaton over
    all inputs; true iff no reachable counting function overflows K."""
    start = initial_cf(ucw, k)
    cap = k + 1
    seen = {(machine.initial, start)}
    work = [(machine.initial, start)]
    while work:
        m, cf = work.pop()
        if any(v >= cap for v in cf):
            return False
        for i in ucw.alphabet.inputs:
            m2, o = machine.step(m, i)
            cf2 = cf_successor_idx(ucw, k, cf, ucw.alphabet.index(i, o))
            node = (m2, cf2)
            if node not in seen:
                seen.add(node)
                work.append(node)
    return True


# ---------------------------------------------------------------------------
# Exact mean payoff


def build_product_chain(machine: MealyMachine, env: EnvChain, rm: RewardMachine):
    """Reachable product of controller, environment chain, and reward machine.

    Returns (states, init, edges) with edges[i] = tuple of (prob, j, reward).
    """
    init_nodes = []
    index: dict = {}
    order: list = []

    def intern(node):
        if node not in index:
            index[node] = len(order)
            order.append(node)
        return index[node]

    for p, es in env.init:
        init_nodes.append((p, intern((machine.initial, es, rm.initial))))
    edges: dict[int, tuple] = {}
    work = list(range(len(order)))
    while work:
        i = work.pop()
        if i in edges:
            continue
        m, es, s = order[i]
        rows = []
        for p, es2, letter in env.trans[es]:
            m2, o = machine.step(m, letter)
            s2, r = rm.step(s, (letter, o))
            j = intern((m2, es2, s2))
            if j not in edges:
                work.append(j)
            rows.append((p, j, r))
        edges[i] = tuple(rows)
    return order, init_nodes, [edges[i] for i in range(len(order))]


def _sccs(n, succ):
    index_of = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comp = [-1] * n
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
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
            for jj in range(pi, len(succ[v])):
                w = succ[v][jj]
                if index_of[w] == -1:
                    call[-1] = (v, jj + 1)
                    call.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index_of[w])
            if advanced:
                continue
            call.pop()
            if call:
                low[call[-1][0]] = min(low[call[-1][0]], low[v])
            if low[v] == index_of[v]:
                members = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = len(comps)
                    members.append(w)
                    if w == v:
                        break
                comps.append(members)
    return comp, comps


def long_run_average(machine: MealyMachine, env: EnvChain, rm: RewardMachine) -> Fraction:
    """Exact expected mean payoff: per-BSCC stationary distributions weighted by
    absorption probabilities, all in rational arithmetic."""
    states, init_nodes, edges = build_product_chain(machine, env, rm)
    n = len(states)
    succ = [[j for _, j, _ in edges[i]] for i in range(n)]
    comp, comps = _sccs(n, succ)
    is_bottom = [all(comp[w] == ci for v in members for w in succ[v]) for ci, members in enumerate(comps)]

    mean: dict[int, Fraction] = {}
    for ci, members in enumerate(comps):
        if not is_bottom[ci]:
            continue
        pos = {v: i for i, v in enumerate(members)}
        nb = len(members)
        if nb == 1:
            v = members[0]
            pi = [Fraction(1)]
        else:
            # pi (P - I) = 0 with the last equation replaced by sum(pi) = 1.
            a = [[Fraction(0)] * nb for _ in range(nb)]
            rhs = [[Fraction(0)] for _ in range(nb)]
            for v in members:
                for p, j, _ in edges[v]:
                    a[pos[j]][pos[v]] += p
                a[pos[v]][pos[v]] -= 1
            a[nb - 1] = [Fraction(1)] * nb
            rhs[nb - 1][0] = Fraction(1)
            pi = [row[0] for row in solve_exact(a, rhs)]
        mean[ci] = sum(
            (pi[pos[v]] * sum((p * r for p, _, r in edges[v]), Fraction(0)) for v in members),
            Fraction(0),
        )

    bottoms = [ci for ci in range(len(comps)) if is_bottom[ci]]
    bottom_col = {ci: i for i, ci in enumerate(bottoms)}
    transient = [v for v in range(n) if not is_bottom[comp[v]]]
    absorb: dict[tuple[int, int], Fraction] = {}
    if transient:
        pos = {v: i for i, v in enumerate(transient)}
        nt = len(transient)
        a = [[Fraction(0)] * nt for _ in range(nt)]
        rhs = [[Fraction(0)] * len(bottoms) for _ in range(nt)]
        for v in transient:
            a[pos[v]][pos[v]] += 1
            for p, j, _ in edges[v]:
                if is_bottom[comp[j]]:
                    rhs[pos[v]][bottom_col[comp[j]]] += p
                else:
                    a[pos[v]][pos[j]] -= p
        sol = solve_exact(a, rhs)
        for v in transient:
            for bi, ci in enumerate(bottoms):
                absorb[(v, ci)] = sol[pos[v]][bi]

    value = Fraction(0)
    for p0, v in init_nodes:
        if is_bottom[comp[v]]:
            value += p0 * mean[comp[v]]
        else:
            for ci in bottoms:
                value += p0 * absorb[(v, ci)] * mean[ci]
    return value


def simulate_average(
    machine: MealyMachine, env: EnvChain, rm: RewardMachine, steps: int, seed: int
) -> float:
    """Seeded empirical average reward over one long trajectory; a cross-check only."""
    rng = random.Random(seed)

    def table(weighted):
        denom = lcm(*[p.denominator for p, *_ in weighted])
        acc = 0
        rows = []
        for item in weighted:
            acc += int(item[0] * denom)
            rows.append((acc, item))
        assert acc == denom
        return denom, rows

    def draw(prepared):
        denom, rows = prepared
        t = rng.randrange(denom)
        for threshold, item in rows:
            if t < threshold:
                return item
        raise AssertionError

    tables = {s: table(env.trans[s]) for s in env.states}
    _, es = draw(table(env.init))
    m, s = machine.initial, rm.initial
    total = 0
    for _ in range(steps):
        _, es, letter = draw(tables[es])
        m, o = machine.step(m, letter)
        s, r = rm.step(s, (letter, o))
        total += r
    return total / steps


def format_machine_graph(machine: MealyMachine, render_input, render_output) -> str:
    """One edge per line, for external visualization tools."""
    lines = []
    for (m, i), m2 in sorted(machine.trans.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        o = machine.out[(m, i)]
        lines.append(f"q{m} -> q{m2} [{render_input(i)} / {render_output(o)}]")
    return "\n".join(lines) + "\n"
