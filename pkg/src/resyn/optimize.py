"""Optimal realizability-preserving partial strategies on sample trees.

Three routes to the optimum, kept deliberately independent so they can check
each other: an exact dynamic program over (vertex, counting function, reward
state); a constraint encoding with a threshold, solvable natively or emitted
as SMT-LIB for an external solver, wrapped in a binary search; and a plain
enumeration oracle for testing.
"""

from __future__ import annotations

import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .automata import UniversalCoBuchi
from .machines import PartialStrategy, RewardMachine, check_partial_realizable, expected_reward
from .safety import Antichain, cf_successor_idx, initial_cf
from .sampling import SampleTree


class InfeasibleEncoding(ValueError):
    pass


@dataclass(frozen=True)
class ProblemInstance:
    ucw: UniversalCoBuchi
    k: int
    win: Antichain
    reward_machine: RewardMachine
    tree: SampleTree

    def __post_init__(self):
        if len(self.win) == 0:
            raise InfeasibleEncoding("winning antichain is empty")
        if not self.win.contains(initial_cf(self.ucw, self.k)):
            raise InfeasibleEncoding("initial counting function is not winning")

    @property
    def outputs(self) -> tuple:
        return self.ucw.alphabet.outputs

    def reward_bounds(self) -> tuple[int, int]:
        rm, t = self.reward_machine, self.tree
        return rm.r_min * t.n * t.length, rm.r_max * t.n * t.length


# ---------------------------------------------------------------------------
# Clause language


@dataclass(frozen=True)
class BoolLit:
    name: str
    positive: bool = True


@dataclass(frozen=True)
class LinearCmp:
    """sum(coef * var) op const, with booleans coerced to 0/1."""

    terms: tuple  # ((coef, name), ...)
    op: str  # ">=", "<=", "=="
    const: int


@dataclass(frozen=True)
class Implies:
    cond: "Clause"
    body: "Clause"


@dataclass(frozen=True)
class Iff:
    a: "Clause"
    b: "Clause"


@dataclass(frozen=True)
class AnyOf:
    parts: tuple


@dataclass(frozen=True)
class AllOf:
    parts: tuple


Clause = object


def eval_clause(clause, model: dict) -> bool:
    if isinstance(clause, BoolLit):
        v = bool(model[clause.name])
        return v if clause.positive else not v
    if isinstance(clause, LinearCmp):
        s = sum(c * int(model[n]) for c, n in clause.terms)
        if clause.op == ">=":
            return s >= clause.const
        if clause.op == "<=":
            return s <= clause.const
        return s == clause.const
    if isinstance(clause, Implies):
        return not eval_clause(clause.cond, model) or eval_clause(clause.body, model)
    if isinstance(clause, Iff):
        return eval_clause(clause.a, model) == eval_clause(clause.b, model)
    if isinstance(clause, AnyOf):
        return any(eval_clause(p, model) for p in clause.parts)
    if isinstance(clause, AllOf):
        return all(eval_clause(p, model) for p in clause.parts)
    raise TypeError(f"not a clause: {clause!r}")


def linearize(clause):
    """Rewrite one-boolean-guard implications over linear sums into the
    arithmetic form (1 - x) + sum >= 1 used for cross-checking the encoding."""
    if isinstance(clause, Implies) and isinstance(clause.cond, BoolLit) and isinstance(clause.body, LinearCmp):
        b = clause.body
        if b.op == ">=":
            sign = 1 if clause.cond.positive else -1
            terms = ((-sign, clause.cond.name),) + b.terms
            return LinearCmp(terms, ">=", b.const - (1 if clause.cond.positive else 0))
    return clause


@dataclass(frozen=True)
class ConstraintSystem:
    bool_vars: tuple
    int_vars: tuple
    int_bounds: dict
    clauses: tuple
    threshold: int
    # decoding / solving metadata
    vertices: tuple
    x_info: dict  # name -> (vertex, rm state, output index)
    x_name: dict  # (vertex, rm state, output index) -> name
    y_name: dict  # (vertex, automaton state) -> name
    objective: tuple  # ((coefficient, x name), ...)


def _letter_token(alphabet_letters, letter) -> str:
    if isinstance(letter, str) and letter.replace("_", "").isalnum():
        return letter
    return f"l{alphabet_letters.index(letter)}"


def encode(inst: ProblemInstance, threshold: int) -> ConstraintSystem:
    """Constraint system whose models are exactly the realizability-preserving
    strategies with n * expected reward >= threshold.

    Counting-function variables are lower-bounded only; that over-approximates
    the true counts, which is sound because the winning region is downward
    closed, and complete because the true counts themselves satisfy every
    constraint.
    """
    lo, hi = inst.reward_bounds()
    if not lo <= threshold <= hi:
        raise ValueError(f"threshold {threshold} outside [{lo}, {hi}]")
    ucw, k, rm, tree = inst.ucw, inst.k, inst.reward_machine, inst.tree
    outputs = inst.outputs
    in_letters = ucw.alphabet.inputs
    n_q = ucw.n_states

    def vid(v: tuple) -> str:
        if not v:
            return "eps"
        return "_".join(_letter_token(in_letters, x) for x in v)

    vertices = tuple(tree.vertices())
    x_name, x_info, y_name = {}, {}, {}
    bool_vars, int_vars = [], []
    int_bounds = {}
    for v in vertices:
        for q in range(n_q):
            name = f"y_{vid(v)}_{q}"
            y_name[(v, q)] = name
            int_vars.append(name)
            int_bounds[name] = (-1, k + 1)
        if v:
            for s in range(rm.n_states):
                for oi in range(len(outputs)):
                    name = f"x_{vid(v)}_{s}_{oi}"
                    x_name[(v, s, oi)] = name
                    x_info[name] = (v, s, oi)
                    bool_vars.append(name)

    clauses = []

    # Exactly one action (state, output) per nonroot vertex.
    for v in vertices:
        if v:
            terms = tuple((1, x_name[(v, s, oi)]) for s in range(rm.n_states) for oi in range(len(outputs)))
            clauses.append(LinearCmp(terms, "==", 1))

    # Reward machine starts in its initial state at depth one.
    for v in vertices:
        if len(v) == 1:
            terms = tuple((1, x_name[(v, rm.initial, oi)]) for oi in range(len(outputs)))
            clauses.append(LinearCmp(terms, "==", 1))

    # Chosen actions determine the reward-machine state of every child.
    for v in vertices:
        if not v:
            continue
        for s in range(rm.n_states):
            for oi, o in enumerate(outputs):
                s2 = rm.trans[(s, (v[-1], o))]
                for u in tree.children[v]:
                    terms = tuple((1, x_name[(u, s2, oj)]) for oj in range(len(outputs)))
                    clauses.append(Implies(BoolLit(x_name[(v, s, oi)]), LinearCmp(terms, ">=", 1)))

    # Root counting function is the initial one.
    for q, val in enumerate(initial_cf(ucw, k)):
        clauses.append(LinearCmp(((1, y_name[((), q)]),), "==", val))

    # Counting-function update: activation is exact, counts are lower-bounded.
    final = ucw.final
    for v in vertices:
        if not v:
            continue
        u = v[:-1]
        for s in range(rm.n_states):
            for oi, o in enumerate(outputs):
                guard = BoolLit(x_name[(v, s, oi)])
                li = ucw.alphabet.index(v[-1], o)
                preds_of = [[] for _ in range(n_q)]
                for p in range(n_q):
                    for q in ucw.delta[p][li]:
                        preds_of[q].append(p)
                for q in range(n_q):
                    preds = preds_of[q]
                    inactive = LinearCmp(((1, y_name[(v, q)]),), "==", -1)
                    if not preds:
                        clauses.append(Implies(guard, inactive))
                        continue
                    activation = LinearCmp(tuple((1, y_name[(u, p)]) for p in preds), "==", -len(preds))
                    clauses.append(Implies(guard, Iff(activation, inactive)))
                    chi = 1 if q in final else 0
                    for p in preds:
                        step = Implies(
                            LinearCmp(((1, y_name[(u, p)]),), ">=", 0),
                            LinearCmp(((1, y_name[(v, q)]), (-1, y_name[(u, p)])), ">=", chi),
                        )
                        clauses.append(Implies(guard, step))

    # Declared ranges.
    for name in int_vars:
        lo_b, hi_b = int_bounds[name]
        clauses.append(LinearCmp(((1, name),), ">=", lo_b))
        clauses.append(LinearCmp(((1, name),), "<=", hi_b))

    # Every vertex stays inside the downward closure of the winning antichain.
    for v in vertices:
        options = []
        for f in inst.win:
            options.append(AllOf(tuple(LinearCmp(((1, y_name[(v, q)]),), "<=", f[q]) for q in range(n_q))))
        clauses.append(AnyOf(tuple(options)))

    # Objective bound: sum r * fq * x >= threshold.
    objective = []
    for v in vertices:
        if not v:
            continue
        for s in range(rm.n_states):
            for oi, o in enumerate(outputs):
                coef = rm.reward[(s, (v[-1], o))] * tree.count[v]
                objective.append((coef, x_name[(v, s, oi)]))
    objective = tuple(objective)
    clauses.append(LinearCmp(objective, ">=", threshold))

    return ConstraintSystem(
        bool_vars=tuple(bool_vars),
        int_vars=tuple(int_vars),
        int_bounds=int_bounds,
        clauses=tuple(clauses),
        threshold=threshold,
        vertices=vertices,
        x_info=x_info,
        x_name=x_name,
        y_name=y_name,
        objective=objective,
    )


# ---------------------------------------------------------------------------
# SMT-LIB emission


def _smt_term(terms) -> str:
    parts = []
    for coef, name in terms:
        base = f"(ite {name} 1 0)" if name.startswith("x_") else name
        if coef == 1:
            parts.append(base)
        else:
            parts.append(f"(* {coef} {base})")
    if not parts:
        return "0"
    if len(parts) == 1:
        return parts[0]
    return "(+ " + " ".join(parts) + ")"


def _smt_clause(clause) -> str:
    if isinstance(clause, BoolLit):
        return clause.name if clause.positive else f"(not {clause.name})"
    if isinstance(clause, LinearCmp):
        op = {"==": "=", ">=": ">=", "<=": "<="}[clause.op]
        return f"({op} {_smt_term(clause.terms)} {clause.const})"
    if isinstance(clause, Implies):
        return f"(=> {_smt_clause(clause.cond)} {_smt_clause(clause.body)})"
    if isinstance(clause, Iff):
        return f"(= {_smt_clause(clause.a)} {_smt_clause(clause.b)})"
    if isinstance(clause, AnyOf):
        return "(or " + " ".join(_smt_clause(p) for p in clause.parts) + ")"
    if isinstance(clause, AllOf):
        return "(and " + " ".join(_smt_clause(p) for p in clause.parts) + ")"
    raise TypeError(f"not a clause: {clause!r}")


def emit_smtlib(cs: ConstraintSystem) -> str:
    """Deterministic SMT-LIB v2 script (logic QF_LIA) for the system."""
    lines = ["(set-logic QF_LIA)"]
    for name in cs.bool_vars:
        lines.append(f"(declare-fun {name} () Bool)")
    for name in cs.int_vars:
        lines.append(f"(declare-fun {name} () Int)")
    for clause in cs.clauses:
        lines.append(f"(assert {_smt_clause(clause)})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Native backend: branch-and-bound search over the encoded system


def solve_constraint_system(inst: ProblemInstance, cs: ConstraintSystem) -> Optional[dict]:
    """Find a model of the constraint system, or None.

    Searches output choices vertex by vertex; reward-machine states are forced
    by the transition constraints and counting functions take their least
    admissible values, so the only free choices are the outputs.  Prunes on
    the realizability disjunction and on an optimistic objective bound, then
    verifies the completed model against every clause.
    """
    ucw, k, rm, tree = inst.ucw, inst.k, inst.reward_machine, inst.tree
    outputs = inst.outputs
    vertices = [v for v in cs.vertices if v]
    n_q = ucw.n_states

    # Optimistic per-vertex objective contribution, for suffix pruning.
    best_contrib = []
    for v in vertices:
        best_contrib.append(
            max(rm.reward[(s, (v[-1], o))] * tree.count[v] for s in range(rm.n_states) for o in outputs)
        )
    suffix = [0] * (len(vertices) + 1)
    for i in range(len(vertices) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + best_contrib[i]

    init = initial_cf(ucw, k)
    if not inst.win.contains(init):
        return None

    cf_at = {(): init}
    s_at = {(): rm.initial}
    choice: dict[tuple, int] = {}

    def assign(i: int, partial: int) -> bool:
        if partial + suffix[i] < cs.threshold:
            return False
        if i == len(vertices):
            return True
        v = vertices[i]
        u = v[:-1]
        s = s_at[u]
        for oi, o in enumerate(outputs):
            li = ucw.alphabet.index(v[-1], o)
            nxt = cf_successor_idx(ucw, k, cf_at[u], li)
            if not inst.win.contains(nxt):
                continue
            cf_at[v] = nxt
            s_at[v] = rm.trans[(s, (v[-1], o))]
            choice[v] = oi
            gain = rm.reward[(s, (v[-1], o))] * tree.count[v]
            if assign(i + 1, partial + gain):
                return True
        return False

    if not assign(0, 0):
        return None

    model: dict = {}
    for v in cs.vertices:
        for q in range(n_q):
            model[cs.y_name[(v, q)]] = cf_at[v][q]
        if v:
            for s in range(rm.n_states):
                for oi in range(len(outputs)):
                    model[cs.x_name[(v, s, oi)]] = s == s_at[v[:-1]] and oi == choice[v]
    for clause in cs.clauses:
        if not eval_clause(clause, model):
            raise AssertionError(f"native model violates encoded clause {clause!r}")
    return model


def decode_strategy(cs: ConstraintSystem, model: dict) -> PartialStrategy:
    choice = {}
    for name, value in model.items():
        if name.startswith("x_") and value:
            v, _s, oi = cs.x_info[name]
            choice[v] = oi
    return PartialStrategy({v: oi for v, oi in choice.items()})


def _strategy_from_indices(inst: ProblemInstance, raw: PartialStrategy) -> PartialStrategy:
    outputs = inst.outputs
    return PartialStrategy({v: outputs[oi] for v, oi in raw.choice.items()})


def make_native_oracle(inst: ProblemInstance) -> Callable[[int], Optional[PartialStrategy]]:
    def solve(threshold: int) -> Optional[PartialStrategy]:
        cs = encode(inst, threshold)
        model = solve_constraint_system(inst, cs)
        if model is None:
            return None
        return _strategy_from_indices(inst, decode_strategy(cs, model))

    return solve


def make_external_oracle(inst: ProblemInstance, solver_bin: str) -> Callable[[int], Optional[PartialStrategy]]:
    """Threshold oracle backed by an SMT-LIB-speaking solver binary (e.g. z3)."""

    def solve(threshold: int) -> Optional[PartialStrategy]:
        cs = encode(inst, threshold)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "instance.smt2"
            path.write_text(emit_smtlib(cs))
            proc = subprocess.run(
                [solver_bin, str(path)], capture_output=True, text=True, timeout=300
            )
        out = proc.stdout
        if out.startswith("unsat"):
            return None
        if not out.startswith("sat"):
            raise RuntimeError(f"solver failed: {proc.stdout!r} {proc.stderr!r}")
        model = _parse_smt_model(out, cs)
        return _strategy_from_indices(inst, decode_strategy(cs, model))

    return solve


def _parse_smt_model(text: str, cs: ConstraintSystem) -> dict:
    model: dict = {name: False for name in cs.bool_vars}
    model.update({name: 0 for name in cs.int_vars})
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    for i, tok in enumerate(tokens):
        if tok != "define-fun":
            continue
        name = tokens[i + 1]
        j = i + 2
        depth = 0
        # skip the (possibly empty) argument list and the sort
        while tokens[j] == "(" or depth:
            depth += tokens[j] == "("
            depth -= tokens[j] == ")"
            j += 1
        j += 1  # sort
        value_toks = []
        if tokens[j] == "(":
            depth = 0
            while True:
                value_toks.append(tokens[j])
                depth += tokens[j] == "("
                depth -= tokens[j] == ")"
                j += 1
                if depth == 0:
                    break
        else:
            value_toks.append(tokens[j])
        if name not in model:
            continue
        if value_toks == ["true"]:
            model[name] = True
        elif value_toks == ["false"]:
            model[name] = False
        elif value_toks[0] == "(":
            model[name] = -int(value_toks[2])  # (- n)
        else:
            model[name] = int(value_toks[0])
    return model


# ---------------------------------------------------------------------------
# Exact solvers


def solve_native(inst: ProblemInstance) -> Optional[tuple[int, PartialStrategy]]:
    """Exact optimum of n * expected reward over realizability-preserving strategies.

    Top-down dynamic program; the state at a vertex is the (counting function,
    reward state) pair its ancestors induce, memoized per vertex.  Ties break
    toward the canonically first output.
    """
    ucw, k, rm, tree = inst.ucw, inst.k, inst.reward_machine, inst.tree
    outputs = inst.outputs
    init = initial_cf(ucw, k)
    if not inst.win.contains(init):
        return None

    memo: dict = {}

    def best(v: tuple, cf, s: int):
        key = (v, cf, s)
        if key in memo:
            return memo[key]
        total = 0
        picks = []
        for u in tree.children[v]:
            cand_val, cand_out, cand_cf, cand_s = None, None, None, None
            for o in outputs:
                li = ucw.alphabet.index(u[-1], o)
                nxt = cf_successor_idx(ucw, k, cf, li)
                if not inst.win.contains(nxt):
                    continue
                s2, r = rm.step(s, (u[-1], o))
                sub = best(u, nxt, s2)
                if sub is None:
                    continue
                val = r * tree.count[u] + sub[0]
                if cand_val is None or val > cand_val:
                    cand_val, cand_out, cand_cf, cand_s = val, o, nxt, s2
            if cand_val is None:
                memo[key] = None
                return None
            total += cand_val
            picks.append((u, cand_out, cand_cf, cand_s))
        memo[key] = (total, tuple(picks))
        return memo[key]

    top = best((), init, rm.initial)
    if top is None:
        return None

    choice: dict[tuple, object] = {}
    stack = [((), init, rm.initial)]
    while stack:
        v, cf, s = stack.pop()
        _, picks = memo[(v, cf, s)]
        for u, o, cf2, s2 in picks:
            choice[u] = o
            stack.append((u, cf2, s2))
    return top[0], PartialStrategy(choice)


def binary_search_optimal(
    inst: ProblemInstance, solve: Callable[[int], Optional[PartialStrategy]]
) -> Optional[tuple[int, PartialStrategy]]:
    """Maximal satisfiable threshold via binary search on the closed reward interval.

    Invariant: lo is the greatest known-satisfiable threshold and hi the least
    known-unsatisfiable one; the loop on integers ends with hi - lo == 1.
    """
    lo, hi_incl = inst.reward_bounds()
    witness = solve(lo)
    if witness is None:
        return None
    hi = hi_incl + 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        found = solve(mid)
        if found is not None:
            lo, witness = mid, found
        else:
            hi = mid
    return lo, witness


def brute_force_oracle(
    inst: ProblemInstance, cap: int = 2_000_000
) -> Optional[tuple[int, PartialStrategy]]:
    """Enumerate every strategy; exact but exponential, for cross-checking only."""
    tree, rm = inst.tree, inst.reward_machine
    outputs = inst.outputs
    vertices = tree.nonroot_vertices()
    total = len(outputs) ** len(vertices)
    if total > cap:
        raise ValueError(f"{total} strategies exceed the enumeration cap {cap}")
    best_val, best_strategy = None, None
    counters = [0] * len(vertices)
    while True:
        strategy = PartialStrategy({v: outputs[ci] for v, ci in zip(vertices, counters)})
        if check_partial_realizable(strategy, tree, inst.ucw, inst.k, inst.win):
            val = expected_reward(rm, tree, strategy) * tree.n
            assert val.denominator == 1
            val = int(val)
            if best_val is None or val > best_val:
                best_val, best_strategy = val, strategy
        i = len(vertices) - 1
        while i >= 0 and counters[i] == len(outputs) - 1:
            counters[i] = 0
            i -= 1
        if i < 0:
            break
        counters[i] += 1
    if best_val is None:
        return None
    return best_val, best_strategy
