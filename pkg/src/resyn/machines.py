"""Mealy machines, reward machines, partial strategies, and reward evaluation.

Rewards sit on reward-machine transitions: reading (input, output) from a
state yields that transition's reward and moves on.  The total reward of a finite interleaved word is the sum of the
rewards of the transitions it takes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .automata import UniversalCoBuchi
from .ltl import AtomTable, parse_letter, render_letter
from .safety import Antichain, cf_successor_idx, initial_cf
from .sampling import SampleTree, render_input_letter, _parse_input_letter


class MachineError(ValueError):
    pass


@dataclass(frozen=True)
class MealyMachine:
    """Deterministic transducer Sigma_I -> Sigma_O; pre-Mealy machines may leave holes."""

    n_states: int
    initial: int
    trans: dict  # (state, input letter) -> state
    out: dict  # (state, input letter) -> output letter

    def __post_init__(self):
        if set(self.trans) != set(self.out):
            raise MachineError("transition and output functions must share their domain")

    def is_complete(self, input_letters) -> bool:
        return all((m, i) in self.trans for m in range(self.n_states) for i in input_letters)

    def step(self, state: int, letter):
        key = (state, letter)
        if key not in self.trans:
            raise MachineError(f"partial machine: no move from state {state} on {letter!r}")
        return self.trans[key], self.out[key]


def mealy_outcome(machine: MealyMachine, inputs) -> tuple:
    """The unique word of the machine's finite language with this input projection."""
    state = machine.initial
    word = []
    for letter in inputs:
        state, output = machine.step(state, letter)
        word.append((letter, output))
    return tuple(word)


@dataclass(frozen=True)
class RewardMachine:
    """Total transducer over (Sigma_I x Sigma_O) with integer transition rewards."""

    n_states: int
    initial: int
    trans: dict  # (state, (input, output)) -> state
    reward: dict  # (state, (input, output)) -> int

    def __post_init__(self):
        if set(self.trans) != set(self.reward):
            raise MachineError("reward machine transition/reward domains differ")

    @property
    def r_min(self) -> int:
        return min(self.reward.values())

    @property
    def r_max(self) -> int:
        return max(self.reward.values())

    def validate_total(self, input_letters, output_letters):
        for s in range(self.n_states):
            for i in input_letters:
                for o in output_letters:
                    if (s, (i, o)) not in self.trans:
                        raise MachineError(f"reward machine not total: state {s} on {(i, o)!r}")

    def step(self, state: int, pair):
        return self.trans[(state, pair)], self.reward[(state, pair)]


def total_reward(machine: RewardMachine, word) -> int:
    """Sum of per-transition rewards along an interleaved (input, output) word."""
    state = machine.initial
    total = 0
    for pair in word:
        state, r = machine.step(state, tuple(pair))
        total += r
    return total


@dataclass(frozen=True)
class PartialStrategy:
    """One output letter per nonroot vertex of a sample tree."""

    choice: dict  # vertex prefix tuple -> output letter

    def output(self, vertex: tuple):
        if vertex not in self.choice:
            raise MachineError(f"strategy undefined on vertex {vertex!r}")
        return self.choice[vertex]


def check_strategy_domain(strategy: PartialStrategy, tree: SampleTree):
    dom = set(strategy.choice)
    expected = set(tree.nonroot_vertices())
    if dom != expected:
        raise MachineError("partial strategy must be defined on exactly the nonroot vertices")


def strategy_outcome(strategy: PartialStrategy, tree: SampleTree, branch: tuple) -> tuple:
    """Interleave the branch inputs with the strategy's outputs along the branch."""
    if len(branch) != tree.length or branch not in tree.count:
        raise MachineError("not a branch of this tree")
    word = []
    for i in range(1, len(branch) + 1):
        v = branch[:i]
        word.append((v[-1], strategy.output(v)))
    return tuple(word)


def expected_reward(machine: RewardMachine, tree: SampleTree, strategy: PartialStrategy) -> Fraction:
    """Branch-probability-weighted total reward; exact rational."""
    total = Fraction(0)
    for leaf in tree.branches():
        p = Fraction(tree.count[leaf], tree.n)
        total += p * total_reward(machine, strategy_outcome(strategy, tree, leaf))
    return total


def check_partial_realizable(
    strategy: PartialStrategy,
    tree: SampleTree,
    ucw: UniversalCoBuchi,
    k: int,
    win: Antichain,
) -> bool:
    """True iff every outcome prefix keeps the counting function inside the winning region."""
    start = initial_cf(ucw, k)
    if not win.contains(start):
        return False
    stack = [(tree.root, start)]
    while stack:
        v, cf = stack.pop()
        for u in tree.children[v]:
            o = strategy.output(u)
            li = ucw.alphabet.index(u[-1], o)
            nxt = cf_successor_idx(ucw, k, cf, li)
            if not win.contains(nxt):
                return False
            stack.append((u, nxt))
    return True


# ---------------------------------------------------------------------------
# Text formats


def format_mealy(machine: MealyMachine, atoms: AtomTable) -> str:
    lines = [f"state {machine.n_states}", f"initial {machine.initial}"]
    for (m, i), m2 in sorted(machine.trans.items(), key=lambda kv: (kv[0][0], _letter_key(kv[0][1]))):
        o = machine.out[(m, i)]
        lines.append(
            f"{m} {render_letter(atoms.inputs, i)} -> {m2} / {render_letter(atoms.outputs, o)}"
        )
    return "\n".join(lines) + "\n"


def parse_mealy(text: str, atoms: AtomTable) -> MealyMachine:
    n, init, trans, out = 0, 0, {}, {}
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if ln.startswith("state "):
            n = int(ln.split()[1])
        elif ln.startswith("initial "):
            init = int(ln.split()[1])
        else:
            head, _, tail = ln.partition("->")
            m_str, i_str = head.split(None, 1)
            dst_str, o_str = tail.split("/", 1)
            key = (int(m_str), parse_letter(atoms.inputs, i_str.strip()))
            trans[key] = int(dst_str)
            out[key] = parse_letter(atoms.outputs, o_str.strip())
    return MealyMachine(n, init, trans, out)


def format_reward_machine(machine: RewardMachine, atoms: AtomTable, shorthand: bool = False) -> str:
    lines = [f"state {machine.n_states}", f"initial {machine.initial}"]
    items = sorted(
        machine.trans.items(),
        key=lambda kv: (kv[0][0], _letter_key(kv[0][1][0]), _letter_key(kv[0][1][1])),
    )
    for (s, (i, o)), s2 in items:
        r = machine.reward[(s, (i, o))]
        i_txt = render_input_letter(i, atoms, shorthand)
        o_txt = render_letter(atoms.outputs, o)
        lines.append(f"{s} {i_txt} -> {s2} / {o_txt} / {r}")
    return "\n".join(lines) + "\n"


def parse_reward_machine(text: str, atoms: AtomTable) -> RewardMachine:
    n, init, trans, reward = 0, 0, {}, {}
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if ln.startswith("state "):
            n = int(ln.split()[1])
        elif ln.startswith("initial "):
            init = int(ln.split()[1])
        else:
            head, _, tail = ln.partition("->")
            s_str, i_str = head.split(None, 1)
            dst_str, o_str, r_str = tail.split("/")
            key = (int(s_str), (_parse_input_letter(i_str.strip(), atoms),
                                parse_letter(atoms.outputs, o_str.strip())))
            trans[key] = int(dst_str)
            reward[key] = int(r_str)
    return RewardMachine(n, init, trans, reward)


def _letter_key(letter):
    if isinstance(letter, frozenset):
        return (0, sorted(letter))
    return (1, str(letter))
