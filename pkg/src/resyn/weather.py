"""The packaged weather-monitoring scenario: atoms, hard constraints, reward machine,
environment chain, the printed example multiset, and a never-warn baseline controller.

Temperatures are clamped to [-1, 2] for observation and encoded over {M1, M2}:
2 = !M1 & !M2, 1 = M1 & !M2, 0 = !M1 & M2, -1 = M1 & M2.  The environment chain
tracks the raw temperature in [-2, 2] together with its current trend; a
trending state continues with probability 3/4, pauses with 1/8 and reverses
with 1/8, while a paused state moves down, stays, or moves up with probability
1/3 each.  Emitted letters observe the source state's temperature.
"""

from __future__ import annotations

from fractions import Fraction
from importlib import resources

from .ltl import AtomTable, parse_ltl
from .machines import MealyMachine, RewardMachine
from .sampling import EnvChain, SampleMultiset

T2 = frozenset()
T1 = frozenset({"M1"})
T0 = frozenset({"M2"})
TM1 = frozenset({"M1", "M2"})

OFF = frozenset()
WARN = frozenset({"Warn"})
ALARM = frozenset({"Alarm"})

TEMP = {2: T2, 1: T1, 0: T0, -1: TM1}

HARD_FORMULA_TEXT = (
    "G(M2 -> Alarm)"
    " & G(((!M1 & M2) & X !M2) -> X Alarm)"
    " & G((!M2 & X !M2) -> X !Alarm)"
    " & G(!Alarm | !Warn)"
)


def atom_table() -> AtomTable:
    return AtomTable(("M1", "M2"), ("Warn", "Alarm"))


def hard_formula():
    return parse_ltl(HARD_FORMULA_TEXT, atom_table())


def reward_machine() -> RewardMachine:
    """Penalize false warnings in hindsight; legitimate warnings are free.

    States: 0 quiet, 1 warning at temperature 1, 2 warning at temperature 2,
    3 alarm active.  Input/output pairs the hard constraints rule out never
    occur along feasible strategies; they are completed as zero-reward
    self-loops to keep the machine total.
    """
    edges = {
        (0, (T2, OFF)): (0, 0),
        (0, (T1, OFF)): (0, 0),
        (0, (T2, WARN)): (2, 0),
        (0, (T1, WARN)): (1, 0),
        (0, (T0, ALARM)): (3, -1),
        (0, (TM1, ALARM)): (3, -1),
        (1, (T1, WARN)): (1, 0),
        (1, (T2, WARN)): (2, -1),
        (1, (T2, OFF)): (0, -1),
        (1, (T1, OFF)): (0, -1),
        (1, (T0, ALARM)): (3, 0),
        (2, (T2, WARN)): (2, 0),
        (2, (T1, WARN)): (1, 0),
        (2, (T2, OFF)): (0, -1),
        (2, (T1, OFF)): (0, -1),
        (3, (T1, ALARM)): (3, 0),
        (3, (T0, ALARM)): (3, 0),
        (3, (TM1, ALARM)): (3, 0),
        (3, (T2, OFF)): (0, 0),
        (3, (T1, OFF)): (0, 0),
        (3, (T2, WARN)): (2, 0),
        (3, (T1, WARN)): (1, 0),
    }
    atoms = atom_table()
    trans, reward = {}, {}
    for s in range(4):
        for i in atoms.input_letters():
            for o in atoms.output_letters():
                dst, r = edges.get((s, (i, o)), (s, 0))
                trans[(s, (i, o))] = dst
                reward[(s, (i, o))] = r
    return RewardMachine(4, 0, trans, reward)


def example_multiset() -> SampleMultiset:
    """The bundled eight-sample multiset (n = 8, L = 4)."""
    seqs = {
        (2, 1, 0, -1): 2,
        (2, 1, 0, 0): 1,
        (2, 1, 2, 2): 1,
        (2, 2, 2, 2): 3,
        (2, 2, 1, 2): 1,
    }
    return SampleMultiset(4, {tuple(TEMP[t] for t in seq): c for seq, c in seqs.items()})


def short_example_multiset() -> SampleMultiset:
    """A length-3 variant of the example multiset without the shared first
    reading: four samples, first branching 3/4 vs 1/4."""
    seqs = {(1, 0, -1): 2, (1, 0, 0): 1, (1, 2, 2): 1}
    return SampleMultiset(3, {tuple(TEMP[t] for t in seq): c for seq, c in seqs.items()})


def env_chain() -> EnvChain:
    """The 15-state temperature chain (trend in {-1, 0, +1}, raw level in [-2, 2])."""
    p_green = Fraction(3, 4)
    p_blue = Fraction(1, 8)
    p_red = Fraction(1, 8)
    p_black = Fraction(1, 3)

    def clamp(t: int) -> int:
        return max(-2, min(2, t))

    def name(t: int, d: int) -> str:
        return f"t{t}d{d}"

    def obs(t: int):
        return TEMP[max(-1, min(2, t))]

    states = [name(t, d) for t in range(-2, 3) for d in (-1, 0, 1)]
    trans = {}
    for t in range(-2, 3):
        for d in (-1, 0, 1):
            letter = obs(t)
            if d == 0:
                rows = [
                    (p_black, name(clamp(t - 1), -1), letter),
                    (p_black, name(t, 0), letter),
                    (p_black, name(clamp(t + 1), 1), letter),
                ]
            else:
                rows = [
                    (p_green, name(clamp(t + d), d), letter),
                    (p_blue, name(t, 0), letter),
                    (p_red, name(clamp(t - d), -d), letter),
                ]
            trans[name(t, d)] = tuple(rows)
    return EnvChain(tuple(states), ((Fraction(1), name(2, 0)),), trans)


def baseline_never_warn() -> MealyMachine:
    """Hard-constraint-compliant controller that never warns.

    State 1 remembers "previous temperature was exactly 0", where the alarm
    must be held one more step even if the temperature rises.
    """
    trans, out = {}, {}
    for state in (0, 1):
        for i in (T2, T1, T0, TM1):
            if i == T0:
                nxt = 1
            else:
                nxt = 0
            alarm = ("M2" in i) or state == 1
            trans[(state, i)] = nxt
            out[(state, i)] = ALARM if alarm else OFF
    return MealyMachine(2, 0, trans, out)


def load_data(filename: str) -> str:
    return resources.files("resyn.data.weather").joinpath(filename).read_text()
