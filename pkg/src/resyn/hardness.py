"""Graph-independent-set reduction: an unbounded family of self-checking benchmarks.

A graph maps to a strategy-optimization instance whose inputs are the vertices
in order, whose outputs are {select, skip}, and whose automaton sends any run
that sees both endpoints of an edge selected into an absorbing rejecting
state.  A single-state reward machine pays 1 per selection, so the optimum is
the maximum independent set size.
"""

from __future__ import annotations

from dataclasses import dataclass

from .automata import Alphabet, UniversalCoBuchi
from .machines import RewardMachine
from .optimize import ProblemInstance
from .safety import Antichain, solve_safety_game
from .sampling import SampleMultiset, build_sample_tree


@dataclass(frozen=True)
class Graph:
    vertices: tuple[str, ...]
    edges: frozenset  # frozensets {u, v}

    def __post_init__(self):
        if len(set(self.vertices)) != len(self.vertices):
            raise ValueError("duplicate vertex names")
        for e in self.edges:
            if len(e) != 2:
                raise ValueError("edges are unordered pairs of distinct vertices")
            if not e <= set(self.vertices):
                raise ValueError("edge references unknown vertex")


def ordered_edges(g: Graph) -> list[tuple[str, str]]:
    rank = {u: i for i, u in enumerate(g.vertices)}
    return sorted((tuple(sorted(e, key=rank.get)) for e in g.edges), key=lambda e: (rank[e[0]], rank[e[1]]))


SELECT = "1"
SKIP = "0"


def gis_automaton(g: Graph, literal_skip_reading: bool = False) -> UniversalCoBuchi:
    """Two watcher states per edge plus the absorbing rejecting state.

    On skip every watcher stays put.  ``literal_skip_reading`` reverts the
    armed watcher's skip move to the base state, which breaks the reduction's
    soundness and exists only so tests can demonstrate that.
    """
    edges = ordered_edges(g)
    alphabet = Alphabet(tuple(g.vertices), (SKIP, SELECT))
    n = 2 * len(edges) + 1
    bot = n - 1
    delta = [[() for _ in range(len(alphabet))] for _ in range(n)]
    labels = []
    for ei, (a, b) in enumerate(edges):
        base, armed = 2 * ei, 2 * ei + 1
        labels += [f"q_{a}_{b}", f"q'_{a}_{b}"]
        for vi, u in enumerate(g.vertices):
            skip_li = alphabet.index(u, SKIP)
            sel_li = alphabet.index(u, SELECT)
            delta[base][skip_li] = (base,)
            delta[base][sel_li] = (armed,) if u == a else (base,)
            delta[armed][skip_li] = (base,) if literal_skip_reading else (armed,)
            delta[armed][sel_li] = (bot,) if u == b else (armed,)
    labels.append("bot")
    for u in g.vertices:
        delta[bot][alphabet.index(u, SKIP)] = (bot,)
        delta[bot][alphabet.index(u, SELECT)] = (bot,)
    return UniversalCoBuchi(
        alphabet=alphabet,
        n_states=n,
        initial=frozenset(2 * ei for ei in range(len(edges))),
        final=frozenset([bot]),
        delta=tuple(tuple(row) for row in delta),
        labels=tuple(labels),
    )


def gis_reward_machine(g: Graph) -> RewardMachine:
    trans, reward = {}, {}
    for u in g.vertices:
        for o, r in ((SKIP, 0), (SELECT, 1)):
            trans[(0, (u, o))] = 0
            reward[(0, (u, o))] = r
    return RewardMachine(1, 0, trans, reward)


def expected_win_antichain(g: Graph) -> Antichain:
    """The singleton {f*}: inactive at the rejecting state, zero elsewhere."""
    n = 2 * len(g.edges) + 1
    f_star = tuple([0] * (n - 1) + [-1])
    return Antichain((f_star,), 0)


def reduce_gis(g: Graph, kappa: int) -> tuple[ProblemInstance, int]:
    """Instance plus threshold kappa; satisfiable iff an independent set of size kappa exists."""
    ucw = gis_automaton(g)
    win = solve_safety_game(ucw, 0)
    rm = gis_reward_machine(g)
    sample = SampleMultiset(len(g.vertices), {tuple(g.vertices): 1})
    tree = build_sample_tree(sample, letter_order=list(g.vertices))
    return ProblemInstance(ucw, 0, win, rm, tree), kappa


def decode_selection(g: Graph, strategy) -> set[str]:
    chosen = set()
    for v, o in strategy.choice.items():
        if o == SELECT:
            chosen.add(v[-1])
    return chosen


def is_independent(g: Graph, selection: set) -> bool:
    return not any(e <= selection for e in g.edges)


def parse_graph(text: str) -> Graph:
    """Lines 'vertex NAME' and 'edge A B'."""
    vertices: list[str] = []
    edges = set()
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        parts = ln.split()
        if parts[0] == "vertex":
            vertices.append(parts[1])
        elif parts[0] == "edge":
            a, b = parts[1], parts[2]
            if a == b:
                raise ValueError("self-loops are not allowed")
            edges.add(frozenset((a, b)))
        else:
            raise ValueError(f"bad graph line: {ln!r}")
    return Graph(tuple(vertices), frozenset(edges))


def format_graph(g: Graph) -> str:
    lines = [f"vertex {u}" for u in g.vertices]
    lines += [f"edge {a} {b}" for a, b in ordered_edges(g)]
    return "\n".join(lines) + "\n"
