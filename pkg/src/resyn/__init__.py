"""Reactive controller synthesis: hard LTL constraints with certainty, soft rewards in expectation.

Pipeline: parse the hard constraints, build a universal coBuchi automaton for
them, solve the K-bounded safety game by antichains, annotate a sample tree
of environment inputs with reward-optimal realizability-preserving outputs,
complete the annotation into a Mealy machine, and evaluate it by exact mean
payoff against an environment chain.
"""

from .automata import (
    Alphabet,
    AutomatonTooLarge,
    Nbw,
    UniversalCoBuchi,
    dualize,
    ltl_to_nbw,
    nbw_accepts_lasso,
    ucw_accepts_lasso,
    ucw_for_formula,
)
from .complete import (
    complete_strategy,
    long_run_average,
    minimize_mealy,
    simulate_average,
    verify_realizes,
)
from .hardness import Graph, expected_win_antichain, reduce_gis
from .ltl import AtomTable, LassoTrace, evaluate_on_lasso, parse_ltl, pretty, to_nnf
from .machines import (
    MealyMachine,
    PartialStrategy,
    RewardMachine,
    check_partial_realizable,
    expected_reward,
    mealy_outcome,
    strategy_outcome,
    total_reward,
)
from .optimize import (
    ProblemInstance,
    binary_search_optimal,
    brute_force_oracle,
    emit_smtlib,
    encode,
    make_native_oracle,
    solve_native,
)
from .safety import (
    Antichain,
    cf_successor,
    find_minimal_K,
    initial_cf,
    is_winning,
    solve_safety_game,
)
from .sampling import EnvChain, SampleMultiset, SampleTree, build_sample_tree, branch_probability, sample_env

__version__ = "0.1.0"
