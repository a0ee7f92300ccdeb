"""Command-line front end: realize / solve-tree / synthesize / gis.

Exit codes: 0 success, 1 parse error, 2 unrealizable or infeasible,
3 resource cap exceeded.  All outputs are byte-deterministic for a fixed
configuration and seed.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .automata import AutomatonTooLarge, format_ucw, ucw_for_formula
from .complete import (
    complete_strategy,
    format_machine_graph,
    long_run_average,
    verify_realizes,
)
from .hardness import decode_selection, is_independent, parse_graph, reduce_gis
from .ltl import AtomTable, LtlError, parse_ltl, render_letter
from .machines import format_mealy, parse_reward_machine
from .optimize import (
    ProblemInstance,
    binary_search_optimal,
    emit_smtlib,
    encode,
    make_external_oracle,
    make_native_oracle,
    solve_native,
)
from .safety import find_minimal_K, format_antichain, initial_cf, solve_safety_game
from .sampling import (
    build_sample_tree,
    format_samples,
    parse_env_chain,
    parse_samples,
    render_input_letter,
    sample_env,
)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INFEASIBLE = 2
EXIT_RESOURCE = 3

DEFAULT_K_MAX = 8


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class ScenarioConfig:
    atoms_path: str
    formula_path: str
    reward_path: Optional[str] = None
    env_path: Optional[str] = None
    samples_path: Optional[str] = None
    k: Optional[int] = None
    n: int = 100
    length: int = 6
    seed: int = 0
    backend: str = "native"
    out_dir: str = "."
    smt_dump: bool = False

    def __post_init__(self):
        if self.k is not None and self.k < 0:
            raise CliError("K must be nonnegative", EXIT_PARSE)
        if self.n < 1 or self.length < 1:
            raise CliError("need n >= 1 and --len >= 1", EXIT_PARSE)


def parse_atoms_file(text: str) -> AtomTable:
    """Lines 'input NAME' and 'output NAME'."""
    inputs, outputs = [], []
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        parts = ln.split()
        if parts[0] == "input":
            inputs.append(parts[1])
        elif parts[0] == "output":
            outputs.append(parts[1])
        else:
            raise LtlError(f"bad atoms line: {ln!r}")
    return AtomTable(tuple(inputs), tuple(outputs))


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_PARSE) from exc


def _load_atoms_formula(cfg: ScenarioConfig):
    try:
        atoms = parse_atoms_file(_read(cfg.atoms_path))
        phi = parse_ltl(_read(cfg.formula_path).strip(), atoms)
    except LtlError as exc:
        raise CliError(f"parse error: {exc}", EXIT_PARSE) from exc
    return atoms, phi


def _realize(cfg: ScenarioConfig):
    atoms, phi = _load_atoms_formula(cfg)
    try:
        ucw = ucw_for_formula(phi, atoms)
    except AutomatonTooLarge as exc:
        raise CliError(str(exc), EXIT_RESOURCE) from exc
    if cfg.k is not None:
        win = solve_safety_game(ucw, cfg.k)
        if not win.contains(initial_cf(ucw, cfg.k)):
            raise CliError(f"not realizable with K = {cfg.k}", EXIT_INFEASIBLE)
        k = cfg.k
    else:
        found = find_minimal_K(ucw, DEFAULT_K_MAX)
        if found is None:
            raise CliError(f"not realizable for any K <= {DEFAULT_K_MAX}", EXIT_INFEASIBLE)
        k, win = found
    return atoms, phi, ucw, k, win


def cmd_realize(cfg: ScenarioConfig) -> int:
    atoms, _phi, ucw, k, win = _realize(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "automaton.aut").write_text(format_ucw(ucw, atoms))
    (out / "antichain.txt").write_text(format_antichain(win))
    summary = f"realizable: yes\nK: {k}\nstates: {ucw.n_states}\nantichain: {len(win)}\n"
    (out / "realize.txt").write_text(summary)
    print(summary, end="")
    return EXIT_OK


def _load_samples(cfg: ScenarioConfig, atoms: AtomTable):
    if (cfg.samples_path is None) == (cfg.env_path is None):
        raise CliError("exactly one of --samples and --env is required", EXIT_PARSE)
    if cfg.samples_path is not None:
        try:
            return parse_samples(_read(cfg.samples_path), atoms), None
        except (LtlError, ValueError) as exc:
            raise CliError(f"parse error: {exc}", EXIT_PARSE) from exc
    try:
        env = parse_env_chain(_read(cfg.env_path), atoms)
    except (LtlError, ValueError) as exc:
        raise CliError(f"parse error: {exc}", EXIT_PARSE) from exc
    return sample_env(env, cfg.n, cfg.length, cfg.seed), env


def _solve_tree(cfg: ScenarioConfig):
    atoms, phi, ucw, k, win = _realize(cfg)
    if cfg.reward_path is None:
        raise CliError("--reward is required", EXIT_PARSE)
    try:
        rm = parse_reward_machine(_read(cfg.reward_path), atoms)
        rm.validate_total(atoms.input_letters(), atoms.output_letters())
    except (LtlError, ValueError) as exc:
        raise CliError(f"parse error: {exc}", EXIT_PARSE) from exc
    multiset, env = _load_samples(cfg, atoms)
    tree = build_sample_tree(multiset, letter_order=list(atoms.input_letters()))
    inst = ProblemInstance(ucw, k, win, rm, tree)

    if cfg.backend in ("native", "smtlib-emit"):
        result = solve_native(inst)
    elif cfg.backend == "external" or cfg.backend.startswith("external:"):
        _, _, path = cfg.backend.partition(":")
        solver = path or os.environ.get("SOLVER_BIN", "")
        if not solver:
            raise CliError("external backend needs external:PATH or SOLVER_BIN", EXIT_PARSE)
        result = binary_search_optimal(inst, make_external_oracle(inst, solver))
    else:
        raise CliError(f"unknown backend {cfg.backend!r}", EXIT_PARSE)
    if result is None:
        raise CliError("no realizability-preserving strategy exists", EXIT_INFEASIBLE)
    value, strategy = result
    return atoms, ucw, k, win, rm, tree, env, inst, value, strategy


def _shorthand(atoms: AtomTable) -> bool:
    return tuple(atoms.inputs) == ("M1", "M2")


def _format_strategy(strategy, tree, atoms) -> str:
    lines = []
    short = _shorthand(atoms)
    for v in tree.nonroot_vertices():
        prefix = ";".join(render_input_letter(x, atoms, short) for x in v)
        lines.append(f"{prefix} -> {render_letter(atoms.outputs, strategy.choice[v])}")
    return "\n".join(lines) + "\n"


def _value_lines(value: int, tree) -> str:
    c = Fraction(value, tree.n)
    return f"n*C*: {value}\nC*: {c} ({float(c):.4f})\n"


def cmd_solve_tree(cfg: ScenarioConfig) -> int:
    atoms, _ucw, _k, _win, _rm, tree, _env, inst, value, strategy = _solve_tree(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "strategy.txt").write_text(_format_strategy(strategy, tree, atoms))
    (out / "samples-used.txt").write_text(
        format_samples(tree.to_multiset(), atoms, _shorthand(atoms))
    )
    summary = _value_lines(value, tree)
    (out / "solve.txt").write_text(summary)
    if cfg.smt_dump or cfg.backend == "smtlib-emit":
        (out / "instance.smt2").write_text(emit_smtlib(encode(inst, value)))
    print(summary, end="")
    return EXIT_OK


def cmd_synthesize(cfg: ScenarioConfig) -> int:
    atoms, ucw, k, win, rm, tree, env, inst, value, strategy = _solve_tree(cfg)
    machine = complete_strategy(strategy, tree, ucw, k, win, rm)
    verdict = verify_realizes(machine, ucw, k)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "machine.txt").write_text(format_mealy(machine, atoms))
    short = _shorthand(atoms)
    (out / "machine-graph.txt").write_text(
        format_machine_graph(
            machine,
            lambda i: render_input_letter(i, atoms, short),
            lambda o: render_letter(atoms.outputs, o),
        )
    )
    lines = _value_lines(value, tree)
    lines += f"machine states: {machine.n_states}\n"
    lines += f"realizes: {'yes' if verdict else 'no'}\n"
    if env is not None:
        payoff = long_run_average(machine, env, rm)
        lines += f"mean payoff: {payoff} ({float(payoff):.4f})\n"
    (out / "synthesize.txt").write_text(lines)
    print(lines, end="")
    return EXIT_OK if verdict else EXIT_INFEASIBLE


def cmd_gis(graph_path: str, kappa: int, out_dir: str) -> int:
    try:
        graph = parse_graph(_read(graph_path))
    except (ValueError, IndexError) as exc:
        raise CliError(f"parse error: {exc}", EXIT_PARSE) from exc
    inst, threshold = reduce_gis(graph, kappa)
    lo, hi = inst.reward_bounds()
    feasible_at_kappa = None
    if lo <= threshold <= hi:
        feasible_at_kappa = make_native_oracle(inst)(threshold) is not None
    elif threshold < lo:
        feasible_at_kappa = True
    else:
        feasible_at_kappa = False
    result = solve_native(inst)
    lines = []
    if result is None:
        lines.append("optimum: none (no feasible strategy)")
    else:
        value, strategy = result
        selection = decode_selection(graph, strategy)
        lines.append(f"feasible at threshold {kappa}: {'yes' if feasible_at_kappa else 'no'}")
        lines.append(f"optimum: {value}")
        lines.append("selection: " + " ".join(sorted(selection)))
        lines.append(f"independent: {'yes' if is_independent(graph, selection) else 'no'}")
    text = "\n".join(lines) + "\n"
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "gis.txt").write_text(text)
    print(text, end="")
    if result is None or not feasible_at_kappa:
        return EXIT_INFEASIBLE
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, with_solver: bool):
    p.add_argument("--atoms", required=True, help="atoms file: 'input NAME' / 'output NAME' lines")
    p.add_argument("--formula", required=True, help="hard-constraint formula file")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--k", type=int, default=None, help="explicit K bound")
    group.add_argument("--k-auto", action="store_true", help="search the minimal K (default)")
    p.add_argument("--out", default=".", help="output directory")
    if with_solver:
        p.add_argument("--reward", required=True, help="reward machine file")
        p.add_argument("--env", default=None, help="environment chain file (samples drawn)")
        p.add_argument("--samples", default=None, help="samples file (used as-is)")
        p.add_argument("--n", type=int, default=100, help="number of samples to draw")
        p.add_argument("--len", type=int, default=6, dest="length", help="sample length")
        p.add_argument("--seed", type=int, default=0, help="sampling seed")
        p.add_argument("--backend", default="native", help="native | smtlib-emit | external[:PATH]")
        p.add_argument("--smt-dump", action="store_true", help="write instance.smt2")


def _config(args: argparse.Namespace, with_solver: bool) -> ScenarioConfig:
    kwargs = dict(
        atoms_path=args.atoms,
        formula_path=args.formula,
        k=args.k,
        out_dir=args.out,
    )
    if with_solver:
        kwargs.update(
            reward_path=args.reward,
            env_path=args.env,
            samples_path=args.samples,
            n=args.n,
            length=args.length,
            seed=args.seed,
            backend=args.backend,
            smt_dump=args.smt_dump,
        )
    return ScenarioConfig(**kwargs)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="resyn")
    sub = parser.add_subparsers(dest="command", required=True)

    p_realize = sub.add_parser("realize", help="check bounded realizability, dump automaton and antichain")
    _add_common(p_realize, with_solver=False)

    p_solve = sub.add_parser("solve-tree", help="optimal realizability-preserving strategy on the sample tree")
    _add_common(p_solve, with_solver=True)

    p_synth = sub.add_parser("synthesize", help="solve the tree, complete the controller, evaluate it")
    _add_common(p_synth, with_solver=True)

    p_gis = sub.add_parser("gis", help="independent-set reduction benchmark")
    p_gis.add_argument("--graph", required=True, help="graph file: 'vertex NAME' / 'edge A B' lines")
    p_gis.add_argument("--kappa", type=int, required=True, help="target independent-set size")
    p_gis.add_argument("--out", default=".", help="output directory")

    args = parser.parse_args(argv)
    try:
        if args.command == "realize":
            return cmd_realize(_config(args, with_solver=False))
        if args.command == "solve-tree":
            return cmd_solve_tree(_config(args, with_solver=True))
        if args.command == "synthesize":
            return cmd_synthesize(_config(args, with_solver=True))
        return cmd_gis(args.graph, args.kappa, args.out)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except AutomatonTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
