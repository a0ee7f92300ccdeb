import random
from fractions import Fraction

import pytest

from resyn import weather
from resyn.ltl import AtomTable
from resyn.sampling import (
    EnvChain,
    SampleMultiset,
    branch_probability,
    build_sample_tree,
    format_env_chain,
    format_samples,
    parse_env_chain,
    parse_samples,
    sample_env,
)

ATOMS = weather.atom_table()
T2, T1, T0, TM1 = weather.T2, weather.T1, weather.T0, weather.TM1


def seq(*temps):
    return tuple(weather.TEMP[t] for t in temps)


class TestBuildSampleTree:
    def test_single_sample_all_edges_probability_one(self):
        tree = build_sample_tree(SampleMultiset(2, {("a", "b"): 1}))
        assert len(tree.nonroot_vertices()) == 2
        assert set(tree.edge_prob.values()) == {Fraction(1)}

    def test_example_multiset_probabilities(self):
        tree = build_sample_tree(weather.example_multiset())
        p = tree.edge_prob
        assert p[((), seq(2))] == 1
        assert p[(seq(2), seq(2, 1))] == Fraction(1, 2)
        assert p[(seq(2, 1), seq(2, 1, 0))] == Fraction(3, 4)
        assert p[(seq(2, 1, 0), seq(2, 1, 0, -1))] == Fraction(2, 3)

    def test_branch_probabilities_sum_to_one(self):
        rng = random.Random(0)
        for _ in range(30):
            length = rng.randint(1, 4)
            counts = {}
            for _ in range(rng.randint(1, 6)):
                s = tuple(rng.choice("xyz") for _ in range(length))
                counts[s] = counts.get(s, 0) + rng.randint(1, 3)
            tree = build_sample_tree(SampleMultiset(length, counts))
            assert sum(branch_probability(tree, b) for b in tree.branches()) == 1

    def test_edge_probabilities_sum_to_one_at_internal_vertices(self):
        tree = build_sample_tree(weather.example_multiset())
        for v in tree.vertices():
            kids = tree.children[v]
            if kids:
                assert sum(tree.edge_prob[(v, u)] for u in kids) == 1

    def test_fq_monotone_and_root_is_n(self):
        tree = build_sample_tree(weather.example_multiset())
        assert tree.count[()] == tree.n == 8
        for (v, u), _ in tree.edge_prob.items():
            assert tree.count[u] <= tree.count[v]

    def test_rebuild_multiset(self):
        ms = weather.example_multiset()
        assert build_sample_tree(ms).to_multiset().counts == ms.counts


class TestBranchProbability:
    def test_example_values(self):
        tree = build_sample_tree(weather.example_multiset())
        assert branch_probability(tree, seq(2, 2, 2, 2)) == Fraction(3, 8)
        assert branch_probability(tree, seq(2, 1, 0, -1)) == Fraction(1, 4)
        assert branch_probability(tree, seq(2, 1, 0, -1)) == Fraction(
            tree.count[seq(2, 1, 0, -1)], tree.n
        )

    def test_not_a_branch(self):
        tree = build_sample_tree(weather.example_multiset())
        with pytest.raises(ValueError):
            branch_probability(tree, seq(2, 1))
        with pytest.raises(ValueError):
            branch_probability(tree, seq(1, 1, 1, 1))


class TestMultisetValidation:
    def test_ragged_lengths_rejected(self):
        with pytest.raises(ValueError):
            SampleMultiset(2, {("a",): 1})

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            SampleMultiset(2, {})


class TestSampleEnv:
    def test_deterministic_chain_yields_identical_samples(self):
        env = EnvChain(
            ("s",),
            ((Fraction(1), "s"),),
            {"s": ((Fraction(1), "s", T2),)},
        )
        ms = sample_env(env, 5, 3, seed=1)
        assert ms.counts == {(T2, T2, T2): 5}

    def test_fair_coin_concentration(self):
        env = EnvChain(
            ("s",),
            ((Fraction(1), "s"),),
            {"s": ((Fraction(1, 2), "s", T2), (Fraction(1, 2), "s", T1))},
        )
        ms = sample_env(env, 10_000, 1, seed=99)
        freq = ms.counts.get((T2,), 0) / 10_000
        assert abs(freq - 0.5) < 0.03

    def test_same_seed_same_multiset(self):
        env = weather.env_chain()
        assert sample_env(env, 50, 4, seed=7).counts == sample_env(env, 50, 4, seed=7).counts

    def test_weather_samples_start_at_two(self):
        ms = sample_env(weather.env_chain(), 40, 3, seed=5)
        assert all(s[0] == T2 for s in ms.counts)

    def test_steps_change_temperature_by_at_most_one(self):
        ms = sample_env(weather.env_chain(), 60, 6, seed=11)
        level = {T2: 2, T1: 1, T0: 0, TM1: -1}
        for s in ms.counts:
            for a, b in zip(s, s[1:]):
                assert abs(level[a] - level[b]) <= 1


class TestFileFormats:
    def test_samples_roundtrip_shorthand(self):
        ms = weather.example_multiset()
        text = format_samples(ms, ATOMS, shorthand=True)
        assert "2: 2;1;0;-1" in text
        assert parse_samples(text, ATOMS).counts == ms.counts

    def test_samples_roundtrip_signed_atoms(self):
        ms = weather.example_multiset()
        text = format_samples(ms, ATOMS, shorthand=False)
        assert "!M1,!M2" in text
        assert parse_samples(text, ATOMS).counts == ms.counts

    def test_env_roundtrip(self):
        env = weather.env_chain()
        text = format_env_chain(env, ATOMS, shorthand=True)
        back = parse_env_chain(text, ATOMS)
        assert back.states == env.states
        assert back.init == env.init
        assert back.trans == env.trans

    def test_env_probabilities_validated(self):
        with pytest.raises(ValueError):
            EnvChain(("s",), ((Fraction(1), "s"),), {"s": ((Fraction(1, 2), "s", T2),)})

    def test_temperature_shorthand_requires_weather_atoms(self):
        with pytest.raises(ValueError):
            parse_samples("1: 2;2", AtomTable(("x", "y"), ()))
