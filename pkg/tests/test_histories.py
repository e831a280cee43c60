"""Tests for the branch tree, the decoherence functional and path tracing."""

import math

import numpy as np
import pytest

from src.errors import DimensionError, EmptyStart, PreconditionViolated
from src.experiment import HARDY_CAUSAL, HARDY_SETUP, logical_worlds
from src.formula import Atom, parse
from src.histories import (
    ChoicePolicy, History, HistoryFamily, build_family, check_consistency, decoherence_functional,
    history_verdicts, injected_family, natural_family, policy_independent, trace_line5,
    trace_pivot_path, verify_5_4_contradiction, verify_histories_line5,
)
from src.proofcheck import line5_constraint_forced
from src.quantum import build_hardy_model
from src.report import Status
from src.semantics import build_model

PARADOX = (5 * math.sqrt(5) - 11) / 2
R1, R2 = Atom('R', 1), Atom('R', 2)


@pytest.fixture(scope='module')
def quantum_model():
    return build_hardy_model('preset-optimal')


@pytest.fixture
def tree(hardy_model):
    return build_family(hardy_model)


def perturbed(table, *entries):
    for text, value in entries:
        table = table.with_entry(HARDY_SETUP.parse_world(text), value)
    return build_model(HARDY_SETUP, HARDY_CAUSAL, table)


def labels(leaves):
    return [HARDY_SETUP.format_world(leaf.world) for leaf in leaves]


class TestChoicePolicy:

    def test_uniform(self):
        assert ChoicePolicy.uniform(HARDY_SETUP).weights == ((0.5, 0.5), (0.5, 0.5))

    def test_not_a_distribution(self):
        with pytest.raises(PreconditionViolated):
            ChoicePolicy(((0.7, 0.7), (0.5, 0.5)))

    def test_random_has_full_support(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            policy = ChoicePolicy.random(HARDY_SETUP, rng)
            assert all(w > 0 for per_region in policy.weights for w in per_region)


class TestBuildFamily:

    def test_level_sizes(self, tree):
        assert [len(tree.level(d)) for d in (1, 2, 3)] == [4, 8, 16]

    def test_excluded_leaves(self, tree):
        assert sum(leaf.weight <= 1e-9 for leaf in tree.leaves()) == 3

    def test_total_weight(self, tree):
        assert sum(leaf.weight for leaf in tree.leaves()) == pytest.approx(1.0, abs=1e-12)

    def test_leaves_reproduce_table(self, tree, hardy_table):
        for leaf in tree.leaves():
            assert leaf.weight == pytest.approx(0.25 * hardy_table[leaf.world], abs=1e-12)

    def test_children_sum_to_parent(self, tree):
        for depth in (0, 1, 2):
            for node in tree.level(depth):
                assert sum(c.weight for c in node.children) == pytest.approx(node.weight, abs=1e-12)

    def test_degenerate_policy(self, hardy_model):
        tree = build_family(hardy_model, ChoicePolicy(((1.0, 0.0), (1.0, 0.0))))
        for leaf in tree.leaves():
            if leaf.world.choices != (0, 0):
                assert leaf.weight == 0.0
        assert sum(leaf.weight for leaf in tree.leaves()) == pytest.approx(1.0)

    def test_render_and_frame(self, tree):
        text = tree.render()
        assert text.splitlines()[0].startswith('L1+')
        assert '    R1-' in text
        frame = tree.leaf_frame()
        assert len(frame) == 16
        assert frame['weight'].sum() == pytest.approx(1.0)
        assert frame['possible'].sum() == 13


class TestConsistency:

    def test_natural_family(self, quantum_model):
        family = natural_family(quantum_model.state, quantum_model.measurements, HARDY_SETUP)
        assert check_consistency(family) <= 1e-10

    def test_diagonal_is_probability(self, quantum_model, hardy_table):
        family = natural_family(quantum_model.state, quantum_model.measurements, HARDY_SETUP)
        for histories in family.groups().values():
            d = decoherence_functional(family.rho, histories)
            for h, value in zip(histories, np.diag(d).real):
                world = HARDY_SETUP.parse_world(
                    f"({h.labels[0][:2]},{h.labels[0][2]},{h.labels[1][:2]},{h.labels[1][2]})")
                assert value == pytest.approx(hardy_table[world], abs=1e-12)

    def test_injected_family_is_inconsistent(self, quantum_model):
        family = injected_family(quantum_model.state, quantum_model.measurements, HARDY_SETUP)
        assert check_consistency(family) > 0.01

    def test_dimension_mismatch(self, quantum_model):
        bad = History((0, 0), ('L1+',), (np.eye(2, dtype=complex),))
        with pytest.raises(DimensionError):
            check_consistency(HistoryFamily(quantum_model.state.density(), (bad,)))


class TestTracePivotPath:

    def test_line_5_path(self, tree):
        reached = trace_pivot_path(tree, parse("L2 & R2 & R2+"), 'R', R1)
        assert labels(reached) == ["(L2,+,R1,-)"]

    def test_own_choice_returns_siblings(self, tree):
        reached = trace_pivot_path(tree, parse("L2 & L2+ & R2 & R2-"), 'R', R2)
        assert labels(reached) == ["(L2,+,R2,+)", "(L2,+,R2,-)"]

    def test_paradox_path(self, tree):
        reached = trace_pivot_path(tree, parse("L1 & R2 & L1-"), 'R', R1)
        assert labels(reached) == ["(L1,-,R1,+)", "(L1,-,R1,-)"]

    def test_prefix_preserved(self, tree):
        start = parse("R2")
        reached = trace_pivot_path(tree, start, 'R', R1)
        start_prefixes = {leaf.ancestor(1).atom for leaf in tree.leaves()
                          if tree.possible(leaf) and leaf.world.choices[1] == 1}
        assert {leaf.ancestor(1).atom for leaf in reached} <= start_prefixes

    def test_empty_start(self, tree):
        with pytest.raises(EmptyStart):
            trace_pivot_path(tree, parse("L1 & L1- & R2 & R2-"), 'R', R1)


class TestLine5:

    def test_hardy(self, tree):
        trace = trace_line5(tree)
        assert trace.forced and trace.start_in_l2_plus
        assert verify_histories_line5(tree)

    def test_lifted_3_2_zero(self, hardy_table):
        assert not verify_histories_line5(build_family(perturbed(hardy_table, ("(L2,+,R1,+)", 0.05))))

    def test_lifted_3_1_zero(self, hardy_table):
        trace = trace_line5(build_family(perturbed(hardy_table, ("(L2,-,R2,+)", 0.05))))
        assert not trace.start_in_l2_plus

    def test_agrees_with_world_semantics(self, hardy_table):
        rng = np.random.default_rng(42)
        worlds = list(logical_worlds(HARDY_SETUP))
        for _ in range(50):
            table = hardy_table
            for text in ("(L2,-,R2,+)", "(L2,+,R1,+)", "(L1,-,R2,-)"):
                if rng.random() < 0.4:
                    table = table.with_entry(HARDY_SETUP.parse_world(text), rng.uniform(0.01, 0.1))
            # occasionally drop a positive entry as well
            if rng.random() < 0.3:
                w = worlds[int(rng.integers(len(worlds)))]
                if w.choices != (0, 0) and table[w] > 0.2:
                    table = table.with_entry(w, 0.0)
            m = build_model(HARDY_SETUP, HARDY_CAUSAL, table)
            policy = ChoicePolicy.random(HARDY_SETUP, rng)
            assert verify_histories_line5(build_family(m, policy)) == line5_constraint_forced(m)


class TestContradiction54:

    def test_reproduced(self, tree):
        trace = verify_5_4_contradiction(tree)
        assert trace.verdict == 'CONTRADICTION-REPRODUCED'
        assert trace.start_in_r2_plus
        (leaf,) = trace.paradox_leaves
        assert leaf.weight == pytest.approx(0.25 * PARADOX, abs=1e-9)
        assert leaf.weight > 1e-3

    def test_paradox_free(self, hardy_table):
        tree = build_family(perturbed(hardy_table, ("(L1,-,R1,+)", 0.0)))
        assert verify_5_4_contradiction(tree).verdict == 'NOT-REPRODUCED'

    def test_policy_independent(self, hardy_model):
        verdict = policy_independent(hardy_model, np.random.default_rng(0))
        assert verdict.status == Status.PASS

    def test_verdicts(self, tree):
        verdicts = history_verdicts(tree)
        assert [v.check_id for v in verdicts] == [
            'histories.tree', 'histories.line5', 'histories.line5-start', 'histories.5.4']
        assert all(v.status == Status.PASS for v in verdicts)
