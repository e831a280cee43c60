"""Tests for proof replay, LOC2 and the accessibility constraint search."""

from collections import Counter

import numpy as np
import pytest

from src.errors import BadIndex, CapacityError, ConfigInvalid, SearchIncomplete, ShapeMismatch
from src.experiment import HARDY_CAUSAL, HARDY_SETUP, WorldSet, atom_truth
from src.formula import Atom, parse
from src.proofcheck import (
    BUILTIN_SCRIPT, CONSTRAINTS, ProofScript, Rule, candidate_count, check_appendix_line12,
    check_line, enumerate_candidates, find_witness, lemma_partners,
    line5_constraint_forced, loc2_transform, merge_results, parse_justification,
    parse_script_line, run_script, script_report, search_constraints, verify_contradiction,
    violation_at,
)
from src.report import Status
from src.semantics import build_model, extension, holds

LINE_5 = parse(BUILTIN_SCRIPT[4].rsplit('[', 1)[0])
R1 = Atom('R', 1)


def replace_line(index, text):
    lines = list(BUILTIN_SCRIPT)
    lines[index - 1] = text
    return ProofScript.from_lines('edited', lines)


def perturbed(table, world_text, value):
    return build_model(HARDY_SETUP, HARDY_CAUSAL,
                       table.with_entry(HARDY_SETUP.parse_world(world_text), value))


@pytest.fixture(scope='module')
def script():
    return ProofScript.builtin(HARDY_SETUP)


class TestJustification:

    def test_lemma_tags(self):
        assert parse_justification('LOC1e, 2.1').rules == (Rule.LOC1E, Rule.EQ2_1)

    def test_from(self):
        (tag,) = parse_justification('From 1, 2, 3').tags
        assert tag.rule == Rule.FROM and tag.lines == (1, 2, 3)

    def test_prediction(self):
        (tag,) = parse_justification('3.2').tags
        assert tag.rule == Rule.QM and tag.eq_id == '3.2'

    def test_parenthesised(self):
        assert parse_justification('(LOC1f)').rules == (Rule.LOC1F,)

    def test_unknown_tag(self):
        with pytest.raises(ConfigInvalid, match="LOC9"):
            parse_justification('LOC9')

    def test_formula_brackets_are_not_tags(self):
        formula, justification = parse_script_line(BUILTIN_SCRIPT[0])
        assert formula == parse("(L2 & R2 & L2+) => (R1 []-> (L2 & R1 & L2+))")
        assert justification.rules == (Rule.LOC1C,)

    def test_missing_tag(self):
        with pytest.raises(ConfigInvalid, match="justification"):
            parse_script_line("L1 => R1")


class TestProofScript:

    def test_builtin(self, script):
        assert len(script.lines) == 14
        assert str(script.line(4).justification) == 'From 1, 2, 3'

    def test_forward_citation(self):
        with pytest.raises(ConfigInvalid, match="not earlier"):
            replace_line(4, "(L2 & R2 & R2+) => (R1 []-> (L2 & R1 & R1-)) [From 1, 5]")

    def test_nested_strict(self):
        with pytest.raises(ConfigInvalid, match="strict"):
            replace_line(2, "L2 => (R2 => L2+) [3.1]")

    def test_bad_index(self, hardy_model, script):
        with pytest.raises(BadIndex):
            check_line(hardy_model, script, 15)

    def test_from_file(self, tmp_path):
        path = tmp_path / 'proof.txt'
        path.write_text("# two lines\n\n" + BUILTIN_SCRIPT[1] + "\n"
                        + BUILTIN_SCRIPT[2] + "  # cites 3.2\n", encoding='utf-8')
        loaded = ProofScript.from_file(path, HARDY_SETUP)
        assert [line.index for line in loaded.lines] == [1, 2]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigInvalid, match="Cannot read"):
            ProofScript.from_file(tmp_path / 'missing.txt')


class TestCheckLine:

    @pytest.mark.parametrize('idx', [1, 2, 3, 4, 5, 8, 10, 11])
    def test_valid_steps(self, hardy_model, script, idx):
        assert check_line(hardy_model, script, idx).status == Status.PASS

    @pytest.mark.parametrize('idx', [7, 9, 14])
    def test_vacuous_entailments(self, hardy_model, script, idx):
        verdict = check_line(hardy_model, script, idx)
        assert verdict.status == Status.PASS
        assert verdict.detail == 'vacuous'

    def test_loc1f_from_false_premise(self, hardy_model, script):
        verdict = check_line(hardy_model, script, 13)
        assert verdict.status == Status.PASS
        assert verdict.detail == 'premise false in model'

    def test_loc2_is_flagged(self, hardy_model, script):
        verdict = check_line(hardy_model, script, 6)
        assert verdict.status == Status.FLAG
        assert verdict.detail == 'assumption-injected'

    def test_line_12_literal_reading_fails(self, hardy_model, script):
        verdict = check_line(hardy_model, script, 12)
        assert verdict.status == Status.FAIL
        assert verdict.contested
        assert HARDY_SETUP.format_world(verdict.witness) == "(L1,+,R1,+)"

    def test_wrong_citation(self, hardy_model):
        edited = replace_line(2, "(L2 & R2 & R2+) => (L2 & R2 & L2+) [3.3]")
        verdict = check_line(hardy_model, edited, 2)
        assert verdict.status == Status.FAIL
        assert not verdict.contested

    def test_tags_out_of_order(self, hardy_model):
        edited = replace_line(5, "L2 => ((R2 & R2+) -> (R1 []-> (R1 & R1-))) [2.1, LOC1e]")
        assert check_line(hardy_model, edited, 5).status == Status.FAIL

    def test_loc1c_needs_localized_conjuncts(self, hardy_model):
        edited = replace_line(1, "(L2 & R2 & L2+) => (R1 []-> (R2 & R1 & L2+)) [LOC1c]")
        verdict = check_line(hardy_model, edited, 1)
        assert verdict.status == Status.FAIL
        assert 'R2' in verdict.detail

    def test_uniform_model(self, uniform_model, script):
        failing = [i for i in range(1, 15)
                   if check_line(uniform_model, script, i).status == Status.FAIL
                   and not check_line(uniform_model, script, i).contested]
        assert {2, 3, 8} <= set(failing)


class TestLemmaPartners:

    def test_line_4_to_line_5(self, script):
        step = lemma_partners(script.line(4).formula, Rule.LOC1E)
        targets = {f for p, _ in step for f, _ in lemma_partners(p, Rule.EQ2_1)}
        assert script.line(5).formula in targets

    def test_line_9_to_line_10(self, script):
        partners = [f for f, _ in lemma_partners(script.line(9).formula, Rule.EQ2_1)]
        assert script.line(10).formula in partners

    def test_loc1f_needs_choice_antecedent(self):
        assert lemma_partners(parse("L1 => (R1- -> L1-)"), Rule.LOC1F) == []


class TestLoc2:

    def test_line_5_to_line_6(self, script):
        assert loc2_transform(script.line(5).formula) == script.line(6).formula

    def test_regions_swapped(self):
        f = parse("R2 => ((L2 & L2+) -> (L1 []-> (L1 & L1-)))")
        assert loc2_transform(f) == parse("R1 => ((L2 & L2+) -> (L1 []-> (L1 & L1-)))")

    def test_not_idempotent(self, script):
        with pytest.raises(ShapeMismatch):
            loc2_transform(loc2_transform(script.line(5).formula))

    def test_wrong_shape(self):
        with pytest.raises(ShapeMismatch):
            loc2_transform(parse("(L2 & R2) => R1"))


class TestLine5Constraint:

    def test_hardy(self, hardy_model):
        assert line5_constraint_forced(hardy_model)

    def test_lifted_3_2_zero(self, hardy_table):
        assert not line5_constraint_forced(perturbed(hardy_table, "(L2,+,R1,+)", 0.05))

    def test_vacuous_without_start_worlds(self, hardy_table):
        table = hardy_table.with_entry(HARDY_SETUP.parse_world("(L2,+,R1,+)"), 0.05)
        m = perturbed(table, "(L2,+,R2,+)", 0.0)
        assert not extension(m, parse("L2 & R2 & R2+"))
        assert line5_constraint_forced(m)

    def test_random_perturbations(self, hardy_table):
        rng = np.random.default_rng(7)
        for _ in range(50):
            table = hardy_table
            lifted = set()
            for eq_id, text in (('3.1', "(L2,-,R2,+)"), ('3.2', "(L2,+,R1,+)"), ('3.3', "(L1,-,R2,-)")):
                if rng.random() < 0.5:
                    table = table.with_entry(HARDY_SETUP.parse_world(text), rng.uniform(0.01, 0.1))
                    lifted.add(eq_id)
            m = build_model(HARDY_SETUP, HARDY_CAUSAL, table)
            forced = line5_constraint_forced(m)
            assert forced == holds(m, LINE_5)
            assert forced == (not lifted & {'3.1', '3.2'})


class TestAppendixLine12:

    def test_hardy(self, hardy_model):
        analysis = check_appendix_line12(hardy_model)
        assert len(analysis.paradox_set) == 1
        assert analysis.paradox_set == analysis.complement_set
        statuses = {v.check_id: v.status for v in analysis.verdicts(HARDY_SETUP)}
        assert statuses == {'appendix.A.21': Status.PASS, 'appendix.A.20': Status.PASS,
                            'appendix.A.19': Status.FLAG}
        assert HARDY_SETUP.format_world(next(iter(analysis.claimed_empty))) == "(L1,+,R1,+)"

    def test_paradox_zeroed(self, hardy_table):
        m = perturbed(hardy_table, "(L1,-,R1,+)", 0.0)
        analysis = check_appendix_line12(m)
        assert not analysis.paradox_set


class TestCandidates:

    def test_count(self, hardy_model):
        assert candidate_count(hardy_model) == 81
        assert len(list(enumerate_candidates(hardy_model))) == 81

    def test_every_successor_set_nonempty(self, hardy_model):
        for candidate in enumerate_candidates(hardy_model):
            assert len(candidate.successors) == 6
            assert all(successors for _, successors in candidate.successors)

    def test_single_r2_world(self, hardy_model, world):
        keep = WorldSet.of(HARDY_SETUP, (w for w in hardy_model.phys
                                         if atom_truth(HARDY_SETUP, w, R1) or w == world("(L1,-,R2,+)")))
        m = hardy_model.relaxed(keep)
        candidates = list(enumerate_candidates(m))
        assert candidate_count(m) == 3 == len(candidates)
        successor_sets = {frozenset(HARDY_SETUP.format_world(v) for v in c.of(world("(L1,-,R2,+)")))
                          for c in candidates}
        assert successor_sets == {frozenset({"(L1,-,R1,-)"}), frozenset({"(L1,-,R1,+)"}),
                                  frozenset({"(L1,-,R1,+)", "(L1,-,R1,-)"})}

    def test_no_r2_worlds(self, hardy_model):
        m = hardy_model.relaxed(WorldSet.of(HARDY_SETUP, (w for w in hardy_model.phys
                                                          if atom_truth(HARDY_SETUP, w, R1))))
        (candidate,) = enumerate_candidates(m)
        assert candidate_count(m) == 1
        assert candidate.index == 0 and candidate.successors == ()

    def test_slices(self, hardy_model):
        indices = [c.index for c in enumerate_candidates(hardy_model, 10, 20)]
        assert indices == list(range(10, 20))

    def test_capacity(self, hardy_model):
        with pytest.raises(CapacityError):
            list(enumerate_candidates(hardy_model, capacity=10))


class TestContradiction:

    @pytest.fixture(scope='class')
    def contradiction(self, hardy_table):
        return verify_contradiction(build_model(HARDY_SETUP, HARDY_CAUSAL, hardy_table))

    def test_lines_11_and_14_clash(self, contradiction):
        assert not contradiction.unsat_11_14.satisfiable
        assert not contradiction.unsat_loc2_14.satisfiable

    def test_loc2_and_line_11_compatible(self, contradiction, world):
        result = contradiction.sat_loc2_11
        assert result.satisfiable
        assert result.satisfying.index == 30
        assert {HARDY_SETUP.format_world(w) for w in result.satisfying.of(world("(L1,-,R2,+)"))} \
            == {"(L1,-,R1,-)"}

    def test_certificate(self, contradiction):
        cert = contradiction.certificate
        assert cert.conflicting == ('C-11', 'C-14')
        assert cert.searched_count == 81 == len(cert.log)
        assert HARDY_SETUP.format_world(cert.witness_world) == "(L1,-,R2,+)"
        assert cert.witness_kind == 'pair-conflict'

    def test_certificate_cites_witness(self, contradiction):
        log = contradiction.certificate.log
        assert {HARDY_SETUP.format_world(v.world) for v in log} == {"(L1,-,R2,+)"}
        assert Counter(v.constraint_id for v in log) == {'C-11': 27, 'C-14': 27, 'C-11+C-14': 27}

    def test_certificate_resampled(self, hardy_model, contradiction):
        cert = contradiction.certificate
        rng = np.random.default_rng(0)
        for i in rng.integers(len(cert.log), size=100):
            entry = cert.log[int(i)]
            (candidate,) = enumerate_candidates(hardy_model, entry.index, entry.index + 1)
            assert violation_at(hardy_model, candidate, cert.conflicting, cert.witness_world) == entry

    def test_sliced_search_matches(self, hardy_model):
        ids = ('C-LOC2', 'C-11')
        whole = search_constraints(hardy_model, ids)
        merged = merge_results([search_constraints(hardy_model, ids, 40),
                                search_constraints(hardy_model, ids, 0, 40)])
        assert merged.searched == whole.searched == 81
        assert merged.satisfying == whole.satisfying
        assert merged.violations == whole.violations

    def test_paradox_zeroed_witness(self, hardy_table):
        m = perturbed(hardy_table, "(L1,-,R1,+)", 0.0)
        world, kind = find_witness(m, ('C-11', 'C-14'))
        assert kind == 'single-constraint'
        assert HARDY_SETUP.format_world(world) == "(L1,+,R2,+)"

    def test_capacity(self, hardy_model):
        with pytest.raises(SearchIncomplete):
            verify_contradiction(hardy_model, capacity=10)

    def test_constraint_table(self):
        assert set(CONSTRAINTS) == {'C-LOC2', 'C-11', 'C-14'}


class TestRunScript:

    def test_theorem_replayed(self, hardy_model, script):
        result = run_script(hardy_model, script)
        assert result.status == 'THEOREM-REPLAYED'
        report = script_report(hardy_model, script, result)
        assert report.exit_code() == 0
        assert report.status_of('line.12') == Status.FLAG
        assert report.status_of('line.6') == Status.FLAG
        assert report.status_of('search.C-11+C-14') == Status.UNSAT
        assert report.status_of('search.C-LOC2+C-11') == Status.SAT
        assert list(report.tables['lines']['line']) == list(range(1, 15))

    def test_uniform_model(self, uniform_model, script):
        result = run_script(uniform_model, script)
        assert result.status == 'NOT-REPLAYED'
        report = script_report(uniform_model, script, result)
        assert report.exit_code() == 1
        assert {v.check_id for v in report.failed} >= {'line.2', 'line.3', 'line.8', 'proof.status'}

    def test_deterministic(self, hardy_model, script):
        first = script_report(hardy_model, script, run_script(hardy_model, script))
        second = script_report(hardy_model, script, run_script(hardy_model, script))
        assert first.machine_lines() == second.machine_lines()
