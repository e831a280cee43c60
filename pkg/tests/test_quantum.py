"""Tests for the quantum backend and the Hardy construction."""

import math

import numpy as np
import pytest

from src.errors import ConfigInvalid, DimensionError, PreconditionViolated
from src.experiment import HARDY_SETUP, logical_worlds
from src.quantum import (
    DIM, PREDICTIONS, JointTable, StateVector, born_probability, build_hardy_model,
    commutator_norm, embed, hardy_bases, hardy_state, hardy_violations, is_projector,
    joint_table, local_basis, marginal, marginal_deviation, microcausality_sweep,
    no_signaling_sweep, paradox_probability, physically_possible_worlds, reduce,
    verify_no_signaling, verify_predictions,
)
from src.report import Status

PARADOX = (5 * math.sqrt(5) - 11) / 2


@pytest.fixture(scope='module')
def model():
    return build_hardy_model('preset-optimal')


@pytest.fixture(scope='module')
def table(model):
    return joint_table(HARDY_SETUP, model)


class TestStateVector:

    def test_norm_checked(self):
        with pytest.raises(PreconditionViolated, match="norm"):
            StateVector(np.array([1, 1, 0, 0]))

    def test_dimension_checked(self):
        with pytest.raises(DimensionError):
            StateVector(np.array([1, 0]))

    def test_density_is_rank_one_projector(self, model):
        assert is_projector(model.state.density())


class TestBornProbability:

    def test_identity(self, model):
        assert born_probability(model.state, np.eye(DIM)) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        state = StateVector(np.array([1, 0, 0, 0]))
        p = np.zeros((DIM, DIM))
        p[3, 3] = 1
        assert born_probability(state, p) == 0.0

    def test_paradox_probability(self, model):
        meas = model.measurements
        p = meas.get('L', 1, '-') @ meas.get('R', 1, '+')
        assert born_probability(model.state, p) == pytest.approx(PARADOX, abs=1e-4)

    def test_dimension_mismatch(self, model):
        with pytest.raises(DimensionError):
            born_probability(model.state, np.eye(2))


class TestReduce:

    def test_identity(self, model):
        rho = model.state.density()
        yes, no = reduce(rho, np.eye(DIM))
        assert np.allclose(yes, rho, atol=1e-12)
        assert np.allclose(no, 0, atol=1e-12)

    def test_zero(self, model):
        rho = model.state.density()
        yes, no = reduce(rho, np.zeros((DIM, DIM)))
        assert np.allclose(yes, 0, atol=1e-12)
        assert np.allclose(no, rho, atol=1e-12)

    def test_branch_traces(self, model):
        rho = model.state.density()
        p = model.measurements.get('R', 2, '+')
        yes, no = reduce(rho, p)
        prob = born_probability(rho, p)
        assert np.trace(yes).real == pytest.approx(prob, abs=1e-12)
        assert np.trace(no).real == pytest.approx(1 - prob, abs=1e-12)


class TestCommutators:

    def test_cross_region_commute(self, model):
        for _, _, norm in microcausality_sweep(model):
            assert norm <= 1e-12

    def test_self(self, model):
        p = model.measurements.get('R', 1, '+')
        assert commutator_norm(p, p) == 0.0

    def test_same_region_different_bases(self, model):
        meas = model.measurements
        assert commutator_norm(meas.get('R', 1, '+'), meas.get('R', 2, '+')) > 0.01


class TestNoSignaling:

    def test_identity_second_projector(self, model):
        p1 = model.measurements.get('L', 1, '+')
        assert verify_no_signaling(model.state, p1, np.eye(DIM)) == 0.0

    def test_all_cross_pairs(self, model):
        sweep = no_signaling_sweep(model)
        assert len(sweep) == 16
        assert max(dev for _, _, dev in sweep) <= 1e-12

    def test_same_region_flagged(self, model):
        meas = model.measurements
        with pytest.raises(PreconditionViolated) as excinfo:
            verify_no_signaling(model.state, meas.get('R', 1, '+'), meas.get('R', 2, '+'))
        assert excinfo.value.deviation > 1e-12

    def test_marginals_independent_of_far_choice(self, table):
        assert marginal_deviation(table) <= 1e-12
        left_l2_r1 = marginal(table, (1, 0), 'L')
        left_l2_r2 = marginal(table, (1, 1), 'L')
        assert left_l2_r1 == pytest.approx(left_l2_r2, abs=1e-12)


class TestMeasurementModel:

    def test_local_basis_projectors(self):
        plus, minus = local_basis(0.3, 1.1)
        assert is_projector(plus) and is_projector(minus)
        assert np.allclose(plus + minus, np.eye(2))

    def test_model_projectors_valid(self, model):
        model.measurements.validate()

    def test_embed_sides(self):
        plus, _ = local_basis(0.0, 0.0)
        assert embed(plus, 0)[0, 0] == 1 and embed(plus, 0)[2, 2] == 0
        assert embed(plus, 1)[0, 0] == 1 and embed(plus, 1)[1, 1] == 0


class TestHardyModel:

    def test_preset_table(self, table):
        assert table.at("(L2,+,R2,+)") == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-12)
        assert table.at("(L2,+,R1,-)") == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-12)
        assert table.at("(L1,-,R1,+)") == pytest.approx(PARADOX, abs=1e-12)

    def test_preset_has_three_zeros(self, table):
        zeros = [w for w in logical_worlds(HARDY_SETUP) if table[w] <= 1e-9]
        assert {HARDY_SETUP.format_world(w) for w in zeros} == {
            "(L2,-,R2,+)", "(L2,+,R1,+)", "(L1,-,R2,-)"}
        assert hardy_violations(table) == []

    def test_solve_reaches_preset(self):
        solved = build_hardy_model('solve')
        solved_table = joint_table(HARDY_SETUP, solved)
        assert solved_table.at("(L1,-,R1,+)") == pytest.approx(PARADOX, abs=1e-4)
        positive = [w for w in logical_worlds(HARDY_SETUP) if solved_table[w] > 1e-9]
        assert len(positive) == 13

    def test_closed_form_paradox(self):
        a = math.sqrt((3 - math.sqrt(5)) / 2)
        b = math.sqrt(math.sqrt(5) - 2)
        assert paradox_probability(a, b, a) == pytest.approx(PARADOX, abs=1e-12)
        # a small step in any direction does not improve on the optimum
        for da, db in [(1e-3, 0), (-1e-3, 0), (0, 1e-3), (0, -1e-3)]:
            x, y = a + da, b + db
            d = math.sqrt(1 - x * x - y * y)
            assert paradox_probability(x, y, d) < PARADOX

    def test_hardy_bases_make_zeros_exact(self):
        a, b, d = 0.5, 0.6, math.sqrt(1 - 0.25 - 0.36)
        t = joint_table(HARDY_SETUP, build_hardy_model('explicit', [a, b, 0, d], hardy_bases(a, b, d)))
        for eq_id in ('3.1', '3.2', '3.3'):
            assert t.at(PREDICTIONS[eq_id].event) <= 1e-15

    def test_product_state_rejected(self):
        with pytest.raises(ConfigInvalid, match="not of Hardy type"):
            build_hardy_model('explicit', [0.5, 0.5, 0.5, 0.5],
                              {('L', 1): (0.4, 0.0), ('R', 1): (-0.4, 0.0)})

    def test_basis_state_rejected(self):
        with pytest.raises(ConfigInvalid):
            build_hardy_model('explicit', [1, 0, 0, 0],
                              {('L', 1): (0.4, 0.0), ('R', 1): (-0.4, 0.0)})

    def test_unnormalised_amplitudes_rejected(self):
        with pytest.raises(ConfigInvalid, match="amplitudes"):
            build_hardy_model('explicit', [1, 1, 0, 1], {('L', 1): (0, 0), ('R', 1): (0, 0)})

    def test_missing_angles(self):
        with pytest.raises(ConfigInvalid, match="Missing basis"):
            build_hardy_model('explicit', [0.6, 0.0, 0.0, 0.8], {})

    def test_unknown_mode(self):
        with pytest.raises(ConfigInvalid):
            build_hardy_model('guess')

    def test_complex_phase_keeps_hardy_shape(self):
        a = math.sqrt((3 - math.sqrt(5)) / 2)
        b = math.sqrt(math.sqrt(5) - 2)
        phase = np.exp(0.7j)
        state = hardy_state(a * phase, b * phase, a * phase)
        assert abs(np.linalg.norm(state.amplitudes) - 1) < 1e-12


class TestJointTable:

    def test_rows_sum_to_one(self, table):
        for total in table.row_sums().values():
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_thirteen_positive(self, table):
        assert sum(1 for w in logical_worlds(HARDY_SETUP) if table[w] > 1e-9) == 13

    def test_frame(self, table):
        frame = table.to_frame()
        assert len(frame) == 16
        assert frame['possible'].sum() == 13
        assert table.pivot().shape == (4, 4)

    def test_wrong_size(self):
        with pytest.raises(DimensionError):
            JointTable(HARDY_SETUP, np.ones(15))


class TestPhysicallyPossibleWorlds:

    def test_hardy(self, table):
        phys = physically_possible_worlds(HARDY_SETUP, table)
        assert len(phys) == 13
        excluded = {HARDY_SETUP.format_world(w) for w in ~phys}
        assert excluded == {"(L2,-,R2,+)", "(L2,+,R1,+)", "(L1,-,R2,-)"}

    def test_uniform(self):
        phys = physically_possible_worlds(HARDY_SETUP, JointTable.uniform(HARDY_SETUP))
        assert len(phys) == 16

    def test_concentrated_row(self):
        uniform = JointTable.uniform(HARDY_SETUP)
        probs = uniform.probs.copy()
        row = [HARDY_SETUP.world_index(w) for w in uniform.rows()[(0, 0)]]
        probs[row] = [1.0, 0.0, 0.0, 0.0]
        phys = physically_possible_worlds(HARDY_SETUP, JointTable(HARDY_SETUP, probs))
        in_row = [w for w in phys if w.choices == (0, 0)]
        assert [HARDY_SETUP.format_world(w) for w in in_row] == ["(L1,+,R1,+)"]


class TestVerifyPredictions:

    def test_hardy_all_pass(self, table):
        verdicts = verify_predictions(HARDY_SETUP, table)
        assert [v.check_id for v in verdicts] == [
            'prediction.3.1', 'prediction.3.2', 'prediction.3.3', 'prediction.3.4', 'prediction.3.5']
        assert all(v.status == Status.PASS for v in verdicts)

    def test_paradox_zeroed(self, table):
        paradox = HARDY_SETUP.parse_world("(L1,-,R1,+)")
        verdicts = verify_predictions(HARDY_SETUP, table.with_entry(paradox, 0.0))
        status = {v.check_id: v.status for v in verdicts}
        assert status['prediction.3.4'] == Status.FAIL

    def test_incomplete_row(self):
        uniform = JointTable.uniform(HARDY_SETUP)
        w = HARDY_SETUP.parse_world("(L1,+,R1,+)")
        verdicts = verify_predictions(HARDY_SETUP, uniform.with_entry(w, 0.15))
        status = {v.check_id: v.status for v in verdicts}
        assert status['prediction.3.5'] == Status.FAIL
        assert status['prediction.3.1'] == Status.FAIL
