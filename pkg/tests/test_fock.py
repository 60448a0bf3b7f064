"""Core sector machinery: states, blocks, Kraus application, dephasing."""

import numpy as np
import pytest

from ssrent import fock
from ssrent.errors import (
    DimensionMismatch,
    MixedTotalNumber,
    ParseError,
    SectorOutOfRange,
    ZeroProbabilityOutcome,
    ZeroVector,
)
from ssrent.fock import (
    BlockDensityMatrix,
    LocalKrausSet,
    LocalOperator,
    LocalSpace,
    apply_local_kraus,
    apply_operator_to_pure,
    e_epr,
    identity_kraus,
    make_pure,
    measure_pure,
    mixture,
    number_projectors,
    random_block_povm,
    random_pure_on,
    v_epr,
)


class TestMakePure:
    def test_v_epr_sectors(self):
        state = v_epr()
        assert state.total == 1
        assert state.schmidt_sector(0) == pytest.approx([0.5])
        assert state.schmidt_sector(1) == pytest.approx([0.5])

    def test_e_epr_single_sector(self):
        state = e_epr()
        assert state.total == 2
        assert state.schmidt_sector(1) == pytest.approx([0.5, 0.5])
        assert state.schmidt_sector(0) == []
        assert state.schmidt_sector(2) == []

    def test_biased_qubit_sector(self):
        state = make_pure([(0, 1, np.sqrt(1 / 3)), (1, 0, np.sqrt(2 / 3))])
        assert state.schmidt_sector(1) == pytest.approx([2 / 3])

    def test_mixed_total_rejected(self):
        with pytest.raises(MixedTotalNumber):
            make_pure([(0, 1, 1.0), (1, 1, 1.0)])

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVector):
            make_pure([(0, 1, 0.0)])

    def test_sector_out_of_range(self):
        with pytest.raises(SectorOutOfRange):
            v_epr().schmidt_sector(5)

    def test_normalization(self):
        state = make_pure([(0, 2, 3.0), (2, 0, 4.0)])
        assert state.norm_squared() == pytest.approx(1.0, abs=1e-14)
        assert state.sector_weight(0) == pytest.approx(9 / 25)


class TestSchmidtCompleteness:
    def test_random_states_sum_to_one(self):
        rng = np.random.default_rng(7)
        sa = LocalSpace.modes(2)
        sb = LocalSpace.modes(2)
        for _ in range(50):
            state = random_pure_on(rng, sa, sb, total=2)
            pooled = state.pooled_schmidt()
            assert sum(pooled) == pytest.approx(1.0, abs=1e-12)


class TestTensor:
    def test_tensor_total_and_norm(self):
        prod = v_epr().tensor(e_epr())
        assert prod.total == 3
        assert prod.norm_squared() == pytest.approx(1.0, abs=1e-12)

    def test_tensor_schmidt_is_products(self):
        prod = v_epr().tensor(v_epr())
        # sectors 0,1,1+... Alice counts 0,1,2 with weights 1/4, 1/2, 1/4
        assert prod.sector_weight(0) == pytest.approx(0.25)
        assert prod.sector_weight(1) == pytest.approx(0.5)
        assert prod.sector_weight(2) == pytest.approx(0.25)
        assert prod.schmidt_sector(1) == pytest.approx([0.25, 0.25])


class TestDephase:
    def test_v_epr_dephased(self):
        rho = v_epr().to_block_density().dephase()
        # (|01><01| + |10><10|)/2
        assert rho.entry(0, 1, 0, 1) == pytest.approx(0.5)
        assert rho.entry(1, 0, 1, 0) == pytest.approx(0.5)
        assert rho.entry(0, 1, 1, 0) == pytest.approx(0.0)

    def test_number_eigenstate_fixed(self):
        state = make_pure([((1, 0), (1, 1), 1.0), ((1, 1), (1, 0), 1.0)])
        rho = state.to_block_density()
        assert rho.dephase().max_abs_diff(rho) < 1e-12

    def test_idempotent_on_random_mixtures(self):
        rng = np.random.default_rng(11)
        sa = LocalSpace.modes(2)
        sb = LocalSpace.modes(2)
        for _ in range(20):
            rho = mixture(
                [
                    (0.3, random_pure_on(rng, sa, sb, 2)),
                    (0.7, random_pure_on(rng, sa, sb, 2)),
                ]
            )
            once = rho.dephase()
            twice = once.dephase()
            assert twice.max_abs_diff(once) < 1e-12


class TestPartialTrace:
    def test_v_epr_reduced(self):
        red = v_epr().to_block_density().partial_trace("A")
        assert red.labels == ((0, 0), (1, 0))
        assert np.allclose(red.matrix, np.diag([0.5, 0.5]))

    def test_product_state_pure_reduction(self):
        state = make_pure([(0, 2, 1.0)])
        red = state.to_block_density().partial_trace("A")
        vals = np.linalg.eigvalsh(red.matrix)
        assert max(vals) == pytest.approx(1.0, abs=1e-12)

    def test_unit_trace(self):
        rng = np.random.default_rng(3)
        state = random_pure_on(rng, LocalSpace.modes(2), LocalSpace.modes(2), 2)
        red = state.to_block_density().partial_trace("B")
        assert np.trace(red.matrix).real == pytest.approx(1.0, abs=1e-12)


class TestApplyLocalKraus:
    def test_identity_channel(self):
        rho = v_epr().to_block_density()
        space = LocalSpace.qudit(2)
        out, p = apply_local_kraus(rho, identity_kraus(space), identity_kraus(space))
        assert p == 1.0
        assert out.max_abs_diff(rho) < 1e-12

    def test_projector_select_on_v_epr(self):
        rho = v_epr().to_block_density()
        space = LocalSpace.qudit(2)
        out, p = apply_local_kraus(
            rho, number_projectors(space), identity_kraus(space), select=(0, 0)
        )
        assert p == pytest.approx(0.5, abs=1e-12)
        assert out.entry(0, 1, 0, 1) == pytest.approx(1.0)

    def test_zero_probability_outcome(self):
        rho = make_pure([(0, 1, 1.0)]).to_block_density()
        space = LocalSpace.qudit(2)
        with pytest.raises(ZeroProbabilityOutcome):
            apply_local_kraus(
                rho, number_projectors(space), identity_kraus(space), select=(1, 0)
            )

    def test_trace_preservation_random(self):
        rng = np.random.default_rng(5)
        sa = LocalSpace.modes(2)
        sb = LocalSpace.modes(2)
        for _ in range(25):
            rho = mixture(
                [
                    (0.5, random_pure_on(rng, sa, sb, 2)),
                    (0.5, random_pure_on(rng, sa, sb, 2)),
                ]
            )
            kraus_a = random_block_povm(rng, sa, 3)
            kraus_b = random_block_povm(rng, sb, 2)
            out, _ = apply_local_kraus(rho, kraus_a, kraus_b)
            assert out.trace() == pytest.approx(1.0, abs=1e-10)

    def test_block_structure_preserved(self):
        rng = np.random.default_rng(17)
        sa = LocalSpace.modes(2)
        sb = LocalSpace.modes(2)
        for _ in range(25):
            rho = random_pure_on(rng, sa, sb, 2).to_block_density()
            kraus_a = random_block_povm(rng, sa, 2, shifts=[0, -1])
            kraus_b = identity_kraus(sb)
            out, _ = apply_local_kraus(rho, kraus_a, kraus_b)
            for t, pairs in out.basis.items():
                for a, b in pairs:
                    assert a[0] + b[0] == t

    def test_shifted_operator_moves_total(self):
        space = LocalSpace.qudit(3)
        # lowering-type operator: |n-1><n| on levels 1,2
        mat = np.zeros((3, 3))
        mat[0, 1] = 1.0
        mat[1, 2] = 1.0
        op = LocalOperator(space, mat, shift=-1)
        state = make_pure([(1, 1, 1.0), (2, 0, 1.0)])
        out, p = apply_operator_to_pure(state, alice=op)
        assert out.total == 1
        assert p == pytest.approx(1.0, abs=1e-12)


class TestKrausValidation:
    def test_incomplete_set_rejected(self):
        space = LocalSpace.qudit(2)
        half = LocalOperator(space, np.diag([1.0, 0.0]))
        with pytest.raises(ValueError):
            LocalKrausSet([half])

    def test_cross_sector_entries_rejected(self):
        space = LocalSpace.qudit(2)
        mat = np.array([[0.0, 1.0], [1.0, 0.0]])  # particle-number flip
        with pytest.raises(DimensionMismatch):
            LocalOperator(space, mat, shift=0)

    def test_measure_pure_probabilities(self):
        space = LocalSpace.qudit(2)
        branches = measure_pure(v_epr(), number_projectors(space), party="A")
        assert sorted(p for p, _ in branches) == pytest.approx([0.5, 0.5])


class TestGeneralPureState:
    def test_projection_weights(self):
        # (|0>+|1>)_A (|0>+|1>)_B / 2
        g = fock.GeneralPureState(np.full((2, 2), 0.5), (0, 1), (0, 1))
        assert g.project_total(0).norm_squared() == pytest.approx(0.25)
        assert g.project_total(1).norm_squared() == pytest.approx(0.5)
        assert g.project_total(2).norm_squared() == pytest.approx(0.25)

    def test_entropy_of_bell(self):
        g = fock.GeneralPureState(
            np.array([[0, 1], [1, 0]]) / np.sqrt(2), (0, 1), (0, 1)
        )
        assert g.entanglement_entropy() == pytest.approx(1.0, abs=1e-12)

    def test_from_sectored(self):
        g = fock.general_from_sectored(v_epr())
        assert g.norm_squared() == pytest.approx(1.0, abs=1e-14)
        assert g.entanglement_entropy() == pytest.approx(1.0, abs=1e-12)


class TestJsonRoundTrip:
    def test_pure_round_trip(self):
        state = make_pure([(0, 2, 1.0), (1, 1, 1j), ((2, 0), (0, 0), -0.5)])
        text = fock.pure_to_json(state)
        back = fock.pure_from_json(text)
        assert fock.pure_to_json(back) == text

    def test_density_round_trip(self):
        rho = mixture([(0.5, v_epr()), (0.5, make_pure([(0, 1, 1.0)]))])
        text = fock.density_to_json(rho)
        back = fock.density_from_json(text)
        assert fock.density_to_json(back) == text
        assert back.max_abs_diff(rho) < 1e-15

    def test_parse_error(self):
        with pytest.raises(ParseError):
            fock.pure_from_json("{not json")
        with pytest.raises(ParseError):
            fock.pure_from_json('{"total_particles": 1}')
