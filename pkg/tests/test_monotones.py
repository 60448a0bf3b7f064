"""EoE, SiV, concurrence quantities and monotonicity under local operations."""

import numpy as np
import pytest

from ssrent.fock import (
    LocalSpace,
    e_epr,
    make_pure,
    number_projectors,
    random_block_povm,
    random_pure_on,
    v_epr,
)
from ssrent.formation import QubitSSRState, rho_sep
from ssrent.monotones import (
    binary_entropy,
    concurrence,
    ef_from_concurrence,
    eoe,
    monotonicity_trial,
    siv,
    ssr_concurrence,
    wootters_concurrence,
)


class TestEoE:
    def test_v_epr(self):
        assert eoe(v_epr()) == pytest.approx(1.0, abs=1e-12)

    def test_product(self):
        assert eoe(make_pure([(0, 2, 1.0)])) == pytest.approx(0.0, abs=1e-12)

    def test_biased(self):
        state = make_pure([(0, 1, np.sqrt(1 / 3)), (1, 0, np.sqrt(2 / 3))])
        assert eoe(state) == pytest.approx(binary_entropy(1 / 3), abs=1e-12)


class TestSiV:
    def test_v_epr_normalization(self):
        assert siv(v_epr()) == pytest.approx(1.0, abs=1e-12)

    def test_e_epr_zero(self):
        assert siv(e_epr()) == pytest.approx(0.0, abs=1e-12)
        assert eoe(e_epr()) == pytest.approx(1.0, abs=1e-12)

    def test_biased(self):
        state = make_pure([(0, 1, np.sqrt(1 / 3)), (1, 0, np.sqrt(2 / 3))])
        assert siv(state) == pytest.approx(8 / 9, abs=1e-12)

    def test_party_symmetry_random(self):
        rng = np.random.default_rng(23)
        sa, sb = LocalSpace.modes(2), LocalSpace.modes(2)
        for _ in range(50):
            state = random_pure_on(rng, sa, sb, 2)
            assert siv(state, "A") == pytest.approx(siv(state, "B"), abs=1e-12)

    def test_additivity_random(self):
        rng = np.random.default_rng(29)
        sa, sb = LocalSpace.qudit(3), LocalSpace.qudit(3)
        for _ in range(30):
            s1 = random_pure_on(rng, sa, sb, 2)
            s2 = random_pure_on(rng, sa, sb, 2)
            assert siv(s1.tensor(s2)) == pytest.approx(
                siv(s1) + siv(s2), abs=1e-10
            )

    def test_qubit_bound_on_grid(self):
        # entanglement dominates variance for two-level states
        for p0 in np.linspace(0.0, 1.0, 101):
            assert binary_entropy(p0) >= 4 * p0 * (1 - p0) - 1e-12


class TestConcurrence:
    def test_rho_sep_separable(self):
        assert concurrence(rho_sep()) == pytest.approx(0.0, abs=1e-12)

    def test_pure_v_epr(self):
        state = QubitSSRState(0.0, 0.5, 0.5, 0.0, 0.5)
        assert concurrence(state) == pytest.approx(1.0, abs=1e-12)

    def test_formula_vs_spin_flip(self):
        # raw arithmetic of the closed form on the quoted (unnormalized) weights
        assert max(0.0, 2 * 0.25 - 2 * np.sqrt(1 / 8 * 1 / 8)) == pytest.approx(0.25)
        # the same state normalized: concurrence scales with the trace
        state = QubitSSRState.scaled(1 / 8, 1 / 4, 1 / 4, 1 / 8, 1 / 4)
        assert concurrence(state) == pytest.approx(1 / 3, abs=1e-12)
        assert wootters_concurrence(state.matrix()) == pytest.approx(
            1 / 3, abs=1e-10
        )

    def test_formula_vs_spin_flip_random(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            state = QubitSSRState.random(rng)
            assert concurrence(state) == pytest.approx(
                wootters_concurrence(state.matrix()), abs=1e-9
            )

    def test_ef_from_concurrence_endpoints(self):
        assert ef_from_concurrence(0.0) == pytest.approx(0.0, abs=1e-12)
        assert ef_from_concurrence(1.0) == pytest.approx(1.0, abs=1e-12)


class TestSsrConcurrence:
    def test_rho_sep(self):
        p, cbar = ssr_concurrence(rho_sep())
        assert p == pytest.approx(0.5, abs=1e-12)
        assert cbar == pytest.approx(1.0, abs=1e-12)

    def test_pure_one_particle(self):
        s = 0.3
        state = QubitSSRState(0.0, s, 1 - s, 0.0, np.sqrt(s * (1 - s)))
        p, cbar = ssr_concurrence(state)
        assert p == pytest.approx(1.0)
        assert cbar == pytest.approx(2 * np.sqrt(s * (1 - s)), abs=1e-12)

    def test_diagonal(self):
        state = QubitSSRState(0.2, 0.3, 0.4, 0.1, 0.0)
        assert ssr_concurrence(state) == (pytest.approx(0.7), 0.0)

    def test_bounds_random(self):
        rng = np.random.default_rng(37)
        for _ in range(2000):
            state = QubitSSRState.random(rng)
            c = concurrence(state)
            p, cbar = ssr_concurrence(state)
            assert p * cbar - (1 - p) - 1e-10 <= c <= p * cbar + 1e-10


class TestMonotonicity:
    def test_identity_is_neutral(self):
        from ssrent.fock import identity_kraus

        space = LocalSpace.qudit(2)
        before, after = monotonicity_trial(v_epr(), identity_kraus(space))
        assert after.eoe == pytest.approx(before.eoe, abs=1e-12)
        assert after.siv == pytest.approx(before.siv, abs=1e-12)

    def test_number_measurement_kills_both(self):
        space = LocalSpace.qudit(2)
        before, after = monotonicity_trial(v_epr(), number_projectors(space))
        assert before.eoe == pytest.approx(1.0)
        assert after.eoe == pytest.approx(0.0, abs=1e-12)
        assert after.siv == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("shifts", [None, [0, 1, -1]])
    def test_random_trials_never_increase(self, shifts):
        rng = np.random.default_rng(41)
        sa = LocalSpace.modes(2)
        sb = LocalSpace.modes(2)
        for _ in range(300):
            state = random_pure_on(rng, sa, sb, 2)
            n_out = 3 if shifts else 2
            kraus = random_block_povm(rng, sa, n_out, shifts=shifts)
            before, after = monotonicity_trial(state, kraus)
            assert after.eoe <= before.eoe + 1e-9
            assert after.siv <= before.siv + 1e-9
