"""Standard form, recurrence maps vs brute-force operators, extraction."""

import numpy as np
import pytest

from ssrent.distillation import (
    RECURRENCE_MAPS,
    StandardForm,
    apply_filters,
    distill_entanglement_projection,
    distill_entanglement_projection_oracle,
    extract_vepr,
    extract_vepr_analysis,
    filters,
    iterate_map,
    one_copy_move_oracle,
    one_copy_moves,
    recurrence_oracle,
    reverse_filters,
    standard_form,
    standard_form_state,
    three_copy_map,
    two_copy_map,
)
from ssrent.errors import DegenerateBlock, OutOfRange
from ssrent.formation import QubitSSRState, rho_sep
from ssrent.monotones import wootters_concurrence


class TestStandardForm:
    def test_rho_sep(self):
        sf = standard_form(rho_sep())
        assert (sf.v, sf.w) == pytest.approx((1.0, 1.0), abs=1e-12)
        assert not sf.entangled

    def test_v_epr(self):
        sf = standard_form(QubitSSRState(0.0, 0.5, 0.5, 0.0, 0.5))
        assert (sf.v, sf.w) == pytest.approx((1.0, 0.0), abs=1e-12)
        assert sf.entangled

    def test_quoted_example(self):
        sf = standard_form(QubitSSRState.scaled(1 / 8, 1 / 4, 1 / 4, 1 / 8, 1 / 4))
        assert (sf.v, sf.w) == pytest.approx((1.0, 0.5), abs=1e-12)

    def test_degenerate_block(self):
        with pytest.raises(DegenerateBlock):
            standard_form(QubitSSRState(0.5, 0.0, 0.0, 0.5, 0.0))

    def test_idempotence(self):
        sf = StandardForm(0.6, 0.8)
        again = standard_form(standard_form_state(sf.v, sf.w))
        assert (again.v, again.w) == pytest.approx((0.6, 0.8), abs=1e-12)

    def test_round_trip_via_reverse_filters(self):
        rng = np.random.default_rng(127)
        for _ in range(200):
            rho = QubitSSRState.random(rng)
            if rho.w01 * rho.w10 < 1e-8 or rho.w00 * rho.w11 < 1e-8:
                continue
            fa, fb = filters(rho)
            tilde, p = apply_filters(rho, fa, fb)
            assert 0.0 < p <= 1.0
            sf = standard_form(rho)
            target = standard_form_state(sf.v, sf.w)
            assert np.max(np.abs(tilde.matrix() - target.matrix())) < 1e-10
            ra, rb = reverse_filters(rho)
            back, _ = apply_filters(tilde, ra, rb)
            assert np.max(np.abs(back.matrix() - rho.matrix())) < 1e-10

    def test_entangled_iff_v_gt_w(self):
        rng = np.random.default_rng(131)
        for _ in range(300):
            rho = QubitSSRState.random(rng)
            if rho.w01 * rho.w10 < 1e-8 or rho.w00 * rho.w11 < 1e-8:
                continue
            sf = standard_form(rho)
            c = wootters_concurrence(rho.matrix())
            assert (c > 1e-10) == (sf.v > sf.w + 1e-10)


class TestOneCopyMoves:
    def test_increase(self):
        sf = one_copy_moves(StandardForm(1.0, 1.0), "increase_w", 0.4)
        assert (sf.v, sf.w) == pytest.approx((1.0, 1.4))

    def test_shrink(self):
        sf = one_copy_moves(StandardForm(1.0, 0.0), "shrink_both", 0.5)
        assert (sf.v, sf.w) == pytest.approx((0.5, 0.0))

    def test_identity(self):
        sf = one_copy_moves(StandardForm(0.3, 0.7), "increase_w", 0.0)
        assert (sf.v, sf.w) == (0.3, 0.7)
        sf = one_copy_moves(StandardForm(0.3, 0.7), "shrink_both", 0.0)
        assert (sf.v, sf.w) == (0.3, 0.7)

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            one_copy_moves(StandardForm(0.5, 0.5), "shrink_both", 1.5)
        with pytest.raises(OutOfRange):
            one_copy_moves(StandardForm(0.5, 0.5), "increase_w", -0.1)

    def test_mixing_oracle_agrees(self):
        for v, w in [(0.9, 0.2), (0.5, 0.5), (0.2, 1.3)]:
            sf = StandardForm(v, w)
            for amount in (0.0, 0.15, 0.6):
                closed = one_copy_moves(sf, "increase_w", amount)
                oracle = one_copy_move_oracle(sf, "increase_w", amount)
                assert (closed.v, closed.w) == pytest.approx(
                    (oracle.v, oracle.w), abs=1e-11
                )
                closed = one_copy_moves(sf, "shrink_both", amount)
                oracle = one_copy_move_oracle(sf, "shrink_both", amount)
                assert (closed.v, closed.w) == pytest.approx(
                    (oracle.v, oracle.w), abs=1e-11
                )

    def test_rho_sep_reaches_separable_region(self):
        # shrink to the diagonal, then raise w: any v* <= min(1, w*) is reachable
        for v_t, w_t in [(0.3, 0.5), (0.8, 0.8), (0.1, 1.7), (1.0, 1.2)]:
            assert v_t <= w_t
            step1 = one_copy_moves(StandardForm(1.0, 1.0), "shrink_both", 1.0 - v_t)
            step2 = one_copy_moves(step1, "increase_w", w_t - step1.w)
            assert (step2.v, step2.w) == pytest.approx((v_t, w_t), abs=1e-12)


class TestClosedFormMaps:
    def test_two_copy_fixed_points(self):
        out = two_copy_map(StandardForm(1.0, 0.0), "b")
        assert (out.v, out.w) == pytest.approx((1.0, 0.0), abs=1e-12)

    def test_two_copy_examples(self):
        out = two_copy_map(StandardForm(1.0, 0.0), "a")
        assert (out.v, out.w) == pytest.approx((1.0, 1.0), abs=1e-12)
        out = two_copy_map(StandardForm(0.0, 0.0), "a")
        assert (out.v, out.w) == pytest.approx((0.0, np.sqrt(0.5)), abs=1e-12)

    def test_three_copy_fixed_points(self):
        sep = three_copy_map(StandardForm(1.0, 1.0), "separable")
        assert (sep.v, sep.w) == pytest.approx((1.0, 1.0), abs=1e-12)
        ent = three_copy_map(StandardForm(1.0, 0.0), "entangled")
        assert (ent.v, ent.w) == pytest.approx((1.0, 0.0), abs=1e-12)

    def test_entangled_map_converges(self):
        final, steps = iterate_map(StandardForm(0.8, 0.4), "entangled")
        assert steps <= 1000
        assert abs(final.v - 1.0) < 1e-6 and abs(final.w) < 1e-6

    def test_separable_map_converges_to_rho_sep(self):
        final, _ = iterate_map(StandardForm(0.4, 0.9), "separable")
        assert abs(final.v - 1.0) < 1e-5 and abs(final.w - 1.0) < 1e-5


GRID_V = np.linspace(0.0, 1.0, 21)
GRID_W = np.linspace(0.0, 2.0, 21)


class TestOracleEquivalence:
    @pytest.mark.parametrize("name", sorted(RECURRENCE_MAPS))
    def test_grid(self, name):
        rmap = RECURRENCE_MAPS[name]
        for v in GRID_V:
            for w in GRID_W:
                sf = StandardForm(float(v), float(w))
                expected = rmap.closed_form(sf.v, sf.w)
                try:
                    got, prob = recurrence_oracle(sf, rmap)
                except DegenerateBlock:
                    # only the w = 0 row of the symmetric two-copy step loses
                    # its one-particle block; the closed form is the limit
                    assert name == "two_copy_a" and w == 0.0
                    eps = 1e-8
                    near, _ = recurrence_oracle(StandardForm(float(v), eps), rmap)
                    lim = rmap.closed_form(float(v), eps)
                    assert (near.v, near.w) == pytest.approx(lim, abs=1e-10)
                    continue
                assert got.v == pytest.approx(expected[0], abs=1e-10)
                assert got.w == pytest.approx(expected[1], abs=1e-10)
                assert 0.0 < prob <= 1.0 + 1e-12

    def test_separable_frontier_never_crossed(self):
        rmap = RECURRENCE_MAPS["three_copy_separable"]
        for v in GRID_V:
            for w in GRID_W:
                if v <= w:  # separable inputs stay separable
                    out = three_copy_map(StandardForm(float(v), float(w)), "separable")
                    assert out.v <= out.w + 1e-12


class TestProjectionDistillation:
    def test_pure_input_gives_bell(self):
        m = distill_entanglement_projection(StandardForm(1.0, 0.0))
        bell = np.zeros((4, 4), dtype=complex)
        bell[1, 1] = bell[2, 2] = bell[1, 2] = bell[2, 1] = 0.5
        assert np.max(np.abs(m - bell)) < 1e-12

    def test_rho_sep_output_separable(self):
        m = distill_entanglement_projection(StandardForm(1.0, 1.0))
        assert wootters_concurrence(m) == pytest.approx(0.0, abs=1e-12)

    def test_entanglement_preserved_iff(self):
        assert wootters_concurrence(
            distill_entanglement_projection(StandardForm(0.9, 0.5))
        ) > 0
        assert (
            wootters_concurrence(
                distill_entanglement_projection(StandardForm(0.5, 0.9))
            )
            == 0.0
        )

    def test_oracle_agrees_on_grid(self):
        for v in GRID_V[::4]:
            for w in GRID_W[::4]:
                closed = distill_entanglement_projection(StandardForm(float(v), float(w)))
                oracle = distill_entanglement_projection_oracle(
                    StandardForm(float(v), float(w))
                )
                assert np.max(np.abs(closed - oracle)) < 1e-12


class TestExtraction:
    def test_exact_branch_structure(self):
        analysis = extract_vepr_analysis()
        assert analysis.success_probability == pytest.approx(0.5, abs=1e-12)
        assert analysis.success_eoe == pytest.approx(1.0, abs=1e-12)
        assert analysis.success_siv == pytest.approx(1.0, abs=1e-12)
        for branch in analysis.branches:
            if branch.matched:
                assert branch.eoe == pytest.approx(1.0, abs=1e-12)
                assert branch.siv == pytest.approx(1.0, abs=1e-12)
            else:
                assert branch.eoe == pytest.approx(0.0, abs=1e-12)

    def test_yield_is_half(self):
        analysis = extract_vepr_analysis()
        assert analysis.siv_yield == pytest.approx(0.5, abs=1e-12)
        assert analysis.residual_entanglement == pytest.approx(0.5, abs=1e-12)

    def test_sampled_rounds_converge(self):
        y, resid = extract_vepr(20000, seed=3)
        assert y == pytest.approx(0.5, abs=0.02)
        assert resid == pytest.approx(0.5, abs=0.02)
