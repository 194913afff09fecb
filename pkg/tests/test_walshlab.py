import cmath
import math
from fractions import Fraction

import numpy as np
import pytest

from hankelnet.netgen import NetDesign, RngSeed, draw_hrd, draw_urd, sobol_design
from hankelnet.pointgen import gen_points_naive
from hankelnet.walshlab import (character_mean, chung_erdos_lower, digits, dual_contains,
                                dual_prob_exact, event_probabilities, hunter_upper,
                                joint_dual_prob_exact, kappa, lms_dual_prob_bound,
                                lms_dual_prob_exact, mc_dual_prob, mc_joint_dual_prob,
                                mc_union_prob, mu_alpha, n_alpha, rank_deficiency_bound,
                                split_top_digits, t_parameter, t_tail_bound, t_u_parameter,
                                walsh)


def identity_top(b=2, m=3, E=6):
    C = np.zeros((1, E, m), dtype=np.uint8)
    C[0, :m, :m] = np.eye(m, dtype=np.uint8)
    return NetDesign(b, m, 1, E, C)


def four_sigma(p, trials):
    return 4 * math.sqrt(p * (1 - p) / trials)


class TestDigitWeights:
    def test_digits(self):
        assert digits(6, 2) == [0, 1, 1]
        assert digits(5, 3, 4) == [2, 1, 0, 0]
        with pytest.raises(ValueError, match="precision exceeded"):
            digits(8, 2, 3)

    @pytest.mark.parametrize("k,b,expected", [(6, 2, {2, 3}), (0, 5, set()), (9, 3, {3})])
    def test_kappa(self, k, b, expected):
        assert kappa(k, b) == expected

    @pytest.mark.parametrize("alpha,expected", [(1, 3), (2, 5), (3, 5)])
    def test_mu_alpha(self, alpha, expected):
        assert mu_alpha(6, alpha, 2) == expected

    def test_mu_of_zero_and_vectors(self):
        assert mu_alpha(0, 2, 3) == 0
        assert mu_alpha((6, 1), 1, 2) == 4

    def test_n_alpha(self):
        assert n_alpha(6, 3, 2) == 2
        assert n_alpha(6, 1, 2) == 1

    def test_split_top_digits(self):
        assert split_top_digits(13, 2, 2) == (12, 1)
        assert split_top_digits(6, 1, 2) == (4, 2)
        assert split_top_digits(0, 2, 3) == (0, 0)
        k_plus, k_minus = split_top_digits(2 * 27 + 9 + 2, 1, 3)
        assert (k_plus, k_minus) == (54, 11)

    def test_mu_ratio_is_monotone(self):
        for k in range(1, 2 ** 12):
            for alpha in range(1, 5):
                assert mu_alpha(k, alpha, 2) * (alpha + 1) >= mu_alpha(k, alpha + 1, 2) * alpha


class TestWalsh:
    def test_single_digit(self):
        assert walsh(1, 0.5, 2) == -1

    def test_zero_index(self):
        assert walsh(0, 0.3, 2) == 1

    def test_base_three(self):
        assert abs(walsh(1, 1 / 3, 3) - cmath.exp(2j * math.pi / 3)) < 1e-12

    def test_unit_modulus_and_multiplicativity(self):
        gen = np.random.default_rng(4)
        b, E = 3, 8
        for _ in range(50):
            xd = gen.integers(0, b, size=E)
            yd = gen.integers(0, b, size=E)
            zd = (xd + yd) % b
            x, y, z = (sum(int(d) * Fraction(1, b ** (i + 1)) for i, d in enumerate(v))
                       for v in (xd, yd, zd))
            k = int(gen.integers(1, b ** E))
            wx, wy, wz = (walsh(k, float(v), b, E) for v in (x, y, z))
            assert abs(abs(wx) - 1) < 1e-12
            assert abs(wz - wx * wy) < 1e-9

    def test_vector_is_product(self):
        w = walsh((1, 1), (0.5, 0.5), 2)
        assert w == 1


class TestDualNet:
    def test_identity_top_contains_b_to_m(self):
        assert dual_contains(identity_top(), (8,))

    def test_identity_top_excludes_one(self):
        assert not dual_contains(identity_top(), (1,))

    def test_precision_exceeded(self):
        with pytest.raises(ValueError, match="precision exceeded"):
            dual_contains(identity_top(E=4), (2 ** 5,))

    def test_shift_independent(self):
        design = draw_hrd(RngSeed(3), 2, 10, 4, 2, with_shift=True)
        for k in [(1, 3), (5, 0), (7, 9)]:
            assert dual_contains(design, k) == dual_contains(design.without_shift(), k)

    def test_character_property(self):
        gen = np.random.default_rng(8)
        hits = 0
        for trial in range(30):
            design = draw_hrd(RngSeed(trial), 2, 12, 4, 2)
            for _ in range(10):
                k = tuple(int(c) for c in gen.integers(0, 64, size=2))
                if not any(k):
                    continue
                mean = character_mean(design, k)
                expected = 1.0 if dual_contains(design, k) else 0.0
                hits += int(expected)
                assert abs(mean - expected) < 1e-10
        assert character_mean(identity_top(), (8,)) == 1

    def test_character_mean_matches_walsh_sum(self):
        design = draw_urd(RngSeed(2), 3, 6, 2, 2)
        points = gen_points_naive(design)
        k = (4, 7)
        direct = sum(walsh(k, tuple(row), 3, design.E) for row in points.coords) / points.n_points
        assert abs(direct - character_mean(design, k)) < 1e-10


class TestTParameter:
    def test_identity_top(self):
        assert t_parameter(identity_top()) == 0

    def test_zero_matrix(self):
        design = NetDesign(2, 4, 1, 6, np.zeros((1, 6, 4)))
        assert t_parameter(design) == 4

    @pytest.mark.parametrize("m", [2, 5, 8, 10])
    def test_sobol_first_two_dimensions(self, m):
        assert t_parameter(sobol_design(m, 2)) == 0
        assert t_u_parameter(sobol_design(m, 2), [1, 2]) == 0

    def test_single_coordinate(self):
        design = sobol_design(6, 3)
        assert all(t_u_parameter(design, [j]) == 0 for j in (1, 2, 3))

    def test_full_set_equals_t_parameter(self):
        design = draw_hrd(RngSeed(6), 2, 20, 6, 3)
        assert t_u_parameter(design, [1, 2, 3]) == t_parameter(design)

    def test_projection_never_worse(self):
        design = draw_urd(RngSeed(10), 3, 12, 4, 3)
        assert t_u_parameter(design, [1, 3]) <= t_parameter(design)

    def test_brute_force_agreement(self):
        from itertools import product
        from hankelnet.gf import rank_of_array

        def brute(design):
            mats = design.matrices.astype(int)
            for t in range(design.m + 1):
                total = design.m - t
                ok = True
                for q in product(range(total + 1), repeat=design.s):
                    if sum(q) != total:
                        continue
                    rows = np.concatenate([mats[j, :q[j]] for j in range(design.s)])
                    if rank_of_array(rows, int(design.base)) < total:
                        ok = False
                        break
                if ok:
                    return t
            return design.m

        for seed in range(15):
            design = draw_hrd(RngSeed(seed), 2, 10, 5, 3)
            assert t_parameter(design) == brute(design)

    def test_enumeration_guard(self):
        design = draw_urd(RngSeed(0), 2, None, 40, 8)
        with pytest.raises(ValueError, match="enumeration guard"):
            t_parameter(design)

    def test_bad_subset(self):
        with pytest.raises(ValueError):
            t_u_parameter(sobol_design(4, 2), [0, 1])

    @pytest.mark.slow
    def test_hrd_t_tail(self):
        m, s, draws = 10, 3, 2000
        threshold = s * math.log2(m)
        exceed = sum(t_parameter(draw_hrd(RngSeed(i), 2, 16, m, s)) > threshold for i in range(draws))
        bound = 1 / (m * math.factorial(s - 1))
        assert exceed / draws <= bound + 4 * math.sqrt(bound * (1 - bound) / draws)


class TestExactProbabilities:
    def test_hrd_pair(self):
        assert joint_dual_prob_exact(1, 2, 2, 3, "hrd") == 2 ** -4

    def test_urd_pair(self):
        assert joint_dual_prob_exact(1, 2, 2, 3, "urd") == 2 ** -6

    @pytest.mark.parametrize("kind", ["hrd", "urd"])
    @pytest.mark.parametrize("k,b,m", [((5,), 2, 6), ((1, 1), 3, 2), ((0, 7, 2), 5, 3)])
    def test_marginal_is_b_to_minus_m(self, kind, k, b, m):
        assert dual_prob_exact(k, b, m, kind) == pytest.approx(b ** -m, rel=1e-12)

    @pytest.mark.parametrize("m1,m2", [(0, 2), (1, 4), (3, 3 + 5), (0, 9)])
    def test_hrd_one_dimensional_powers(self, m1, m2):
        m = 5
        d = abs(m1 - m2)
        expected = 2 ** -(m + min(d, m))
        assert joint_dual_prob_exact(2 ** m1, 2 ** m2, 2, m, "hrd") == expected
        assert joint_dual_prob_exact(2 ** m1, 2 ** m2, 2, m, "urd") == 2 ** (-2 * m)

    def test_rejects_equal_indices(self):
        with pytest.raises(ValueError):
            joint_dual_prob_exact(3, 3, 2, 4, "hrd")

    def test_rejects_lms(self):
        with pytest.raises(ValueError):
            joint_dual_prob_exact(1, 2, 2, 4, "lms-sobol")

    def test_digit_cap(self):
        with pytest.raises(ValueError, match="precision exceeded"):
            dual_prob_exact(2 ** 40, 2, 4, "hrd")


class TestEventBounds:
    def test_chung_erdos_example(self):
        pairs = [[0, 1 / 64], [1 / 64, 0]]
        assert chung_erdos_lower([1 / 8, 1 / 8], pairs) == pytest.approx(2 / 9)

    def test_hunter_example(self):
        pairs = [[0, 1 / 64], [1 / 64, 0]]
        assert hunter_upper([1 / 8, 1 / 8], pairs) == pytest.approx(15 / 64)

    def test_single_event(self):
        assert chung_erdos_lower([0.3], [[0.3]]) == pytest.approx(0.3)
        assert hunter_upper([0.3], [[0.3]]) == pytest.approx(0.3)

    def test_all_zero(self):
        assert chung_erdos_lower([0, 0], np.zeros((2, 2))) == 0

    def test_asymmetric_pairs_rejected(self):
        with pytest.raises(ValueError):
            chung_erdos_lower([0.1, 0.1], [[0, 0.01], [0.02, 0]])

    def test_hunter_uses_maximum_tree(self):
        pairs = np.array([[0, 0.05, 0.01], [0.05, 0, 0.02], [0.01, 0.02, 0]])
        assert hunter_upper([0.2, 0.2, 0.2], pairs) == pytest.approx(0.6 - 0.07)

    @pytest.mark.slow
    def test_bounds_sandwich_union_estimate(self):
        gen = np.random.default_rng(21)
        b, m, trials = 2, 5, 100_000
        for instance in range(10):
            ks = [int(k) for k in gen.choice(np.arange(1, 2 ** 8), size=3, replace=False)]
            singles, pairs = event_probabilities(ks, b, m, "hrd")
            estimate = mc_union_prob(RngSeed(instance), ks, b, m, 1, "hrd", trials)
            slack = 4 * max(estimate.stderr, 1 / trials)
            assert chung_erdos_lower(singles, pairs) - slack <= estimate.estimate
            assert estimate.estimate <= hunter_upper(singles, pairs) + slack


class TestMonteCarlo:
    def test_trials_must_be_positive(self):
        with pytest.raises(ValueError):
            mc_dual_prob(RngSeed(0), (3,), 2, 4, 1, "hrd", 0)

    def test_reproducible(self):
        a = mc_dual_prob(RngSeed(5), (3,), 2, 4, 1, "urd", 5000)
        b = mc_dual_prob(RngSeed(5), (3,), 2, 4, 1, "urd", 5000)
        assert a == b

    @pytest.mark.parametrize("k,b,m,s", [((3,), 2, 4, 1), ((1, 1), 3, 2, 2)])
    def test_lemma_probability(self, k, b, m, s):
        trials = 100_000
        estimate = mc_dual_prob(RngSeed(1), k, b, m, s, "hrd", trials)
        p = b ** -m
        assert abs(estimate.estimate - p) <= four_sigma(p, trials)

    @pytest.mark.slow
    @pytest.mark.parametrize("b,m", [(2, 6), (3, 3)])
    @pytest.mark.parametrize("kind", ["hrd", "urd"])
    def test_lemma_random_indices(self, b, m, kind):
        gen = np.random.default_rng(b * 100 + m)
        trials = 200_000
        p = b ** -m
        for i in range(5):
            s = int(gen.integers(1, 4))
            k = tuple(int(c) for c in gen.integers(1, b ** 6, size=s))
            estimate = mc_dual_prob(RngSeed(i), k, b, m, s, kind, trials)
            assert abs(estimate.estimate - p) <= four_sigma(p, trials)
            assert dual_prob_exact(k, b, m, kind) == pytest.approx(p, rel=1e-12)

    @pytest.mark.slow
    def test_joint_exact_matches_monte_carlo(self):
        gen = np.random.default_rng(33)
        b, m, trials = 2, 5, 100_000
        for i in range(10):
            s = int(gen.integers(1, 3))
            k1 = tuple(int(c) for c in gen.integers(1, 2 ** 7, size=s))
            k2 = tuple(int(c) for c in gen.integers(1, 2 ** 7, size=s))
            if k1 == k2:
                continue
            for kind in ("hrd", "urd"):
                exact = joint_dual_prob_exact(k1, k2, b, m, kind)
                estimate = mc_joint_dual_prob(RngSeed(i), k1, k2, b, m, s, kind, trials)
                assert abs(estimate.estimate - exact) <= four_sigma(exact, trials) + 1 / trials


class TestLms:
    def test_bound_zero_region(self):
        assert lms_dual_prob_bound([2, 3], 6, 2, 1, 2) == 0

    def test_bound_high_position(self):
        assert lms_dual_prob_bound([7, 1], 6, 2, 0, 2) == 2 ** -6

    def test_bound_intermediate(self):
        assert lms_dual_prob_bound([3, 4], 6, 2, 0, 2) == pytest.approx(1 / 32)

    def test_bound_otherwise(self):
        assert lms_dual_prob_bound([4, 5], 6, 2, 0, 2) == 2 ** -6

    def test_exact_respects_bound(self):
        m = 6
        design = sobol_design(m, 2, 16)
        t_u = t_u_parameter(design, [1, 2])
        gen = np.random.default_rng(2)
        for _ in range(40):
            k = tuple(int(c) for c in gen.integers(1, 2 ** 8, size=2))
            mu1 = [mu_alpha(c, 1, 2) for c in k]
            exact = lms_dual_prob_exact(design, k)
            assert exact <= lms_dual_prob_bound(mu1, m, 2, t_u, 2) + 1e-15

    def test_exact_small_weight_is_zero(self):
        design = sobol_design(6, 2, 16)
        assert lms_dual_prob_exact(design, (5, 3)) == 0

    def test_exact_high_position(self):
        design = sobol_design(6, 2, 16)
        assert lms_dual_prob_exact(design, (2 ** 6 + 3, 1)) == 2 ** -6

    @pytest.mark.slow
    def test_scrambled_sobol_probabilities(self):
        m, trials = 6, 100_000
        design = sobol_design(m, 2, 16)
        t_u = t_u_parameter(design, [1, 2])
        assert t_u == 0
        low = mc_dual_prob(RngSeed(1), (5, 3), 2, m, 2, "lms-sobol", trials)
        assert low.hits == 0
        high = mc_dual_prob(RngSeed(2), (2 ** 6 + 3, 1), 2, m, 2, "lms-sobol", trials)
        assert abs(high.estimate - 2 ** -m) <= four_sigma(2 ** -m, trials)


class TestSupplementedBounds:
    def test_rank_deficiency_bound(self):
        assert rank_deficiency_bound(3, 5, 2) == pytest.approx(7 / 32)

    def test_t_tail_bound(self):
        assert t_tail_bound(10, 3, 2, 4) == pytest.approx(min(1.0, 28 * (2 ** -4 - 2 ** -10)))
        assert t_tail_bound(10, 3, 2, 10) == 0
