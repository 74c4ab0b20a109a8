"""Restriction, ladder and enumerator tests.

Ladder oracle values were frozen by independent direct summation before
the builder existed: for the reciprocal-shift family with eps = 0.1 the
summand is (i+1)**-0.8, and starting above floor(Phi(l)) the running sums
cross 1 so that the block strictly between Phi(l_n) and l_{n+1} carries
unit mass:

    l_1 = 9 (decay threshold),
    sum_{i=10}^{17} (i+1)**-0.8 = 0.9595... < 1 <= sum_{i=10}^{18},
        so l_2 = 19,
    sum_{i=20}^{32} < 1 <= sum_{i=20}^{33}, so l_3 = 34,
    sum_{i=35}^{55} < 1 <= sum_{i=35}^{56}, so l_4 = 57.
"""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifslab.families import make_gauss, make_linear_power
from ifslab.restrictions import (
    Ladder,
    Phi,
    PreconditionError,
    build_ladder,
    enumerate_restricted_words,
    growth_ratio_bound,
    parse_phi,
)


@pytest.fixture(scope="module")
def gauss():
    return make_gauss()


class TestPhi:
    def test_linear_floor(self):
        phi = parse_phi("lin:1.5")
        assert [phi.floor(n) for n in (1, 2, 3, 4)] == [1, 3, 4, 6]

    def test_linear_identity(self):
        phi = parse_phi("lin:1")
        assert phi.floor(7) == 7
        assert phi.ceil(7) == 7

    def test_power_square(self):
        phi = parse_phi("pow:2")
        assert phi.floor(12) == 144
        assert phi.ceil(12) == 144

    def test_power_three_halves(self):
        phi = parse_phi("pow:1.5")
        # floor(n^1.5) = isqrt(n^3)
        for n in (2, 3, 10, 99):
            assert phi.floor(n) == math.isqrt(n ** 3)
        assert phi.ceil(4) == 8  # 4^1.5 = 8 exactly
        assert phi.ceil(2) == 3  # 2^1.5 = 2.828...

    def test_power_floor_huge_argument(self):
        phi = parse_phi("pow:1.5")
        n = 10 ** 40
        assert phi.floor(n) == math.isqrt(n ** 3)

    def test_non_dyadic_exponent_adaptive_route(self):
        phi = parse_phi("pow:2.3")
        # cross-check small arguments against float arithmetic
        for n in (2, 3, 10, 50):
            assert phi.floor(n) == math.floor(n ** 2.3)

    def test_table(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("2\n5\n9\n14\n")
        phi = parse_phi(f"table:{p}")
        assert phi.floor(3) == 9
        with pytest.raises(PreconditionError):
            phi.floor(5)

    def test_table_must_be_increasing(self):
        with pytest.raises(PreconditionError):
            Phi("table", table=(2, 2, 3))

    def test_table_must_dominate_identity(self):
        with pytest.raises(PreconditionError):
            Phi("table", table=(1, 2, 2))  # Phi(3) = 2 < 3 and not increasing

    def test_beta_below_one_rejected(self):
        with pytest.raises(PreconditionError):
            parse_phi("lin:0.5")

    def test_alpha_at_one_rejected(self):
        with pytest.raises(PreconditionError):
            parse_phi("pow:1")

    def test_malformed_specs(self):
        for bad in ("lin", "geom:2", "pow:x"):
            with pytest.raises(PreconditionError):
                parse_phi(bad)


class TestLadder:
    def test_gauss_identity_phi_first_values(self, gauss):
        lad = build_ladder(gauss, parse_phi("lin:1"), 0.1, 4)
        assert lad.values == (9, 19, 34, 57)
        assert lad.threshold == 9
        assert all(lad.certified)

    def test_minimality_by_direct_sums(self, gauss):
        # the defining property, recomputed term by term
        lad = build_ladder(gauss, parse_phi("lin:1"), 0.1, 4)
        phi = parse_phi("lin:1")
        for prev, nxt in zip(lad.values, lad.values[1:]):
            start = phi.floor(prev) + 1
            s_before = sum((i + 1) ** -0.8 for i in range(start, nxt - 1))
            s_at = s_before + nxt ** -0.8  # adds term i = nxt - 1
            assert s_before < 1 <= s_at

    def test_strictly_increasing_and_above_phi(self, gauss):
        for spec in ("lin:1", "lin:2", "pow:1.5"):
            phi = parse_phi(spec)
            lad = build_ladder(gauss, phi, 0.1, 6)
            vals = lad.values
            assert all(a < b for a, b in zip(vals, vals[1:]))
            assert all(b > phi.floor(a) for a, b in zip(vals, vals[1:]))

    def test_power_phi_grows_doubly_exponentially(self, gauss):
        lad = build_ladder(gauss, parse_phi("pow:2"), 0.1, 8)
        logs = [math.log(float(v)) if v.bit_length() < 900 else v.bit_length() * math.log(2) for v in lad.values]
        # log l_{n+1} ~ 2 log l_n eventually
        assert logs[-1] / logs[-2] == pytest.approx(2.0, abs=0.2)

    def test_eps_out_of_range(self, gauss):
        with pytest.raises(PreconditionError):
            build_ladder(gauss, parse_phi("lin:1"), 0.5, 3)
        with pytest.raises(PreconditionError):
            build_ladder(gauss, parse_phi("lin:1"), -0.1, 3)

    def test_linear_power_ladder_threshold_1(self):
        sys2 = make_linear_power(2)
        lad = build_ladder(sys2, parse_phi("lin:1"), 0.1, 3)
        assert lad.values[0] == 1
        assert all(a < b for a, b in zip(lad.values, lad.values[1:]))


class TestGrowthRatio:
    def test_gauss_two_steps(self, gauss):
        lad = build_ladder(gauss, parse_phi("lin:1"), 0.1, 2)
        # 19/9 with Phi the identity
        assert growth_ratio_bound(lad, parse_phi("lin:1")) == pytest.approx(19 / 9, rel=1e-12)

    def test_always_above_one(self, gauss):
        for spec in ("lin:1", "lin:3", "pow:1.5", "pow:2"):
            lad = build_ladder(gauss, parse_phi(spec), 0.1, 5)
            assert growth_ratio_bound(lad, parse_phi(spec)) > 1

    def test_bounded_over_ten_steps(self, gauss):
        # no growth trend across steps; stays below 4 for these shapes
        for spec in ("lin:1", "pow:1.5", "pow:2"):
            lad = build_ladder(gauss, parse_phi(spec), 0.1, 10)
            assert growth_ratio_bound(lad, parse_phi(spec)) < 4

    def test_needs_two_values(self, gauss):
        lad = build_ladder(gauss, parse_phi("lin:1"), 0.1, 1)
        with pytest.raises(PreconditionError):
            growth_ratio_bound(lad, parse_phi("lin:1"))


class TestEnumerator:
    def test_identity_phi_depth2_cap3(self):
        words = list(enumerate_restricted_words(parse_phi("lin:1"), 2, 3))
        assert words == [(1, 2), (1, 3), (2, 3)]

    def test_square_phi_depth2_cap5(self):
        words = list(enumerate_restricted_words(parse_phi("pow:2"), 2, 5))
        assert words == [(1, 2), (1, 3), (1, 4), (1, 5), (2, 5)]

    def test_identity_phi_counts_are_binomial(self):
        phi = parse_phi("lin:1")
        for depth, cap in ((2, 6), (3, 7), (4, 9)):
            n = sum(1 for _ in enumerate_restricted_words(phi, depth, cap))
            assert n == math.comb(cap, depth)

    def test_lexicographic_order(self):
        words = list(enumerate_restricted_words(parse_phi("lin:1.5"), 3, 12))
        assert words == sorted(words)

    def test_non_strict_flag(self):
        # with Phi(n) = n, non-strict allows repeats
        words = list(enumerate_restricted_words(parse_phi("lin:1"), 2, 2, strict=False))
        assert words == [(1, 1), (1, 2), (2, 2)]

    @given(
        st.sampled_from(["lin:1", "lin:2", "pow:1.5", "pow:2"]),
        st.integers(1, 3),
        st.integers(1, 18),
    )
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force_filter(self, spec, depth, cap):
        phi = parse_phi(spec)
        fast = list(enumerate_restricted_words(phi, depth, cap))
        import itertools

        slow = [
            w
            for w in itertools.product(range(1, cap + 1), repeat=depth)
            if all(w[i + 1] > phi.floor(w[i]) for i in range(depth - 1))
        ]
        assert fast == slow

    def test_restriction_monotonicity(self):
        # pointwise larger Phi admits fewer words
        small = set(enumerate_restricted_words(parse_phi("lin:1"), 3, 15))
        large = set(enumerate_restricted_words(parse_phi("lin:2"), 3, 15))
        assert large <= small

    def test_empty_stream_allowed(self):
        assert list(enumerate_restricted_words(parse_phi("pow:2"), 3, 3)) == []
