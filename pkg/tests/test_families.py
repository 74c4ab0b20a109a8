"""Family constructors: Gauss maps, exact linear-power tilings, and the
piecewise linear gap construction.

Frozen values, derived ahead of the assertions they feed:

* d=2, Phi(n)=n^2, eps=0.1: the normalizer fixed point lands at
  C = 0.38003226440612975 with ladder prefix (1, 6, 72, 6720, 47150889)
  and certified truncation below 1e-20.  The frozen C is a regression
  anchor only; the load-bearing checks are independent identities that
  would expose a wrong C or ladder on their own: the normalization sum,
  ladder minimality by direct partial sums, and the offset tail identity
  against a Hurwitz zeta evaluation.

A note on the fault-injection checks: in this configuration the block-1
gaps have size C/6 ~ 0.063, so nudging a_2 up by 1e-6 cannot make two
intervals overlap.  What it does break is the certified gap size between
images 2 and 1, and the report flags exactly that with witness index 2.
A nudge larger than the gap produces a literal overlap, again at 2.
"""

import math
from fractions import Fraction

import mpmath
import pytest

from ifslab.families import (
    build_gap_system,
    make_gauss,
    make_linear_power,
    validate_gap_system,
)
from ifslab.restrictions import parse_phi
from ifslab.systems import NumericFailure, PreconditionError


@pytest.fixture(scope="module")
def quad_gap():
    return build_gap_system(parse_phi("pow:2"), 2.0, 0.1)


class TestConstructors:
    def test_gauss_map_values(self):
        gauss = make_gauss()
        assert gauss.map_eval(1, 0) == 1
        assert gauss.map_eval(3, 1) == Fraction(1, 4)
        assert gauss.kind == "gauss"
        assert gauss.decay == 2.0

    def test_gauss_rates(self):
        gauss = make_gauss()
        assert gauss.contract_hi(7) == pytest.approx(7.0**-2, rel=1e-15)
        assert gauss.contract_lo(7) == pytest.approx(8.0**-2, rel=1e-15)

    def test_linear_power_requires_convergent_series(self):
        with pytest.raises(PreconditionError):
            make_linear_power(1.0)
        with pytest.raises(PreconditionError):
            make_linear_power(0.5)

    def test_linear_power_cubic_ratio(self):
        cubic = make_linear_power(3.0)
        assert cubic.contract_hi(1) / cubic.contract_hi(2) == pytest.approx(
            8.0, rel=1e-13
        )
        assert cubic.scale == pytest.approx(float(1 / mpmath.zeta(3)), rel=1e-13)


class TestGapBuild:
    def test_normalizer_bracket(self, quad_gap):
        lo, hi = quad_gap.C_bracket
        assert lo <= quad_gap.C <= hi
        assert hi - lo < 1e-12
        # Denominator exceeds the plain zeta sum, so C sits below 1/zeta(2).
        assert 0 < quad_gap.C < float(1 / mpmath.zeta(2))
        assert quad_gap.C == pytest.approx(0.38003226440612975, abs=1e-12)

    def test_first_interval_right_flush(self, quad_gap):
        a1 = quad_gap.offset(1)
        with mpmath.workprec(160):
            assert abs(a1 + quad_gap._c_mpf - 1) < mpmath.mpf(2) ** -120
        assert float(a1) + quad_gap.C == pytest.approx(1.0, abs=4e-16)
        assert quad_gap.system.map_eval(1, 1.0) == pytest.approx(1.0, abs=4e-16)

    def test_ladder_prefix(self, quad_gap):
        assert quad_gap.ladder[:5] == (1, 6, 72, 6720, 47150889)
        values = quad_gap.ladder
        for j in range(1, len(values)):
            assert values[j] > quad_gap.phi.floor(values[j - 1])
        # Superquadratic growth once the blocks anchor past the first rung.
        for j in range(1, len(values) - 1):
            assert values[j + 1] > values[j] ** 2

    def test_ladder_minimality_by_direct_sums(self, quad_gap):
        # Each rung is one past the first index where the block mass
        # sum(C**(1/d-eps) * i**(-1+d*eps)) reaches 1.
        coeff = quad_gap.C**0.4
        for j in range(1, 4):
            prev, nxt = quad_gap.ladder[j - 1], quad_gap.ladder[j]
            start = prev * prev + 1
            before = math.fsum(coeff * i**-0.8 for i in range(start, nxt - 1))
            assert before < 1 <= before + coeff * (nxt - 1) ** -0.8

    def test_block_structure(self, quad_gap):
        blocks = quad_gap.blocks
        assert (blocks[0].start, blocks[0].end) == (2, 6)
        assert (blocks[1].start, blocks[1].end) == (37, 72)
        assert (blocks[2].start, blocks[2].end) == (5185, 6720)
        for j, b in enumerate(blocks, start=1):
            assert b.j == j
            assert b.start == quad_gap.phi.floor(quad_gap.ladder[j - 1]) + 1
            assert b.end == quad_gap.ladder[j]
            want = quad_gap.C * j**-2 / b.end
            assert float(b.gap) == pytest.approx(want, rel=1e-13)

    def test_tail_certified(self, quad_gap):
        assert 0 < quad_gap.tail_bound < 1e-20

    def test_preconditions(self):
        phi = parse_phi("pow:2")
        with pytest.raises(PreconditionError):
            build_gap_system(phi, 1.0, 0.1)
        with pytest.raises(PreconditionError):
            build_gap_system(phi, 2.0, 0.0)
        with pytest.raises(PreconditionError):
            build_gap_system(phi, 2.0, 0.5)
        # d=3 allows eps up to 1 by the halved-decay bound, but the ladder
        # summand exponent forces eps < 1/d.
        with pytest.raises(PreconditionError):
            build_gap_system(phi, 3.0, 0.34)

    def test_slow_phi_cannot_collapse(self):
        with pytest.raises(NumericFailure):
            build_gap_system(parse_phi("lin:1"), 2.0, 0.1)


class TestGapOffsets:
    def test_strictly_decreasing(self, quad_gap):
        prev = quad_gap.offset(1)
        for n in range(2, 2001):
            cur = quad_gap.offset(n)
            assert cur < prev
            prev = cur

    def test_adjacency_outside_blocks(self, quad_gap):
        # Between blocks consecutive images abut: the step is exactly the
        # interval length C * n**-d.
        with mpmath.workprec(160):
            for n in (8, 20, 36, 100, 1000, 5000):
                step = quad_gap.offset(n - 1) - quad_gap.offset(n)
                want = quad_gap._c_mpf * mpmath.mpf(n) ** -2
                assert float(abs(step - want) / want) < 1e-25

    def test_adjacency_inside_blocks(self, quad_gap):
        with mpmath.workprec(160):
            for n, j in ((3, 1), (40, 2), (6000, 3)):
                step = quad_gap.offset(n - 1) - quad_gap.offset(n)
                want = quad_gap._c_mpf * mpmath.mpf(n) ** -2 + quad_gap.blocks[j - 1].gap
                assert float(abs(step - want) / want) < 1e-25

    def test_offset_tail_identity(self, quad_gap):
        # a_N is the total mass to its left: the interval lengths beyond N
        # plus every gap attached to an index beyond N, up to the certified
        # truncation of the block series.
        N = 100
        with mpmath.workprec(160):
            expect = quad_gap._c_mpf * mpmath.zeta(2, N + 1)
            for b in quad_gap.blocks:
                expect += b.gap * max(0, b.end - max(b.start - 1, N))
            defect = abs(quad_gap.offset(N) - expect)
        assert float(defect) <= quad_gap.tail_bound

    def test_offset_cap_enforced(self, quad_gap):
        with pytest.raises(PreconditionError):
            quad_gap.offset(200_001)


class TestGapValidation:
    def test_acceptance_scale_all_pass(self, quad_gap):
        rep = validate_gap_system(quad_gap, 10**4)
        assert rep.all_pass
        assert rep.disjoint and rep.contained and rep.gaps_match and rep.decaying
        assert rep.witness == {}
        assert rep.threshold == 1
        assert rep.n_max == 10**4

    def test_normalization_sums_to_one(self, quad_gap):
        # Independent recomputation from the public fields: interval mass
        # C * zeta(d) plus block gap mass C * j**-2 * count / l_{j+1}.
        with mpmath.workprec(160):
            total = mpmath.mpf(quad_gap.C) * mpmath.zeta(2)
            for b in quad_gap.blocks:
                count = b.end - b.start + 1
                total += mpmath.mpf(quad_gap.C) * mpmath.mpf(b.j) ** -2 * count / b.end
            defect = abs(1 - total)
        assert float(defect) <= 1e-9
        assert float(defect) <= 4 * quad_gap.tail_bound + 1e-15

    def test_tampered_offset_breaks_gap_size(self):
        gs = build_gap_system(parse_phi("pow:2"), 2.0, 0.1)
        gs.offset(2)
        gs._offsets[2] += mpmath.mpf("1e-6")
        rep = validate_gap_system(gs, 50)
        assert not rep.all_pass
        assert rep.disjoint  # shift is far smaller than the 0.063 gap
        assert not rep.gaps_match
        assert rep.witness["gaps"]["index"] == 2
        assert rep.witness["gaps"]["block"] == 1

    def test_tampered_offset_breaks_disjointness(self):
        gs = build_gap_system(parse_phi("pow:2"), 2.0, 0.1)
        gs.offset(2)
        gs._offsets[2] += mpmath.mpf("0.1")
        rep = validate_gap_system(gs, 50)
        assert not rep.all_pass
        assert not rep.disjoint
        assert rep.witness["disjoint"]["index"] == 2

    def test_nmax_bounds(self, quad_gap):
        with pytest.raises(PreconditionError):
            validate_gap_system(quad_gap, 1)
        with pytest.raises(PreconditionError):
            validate_gap_system(quad_gap, 300_000)


class TestGapVariants:
    def test_superlinear_power_phi(self):
        gs = build_gap_system(parse_phi("pow:1.5"), 2.0, 0.1)
        assert 0 < gs.C < 1
        assert gs.ladder[0] == 1
        assert validate_gap_system(gs, 500).all_pass

    def test_cubic_decay(self):
        gs = build_gap_system(parse_phi("pow:2"), 3.0, 0.2)
        assert validate_gap_system(gs, 500).all_pass
        # Contraction follows d=3; the gap weights stay quadratic in the
        # block index by construction.
        assert gs.system.contract_hi(10) == pytest.approx(gs.C * 1e-3, rel=1e-13)
        assert float(gs.blocks[0].gap) == pytest.approx(
            gs.C / gs.ladder[1], rel=1e-13
        )
