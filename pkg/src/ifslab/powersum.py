"""Certified partial sums of power laws over integer ranges.

Everything downstream (ladder construction, window exponents, conditional
digit laws) reduces to sums of the form

    S(a, b, p) = sum_{i=a}^{b} i**(-p),        p > 0,

evaluated either exactly (compensated summation) or, when the range is far
too large to walk term by term, through an Euler-Maclaurin expansion with a
certified error bound.  Ranges here routinely start at integers with
hundreds of digits: ladder sequences for power-type digit restrictions grow
doubly exponentially, so ``a`` and ``b`` are ordinary Python ints of
arbitrary size and all float work happens in log domain.

The Euler-Maclaurin route uses the integral plus the trapezoidal and the
first two Bernoulli corrections.  For a completely monotone integrand such
as x**(-p) the truncation error of the expansion is bounded in magnitude by
the first omitted Bernoulli term, which gives a two-sided bracket; a few
ulps are added on top to cover the rounding of the evaluation itself.
The bracket is what makes minimal-index inversion sound: we can certify
"the running sum first reaches the target at exactly this index" even when
the index has 300 digits, provided the bracket separates the two
neighbouring candidates (it essentially always does; the ambiguous case is
reported rather than guessed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Ranges at most this long are summed directly (exactly rounded via fsum).
DIRECT_LIMIT = 200_000

# Head length summed exactly before handing the tail to Euler-Maclaurin;
# the error term shrinks like head**-(p+5), so a modest head is plenty.
_EM_HEAD = 64

_ULP = 2.0 ** -52


def _pow_neg(log_x: float, q: float) -> float:
    """x**(-q) for x given by its natural log (x may exceed float range)."""
    y = -q * log_x
    if y > 709.0:
        return math.inf
    return math.exp(y)


def _round_cushion(est: float, ymax: float) -> float:
    """Absolute slack covering the float rounding of the expansion itself.

    exp(y) carries a relative error of about |y| ulps (the argument y is
    itself rounded), so the cushion scales with the largest exponent
    magnitude that went into the estimate, not with a fixed ulp count.
    """
    return (32.0 + 16.0 * ymax) * _ULP * abs(est) + 1e-300


def _em_tail(a: int, b: int, p: float) -> tuple[float, float]:
    """Euler-Maclaurin estimate and error bound for S(a, b, p), a >= 2.

    Returns (estimate, err) with the true sum in [estimate - err,
    estimate + err].  Assumes b - a is large enough that the expansion is
    meaningful (callers sum small ranges directly).
    """
    la, lb = math.log(a), math.log(b)
    if abs(p - 1.0) < 1e-15:
        integral = lb - la
    else:
        # (a**(1-p) - b**(1-p)) / (p - 1), computed in a form that stays
        # finite-or-inf without producing nan when terms overflow.
        xa = (1.0 - p) * la
        xb = (1.0 - p) * lb
        if p > 1.0:
            integral = math.exp(xa) * -math.expm1(xb - xa) / (p - 1.0)
        else:
            if xb > 709.0:
                return math.inf, math.inf
            integral = math.exp(xb) * -math.expm1(xa - xb) / (1.0 - p)
    est = integral + (_pow_neg(la, p) + _pow_neg(lb, p)) / 2.0
    est += (p / 12.0) * (_pow_neg(la, p + 1.0) - _pow_neg(lb, p + 1.0))
    c3 = p * (p + 1.0) * (p + 2.0) / 720.0
    est -= c3 * (_pow_neg(la, p + 3.0) - _pow_neg(lb, p + 3.0))
    c5 = p * (p + 1.0) * (p + 2.0) * (p + 3.0) * (p + 4.0) / 30240.0
    err = c5 * (_pow_neg(la, p + 5.0) + _pow_neg(lb, p + 5.0))
    err += _round_cushion(est, (p + 5.0) * max(la, lb))
    return est, err


def _em_inf_tail(a: int, p: float) -> tuple[float, float]:
    """Euler-Maclaurin estimate and error bound for S(a, infinity, p), p > 1."""
    la = math.log(a)
    est = _pow_neg(la, p - 1.0) / (p - 1.0) + _pow_neg(la, p) / 2.0
    est += (p / 12.0) * _pow_neg(la, p + 1.0)
    est -= (p * (p + 1.0) * (p + 2.0) / 720.0) * _pow_neg(la, p + 3.0)
    err = (p * (p + 1.0) * (p + 2.0) * (p + 3.0) * (p + 4.0) / 30240.0) * _pow_neg(la, p + 5.0)
    err += _round_cushion(est, (p + 5.0) * la)
    return est, err


def _direct(a: int, b: int, p: float) -> float:
    return math.fsum(_pow_neg(math.log(i), p) for i in range(a, b + 1))


def power_sum_brackets(start: int, stop: int | None, p: float) -> tuple[float, float]:
    """Certified bracket [lo, hi] containing S(start, stop, p).

    ``stop=None`` means the infinite tail, which requires p > 1.  For short
    ranges the bracket degenerates to the exactly rounded direct sum widened
    by a few ulps.
    """
    if start < 1:
        raise ValueError("power sums start at index 1")
    if p <= 0:
        raise ValueError("exponent p must be positive")
    if stop is None:
        if p <= 1.0:
            raise ValueError("infinite power sum needs p > 1")
        head_end = start + _EM_HEAD - 1
        head = _direct(start, head_end, p)
        est, err = _em_inf_tail(head_end + 1, p)
        tot = head + est
        err += _round_cushion(tot, p * math.log(head_end))
        return tot - err, tot + err
    if stop < start:
        return 0.0, 0.0
    if stop - start + 1 <= 4 * _EM_HEAD:
        s = _direct(start, stop, p)
        w = _round_cushion(s, p * math.log(stop))
        return s - w, s + w
    head_end = start + _EM_HEAD - 1
    head = _direct(start, head_end, p)
    est, err = _em_tail(head_end + 1, stop, p)
    tot = head + est
    err += _round_cushion(tot, p * math.log(head_end))
    return tot - err, tot + err


def power_sum(start: int, stop: int | None, p: float) -> float:
    """Best estimate of S(start, stop, p); exact (to rounding) on small ranges."""
    if stop is not None and stop - start + 1 <= DIRECT_LIMIT:
        if stop < start:
            return 0.0
        if p <= 0:
            raise ValueError("exponent p must be positive")
        if start < 1:
            raise ValueError("power sums start at index 1")
        return _direct(start, stop, p)
    lo, hi = power_sum_brackets(start, stop, p)
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ReachResult:
    """Smallest index where a running power sum reaches a target.

    index: minimal L with coeff * S(start, L, p) >= target, by the certified
        route described below.
    certified: True when the bracket arithmetic separates L from L-1, so the
        minimality is proven; False when the crossing fell inside bracket
        noise and ``index`` is the smallest index guaranteed to reach the
        target (possibly overshooting minimality by the reported slack).
    slack: upper bound on how far ``index`` may exceed the true minimum
        (0 when certified).
    """

    index: int
    certified: bool
    slack: int


def _estimate_span(start: int, p: float, goal: float) -> float:
    """Rough integral-based guess of L - start needed to reach the goal.

    Order of magnitude only; used to decide between walking the sum term by
    term and bisecting on brackets.  May return inf.
    """
    ls = math.log(start)
    if abs(p - 1.0) < 1e-15:
        if goal > 700.0:
            return math.inf
        return start * math.expm1(goal)
    x = (1.0 - p) * ls
    if x > 709.0:
        return math.inf
    base = math.exp(x)
    if p > 1.0:
        rem = base - goal * (p - 1.0)
        if rem <= 0.0:
            return math.inf
        log_l = math.log(rem) / (1.0 - p)
    else:
        log_l = math.log(base + goal * (1.0 - p)) / (1.0 - p)
    if log_l > 709.0:
        return math.inf
    return math.exp(log_l) - start


def first_index_reaching(start: int, p: float, target: float, coeff: float = 1.0) -> ReachResult:
    """Minimal L >= start with coeff * sum_{i=start}^{L} i**(-p) >= target.

    Walks the sum directly (Kahan compensated) while the range is small;
    beyond DIRECT_LIMIT terms it switches to bisection on the certified
    Euler-Maclaurin brackets.  Raises if the target is unreachable (finite
    total below target, only possible for p > 1).
    """
    if target <= 0:
        return ReachResult(start, True, 0)
    if coeff <= 0:
        raise ValueError("coeff must be positive")
    if start < 1:
        raise ValueError("power sums start at index 1")
    goal = target / coeff
    known_lt = start - 1
    if _estimate_span(start, p, goal) <= DIRECT_LIMIT:
        # Direct compensated walk.
        s = 0.0
        c = 0.0
        i = start
        limit = start + 2 * DIRECT_LIMIT
        while i < limit:
            term = _pow_neg(math.log(i), p)
            y = term - c
            t = s + y
            c = (t - s) - y
            s = t
            if s >= goal:
                return ReachResult(i, True, 0)
            i += 1
        known_lt = limit - 1
    if p > 1.0:
        _, total_hi = power_sum_brackets(start, None, p)
        if total_hi < goal:
            raise ValueError("target exceeds the infinite sum; no index reaches it")
    # Bisection on certified brackets: find lo with sum surely < goal and
    # hi with sum surely >= goal.
    hi = max(2 * known_lt, known_lt + 1)
    while True:
        blo, bhi = power_sum_brackets(start, hi, p)
        if blo >= goal:
            break
        if bhi < goal:
            known_lt = hi
        hi *= 2
    lo = known_lt
    while hi - lo > 1:
        mid = (lo + hi) // 2
        blo, bhi = power_sum_brackets(start, mid, p)
        if blo >= goal:
            hi = mid
        elif bhi < goal:
            lo = mid
        else:
            # The bracket at mid straddles the goal, so float arithmetic
            # cannot decide mid itself.  Pin down the ambiguity band
            # [band_lo, band_hi]: below it the sum is surely short of the
            # goal, at band_hi it surely reaches it.  Each edge is found by
            # its own bisection (the band can be wide when individual terms
            # are far below the bracket width).
            band_lo = _bisect_edge(start, p, goal, lo, mid, sure_side="hi")
            band_hi = _bisect_edge(start, p, goal, mid, hi, sure_side="lo")
            if band_hi == band_lo:
                return ReachResult(band_hi, True, 0)
            return ReachResult(band_hi, False, abs(band_hi - band_lo))
    return ReachResult(hi, True, 0)


def _bisect_edge(start: int, p: float, goal: float, lo: int, hi: int, sure_side: str) -> int:
    """Edge of the bracket-ambiguity band between decided endpoints.

    sure_side="hi": smallest L in (lo, hi] whose bracket upper end reaches
    the goal (entering the band from below).  sure_side="lo": smallest L
    whose bracket lower end reaches the goal (leaving the band above).
    """
    while hi - lo > 1:
        mid = (lo + hi) // 2
        blo, bhi = power_sum_brackets(start, mid, p)
        val = bhi if sure_side == "hi" else blo
        if val >= goal:
            hi = mid
        else:
            lo = mid
    return hi
