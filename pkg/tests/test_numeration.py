import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ostrowski.errors import AdmissibilityError, ContinuantOverflowError, ValidationError
from ostrowski.numeration import (
    DigitWord,
    OrbitState,
    approximants,
    as_fraction,
    check_cyclic,
    continuant_table,
    expand,
    ostrowski_step,
    periodic_point,
    reconstruct,
    validate,
)

import oracles

unit = st.floats(min_value=0.0, max_value=1.0, exclude_max=True)
hi_prec = st.integers(min_value=0, max_value=2**200 - 1).map(lambda n: Fraction(n, 2**200))


def test_step_at_zero_is_terminal():
    d, st_ = ostrowski_step(OrbitState.start(0.0, 0.5))
    assert d == (0, 0)
    assert (st_.x, st_.y) == (0.0, 0.0)
    assert st_.terminal


def test_step_example():
    d, s = ostrowski_step(OrbitState.start(0.7, 0.2))
    assert d == (1, 0)
    assert s.x == pytest.approx(0.4285714, abs=1e-7)
    assert s.y == pytest.approx(0.2857143, abs=1e-7)


def test_two_steps_allow_b_equal_a():
    e = expand(0.7, 0.65, 2)
    assert e.word.pairs == ((1, 0), (2, 2))
    assert e.orbit[-1] == pytest.approx((1 / 3, 1 / 6), abs=1e-12)


@pytest.mark.parametrize(
    "x, y, depth, word",
    [
        (0.7, 0.2, 2, ((1, 0), (2, 0))),
        (0.7, 0.65, 3, ((1, 0), (2, 2), (3, 0))),
        ((math.sqrt(5) - 1) / 2, 0.0, 4, ((1, 0),) * 4),
    ],
)
def test_expand_examples(x, y, depth, word):
    e = expand(x, y, depth)
    assert e.word.pairs == word
    assert len(e.orbit) == len(e.continuants) == depth + 1


def test_expand_flags_rational_termination():
    e = expand(0.5, 0.25, 10)
    assert e.terminated
    assert e.word.pairs == ((2, 0),)


def test_expand_rejects_bad_input():
    with pytest.raises(ValidationError):
        expand(1.0, 0.2, 3)
    with pytest.raises(ValidationError):
        expand(0.3, 0.2, 0)


def test_overflow_names_depth():
    with pytest.raises(ContinuantOverflowError, match="depth"):
        expand(Fraction(1, 3**80), 0, 5, max_bits=64)
    with pytest.raises(ContinuantOverflowError) as info:
        expand((math.sqrt(5) - 1) / 2, 0, 40, max_bits=8)
    assert info.value.depth == 13  # F_14 = 377 is the first continuant above 8 bits


def test_continuant_table_examples():
    rows = continuant_table([1, 2], 0.7)
    assert [(r.p, r.q) for r in rows[2:]] == [(1, 1), (2, 3)]
    assert float(rows[2].theta) == pytest.approx(-0.3, abs=1e-15)
    assert float(rows[3].theta) == pytest.approx(0.1, abs=1e-15)
    assert [r.q for r in continuant_table([1, 1, 1])[1:]] == [1, 1, 2, 3]
    seeds = continuant_table([], 0.7)
    assert [(r.k, r.p, r.q) for r in seeds] == [(-1, 1, 0), (0, 0, 1)]
    assert abs(seeds[0].theta) == 1 and seeds[1].theta == as_fraction(0.7)
    assert continuant_table([2])[1].theta is None


def test_continuant_table_checks_digits():
    with pytest.raises(ValidationError):
        continuant_table([2, 2], 0.7)


@given(hi_prec.filter(lambda v: v > 0), st.integers(1, 25))
@settings(max_examples=60, deadline=None)
def test_theta_identity(x, n):
    a = expand(x, 0, n).word.a
    rows = continuant_table(a, x)
    state = expand(x, 0, len(a)).final
    if state.terminal:
        return
    q, q_prev = rows[-1].q, rows[-2].q
    assert abs(rows[-2].theta) == 1 / (q + state.x_exact * q_prev)


def test_reconstruct_examples():
    partial, bound = reconstruct(0.7, [0, 0], 2)
    assert partial == 0
    e = expand(0.7, 0.2, 2)
    assert float(e.final.remainder) == pytest.approx(0.2, abs=1e-15)
    assert e.final.remainder == as_fraction(0.2)
    partial, bound = reconstruct(0.7, [0, 2, 0], 3)
    assert float(partial) == pytest.approx(0.6, abs=1e-15)
    assert float(bound) == pytest.approx(0.4, abs=1e-15)
    assert abs(as_fraction(0.65) - partial) <= bound
    assert reconstruct(0.3, [0, 0, 0])[0] == 0


def test_reconstruct_reports_violation_index():
    with pytest.raises(AdmissibilityError) as info:
        reconstruct(0.7, [0, 2, 1], 3)  # b2 = a2 = 2 forces b3 = 0
    assert info.value.index == 3 and info.value.rule == "markov"
    with pytest.raises(AdmissibilityError) as info:
        reconstruct(0.7, [2], 1)
    assert info.value.index == 1 and info.value.rule == "range"


def test_validate_examples():
    v = validate([(1, 1), (1, 1)])
    assert not v and (v.index, v.rule) == (2, "markov")
    v = validate([(2, 3)])
    assert not v and (v.index, v.rule) == (1, "range")
    v = validate([(1, 0), (2, 2), (3, 0)])
    assert v.valid_prefix and "not decidable" in v.note


def test_word_parse_and_markov():
    w = DigitWord.parse(" 1:0, 2 :2,3:0 ")
    assert w.pairs == ((1, 0), (2, 2), (3, 0)) and w.markov_ok
    assert not DigitWord([(2, 2), (1, 1)]).markov_ok
    with pytest.raises(ValidationError):
        DigitWord.parse("1-0")


def test_approximant_examples():
    apx = approximants(0.7, 0.65, 3)
    assert [t.M for t in apx] == [0, -2, -2]
    assert float(apx[1].distance) == pytest.approx(0.05, abs=1e-15)
    assert apx[1].distance == apx[1].remainder
    assert all(t.M == 0 and t.distance == 0 for t in approximants(0.3, 0.0, 5))
    apx = approximants(0.7, 0.2, 2)
    assert [t.M for t in apx] == [0, 0]
    assert float(apx[-1].distance) == pytest.approx(0.2, abs=1e-15)


def test_distance_identity_needs_remainder_below_half():
    # at n = 1 the remainder 0.65 exceeds 1/2, so the nearest-integer distance is 0.35
    first = approximants(0.7, 0.65, 1)[0]
    assert float(first.remainder) == pytest.approx(0.65)
    assert float(first.distance) == pytest.approx(0.35)
    assert first.distance == 1 - first.remainder


@given(hi_prec, hi_prec, st.integers(1, 40))
@settings(max_examples=150, deadline=None)
def test_expand_properties(x, y, n):
    e = expand(x, y, n)
    assert validate(e.word)
    assert [tuple(p) for p in e.word] == oracles.fraction_expand(x, y, n)
    for k, (c, s) in enumerate(zip(e.continuants, e.states)):
        assert c.determinant == (-1) ** k
        assert 0 <= s.x_exact < 1 and 0 <= s.y_exact < 1
        if k >= 1:
            assert 0 <= c.theta_cur <= c.theta_prev <= 1
    conv = oracles.fraction_convergents(e.word.a)
    assert [(c.p_cur, c.q_cur) for c in e.continuants] == conv
    M = sum(b * (-1) ** (i - 1) * e.continuants[i - 1].q_cur for i, (_, b) in enumerate(e.word, start=1))
    assert e.final.approximant == M


@given(unit, unit, st.integers(1, 30))
@settings(max_examples=150, deadline=None)
def test_round_trip_float_inputs(x, y, n):
    e = expand(x, y, n)
    m = len(e.word)
    if m == 0:
        return
    partial, bound = reconstruct(x, e.word.b, m)
    assert as_fraction(y) - partial == e.final.remainder
    assert abs(as_fraction(y) - partial) <= bound


@given(hi_prec, hi_prec, st.integers(2, 25))
@settings(max_examples=100, deadline=None)
def test_distance_identity(x, y, n):
    for t in approximants(x, y, n):
        if t.k >= 2:
            assert t.remainder <= Fraction(1, 2)
        if t.remainder <= Fraction(1, 2):
            assert t.distance == t.remainder


@pytest.mark.parametrize(
    "word, expect",
    [
        ([(1, 0)], (oracles.GOLDEN, 0.0)),
        ([(2, 0)], (math.sqrt(2) - 1, 0.0)),
    ],
)
def test_periodic_point_examples(word, expect):
    assert periodic_point(word) == pytest.approx(expect, abs=1e-13)


def test_periodic_point_two_one():
    x, y = periodic_point([(2, 1)])
    assert x == pytest.approx(math.sqrt(2) - 1, abs=1e-13)
    assert y == pytest.approx((1 + y) / (2 + x), abs=1e-13)
    xs, ys = periodic_point([(2, 1)], dps=60)
    assert expand(xs, ys, 12).word.pairs == ((2, 1),) * 12


def test_periodic_point_rejects_bad_cycles():
    with pytest.raises(AdmissibilityError):
        periodic_point([(2, 1), (1, 1)])  # wraps to (1,1) -> (2,1)
    with pytest.raises(AdmissibilityError):
        periodic_point([(2, 2), (3, 0)])  # a = b at every odd index
    with pytest.raises(ValidationError):
        periodic_point([])


def random_cyclic_word(rng: random.Random, max_len=5, max_a=4):
    while True:
        n = rng.randint(1, max_len)
        w = []
        for i in range(n):
            a = rng.randint(1, max_a)
            b = 0 if w and w[-1][0] == w[-1][1] else rng.randint(0, a)
            w.append((a, b))
        try:
            return check_cyclic(w)
        except AdmissibilityError:
            continue


def test_periodic_round_trip_random_words():
    rng = random.Random(5)
    for _ in range(20):
        w = random_cyclic_word(rng)
        x, y = periodic_point(w, dps=80)
        assert expand(x, y, 3 * len(w)).word.pairs == w.pairs * 3
