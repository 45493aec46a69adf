"""Forward dynamics of the Ostrowski map S(x, y) = ({1/x}, {y/x}).

Inputs are taken at their exact binary value: a float ``x`` is the rational
``Fraction(x)``, and the orbit is run on a common integer denominator.  One
step is then a single Euclidean division,

    x = u/d, y = v/d   ->   a = d // u, b = v // u, x' = (d % u)/u, y' = (v % u)/u,

so digits, continuants, approximants and every ``|theta_k|`` are exact.  A
float therefore always has a finite expansion (it is rational); the trace is
flagged terminal when ``x`` reaches 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from .errors import AdmissibilityError, ContinuantOverflowError, ValidationError

# Python integers do not overflow; this cap stands in for a word size.  It is
# large enough for any float input (denominators are at most 2**1074).
DEFAULT_MAX_BITS = 4096

RULE3_NOTE = "rule 3 (infinitely many a != b at odd and even indices) is not decidable on a finite prefix"


class DigitPair(NamedTuple):
    """Ostrowski digit pair ``(a, b)``; ``(0, 0)`` marks a terminal step."""

    a: int
    b: int

    @property
    def is_terminal(self) -> bool:
        return self.a == 0


def _coerce_pair(p) -> DigitPair:
    if isinstance(p, DigitPair):
        return p
    a, b = p
    return DigitPair(int(a), int(b))


@dataclass(frozen=True)
class DigitWord:
    pairs: tuple[DigitPair, ...] = ()

    def __init__(self, pairs: Iterable = ()):
        object.__setattr__(self, "pairs", tuple(_coerce_pair(p) for p in pairs))

    @property
    def markov_ok(self) -> bool:
        return all(
            p.a != p.b or nxt.b == 0 for p, nxt in zip(self.pairs, self.pairs[1:])
        )

    @property
    def a(self) -> tuple[int, ...]:
        return tuple(p.a for p in self.pairs)

    @property
    def b(self) -> tuple[int, ...]:
        return tuple(p.b for p in self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return DigitWord(self.pairs[i])
        return self.pairs[i]

    def __add__(self, other) -> "DigitWord":
        return DigitWord(self.pairs + DigitWord(other).pairs)

    def __mul__(self, k: int) -> "DigitWord":
        return DigitWord(self.pairs * k)

    def __str__(self) -> str:
        return ",".join(f"{p.a}:{p.b}" for p in self.pairs)

    @classmethod
    def parse(cls, text: str) -> "DigitWord":
        """Parse ``"a1:b1, a2:b2, ..."`` (whitespace-insensitive)."""
        text = "".join(text.split())
        if not text:
            return cls()
        pairs = []
        for chunk in text.split(","):
            try:
                a, b = chunk.split(":")
                pairs.append(DigitPair(int(a), int(b)))
            except ValueError:
                raise ValidationError(f"malformed digit pair {chunk!r}; expected a:b") from None
        return cls(pairs)


@dataclass(frozen=True)
class Continuants:
    """Convergent data after ``n`` digits.

    ``theta_prev``/``theta_cur`` hold ``|theta_{n-1}|`` and ``|theta_n|`` as
    exact fractions.
    """

    p_prev: int = 1
    p_cur: int = 0
    q_prev: int = 0
    q_cur: int = 1
    theta_prev: Fraction = Fraction(1)
    theta_cur: Fraction = Fraction(0)

    def advance(self, a: int, theta_next: Fraction) -> "Continuants":
        return Continuants(
            self.p_cur,
            a * self.p_cur + self.p_prev,
            self.q_cur,
            a * self.q_cur + self.q_prev,
            self.theta_cur,
            theta_next,
        )

    @property
    def determinant(self) -> int:
        """``q_n p_{n-1} - p_n q_{n-1}``, equal to ``(-1)**n``."""
        return self.q_cur * self.p_prev - self.p_cur * self.q_prev


def as_fraction(v) -> Fraction:
    """Exact rational value of an int, float, Fraction, numpy scalar or mpf."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    man_exp = getattr(v, "man_exp", None)
    if man_exp is not None:
        man, exp = man_exp
        man = int(man)
        return Fraction(man * 2**exp) if exp >= 0 else Fraction(man, 2 ** (-exp))
    return Fraction(float(v))


@dataclass(frozen=True)
class OrbitState:
    """Point ``S^depth(x0, y0)`` with its history.

    The point is stored as ``x = xnum/scale, y = ynum/scale`` and ``base`` is
    the common denominator of the starting point, so ``|theta_depth| =
    xnum/base``.
    """

    base: int
    scale: int
    xnum: int
    ynum: int
    depth: int = 0
    continuants: Continuants = field(default_factory=Continuants)
    digits: DigitWord = field(default_factory=DigitWord)
    approximant: int = 0

    @classmethod
    def start(cls, x, y) -> "OrbitState":
        fx, fy = as_fraction(x), as_fraction(y)
        if not (0 <= fx < 1 and 0 <= fy < 1):
            raise ValidationError(f"(x, y) = ({float(fx)}, {float(fy)}) is outside [0,1)^2")
        d = math.lcm(fx.denominator, fy.denominator)
        xnum = fx.numerator * (d // fx.denominator)
        ynum = fy.numerator * (d // fy.denominator)
        return cls(d, d, xnum, ynum, continuants=Continuants(theta_cur=Fraction(xnum, d)))

    @property
    def x(self) -> float:
        return self.xnum / self.scale

    @property
    def y(self) -> float:
        return self.ynum / self.scale

    @property
    def x_exact(self) -> Fraction:
        return Fraction(self.xnum, self.scale)

    @property
    def y_exact(self) -> Fraction:
        return Fraction(self.ynum, self.scale)

    @property
    def terminal(self) -> bool:
        return self.xnum == 0

    @property
    def remainder(self) -> Fraction:
        """``y_n |theta_{n-1}|``, the part of ``y`` not yet expanded."""
        return Fraction(self.ynum, self.base)


def ostrowski_step(state: OrbitState, max_bits: int = DEFAULT_MAX_BITS) -> tuple[DigitPair, OrbitState]:
    """Apply S once.  At ``x = 0`` returns ``(0, 0)`` and the terminal origin."""
    if state.xnum == 0:
        return DigitPair(0, 0), replace(state, ynum=0)
    u = state.xnum
    a, xnum = divmod(state.scale, u)
    b, ynum = divmod(state.ynum, u)
    cont = state.continuants
    depth = state.depth + 1
    new_cont = cont.advance(a, Fraction(xnum, state.base))
    if max(abs(new_cont.q_cur), abs(new_cont.p_cur)).bit_length() > max_bits:
        raise ContinuantOverflowError(depth, max_bits)
    # M_{n+1} = M_n + b_{n+1} (-1)^n q_n
    approximant = state.approximant + (b * cont.q_cur if state.depth % 2 == 0 else -b * cont.q_cur)
    if approximant.bit_length() > max_bits:
        raise ContinuantOverflowError(depth, max_bits)
    pair = DigitPair(a, b)
    return pair, OrbitState(
        state.base,
        u,
        xnum,
        ynum,
        depth,
        new_cont,
        DigitWord(state.digits.pairs + (pair,)),
        approximant,
    )


class Expansion(NamedTuple):
    word: DigitWord
    orbit: list[tuple[float, float]]
    continuants: list[Continuants]
    states: list[OrbitState]
    terminated: bool

    @property
    def final(self) -> OrbitState:
        return self.states[-1]


def expand(x, y, depth: int, max_bits: int = DEFAULT_MAX_BITS) -> Expansion:
    """First ``depth`` digit pairs of ``(x, y)``.

    ``orbit`` and ``continuants`` include the starting point (index 0), so
    they have ``len(word) + 1`` entries.  ``terminated`` is set when some
    ``x_i`` hits 0 before ``depth`` digits were produced.
    """
    if depth < 1:
        raise ValidationError("depth must be >= 1")
    state = OrbitState.start(x, y)
    states = [state]
    while state.depth < depth and not state.terminal:
        _, state = ostrowski_step(state, max_bits)
        states.append(state)
    return Expansion(
        state.digits,
        [(s.x, s.y) for s in states],
        [s.continuants for s in states],
        states,
        state.terminal and state.depth < depth,
    )


class ContinuantRow(NamedTuple):
    k: int
    p: int
    q: int
    theta: Fraction | None  # signed q_k x - p_k


def continuant_table(a_seq: Sequence[int], x=None) -> list[ContinuantRow]:
    """Rows ``k = -1, 0, ..., n`` of ``(p_k, q_k, theta_k)``.

    With ``x`` given, ``a_seq`` must match the partial quotients of ``x``.
    """
    a_seq = [int(a) for a in a_seq]
    if any(a < 1 for a in a_seq):
        raise ValidationError("partial quotients must be positive")
    fx = None
    if x is not None:
        fx = as_fraction(x)
        if a_seq:
            got = expand(fx, 0, len(a_seq)).word.a
            if list(got) != a_seq:
                raise ValidationError(f"partial quotients {a_seq} do not match x (expansion gives {list(got)})")

    def theta(p, q):
        return None if fx is None else q * fx - p

    rows = [ContinuantRow(-1, 1, 0, theta(1, 0)), ContinuantRow(0, 0, 1, theta(0, 1))]
    for k, a in enumerate(a_seq, start=1):
        p = a * rows[-1].p + rows[-2].p
        q = a * rows[-1].q + rows[-2].q
        rows.append(ContinuantRow(k, p, q, theta(p, q)))
    return rows


@dataclass(frozen=True)
class Verdict:
    valid_prefix: bool
    index: int | None = None
    rule: str | None = None
    note: str = RULE3_NOTE

    def __bool__(self) -> bool:
        return self.valid_prefix


def validate(word) -> Verdict:
    """Check the range rule ``0 <= b <= a`` (with ``a >= 1``) and the Markov
    rule on a finite word.  Rule 3 never rejects."""
    pairs = DigitWord(word).pairs
    for i, p in enumerate(pairs, start=1):
        if p.a < 1 or not 0 <= p.b <= p.a:
            return Verdict(False, i, "range")
        if i > 1 and pairs[i - 2].a == pairs[i - 2].b and p.b != 0:
            return Verdict(False, i, "markov")
    return Verdict(True)


def require_admissible(word) -> DigitWord:
    word = DigitWord(word)
    verdict = validate(word)
    if not verdict:
        raise AdmissibilityError(
            f"pair {verdict.index} of {word} violates the {verdict.rule} rule",
            verdict.index,
            verdict.rule,
        )
    return word


def reconstruct(x, b_seq: Sequence[int], depth: int | None = None) -> tuple[Fraction, Fraction]:
    """Partial sum ``sum_{i<=n} b_i |theta_{i-1}|`` and the tail bound
    ``|theta_{n-2}| + |theta_{n-1}|``, both exact.

    ``b_seq`` is checked against the partial quotients of ``x``.
    """
    b_seq = [int(b) for b in b_seq]
    n = len(b_seq) if depth is None else depth
    if n < 1 or n > len(b_seq):
        raise ValidationError(f"depth {n} needs 1 <= depth <= len(b_seq) = {len(b_seq)}")
    exp = expand(x, 0, n)
    if len(exp.word) < n:
        raise ValidationError(f"x has only {len(exp.word)} partial quotients; depth {n} requested")
    require_admissible(zip(exp.word.a, b_seq[:n]))
    # |theta_{k}| for k = -1 .. n-1
    thetas = [Fraction(1)] + [c.theta_cur for c in exp.continuants[:n]]
    partial = sum((b * thetas[i] for i, b in enumerate(b_seq[:n], start=1)), Fraction(0))
    bound = thetas[n - 1] + thetas[n]
    return partial, bound


def nearest_integer_distance(v: Fraction) -> Fraction:
    r = v - math.floor(v)
    return min(r, 1 - r)


class Approximant(NamedTuple):
    k: int
    M: int
    distance: Fraction  # ||y - M_k x||
    remainder: Fraction  # y_k |theta_{k-1}|


def approximants(x, y, depth: int) -> list[Approximant]:
    """Inhomogeneous approximants ``M_k = sum_{i<=k} b_i (-1)^{i-1} q_{i-1}``.

    ``distance`` is evaluated directly; it equals ``remainder`` whenever the
    remainder is at most 1/2, which holds for every ``k >= 2``.
    """
    exp = expand(x, y, depth)
    fx, fy = as_fraction(x), as_fraction(y)
    return [
        Approximant(s.depth, s.approximant, nearest_integer_distance(fy - s.approximant * fx), s.remainder)
        for s in exp.states[1:]
    ]


def check_cyclic(word) -> DigitWord:
    """Raise unless ``word`` repeated forever is an admissible expansion."""
    word = DigitWord(word)
    word = require_admissible(word)
    n = len(word)
    last, first = word[-1], word[0]
    if last.a == last.b and first.b != 0:
        raise AdmissibilityError(f"cyclic word {word} breaks the Markov rule across the period", 1, "markov")
    free = [i for i, p in enumerate(word, start=1) if p.a != p.b]
    if n % 2 == 0 and not ({i % 2 for i in free} == {0, 1}):
        raise AdmissibilityError(
            f"periodic extension of {word} has a_i = b_i at all odd or all even indices", None, "rule3"
        )
    return word


def periodic_point(word, dps: int | None = None, max_iter: int = 100_000) -> tuple:
    """Fixed point of the composed inverse branch ``h_word``.

    Iterates ``h_word`` from (1/2, 1/2) in double precision until successive
    iterates differ by less than 1e-14; with ``dps`` the iteration runs in
    mpmath at that many decimal digits (returning ``mpf`` values) and stops
    at ``10**(5 - dps)``.
    """
    word = DigitWord(word)
    if len(word) == 0:
        raise ValidationError("periodic_point needs a non-empty word")
    check_cyclic(word)
    pairs = list(reversed(word.pairs))
    if dps is None:
        one, tol = 1.0, 1e-14
        x = y = 0.5
        ctx = None
    else:
        import mpmath

        ctx = mpmath.workdps(dps)
        ctx.__enter__()
        one, tol = mpmath.mpf(1), mpmath.mpf(10) ** (5 - dps)
        x = y = mpmath.mpf(1) / 2
    try:
        for _ in range(max_iter):
            nx, ny = x, y
            for a, b in pairs:
                nx, ny = one / (a + nx), (b + ny) / (a + nx)
            if max(abs(nx - x), abs(ny - y)) < tol:
                return nx, ny
            x, y = nx, ny
    finally:
        if ctx is not None:
            ctx.__exit__(None, None, None)
    from .errors import ConvergenceError

    raise ConvergenceError(f"periodic point iteration for {word} did not converge")
