"""Inverse branches, cylinders and the two-sheet transition structure.

An inverse branch ``h_{a,b}(x, y) = (1/(a+x), (b+y)/(a+x))`` undoes one step
of the Ostrowski map.  Compositions over a word stay homographic with integer
coefficients, which lets vertices and areas be computed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ValidationError
from .numeration import DigitPair, DigitWord, require_admissible

SHEETS = (0, 1)


def inverse_branch(d, pt):
    a, b = d
    x, y = pt
    return 1 / (a + x), (b + y) / (a + x)


def compose(word, pt):
    """Apply ``h_{a_1,b_1} o ... o h_{a_n,b_n}`` one branch at a time."""
    for d in reversed(DigitWord(word).pairs):
        pt = inverse_branch(d, pt)
    return pt


@dataclass(frozen=True)
class CompiledBranch:
    """``h_word`` as ``((p + x p')/(q + x q'), (R + x R' + y)/(q + x q'))``.

    Here ``p = p_cur``, ``p' = p_prev`` and so on.  Calling with Fractions
    gives exact results.
    """

    p_prev: int
    p_cur: int
    q_prev: int
    q_cur: int
    R: int
    R_prime: int
    word: DigitWord

    def __call__(self, x, y):
        den = self.q_cur + x * self.q_prev
        return (self.p_cur + x * self.p_prev) / den, (self.R + x * self.R_prime + y) / den

    def invert(self, X, Y):
        """Preimage of ``(X, Y)`` under the branch (vectorised over arrays)."""
        x = (self.p_cur - self.q_cur * X) / (self.q_prev * X - self.p_prev)
        y = Y * (self.q_cur + x * self.q_prev) - self.R - x * self.R_prime
        return x, y

    def contains(self, X, Y):
        """Whether ``(X, Y)`` lies in ``h_word([0,1]^2)``."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            x, y = self.invert(X, Y)
        return (x >= 0) & (x <= 1) & (y >= 0) & (y <= 1)


def compile_word(word) -> CompiledBranch:
    word = require_admissible(word)
    p = [1, 0]  # p_{-1}, p_0
    q = [0, 1]
    for a, _ in word:
        p.append(a * p[-1] + p[-2])
        q.append(a * q[-1] + q[-2])
    n = len(word)
    pn, pn1, qn, qn1 = p[n + 1], p[n], q[n + 1], q[n]
    R = Rp = 0
    for i, (_, b) in enumerate(word, start=1):
        if b == 0:
            continue
        # list index k+1 holds p_k, q_k
        c0 = q[i] * pn - p[i] * qn
        c1 = q[i] * pn1 - p[i] * qn1
        sign = 1 if (c0 or c1) > 0 else -1
        R += b * sign * c0
        Rp += b * sign * c1
    return CompiledBranch(pn1, pn, qn1, qn, R, Rp, word)


def jacobian(branch: CompiledBranch, x):
    return 1 / (branch.q_cur + x * branch.q_prev) ** 3


def distortion_ratio(branch: CompiledBranch, x1, x2):
    """``J(x1)/J(x2)``; bounded by 8 on the unit interval."""
    return ((branch.q_cur + x2 * branch.q_prev) / (branch.q_cur + x1 * branch.q_prev)) ** 3


@dataclass(frozen=True)
class Cylinder:
    branch: CompiledBranch
    A: tuple[Fraction, Fraction]
    B: tuple[Fraction, Fraction]
    C: tuple[Fraction, Fraction]
    D: tuple[Fraction, Fraction]
    measure: Fraction
    diam: float
    diam_lower: float
    diam_upper: float

    @property
    def vertices(self):
        return self.A, self.B, self.C, self.D

    @property
    def bounds_ok(self) -> bool:
        return self.diam_lower <= self.diam <= self.diam_upper

    def bounding_box(self):
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return min(xs), max(xs), min(ys), max(ys)


def cylinder_measure(q_cur: int, q_prev: int) -> Fraction:
    """Exact value of the integral of ``(q_n + x q_{n-1})^-3`` over [0, 1]."""
    return Fraction(2 * q_cur + q_prev, 2 * q_cur**2 * (q_cur + q_prev) ** 2)


def cylinder(word) -> Cylinder:
    word = DigitWord(word)
    for i, (a, b) in enumerate(word, start=1):
        if b == a:
            raise ValidationError(f"pair {i} has b = a; only words with b < a have quadrilateral cylinders")
    h = compile_word(word)
    zero, one = Fraction(0), Fraction(1)
    A, B, C, D = h(zero, zero), h(zero, one), h(one, zero), h(one, one)
    diam = max(
        math.hypot(float(u[0] - v[0]), float(u[1] - v[1]))
        for k, u in enumerate((A, B, C, D))
        for v in (A, B, C, D)[k + 1 :]
    )
    return Cylinder(
        h,
        A,
        B,
        C,
        D,
        cylinder_measure(h.q_cur, h.q_prev),
        diam,
        1 / (h.q_cur + h.q_prev),
        2 / h.q_cur,
    )


def monte_carlo_measure(cyl: Cylinder, samples: int, rng: np.random.Generator, chunk: int = 1 << 18):
    """Hit-counting estimate of the cylinder area in its bounding box.

    Returns ``(estimate, standard_error)`` with the binomial error.
    """
    x0, x1, y0, y1 = (float(v) for v in cyl.bounding_box())
    box = (x1 - x0) * (y1 - y0)
    hits = 0
    left = samples
    while left > 0:
        m = min(chunk, left)
        X = x0 + (x1 - x0) * rng.random(m)
        Y = y0 + (y1 - y0) * rng.random(m)
        hits += int(np.count_nonzero(cyl.branch.contains(X, Y)))
        left -= m
    p = hits / samples
    return box * p, box * math.sqrt(p * (1 - p) / samples)


@dataclass(frozen=True)
class TransitionMatrix:
    """Entry ``(j, i)`` is 1 when the branch maps sheet ``i`` into sheet ``j``."""

    entries: tuple[tuple[int, int], tuple[int, int]]

    def __getitem__(self, ji):
        j, i = ji
        return self.entries[j][i]

    def column(self, i):
        return (self.entries[0][i], self.entries[1][i])

    def as_array(self):
        return np.array(self.entries, dtype=int)


_ZERO = TransitionMatrix(((0, 0), (0, 0)))


def transition_matrix(d) -> TransitionMatrix:
    a, b = d
    if a < 1 or not 0 <= b <= a:
        return _ZERO
    if b == a:
        return TransitionMatrix(((0, 0), (1, 0)))
    if b == 0:
        return TransitionMatrix(((1, 1), (0, 0)))
    return TransitionMatrix(((0, 0), (1, 1)))


def tau(d, i: int) -> int:
    m = transition_matrix(d)
    for j in SHEETS:
        if m[j, i]:
            return j
    return i


def word_admissible_from_sheet(word, i: int) -> bool:
    """Product of matrix entries along the chain of sheets.

    The last pair acts first: ``h_{a_n,b_n}`` must accept points of sheet
    ``i``, then each earlier pair must accept the sheet produced so far.
    """
    if i not in SHEETS:
        raise ValidationError(f"sheet must be 0 or 1, got {i}")
    sheet = i
    for d in reversed(DigitWord(word).pairs):
        j = tau(d, sheet)
        if not transition_matrix(d)[j, sheet]:
            return False
        sheet = j
    return True


def image_sheet(word, i: int) -> int:
    """``tau_1 o ... o tau_n (i)``."""
    for d in reversed(DigitWord(word).pairs):
        i = tau(d, i)
    return i


def sheet_of(x, y):
    """0 on ``y < x``, 1 on ``x <= y``."""
    return np.where(np.asarray(y) < np.asarray(x), 0, 1)
