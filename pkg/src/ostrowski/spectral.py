"""Two-sheet transfer operator: discretisation and leading spectral data.

Functions live on the two sheets ``Delta_0 = {y < x}`` and
``Delta_1 = {x <= y}``.  For weights that depend only on the digit pair, the
functions that do not depend on ``y`` form an invariant subspace, so the
operator reduces to a 2x2 system of one-variable operators

    (L psi)_i(x) = sum_a (a+x)^(-3s) [ c_i0(a) psi_0(1/(a+x)) + c_i1(a) psi_1(1/(a+x)) ]

where ``c_ij(a)`` sums ``exp(w f(a, b))`` over the digits ``b`` whose
transition matrix sends sheet ``i`` to sheet ``j``.  Each ``psi_i`` is
represented by its values on Chebyshev-Lobatto nodes in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, PositivityError, ValidationError
from .geometry import transition_matrix

GOLDEN = (math.sqrt(5) - 1) / 2
ITO_CONST = 1 / (2 * math.log(2))


# ---------------------------------------------------------------- weights


@dataclass(frozen=True)
class WeightSpec:
    """Potential ``w * f(a, b)`` with ``f`` the indicator of a digit predicate.

    ``support_bound`` must dominate every ``a`` for which the predicate holds.
    """

    kind: str = "none"
    w: float = 0.0
    predicate: Callable[[int, int], bool] | None = None
    support_bound: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "digit_indicator"):
            raise ValidationError(f"unknown weight kind {self.kind!r}")
        if self.kind == "digit_indicator" and (self.predicate is None or self.support_bound < 1):
            raise ValidationError("digit_indicator weights need a predicate and a positive support_bound")
        if abs(self.w) > 1:
            raise ValidationError("|w| must be at most 1")

    @classmethod
    def constrained_digits(cls, N: int, w: float) -> "WeightSpec":
        """Indicator of ``a <= N, b = a - 1``."""
        return cls("digit_indicator", w, lambda a, b: a <= N and b == a - 1, N)

    def factor(self, a: int, b: int) -> float:
        if self.kind == "none" or self.w == 0 or not self.predicate(a, b):
            return 1.0
        return math.exp(self.w)


@dataclass(frozen=True)
class SpectralConfig:
    s: float = 1.0
    weight: WeightSpec = field(default_factory=WeightSpec)
    degree: int = 24
    a_max: int = 64
    tail_order: int = 2
    constrained_N: int | None = None

    def __post_init__(self):
        if self.degree < 0:
            raise ValidationError("degree must be non-negative")
        if self.tail_order not in (0, 1, 2):
            raise ValidationError("tail_order must be 0, 1 or 2")
        if self.constrained_N is not None:
            if self.constrained_N < 1:
                raise ValidationError("constrained_N must be positive")
            return
        if not 2 / 3 < self.s <= 1.5:
            raise ValidationError(f"s = {self.s} outside (2/3, 1.5]; the branch sum diverges for 3s <= 2")
        if self.a_max < max(1, self.weight.support_bound):
            raise ValidationError("a_max must be at least the weight support bound")

    def branch_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Branch levels ``a`` and the coefficients ``c[a_index, i, j]``."""
        wt = self.weight
        if self.constrained_N is not None:
            a_vals = np.arange(1, self.constrained_N + 1)
            c = np.zeros((len(a_vals), 2, 2))
            for k, a in enumerate(a_vals):
                j = 0 if a == 1 else 1
                c[k, :, j] = wt.factor(int(a), int(a) - 1)
            return a_vals, c
        a_vals = np.arange(1, self.a_max + 1)
        c = np.zeros((len(a_vals), 2, 2))
        for k, a in enumerate(a_vals):
            a = int(a)
            if wt.kind == "none" or wt.w == 0 or a > wt.support_bound:
                c[k] = [[1, a], [1, a - 1]]
                continue
            for b in range(a + 1):
                m = transition_matrix((a, b))
                for i in (0, 1):
                    for j in (0, 1):
                        if m[j, i]:
                            c[k, i, j] += wt.factor(a, b)
        return a_vals, c


# multiplicity of branches a > a_max as alpha*a + beta, indexed [i][j]
_TAIL_MULT = {(0, 0): (0, 1), (0, 1): (1, 0), (1, 0): (0, 1), (1, 1): (1, -1)}


# ---------------------------------------------------------------- collocation


def lobatto_nodes(g: int) -> np.ndarray:
    if g == 0:
        return np.array([0.5])
    return (1 - np.cos(np.pi * np.arange(g + 1) / g)) / 2


def barycentric_weights(g: int) -> np.ndarray:
    w = (-1.0) ** np.arange(g + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def cardinal_matrix(nodes: np.ndarray, bw: np.ndarray, t) -> np.ndarray:
    """Values of the Lagrange cardinal functions at points ``t``: shape (len(t), len(nodes))."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if len(nodes) == 1:
        return np.ones((len(t), 1))
    diff = t[:, None] - nodes[None, :]
    exact = diff == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = bw[None, :] / diff
        out = terms / terms.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    out[hit] = exact[hit].astype(float)
    return out


def differentiation_matrix(nodes: np.ndarray, bw: np.ndarray) -> np.ndarray:
    n = len(nodes)
    if n == 1:
        return np.zeros((1, 1))
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (bw[None, :] / bw[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


@dataclass(frozen=True)
class SheetFunction:
    """Pair of polynomials given by their values on the collocation nodes."""

    values: np.ndarray  # shape (2, g+1)

    @property
    def degree(self) -> int:
        return self.values.shape[1] - 1

    @property
    def nodes(self) -> np.ndarray:
        return lobatto_nodes(self.degree)

    def __call__(self, sheet, x):
        C = cardinal_matrix(self.nodes, barycentric_weights(self.degree), x)
        x_arr = np.asarray(x, dtype=float)
        sheet = np.broadcast_to(np.asarray(sheet), np.atleast_1d(x_arr).shape)
        out = np.where(sheet == 0, C @ self.values[0], C @ self.values[1])
        return out if x_arr.ndim else float(out[0])

    def lifted(self, x, y):
        """``kappa Phi``: the sheet function selected by the sheet of ``(x, y)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self(np.where(y < x, 0, 1), x)

    def integral(self, n: int = 64) -> float:
        """Integral of ``kappa Phi`` over the unit square."""
        t, w = np.polynomial.legendre.leggauss(n)
        x = (t + 1) / 2
        return float(0.5 * np.sum(w * (x * self(0, x) + (1 - x) * self(1, x))))

    def scaled(self, c: float) -> "SheetFunction":
        return SheetFunction(self.values * c)


# ---------------------------------------------------------------- assembly


def _tail_block(cfg: SpectralConfig, t: np.ndarray, i: int, j: int, rows: np.ndarray) -> np.ndarray:
    """Contribution of branches ``a > a_max`` to block (i, j), using a
    Taylor expansion of ``psi_j`` at 0 and Hurwitz zeta sums."""
    alpha, beta = _TAIL_MULT[i, j]
    q = cfg.a_max + 1 + t
    out = np.zeros((len(t), rows.shape[1]))
    for r in range(cfg.tail_order + 1):
        e = 3 * cfg.s + r
        coef = (beta - alpha * t) * special.zeta(e, q)
        if alpha:
            coef = coef + alpha * special.zeta(e - 1, q)
        out += np.outer(coef / math.factorial(r), rows[r])
    return out


def operator_rows(cfg: SpectralConfig, t) -> np.ndarray:
    """Matrix taking node values of ``(psi_0, psi_1)`` to ``(L psi)_i(t)``.

    Output rows are ordered sheet-major: ``i * len(t) + k``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    g = cfg.degree
    nodes, bw = lobatto_nodes(g), barycentric_weights(g)
    G, T = g + 1, len(t)
    a_vals, c = cfg.branch_coefficients()
    M = np.zeros((2 * T, 2 * G))
    for k, a in enumerate(a_vals):
        u = 1 / (a + t)
        wt = (a + t) ** (-3 * cfg.s)
        C = cardinal_matrix(nodes, bw, u) * wt[:, None]
        for i in (0, 1):
            for j in (0, 1):
                if c[k, i, j]:
                    M[i * T : (i + 1) * T, j * G : (j + 1) * G] += c[k, i, j] * C
    if cfg.constrained_N is None:
        D = differentiation_matrix(nodes, bw)
        row = cardinal_matrix(nodes, bw, [0.0])[0]
        rows = [row]
        for _ in range(cfg.tail_order):
            rows.append(rows[-1] @ D)
        rows = np.array(rows)
        for i in (0, 1):
            for j in (0, 1):
                M[i * T : (i + 1) * T, j * G : (j + 1) * G] += _tail_block(cfg, t, i, j, rows)
    return M


def assemble(cfg: SpectralConfig) -> np.ndarray:
    return operator_rows(cfg, lobatto_nodes(cfg.degree))


# ---------------------------------------------------------------- eigensolver


@dataclass(frozen=True)
class SpectralResult:
    lam: float
    eigenfunction: SheetFunction
    residual: float  # sup of |L Phi - lam Phi| on the verification grid
    node_residual: float  # same on the collocation nodes
    rho: float
    iterations: int
    config: SpectralConfig

    @property
    def gap_ratio(self) -> float:
        return self.rho / self.lam


def power_iteration(M: np.ndarray, rtol: float = 1e-13, max_iter: int = 10_000):
    v = np.ones(M.shape[0])
    v /= np.linalg.norm(v)
    lam = None
    for it in range(1, max_iter + 1):
        Mv = M @ v
        new = float(v @ Mv)
        nrm = np.linalg.norm(Mv)
        if nrm == 0:
            raise ConvergenceError("operator annihilated the iterate")
        v = Mv / nrm
        if lam is not None and abs(new - lam) <= rtol * abs(new):
            return new, v, it
        lam = new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def leading_eig(M: np.ndarray, cfg: SpectralConfig, rtol: float = 1e-13, max_iter: int = 10_000) -> SpectralResult:
    lam, v, its = power_iteration(M, rtol, max_iter)
    v = v * np.sign(v.sum())
    if v.min() < -1e-10 * np.abs(v).max():
        raise PositivityError(f"leading eigenvector has a negative entry ({v.min():.3e})")
    G = cfg.degree + 1
    phi = SheetFunction(v.reshape(2, G))
    phi = phi.scaled(1 / phi.integral())
    vals = phi.values.ravel()
    node_res = float(np.abs(M @ vals - lam * vals).max())

    grid = np.linspace(0, 1, max(4 * cfg.degree, 4))
    Lphi = operator_rows(cfg, grid) @ vals
    here = np.concatenate([phi(0, grid), phi(1, grid)])
    residual = float(np.abs(Lphi - lam * here).max())

    ev = np.linalg.eigvals(M)
    order = np.argsort(np.abs(ev - lam))
    rho = float(np.abs(ev[order[1:]]).max()) if len(ev) > 1 else 0.0
    return SpectralResult(lam, phi, residual, node_res, rho, its, cfg)


def solve(cfg: SpectralConfig) -> SpectralResult:
    return leading_eig(assemble(cfg), cfg)


def eigenvalue(s: float, cfg: SpectralConfig | None = None, **overrides) -> float:
    """Leading eigenvalue at exponent ``s`` (other settings from ``cfg``)."""
    cfg = replace(cfg or SpectralConfig(), s=s, **overrides)
    lam, _, _ = power_iteration(assemble(cfg))
    return lam


# ---------------------------------------------------------------- Ito density


def ito_density(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = ITO_CONST * np.where(y < x, x + 3, x + 2) / (1 + x) ** 2
    return out if out.ndim else float(out)


def ito_sheets(x):
    """Ito density restricted to sheet 0 and sheet 1, as functions of ``x``."""
    x = np.asarray(x, dtype=float)
    return ITO_CONST * (x + 3) / (1 + x) ** 2, ITO_CONST * (x + 2) / (1 + x) ** 2


def density_sample_points(n: int = 200, seed: int = 20240601) -> np.ndarray:
    return np.random.default_rng(seed).random((n, 2))


def density_error(result: SpectralResult, points: np.ndarray | None = None) -> float:
    pts = density_sample_points() if points is None else points
    phi = result.eigenfunction.scaled(1 / result.eigenfunction.integral())
    x, y = pts[:, 0], pts[:, 1]
    return float(np.abs(phi.lifted(x, y) - ito_density(x, y)).max())


# ---------------------------------------------------------------- 2-d check


def residual_2d(result: SpectralResult, samples, lam: float | None = None) -> float:
    """Sup residual of the full two-variable operator on the lifted eigenfunction.

    ``samples`` holds rows ``(x, y)`` or ``(x, y, sheet)``.  Each branch
    ``(a, b)`` is gated by its transition matrix column, applied to the point
    itself, and the eigenfunction is read on the sheet of the image point.
    """
    cfg = result.config
    lam = result.lam if lam is None else lam
    samples = np.asarray(samples, dtype=float)
    x, y = samples[:, 0], samples[:, 1]
    sheet = samples[:, 2].astype(int) if samples.shape[1] > 2 else np.where(y < x, 0, 1)
    phi = result.eigenfunction
    wt = cfg.weight
    if cfg.constrained_N is not None:
        pairs = [(a, a - 1) for a in range(1, cfg.constrained_N + 1)]
    else:
        pairs = [(a, b) for a in range(1, cfg.a_max + 1) for b in range(a + 1)]
    total = np.zeros_like(x)
    for a, b in pairs:
        m = transition_matrix((a, b))
        gate = np.array([m.column(i) != (0, 0) for i in (0, 1)])[sheet]
        if not gate.any():
            continue
        X, Y = 1 / (a + x), (b + y) / (a + x)
        total += gate * (a + x) ** (-3 * cfg.s) * wt.factor(a, b) * phi.lifted(X, Y)
    if cfg.constrained_N is None:
        G = cfg.degree + 1
        nodes, bw = lobatto_nodes(cfg.degree), barycentric_weights(cfg.degree)
        rows = [cardinal_matrix(nodes, bw, [0.0])[0]]
        D = differentiation_matrix(nodes, bw)
        for _ in range(cfg.tail_order):
            rows.append(rows[-1] @ D)
        rows = np.array(rows)
        for i in (0, 1):
            sel = sheet == i
            if not sel.any():
                continue
            for j in (0, 1):
                total[sel] += _tail_block(cfg, x[sel], i, j, rows) @ phi.values[j][:G]
    return float(np.abs(total - lam * phi(sheet, x)).max())


# ---------------------------------------------------------------- derivatives


def _richardson(fun, s0: float, h: float) -> tuple[float, float, float]:
    def d5(h):
        return (-fun(s0 + 2 * h) + 8 * fun(s0 + h) - 8 * fun(s0 - h) + fun(s0 - 2 * h)) / (12 * h)

    d1, d2 = d5(h), d5(h / 2)
    return (16 * d2 - d1) / 15, d1, d2


def eig_derivative_s(s0: float, cfg: SpectralConfig | None = None, h: float = 1e-3, rtol: float = 1e-6) -> float:
    """``d lambda / ds`` at ``s0`` by five-point differences and one Richardson step."""
    cfg = cfg or SpectralConfig()
    c, d1, d2 = _richardson(lambda s: eigenvalue(s, cfg), s0, h)
    if abs(d1 - d2) > rtol * abs(c) + 1e-12:
        raise ConvergenceError(f"finite differences disagree at step {h}: {d1} vs {d2}")
    return c


def eig_derivative_w(cfg: SpectralConfig, h: float = 1e-3, rtol: float = 1e-6) -> float:
    """``d lambda / dw`` at ``w = 0`` for the weight predicate in ``cfg``."""
    base = cfg.weight

    def lam(w):
        return eigenvalue(cfg.s, replace(cfg, weight=replace(base, w=w)))

    c, d1, d2 = _richardson(lam, 0.0, h)
    if abs(d1 - d2) > rtol * abs(c) + 1e-12:
        raise ConvergenceError(f"finite differences disagree at step {h}: {d1} vs {d2}")
    return c


def eig_derivative_quadrature(a_split: int = 100_000, nodes: int = 24) -> float:
    """``d lambda / ds`` at ``s = 1`` from the integral of ``(dL_s/ds) phi_*``.

    At ``s = 1`` Lebesgue measure is the left eigenvector and the Ito
    density the right one, so the derivative is
    ``-3 sum_{(a,b)} int log(a+x) (a+x)^-3 phi_*(h_{a,b}(x, y)) dx dy``
    with the sum gated by the transition matrices.  Digits ``a <= a_split``
    are summed exactly; the rest by the midpoint integral.
    """
    t, w = np.polynomial.legendre.leggauss(nodes)
    x = (t + 1) / 2
    w = w / 2

    def per_level(a):
        a = np.asarray(a, dtype=float)[:, None]
        u = 1 / (a + x)
        g0, g1 = ito_sheets(u)
        core = np.log(a + x) * (a + x) ** -3
        # sheet 0 (height x) sees 1 branch into sheet 0 and a into sheet 1,
        # sheet 1 (height 1-x) sees 1 and a-1
        row0 = g0 + a * g1
        row1 = g0 + (a - 1) * g1
        return (core * (x * row0 + (1 - x) * row1)) @ w

    head = 0.0
    for lo in range(1, a_split + 1, 20_000):
        head += float(per_level(np.arange(lo, min(lo + 20_000, a_split + 1))).sum())
    # substitute a = 1/v; the integrand then has only a log singularity at v = 0
    tail, _ = integrate.quad(
        lambda v: float(per_level([1 / v])[0]) / v**2 if v > 0 else 0.0, 0.0, 1 / (a_split + 0.5), limit=200
    )
    return -3 * (head + tail)


def eig_derivative_display(a_max: int = 100_000) -> float:
    """Direct evaluation of a double-sum expression sometimes quoted for the
    derivative (kept as a diagnostic; it does not equal the derivative)."""
    t, w = np.polynomial.legendre.leggauss(24)
    x = (t + 1) / 2
    w = w / 2
    a = np.arange(1, a_max + 1, dtype=float)[:, None]
    core = np.log(a + x) / (a + x) ** 3
    den = (a + x) ** 2 * (a + 1 + x) ** 2
    first = (a + 1) * x * core * ((3 * a + 1) + 3 * x) / den
    second = a * x * core * ((2 * a + 1) + 2 * x) / den
    return float(ITO_CONST * ((second - first) @ w).sum())


def golden_lambda(s: float) -> float:
    """Closed form for the single-branch family ``N = 1``."""
    return GOLDEN ** (3 * s)
