"""Bounds for the Hausdorff dimension of ``E_N``, the set of points whose
digits satisfy ``a_i <= N`` and ``b_i = a_i - 1``.

With ``lambda_{N,s}`` the leading eigenvalue of the operator restricted to
those branches, the bounds are ``3 s1 / 2 <= dim <= s2`` where
``lambda_{N,s1} = 1`` and ``N^2 lambda_{N,s2} = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ._parallel import ordered_map
from .errors import BracketError, ValidationError
from .spectral import SpectralConfig, eig_derivative_s, eigenvalue

LEFT_START = 1 / 3 + 1e-9
RIGHT_START = 1.5


def constrained_lambda(N: int, s: float, degree: int = 24) -> float:
    return eigenvalue(s, SpectralConfig(s=s, degree=degree, constrained_N=N))


@dataclass(frozen=True)
class RootInfo:
    s: float
    residual: float
    bracket: tuple[float, float]
    iterations: int


def solve_pressure_root(N: int, target: float, tol: float = 1e-12, degree: int = 24, max_iter: int = 200) -> RootInfo:
    """Root of ``lambda_{N,s} = target`` by bracketing and bisection."""
    if N < 1:
        raise ValidationError("N must be at least 1")
    if tol < 1e-12:
        raise ValidationError("tol must be at least 1e-12")
    if target <= 0:
        raise ValidationError("target must be positive")

    def f(s):
        return constrained_lambda(N, s, degree) - target

    lo, hi = LEFT_START, RIGHT_START
    f_lo, f_hi = f(lo), f(hi)
    step = 0.5
    while f_lo < 0:
        lo -= step
        step *= 2
        if lo < -50:
            raise BracketError(f"no left bracket for target {target} at N={N}")
        f_lo = f(lo)
    step = 0.5
    while f_hi > 0:
        hi += step
        step *= 2
        if hi > 50:
            raise BracketError(f"no right bracket for target {target} at N={N}")
        f_hi = f(hi)
    if not f_lo >= 0 >= f_hi:
        raise BracketError(f"eigenvalue not monotone across [{lo}, {hi}]")
    bracket = (lo, hi)

    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid > 0:
            lo = mid
        else:
            hi = mid
        if abs(f_mid) <= tol and hi - lo <= 1e-12:
            return RootInfo(mid, abs(f_mid), bracket, it)
        if hi - lo <= 4e-16 * max(1.0, abs(mid)):
            break
    s = 0.5 * (lo + hi)
    res = abs(f(s))
    if res > tol:
        raise BracketError(f"bisection stalled at s={s} with residual {res:.3e}")
    return RootInfo(s, res, bracket, it)


@dataclass(frozen=True)
class DimensionBounds:
    N: int
    s1: float
    s2: float
    lower: float
    upper: float
    tol: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def ordered(self) -> bool:
        return self.lower <= self.upper


def bounds(N: int, tol: float = 1e-12, degree: int = 24) -> DimensionBounds:
    r1 = solve_pressure_root(N, 1.0, tol, degree)
    r2 = r1 if N == 1 else solve_pressure_root(N, 1.0 / N**2, tol, degree)
    diag = {
        "s1": {"bracket": list(r1.bracket), "iterations": r1.iterations, "residual": r1.residual},
        # residual of N^2 lambda - 1
        "s2": {"bracket": list(r2.bracket), "iterations": r2.iterations, "residual": N**2 * r2.residual},
    }
    return DimensionBounds(N, r1.s, r2.s, 1.5 * r1.s, r2.s, tol, diag)


def bounds_many(Ns, tol: float = 1e-12, degree: int = 24) -> list[DimensionBounds]:
    return ordered_map(lambda N: bounds(N, tol, degree), Ns)


@dataclass(frozen=True)
class PerturbationRow:
    N: int
    lam: float  # lambda_{N, 1 - s/N}
    predicted: float  # 1 - c s / N
    deviation: float

    @property
    def scaled(self) -> float:
        return self.deviation * self.N**2


def perturbation_check(N_list, s: float = 1.0, c: float | None = None, degree: int = 24) -> list[PerturbationRow]:
    """Compare ``lambda_{N,1-s/N}`` with the first-order prediction ``1 - c s/N``.

    ``c`` defaults to ``d lambda_s / ds`` at ``s = 1`` for the full operator.
    """
    if c is None:
        c = eig_derivative_s(1.0, replace(SpectralConfig(), degree=degree))
    rows = []
    for N in N_list:
        if N < 1:
            raise ValidationError("N must be positive")
        lam = constrained_lambda(N, 1 - s / N, degree)
        pred = 1 - c * s / N
        rows.append(PerturbationRow(N, lam, pred, abs(lam - pred)))
    return rows
