"""Monte Carlo experiments for the Ostrowski map under its invariant measure.

Starting points are drawn exactly from the invariant measure ``mu`` (Ito's
density), so no burn-in is needed.  Orbits are run in double precision with
the vectorised map; the rare exact zero in ``x`` is replaced by a fresh
sample.

Work is split into fixed-size chunks, each with its own generator derived
from ``(seed, stream_id, chunk)``.  Results are concatenated in chunk order,
so output does not depend on the number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, stats

from ._parallel import ordered_map
from .errors import ValidationError
from .spectral import ito_sheets

LOG2 = math.log(2)
CHUNK = 1 << 14


@dataclass(frozen=True)
class RandomSource:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.stream_id < 0:
            raise ValidationError("stream_id must be non-negative")

    def generator(self, chunk: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, chunk))
        return np.random.Generator(np.random.PCG64(ss))

    def stream(self, stream_id: int) -> "RandomSource":
        return RandomSource(self.seed, stream_id)


def _chunked(samples: int, source: RandomSource, work: Callable[[np.random.Generator, int], np.ndarray]):
    sizes = [min(CHUNK, samples - k) for k in range(0, samples, CHUNK)]
    parts = ordered_map(lambda k: work(source.generator(k), sizes[k]), range(len(sizes)))
    return np.concatenate(parts, axis=-1) if parts else np.empty(0)


# ---------------------------------------------------------------- sampling


def gauss_inverse_cdf(u):
    """Inverse CDF of the density ``1/((1+x) log 2)`` on [0, 1]."""
    return np.exp2(u) - 1


def prob_lower_sheet(x):
    """``P(y < x | x)`` under ``mu``."""
    return x * (x + 3) / (2 * (1 + x))


def sample_mu(gen: np.random.Generator, size: int):
    x = gauss_inverse_cdf(gen.random(size))
    lower = gen.random(size) < prob_lower_sheet(x)
    v = gen.random(size)
    y = np.where(lower, x * v, x + (1 - x) * v)
    return x, y


def step(x: np.ndarray, y: np.ndarray, gen: np.random.Generator | None = None):
    """One application of the map.  Returns ``(a, b, x', y')``.

    Points with ``x = 0`` are resampled from ``mu`` first when ``gen`` is
    given.
    """
    if gen is not None:
        zero = x == 0
        if zero.any():
            x = x.copy()
            y = y.copy()
            x[zero], y[zero] = sample_mu(gen, int(zero.sum()))
    inv = 1 / x
    a = np.floor(inv)
    r = y * inv
    b = np.floor(r)
    xn = inv - a
    yn = r - b
    # guard against rounding up to 1
    np.minimum(xn, np.nextafter(1.0, 0.0), out=xn)
    np.minimum(yn, np.nextafter(1.0, 0.0), out=yn)
    return a, b, xn, yn


def orbit(x, y, n: int, gen: np.random.Generator | None = None):
    for _ in range(n):
        _, _, x, y = step(x, y, gen)
    return x, y


# ---------------------------------------------------------------- laws


def yn_law_cdf(z):
    """Published limit law ``F(z)`` for ``y_n``, with ``(2-z) log(2-z)`` as the middle term."""
    z = np.asarray(z, dtype=float)
    # rearranged so that F(0) = 0 and F(1) = 1 hold exactly in floating point
    out = (2 + z) / 2 - ((2 - z) * np.log(2 - z) + z * np.log1p(z)) / (2 * LOG2)
    return out if out.ndim else float(out)


def y_marginal_cdf(z):
    """``mu(y <= z)`` by quadrature of the invariant density."""
    def one(zz):
        f = lambda x: ito_sheets(x)[0] * min(x, zz) + ito_sheets(x)[1] * max(0.0, zz - x)
        return integrate.quad(f, 0, 1, points=[zz], epsabs=1e-13)[0]

    z = np.asarray(z, dtype=float)
    out = np.vectorize(one)(z)
    return out if out.ndim else float(out)


def digit_cell_mass(a: int, b: int) -> float:
    """``mu`` of the cell ``{floor(1/x) = a, floor(y/x) = b}`` by quadrature."""
    if a < 1 or not 0 <= b <= a:
        return 0.0
    g = ito_sheets

    def f(x):
        length = min((b + 1) * x, 1.0) - b * x
        return max(length, 0.0) * (g(x)[0] if b == 0 else g(x)[1])

    return integrate.quad(f, 1 / (a + 1), 1 / a, epsabs=1e-14, epsrel=1e-12)[0]


# ---------------------------------------------------------------- observables


@dataclass(frozen=True)
class Observable:
    """``f - centering`` where ``f`` is a digit predicate, ``1{y <= z}`` or ``1{y < x}``.

    ``predicate`` takes arrays ``(a, b)`` of the current point's first digits;
    ``support_bound`` bounds the ``a`` where it can hold (used for the mean).
    """

    kind: str
    centering: float = 0.0
    predicate: Callable | None = None
    support_bound: int = 0
    z: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("digit_predicate", "yn_indicator", "sheet0_indicator", "zero"):
            raise ValidationError(f"unknown observable kind {self.kind!r}")
        if self.kind == "digit_predicate" and (self.predicate is None or self.support_bound < 1):
            raise ValidationError("digit predicates need a predicate and a support bound")
        if self.kind == "yn_indicator" and not (self.z is not None and 0 <= self.z <= 1):
            raise ValidationError("yn_indicator needs 0 <= z <= 1")

    @classmethod
    def sheet0(cls, centered: bool = True) -> "Observable":
        return cls("sheet0_indicator", 0.5 if centered else 0.0, name="sheet0")

    @classmethod
    def zero(cls) -> "Observable":
        return cls("zero", name="zero")

    @classmethod
    def constrained_digits(cls, N: int, centered: bool = True) -> "Observable":
        pred = lambda a, b: (a <= N) & (b == a - 1)
        obs = cls("digit_predicate", 0.0, pred, N, name=f"digits_le_{N}")
        return obs.centered() if centered else obs

    @classmethod
    def y_below(cls, z: float, centered: bool = True) -> "Observable":
        obs = cls("yn_indicator", 0.0, z=z, name=f"y_le_{z}")
        return obs.centered() if centered else obs

    def centered(self) -> "Observable":
        return Observable(self.kind, mu_mean(self), self.predicate, self.support_bound, self.z, self.name)

    def raw(self, x, y):
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "sheet0_indicator":
            return (y < x).astype(float)
        if self.kind == "yn_indicator":
            return (y <= self.z).astype(float)
        with np.errstate(divide="ignore"):
            a = np.floor(1 / x)
            b = np.floor(y / x)
        return np.asarray(self.predicate(a, b), dtype=float)

    def __call__(self, x, y):
        return self.raw(x, y) - self.centering


def mu_mean(obs: Observable) -> float:
    if obs.kind == "zero":
        return 0.0
    if obs.kind == "sheet0_indicator":
        return integrate.quad(lambda x: x * ito_sheets(x)[0], 0, 1, epsabs=1e-14)[0]
    if obs.kind == "yn_indicator":
        return y_marginal_cdf(obs.z)
    total = 0.0
    for a in range(1, obs.support_bound + 1):
        for b in range(a + 1):
            if obs.predicate(np.array(a), np.array(b)):
                total += digit_cell_mass(a, b)
    return total


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class SimulationReport:
    observable: str
    samples: int
    depth: int
    mean: float
    variance: float
    cdf_table: list = field(default_factory=list)  # (z, empirical, theoretical)
    ks_stat: float = 0.0  # sup over the table
    ks_exact: float = 0.0  # sup over all z
    sigma2_gk: float | None = None
    extra: dict = field(default_factory=dict)


def _cdf_table(values: np.ndarray, cdf, grid) -> tuple[list, float, float]:
    srt = np.sort(values)
    emp = np.searchsorted(srt, grid, side="right") / len(srt)
    theo = np.asarray(cdf(grid), dtype=float)
    table = [(float(z), float(e), float(t)) for z, e, t in zip(grid, emp, theo)]
    ks_table = float(np.abs(emp - theo).max())
    ks_exact = float(stats.kstest(values, cdf).statistic)
    return table, ks_table, ks_exact


def yn_samples(samples: int, depth: int, source: RandomSource) -> np.ndarray:
    def work(gen, m):
        x, y = sample_mu(gen, m)
        _, y = orbit(x, y, depth, gen)
        return y

    return _chunked(samples, source, work)


def yn_law_experiment(samples: int, depth: int, source: RandomSource, grid=None, cdf=yn_law_cdf) -> SimulationReport:
    """Empirical law of ``y_n`` (the skew coordinate after ``depth`` steps)
    against ``cdf`` (``F`` by default)."""
    if depth < 20:
        raise ValidationError("depth must be at least 20")
    y = yn_samples(samples, depth, source)
    grid = np.linspace(0, 1, 101) if grid is None else np.asarray(grid)
    table, ks, ks_exact = _cdf_table(y, cdf, grid)
    ks_marginal = float(stats.kstest(y, y_marginal_cdf_closed).statistic)
    return SimulationReport(
        "yn", samples, depth, float(y.mean()), float(y.var()), table, ks, ks_exact,
        extra={"ks_invariant_marginal": ks_marginal},
    )


def y_marginal_cdf_closed(z):
    """Closed form of ``mu(y <= z)``: ``(z log 2 + log(1+z)) / (2 log 2)``."""
    z = np.asarray(z, dtype=float)
    return (z * LOG2 + np.log1p(z)) / (2 * LOG2)


def birkhoff_sums(obs: Observable, n: int, samples: int, source: RandomSource) -> np.ndarray:
    def work(gen, m):
        x, y = sample_mu(gen, m)
        acc = np.zeros(m)
        for _ in range(n):
            acc += obs(x, y)
            _, _, x, y = step(x, y, gen)
        return acc

    return _chunked(samples, source, work)


@dataclass(frozen=True)
class GreenKubo:
    sigma2: float
    stderr: float
    partial_sums: np.ndarray  # sigma^2 truncated at lag 0, 1, ..., max_lag
    lag_terms: np.ndarray  # estimated E[f f o S^k]
    lag_stderr: np.ndarray
    per_sample: np.ndarray  # per-sample contributions to each partial sum, shape (max_lag+1, samples)

    def difference(self, lag_a: int, lag_b: int) -> tuple[float, float]:
        """``sigma^2(lag_b) - sigma^2(lag_a)`` and its standard error."""
        d = self.per_sample[lag_b] - self.per_sample[lag_a]
        return float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.size))


def lagged_products(
    obs_a: Observable, obs_b: Observable, max_lag: int, samples: int, source: RandomSource, offsets: int = 1
) -> np.ndarray:
    """Per-sample estimates of ``E[f_a . f_b o S^k]`` for ``k = 0..max_lag``.

    Each orbit contributes the average of ``f_a(p_j) f_b(p_{j+k})`` over
    ``j < offsets``; every ``p_j`` is again ``mu``-distributed.  Shape is
    ``(max_lag + 1, samples)`` and columns are independent.
    """
    if offsets < 1:
        raise ValidationError("offsets must be positive")

    def work(gen, m):
        x, y = sample_mu(gen, m)
        length = offsets + max_lag
        fa = np.empty((offsets, m))
        fb = np.empty((length, m))
        for t in range(length):
            if t < offsets:
                fa[t] = obs_a(x, y)
            fb[t] = obs_b(x, y)
            if t < length - 1:
                _, _, x, y = step(x, y, gen)
        out = np.empty((max_lag + 1, m))
        for k in range(max_lag + 1):
            out[k] = np.einsum("jm,jm->m", fa, fb[k : k + offsets]) / offsets
        return out

    return _chunked(samples, source, work)


def sigma_green_kubo(
    obs: Observable, max_lag: int, samples: int, source: RandomSource, offsets: int = 64
) -> GreenKubo:
    """``sigma^2 = E[f^2] + 2 sum_{k<=max_lag} E[f . f o S^k]`` by Monte Carlo.

    ``partial_sums[L]`` is the estimate truncated at lag ``L``.
    """
    prods = lagged_products(obs, obs, max_lag, samples, source, offsets)
    if prods.size == 0:
        raise ValidationError("samples must be positive")
    weights = np.r_[1.0, np.full(max_lag, 2.0)]
    per_sample = np.cumsum(weights[:, None] * prods, axis=0)
    partial = per_sample.mean(axis=1)
    se = per_sample.std(axis=1, ddof=1) / math.sqrt(samples) if samples > 1 else np.zeros(max_lag + 1)
    lag_terms = prods.mean(axis=1)
    lag_se = prods.std(axis=1, ddof=1) / math.sqrt(samples) if samples > 1 else np.zeros(max_lag + 1)
    return GreenKubo(float(partial[-1]), float(se[-1]), partial, lag_terms, lag_se, per_sample)


def birkhoff_experiment(
    obs: Observable,
    n: int,
    samples: int,
    source: RandomSource,
    sigma2: float | None = None,
    gk_lag: int = 30,
    gk_samples: int | None = None,
) -> SimulationReport:
    """Distribution of ``S_n f / sqrt(n)`` against ``N(0, sigma^2)``.

    ``sigma^2`` comes from Green-Kubo on an independent stream unless given.
    """
    if sigma2 is None:
        gk = sigma_green_kubo(obs, gk_lag, gk_samples or samples, source.stream(source.stream_id + 1_000_003))
        sigma2 = gk.sigma2
    sums = birkhoff_sums(obs, n, samples, source)
    scaled = sums / math.sqrt(n)
    raw_avg = sums / n + obs.centering
    extra = {
        "birkhoff_mean": float(raw_avg.mean()),
        "birkhoff_mean_stderr": float(raw_avg.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0,
        "mu_mean": obs.centering,
    }
    if sigma2 > 0:
        sd = math.sqrt(sigma2)
        cdf = lambda z: stats.norm.cdf(z, scale=sd)
        table, ks, ks_exact = _cdf_table(scaled, cdf, lattice_midpoints(obs, n, sd))
    else:
        table, ks, ks_exact = [], float(np.abs(scaled).max()), float(np.abs(scaled).max())
    return SimulationReport(obs.name, samples, n, float(scaled.mean()), float(scaled.var()), table, ks, ks_exact, sigma2, extra)


def lattice_midpoints(obs: Observable, n: int, sd: float, width: float = 4.0) -> np.ndarray:
    """Points halfway between the attainable values of ``S_n f / sqrt(n)``.

    All observables here are indicators, so ``S_n f + n * centering`` is an
    integer; comparing the empirical and normal CDFs between lattice points
    is the usual continuity correction.
    """
    root = math.sqrt(n)
    shift = n * obs.centering
    lo = math.floor(shift - width * sd * root)
    hi = math.ceil(shift + width * sd * root)
    k = np.arange(lo, hi + 1)
    return (k + 0.5 - shift) / root


@dataclass(frozen=True)
class CorrelationTable:
    lags: np.ndarray
    corr: np.ndarray
    stderr: np.ndarray
    slope: float  # least-squares slope of log|corr| against lag
    fit_lags: np.ndarray


def correlation_decay(
    obs_a: Observable, obs_b: Observable, lags, samples: int, source: RandomSource, offsets: int = 64
) -> CorrelationTable:
    """Estimated ``E[f_a . f_b o S^k]`` with a log-linear decay fit over the
    lags ``k >= 1`` where the estimate exceeds three standard errors."""
    lags = np.asarray(sorted(set(int(k) for k in lags)))
    if lags.size == 0 or lags[0] < 0:
        raise ValidationError("lags must be non-negative")
    prods = lagged_products(obs_a, obs_b, int(lags[-1]), samples, source, offsets)[lags]
    corr = prods.mean(axis=1)
    se = prods.std(axis=1, ddof=1) / math.sqrt(samples)
    use = (lags >= 1) & (np.abs(corr) > 3 * se)
    slope = float("nan")
    if use.sum() >= 2:
        slope = float(np.polyfit(lags[use], np.log(np.abs(corr[use])), 1)[0])
    return CorrelationTable(lags, corr, se, slope, lags[use])


def independent_correlation(obs: Observable, samples: int, source_a: RandomSource, source_b: RandomSource, n: int = 10):
    """Mean of ``f(S^n p) f(S^n q)`` with ``p, q`` from unrelated streams, and its standard error."""

    def endpoint(source):
        def work(gen, m):
            x, y = sample_mu(gen, m)
            x, y = orbit(x, y, n, gen)
            return obs(x, y)

        return _chunked(samples, source, work)

    prod = endpoint(source_a) * endpoint(source_b)
    return float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(samples))


# ---------------------------------------------------------------- invariance


@dataclass(frozen=True)
class InvarianceReport:
    p0_initial: float
    p0_pushed: float
    p0_stderr: float
    bin_edges: np.ndarray
    hist_initial: np.ndarray
    hist_pushed: np.ndarray
    hist_expected: np.ndarray
    hist_stderr: np.ndarray


def invariance_check(samples: int, source: RandomSource, bins: int = 20) -> InvarianceReport:
    """Statistics of ``mu``-samples before and after one step of the map."""

    def work(gen, m):
        x, y = sample_mu(gen, m)
        _, _, x1, y1 = step(x, y, gen)
        return np.stack([x, y, x1, y1])

    x, y, x1, y1 = _chunked(samples, source, work)
    edges = np.linspace(0, 1, bins + 1)
    expected = np.diff(np.log2(1 + edges))
    h0 = np.histogram(x, edges)[0] / samples
    h1 = np.histogram(x1, edges)[0] / samples
    return InvarianceReport(
        float((y < x).mean()),
        float((y1 < x1).mean()),
        math.sqrt(0.25 / samples),
        edges,
        h0,
        h1,
        expected,
        np.sqrt(expected * (1 - expected) / samples),
    )


def digit_count_means(N: int, checkpoints, samples: int, source: RandomSource):
    """Mean of ``D_{N,n}`` (visits to the digit set ``a <= N, b = a - 1``)
    at each checkpoint ``n``, with standard errors."""
    obs = Observable.constrained_digits(N, centered=False)
    checkpoints = sorted(int(c) for c in checkpoints)
    n_max = checkpoints[-1]

    def work(gen, m):
        x, y = sample_mu(gen, m)
        acc = np.zeros(m)
        out = np.empty((len(checkpoints), m))
        k = 0
        for n in range(1, n_max + 1):
            acc += obs(x, y)
            _, _, x, y = step(x, y, gen)
            if n == checkpoints[k]:
                out[k] = acc
                k += 1
        return out

    counts = _chunked(samples, source, work)
    return np.array(checkpoints), counts.mean(axis=1), counts.std(axis=1, ddof=1) / math.sqrt(samples)
