import math

import numpy as np
import pytest
from scipy import stats

from ostrowski.errors import ValidationError
from ostrowski.stochastics import (
    Observable,
    RandomSource,
    birkhoff_experiment,
    birkhoff_sums,
    correlation_decay,
    digit_cell_mass,
    digit_count_means,
    gauss_inverse_cdf,
    independent_correlation,
    invariance_check,
    mu_mean,
    sample_mu,
    sigma_green_kubo,
    step,
    y_marginal_cdf,
    y_marginal_cdf_closed,
    yn_law_cdf,
    yn_law_experiment,
)

import oracles


def test_random_source_reproducible():
    a = RandomSource(7, 3).generator(2).random(5)
    b = RandomSource(7, 3).generator(2).random(5)
    c = RandomSource(7, 4).generator(2).random(5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    with pytest.raises(ValidationError):
        RandomSource(-1)


def test_inverse_cdf_endpoints():
    assert gauss_inverse_cdf(0.0) == 0.0 and gauss_inverse_cdf(1.0) == 1.0


def test_sampler_marginals():
    x, y = sample_mu(np.random.default_rng(0), 10**6)
    p = (y < x).mean()
    assert abs(p - 0.5) <= 4 * math.sqrt(0.25 / 10**6)
    edges = np.linspace(0, 1, 21)
    obs = np.histogram(x, edges)[0]
    exp = np.diff(np.log2(1 + edges)) * len(x)
    assert stats.chisquare(obs, exp).pvalue > 0.01
    assert np.all((0 <= x) & (x < 1) & (0 <= y) & (y < 1))


def test_step_matches_definition():
    a, b, x, y = step(np.array([0.7]), np.array([0.65]))
    assert (a[0], b[0]) == (1, 0)
    assert x[0] == pytest.approx(1 / 0.7 - 1) and y[0] == pytest.approx(0.65 / 0.7)


def test_step_resamples_zero():
    gen = np.random.default_rng(1)
    _, _, x, y = step(np.array([0.0, 0.5]), np.array([0.3, 0.2]), gen)
    assert np.all(x < 1) and np.all(y < 1)


def test_F_values():
    assert yn_law_cdf(0.0) == 0.0
    assert yn_law_cdf(1.0) == 1.0
    assert yn_law_cdf(0.5) == pytest.approx(oracles.F_HALF, abs=1e-15)
    assert yn_law_cdf(0.5) == pytest.approx(oracles.F_HALF_ROUNDED, abs=1e-5)
    z = np.linspace(0, 1, 50)
    assert np.all(np.diff(yn_law_cdf(z)) > 0)


def test_y_marginal_closed_form():
    for z in (0.0, 0.1, 0.5, 0.9, 1.0):
        assert y_marginal_cdf(z) == pytest.approx(oracles.y_marginal(z), abs=1e-12)
        assert y_marginal_cdf_closed(z) == pytest.approx(oracles.y_marginal(z), abs=1e-15)


def test_yn_law_small_run_matches_invariant_marginal():
    rep = yn_law_experiment(20_000, 20, RandomSource(3))
    assert rep.extra["ks_invariant_marginal"] <= 1.63 / math.sqrt(20_000)
    emp = [e for _, e, _ in rep.cdf_table]
    assert np.all(np.diff(emp) >= 0) and emp[0] >= 0 and emp[-1] == 1.0
    assert rep.ks_stat <= rep.ks_exact + 1e-12
    with pytest.raises(ValidationError):
        yn_law_experiment(10, 5, RandomSource(3))


def test_yn_law_dkw_band():
    n = 10**5
    rep = yn_law_experiment(n, 50, RandomSource(2024))
    eps = math.sqrt(math.log(2 / 0.01) / (2 * n))
    assert rep.ks_exact <= eps, f"KS {rep.ks_exact:.4f} outside the 99% DKW band {eps:.4f}"


def test_means_by_quadrature():
    assert mu_mean(Observable.sheet0(centered=False)) == pytest.approx(0.5, abs=1e-12)
    assert digit_cell_mass(1, 0) + digit_cell_mass(1, 1) == pytest.approx(math.log2(4 / 3), abs=1e-12)
    total = sum(digit_cell_mass(a, b) for a in range(1, 200) for b in range(a + 1))
    assert total == pytest.approx(1 - math.log2(1 + 1 / 200), abs=1e-9)
    z = 0.3
    assert mu_mean(Observable.y_below(z, centered=False)) == pytest.approx(oracles.y_marginal(z), abs=1e-12)


def test_null_observable():
    src = RandomSource(1)
    rep = birkhoff_experiment(Observable.zero(), 50, 500, src, sigma2=0.0)
    assert rep.mean == 0 and rep.variance == 0
    assert sigma_green_kubo(Observable.zero(), 5, 500, src).sigma2 == 0


def test_green_kubo_lag_zero():
    gk = sigma_green_kubo(Observable.sheet0(), 10, 20_000, RandomSource(4))
    assert gk.partial_sums[0] == pytest.approx(0.25, abs=1e-12)
    assert len(gk.partial_sums) == 11


def test_green_kubo_stabilises():
    gk = sigma_green_kubo(Observable.sheet0(), 60, 50_000, RandomSource(99))
    diff, se = gk.difference(30, 60)
    assert abs(diff) <= 2 * se


def test_birkhoff_mean_for_digit_set():
    obs = Observable.constrained_digits(3)
    rep = birkhoff_experiment(obs, 200, 5000, RandomSource(12), sigma2=1.0)
    ex = rep.extra
    assert abs(ex["birkhoff_mean"] - ex["mu_mean"]) <= 3 * ex["birkhoff_mean_stderr"]


def test_dnn_linear_growth():
    N = 2
    mean = mu_mean(Observable.constrained_digits(N, centered=False))
    ns, means, ses = digit_count_means(N, [250, 500, 1000], 4000, RandomSource(5))
    slope = np.polyfit(ns, means, 1)[0]
    assert abs(slope - mean) <= 0.01 * mean
    assert abs(means[-1] / 1000 - mean) <= 0.01 * mean


def test_clt_small():
    rep = birkhoff_experiment(Observable.sheet0(), 400, 4000, RandomSource(8), gk_lag=20, gk_samples=20_000)
    assert rep.sigma2_gk == pytest.approx(0.158, abs=0.01)
    assert rep.ks_stat <= 0.03


def test_correlation_decay_and_controls():
    obs = Observable.sheet0()
    tab = correlation_decay(obs, obs, range(0, 12), 50_000, RandomSource(21))
    assert tab.corr[0] > 0
    rho = 0.3036630028987
    assert tab.slope <= math.log(rho) + 0.1
    m, se = independent_correlation(obs, 50_000, RandomSource(21, 1), RandomSource(21, 2))
    assert abs(m) <= 3 * se


def test_invariance_small():
    rep = invariance_check(200_000, RandomSource(6))
    assert abs(rep.p0_pushed - 0.5) <= 4 * rep.p0_stderr
    assert np.all(np.abs(rep.hist_pushed - rep.hist_expected) <= 4 * rep.hist_stderr)


def test_determinism_independent_of_threads(monkeypatch):
    obs = Observable.sheet0()
    runs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("OSTROWSKI_THREADS", threads)
        runs.append(birkhoff_sums(obs, 30, 40_000, RandomSource(77)))
    assert np.array_equal(runs[0], runs[1])
    monkeypatch.setenv("OSTROWSKI_THREADS", "0")
    with pytest.raises(ValidationError):
        birkhoff_sums(obs, 3, 40_000, RandomSource(77))
