import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr, ndtri

import reference as ref
from calboot import _kernels as K
from calboot.errors import TooManyDegenerateResamples
from calboot.intervals import (
    STANDARD_METHODS,
    BootConfig,
    BootstrapHistograms,
    BootstrapRun,
    DegenerateBias,
    IntervalEstimate,
    Method,
    bca_constants,
    bca_interval,
    bca_levels,
    boot_t_interval,
    calibrate_lambda,
    compute_histograms,
    compute_interval,
    parse_methods,
    perc_cal_interval,
    percentile_endpoints,
    percentile_interval,
    sandwich_interval,
    studentized_endpoints,
    studentized_interval,
    z_interval,
)
from calboot.regress import Dataset, SeVariant, fit_ols, se_for
from calboot.resample import Stream, StreamKey, ecdf_position

HAND = Dataset.from_covariates([1.0, 2.0, 3.0], [1.0, 2.0, 4.0])


def noisy(seed, n=20, p=1):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, p))
    y = np.exp(z[:, 0]) + rng.standard_normal(n) * (0.5 + np.abs(z[:, 0]))
    return Dataset.from_covariates(z, y)


def exact_line(n=12):
    x = np.linspace(-1.5, 2.0, n) ** 3
    return Dataset.from_covariates(x, 2.0 * x)


def rows(d):
    return [list(r) for r in d.x_rows], list(d.y)


# analytic intervals


def test_z_hand_example():
    est = z_interval(HAND, 1, 0.90)
    assert abs(est.lower - 1.0251) < 1e-4 and abs(est.upper - 1.9749) < 1e-4
    half = float(ndtri(0.95)) * math.sqrt(1 / 12)
    assert est.lower == pytest.approx(1.5 - half, abs=1e-14)


def test_z_zero_noise_point():
    est = z_interval(exact_line(), 1, 0.9)
    assert est.lower == est.upper == 2.0 and est.length == 0.0


def test_z_nesting():
    d = noisy(3)
    a, b = z_interval(d, 1, 0.90), z_interval(d, 1, 0.99)
    assert b.lower < a.lower and a.upper < b.upper


def test_sandwich_against_dense():
    rng = np.random.default_rng(8)
    d = Dataset.from_covariates(rng.standard_normal(8), rng.standard_normal(8))
    x, y = d.x_rows, d.y
    xtx_inv = np.linalg.inv(x.T @ x)
    e = y - x @ (xtx_inv @ x.T @ y)
    cov = xtx_inv @ x.T @ np.diag(e * e) @ x @ xtx_inv
    est = sandwich_interval(d, 1, 0.9, SeVariant.HC0)
    half = float(ndtri(0.95)) * math.sqrt(cov[1, 1])
    assert abs((est.upper - est.lower) / 2 - half) < 1e-10
    hc1 = sandwich_interval(d, 1, 0.9, SeVariant.HC1)
    assert hc1.length == pytest.approx(est.length * math.sqrt(8 / 6), rel=1e-12)


def test_sandwich_zero_residuals_point():
    for v in ("HC0", "HC1", "HC2", "HC3", "HC4", "HC5"):
        est = sandwich_interval(exact_line(), 1, 0.9, SeVariant[v])
        assert est.lower == est.upper == 2.0
    with pytest.raises(ValueError):
        sandwich_interval(HAND, 1, 0.9, SeVariant.CLASSICAL)


# endpoint helpers on injected values


def test_percentile_injected():
    assert percentile_endpoints(np.arange(1.0, 101.0), 0.90) == (5.0, 95.0)


def test_studentized_injected():
    # ceiling rule: 0.25 * 4 -> 1st order statistic, 0.75 * 4 -> 3rd
    assert studentized_endpoints(0.0, 1.0, [-2.0, -1.0, 1.0, 2.0], 0.5) == (-1.0, 2.0)
    assert studentized_endpoints(0.0, 1.0, [-2.0, -1.0, 0.0, 1.0, 2.0], 0.5) == (-1.0, 1.0)
    assert studentized_endpoints(1.0, 2.0, [-1.0, 0.5], 0.5) == (0.0, 3.0)


def test_bca_reduces_to_percentile():
    est = np.array([-2.0, -1.0, 1.0, 2.0])
    z0, a = bca_constants(0.0, est, np.array([3.0, 3.0, 3.0]))
    assert z0 == 0.0 and a == 0.0
    assert bca_levels(z0, a, 0.9, 1000) == pytest.approx((0.05, 0.95), abs=1e-15)


def test_bca_symmetric_jackknife_zero_acceleration():
    _, a = bca_constants(0.0, np.array([-1.0, 1.0]), np.array([1.0, 2.0, 3.0, 4.0, 5.0]))
    assert a == 0.0


def test_bca_constants_step_by_step():
    d = noisy(21)
    run = BootstrapRun(d, BootConfig(200, 2, 5))
    th, est = run.theta_hat(1), run.first_level[:, 1]
    jk = np.array([fit_ols(d.take(np.delete(np.arange(d.n), i))).beta_hat[1] for i in range(d.n)])
    z0, a = bca_constants(th, est, run.jackknife[:, 1])
    dev = jk.mean() - jk
    assert z0 == pytest.approx(float(ndtri(np.mean(est < th))), abs=1e-12)
    assert a == pytest.approx((dev**3).sum() / (6 * (dev**2).sum() ** 1.5), abs=1e-12)
    lo, hi = bca_levels(z0, a, 0.9, 200)
    zl = z0 + ndtri(0.05)
    assert lo == pytest.approx(float(ndtr(z0 + zl / (1 - a * zl))), abs=1e-12)
    assert lo < hi


def test_calibrate_lambda_examples():
    h = BootstrapHistograms(0.0, np.zeros(4), np.array([0.2, 0.5, 0.9, 0.97]))
    assert calibrate_lambda(h, 0.5, "two", 100) == 0.8
    flat = BootstrapHistograms(0.0, np.zeros(4), np.full(4, 0.5))
    assert calibrate_lambda(flat, 0.1, "two", 100) == 0.505
    ones = BootstrapHistograms(0.0, np.zeros(4), np.ones(4))
    assert calibrate_lambda(ones, 0.1, "two", 100) == 0.995
    assert calibrate_lambda(h, 0.5, "one", 100) == 0.5 + 0.5 / 100


@settings(max_examples=100, deadline=None)
@given(depths=st.lists(st.integers(0, 50), min_size=1, max_size=30),
       a1=st.floats(0.01, 0.99), a2=st.floats(0.01, 0.99))
def test_lambda_monotone_in_alpha(depths, a1, a2):
    h = BootstrapHistograms(0.0, np.zeros(len(depths)), np.array(depths) / 50)
    small, big = sorted((a1, a2))
    for sided in ("one", "two"):
        assert calibrate_lambda(h, small, sided, 50) >= calibrate_lambda(h, big, sided, 50)


def test_estimate_validation():
    with pytest.raises(ValueError):
        IntervalEstimate(Method.PERC, 0.9, 2.0, 1.0, 1.5)
    with pytest.raises(ValueError):
        IntervalEstimate(Method.PERC_CAL_2, 0.9, 1.0, 2.0, 1.5)
    with pytest.raises(ValueError):
        IntervalEstimate(Method.PERC, 0.9, 1.0, 2.0, 1.5, lambda_hat=0.9)
    one = IntervalEstimate(Method.PERC_CAL_1, 0.9, -math.inf, 2.0, 1.5, lambda_hat=0.9)
    assert one.covers(-1e300) and not one.covers(2.5) and one.length == 0.5


def test_parse_methods():
    assert parse_methods("perc_cal_2, z") == (Method.PERC_CAL_2, Method.Z)
    assert parse_methods("standard") == STANDARD_METHODS and len(STANDARD_METHODS) == 11
    assert len(parse_methods("all")) == len(Method)
    with pytest.raises(ValueError):
        parse_methods("z,nope")


def test_config_validation():
    with pytest.raises(ValueError):
        BootConfig(b1=1)
    with pytest.raises(ValueError):
        perc_cal_interval(noisy(0), 1, 0.9, BootConfig(10, 1))


# bootstrap methods against the slow reference


@pytest.mark.parametrize("seed", range(4))
def test_oracle_single_level(seed):
    d = noisy(100 + seed)
    xr, y = rows(d)
    cfg = BootConfig(50, 2, seed)
    for j in (0, 1):
        e = percentile_interval(d, j, 0.9, cfg)
        assert (e.lower, e.upper) == ref.percentile(xr, y, j, 0.9, 50, seed)
        e = studentized_interval(d, j, 0.9, cfg)
        assert (e.lower, e.upper) == ref.studentized(xr, y, j, 0.9, 50, seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateBias)
            e = bca_interval(d, j, 0.9, cfg)
        assert (e.lower, e.upper) == ref.bca(xr, y, j, 0.9, 50, seed)


@pytest.mark.parametrize("seed", range(3))
def test_oracle_nested(seed):
    d = noisy(200 + seed, n=15)
    xr, y = rows(d)
    cfg = BootConfig(20, 20, seed)
    e = boot_t_interval(d, 1, 0.9, cfg)
    assert (e.lower, e.upper) == ref.boot_t(xr, y, 1, 0.9, 20, 20, seed)
    for sided, m in (("two", Method.PERC_CAL_2), ("one", Method.PERC_CAL_1)):
        e = perc_cal_interval(d, 1, 0.9, cfg, sided)
        assert e.method is m
        assert (e.lower, e.upper, e.lambda_hat) == ref.perc_cal(xr, y, 1, 0.9, 20, 20, seed, sided)


def test_oracle_multiple_covariates():
    d = noisy(5, n=18, p=3)
    xr, y = rows(d)
    cfg = BootConfig(15, 10, 9)
    run = BootstrapRun(d, cfg)
    for j in range(4):
        e = run.interval(Method.PERC_CAL_2, j, 0.8)
        assert (e.lower, e.upper, e.lambda_hat) == ref.perc_cal(xr, y, j, 0.8, 15, 10, 9)
        e = run.interval(Method.STUD, j, 0.8)
        assert (e.lower, e.upper) == ref.studentized(xr, y, j, 0.8, 15, 9)


def test_boot_t_outer_redraw_on_zero_inner_spread():
    # tiny data and b2 = 2: some outer resample gets two identical inner fits
    x = np.array([0.0, 1.0, 2.0, 3.0, 5.0])
    d = Dataset.from_covariates(x, np.array([0.3, 0.9, 2.5, 2.7, 6.1]))
    xr, y = rows(d)
    for seed in range(50):
        run = BootstrapRun(d, BootConfig(8, 2, seed))
        try:
            _, theta2, _ = run.nested
        except TooManyDegenerateResamples:
            continue
        if np.any(theta2[:, 0, 1] == theta2[:, 1, 1]):
            break
    else:
        pytest.fail("no seed produced a zero-spread inner histogram")
    pivots = run.boot_t_draws(1)
    assert np.all(np.isfinite(pivots))
    e = run.interval(Method.BOOT_T, 1, 0.9)
    assert (e.lower, e.upper) == ref.boot_t(xr, y, 1, 0.9, 8, 2, seed)


def test_histograms_manual_trace():
    d = noisy(7, n=5)
    cfg = BootConfig(2, 2, 31)
    hist = compute_histograms(d, 1, cfg)
    th = fit_ols(d).beta_hat[1]
    assert hist.theta_hat == pytest.approx(th, abs=1e-12)
    for j in range(2):
        for att in range(cfg.max_redraws + 1):
            r1 = Stream(StreamKey(31, (1, j), att)).integers(5, 5)
            if np.unique(r1).size > 1:
                break
        assert hist.first_level[j] == pytest.approx(fit_ols(d.take(r1)).beta_hat[1], abs=1e-10)
        inner = []
        for k in range(2):
            for att in range(cfg.max_redraws + 1):
                r2 = r1[Stream(StreamKey(31, (1, j, k), att)).integers(5, 5)]
                if np.unique(r2).size > 1:
                    break
            inner.append(fit_ols(d.take(r2)).beta_hat[1])
        assert hist.depths[j] == ecdf_position(inner, hist.theta_hat)


def test_zero_noise_all_bootstrap_methods():
    d = exact_line()
    cfg = BootConfig(30, 30, 4)
    run = BootstrapRun(d, cfg)
    hist = run.histograms(1)
    assert np.all(hist.depths == 1.0) and np.all(hist.first_level == 2.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for m in Method:
            e = run.interval(m, 1, 0.9)
            assert e.upper == 2.0 and e.covers(2.0), m
            assert e.lower == (-math.inf if m is Method.PERC_CAL_1 else 2.0), m
    bca = [w for w in caught if issubclass(w.category, DegenerateBias)]
    assert len(bca) == 1


def test_bca_degenerate_flag():
    with pytest.warns(DegenerateBias):
        e = compute_interval(exact_line(), 1, 0.9, Method.BCA, BootConfig(20, 2, 0))
    assert e.flags == ("degenerate_bias",)
    with pytest.raises(ValueError):
        compute_interval(HAND, 1, 0.9, Method.PERC)


def test_perc_cal_nesting_across_levels():
    for seed in range(100):
        run = BootstrapRun(noisy(seed), BootConfig(25, 25, seed))
        a = run.interval(Method.PERC_CAL_2, 1, 0.90)
        b = run.interval(Method.PERC_CAL_2, 1, 0.99)
        assert b.lower <= a.lower and a.upper <= b.upper
        assert b.lambda_hat >= a.lambda_hat


def test_shift_and_scale_invariance():
    d = noisy(11)
    cfg = BootConfig(40, 20, 3)
    shifted = Dataset(d.x_rows, d.y + 5.0)
    scaled = Dataset(d.x_rows, 3.0 * d.y)
    r0, r1, r2 = (BootstrapRun(x, cfg) for x in (d, shifted, scaled))
    for m in (Method.PERC, Method.STUD, Method.BCA, Method.PERC_CAL_2, Method.BOOT_T):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateBias)
            a, b, c = (r.interval(m, 1, 0.9) for r in (r0, r1, r2))
            i0, i1 = r0.interval(m, 0, 0.9), r1.interval(m, 0, 0.9)
        assert (b.lower, b.upper) == pytest.approx((a.lower, a.upper), abs=1e-10)
        assert (c.lower, c.upper) == pytest.approx((3 * a.lower, 3 * a.upper), rel=1e-10)
        assert (i1.lower, i1.upper) == pytest.approx((i0.lower + 5, i0.upper + 5), abs=1e-10)


def test_perc_brackets_estimate_on_corpus():
    bad = 0
    for seed in range(60):
        run = BootstrapRun(noisy(seed, n=40), BootConfig(200, 50, seed))
        for m in (Method.PERC, Method.PERC_CAL_2):
            e = run.interval(m, 1, 0.9)
            bad += not (e.lower <= e.estimate <= e.upper)
    assert bad == 0


def test_too_many_degenerate_resamples():
    # two distinct x values among 3 rows: many resamples are singular
    d = Dataset.from_covariates([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(TooManyDegenerateResamples):
        percentile_interval(d, 1, 0.9, BootConfig(200, 2, 0, max_redraws=0))


def test_kernel_fit_matches_qr():
    rng = np.random.default_rng(12)
    for _ in range(50):
        d = noisy(int(rng.integers(1 << 30)), n=int(rng.integers(6, 30)), p=int(rng.integers(1, 4)))
        r = rng.integers(0, d.n, d.n)
        sub = d.take(r)
        zc, yc, f, g = K.prepare(np.ascontiguousarray(d.covariates), d.y)
        try:
            fit = fit_ols(sub)
        except Exception:
            continue
        beta, se, ok = K.fit_subset(zc, yc, f, g, r.astype(np.int64), 1)
        assert ok
        assert beta == pytest.approx(fit.beta_hat, abs=1e-9)
        assert se == pytest.approx(se_for(fit, sub, SeVariant.HC0, 1), rel=1e-8)
