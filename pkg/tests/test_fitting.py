"""Tests for the damped least-squares fitting engine."""

import math

import numpy as np
import pytest

from magsense.errors import DegenerateDataError, FitRankError
from magsense.fitting import (
    FitModel,
    fit_curve,
    interpolate_poly,
    unwrap_phases,
)

ZERO_NOISE_CASES = [
    (FitModel("gaussian"), np.linspace(0.0, 6.0, 41), [1.0, 3.0, 0.5, 0.05]),
    (FitModel("lorentzian"), np.linspace(-5.0, 5.0, 61), [2.0, 0.3, 1.2, 0.1]),
    (FitModel("exponential-decay"), np.linspace(0.0, 5.0, 30), [1.0, 1.3, 0.2]),
    (FitModel("saturating-exponential"), np.linspace(0.0, 5.0, 30), [2.0, 1.5, 0.8]),
    (FitModel("sinusoid"), np.linspace(0.0, 2.0, 80), [0.4, 2.3, 1.0, 0.5]),
    (
        FitModel("double-gaussian"),
        np.linspace(-2.0, 4.0, 101),
        [1.0, 0.1, 0.35, 0.6, 1.9, 0.4, 0.02],
    ),
    (
        FitModel("damped-sinusoid"),
        np.linspace(0.0, 3.0, 120),
        [0.8, 1.1, 3.0, 0.7, 0.2],
    ),
]


@pytest.mark.parametrize(
    "model,x,truth", ZERO_NOISE_CASES, ids=[c[0].family for c in ZERO_NOISE_CASES]
)
def test_zero_noise_fixed_point(model, x, truth):
    truth = np.array(truth)
    y = model.evaluate(x, truth)
    result = fit_curve(model, x, y)
    assert result.converged
    assert result.parameters == pytest.approx(truth, rel=1e-6, abs=1e-9)


def test_gaussian_recovery_tight():
    model = FitModel("gaussian")
    x = np.linspace(0.0, 6.0, 41)
    truth = np.array([1.0, 3.0, 0.5, 0.0])
    result = fit_curve(model, x, model.evaluate(x, truth))
    assert result.converged
    assert result.parameters[:3] == pytest.approx(truth[:3], rel=1e-8)


def test_lorentzian_half_maximum_identity():
    model = FitModel("lorentzian")
    x = np.linspace(-4.0, 4.0, 81)
    truth = np.array([1.4, -0.2, 1.7, 0.3])
    result = fit_curve(model, x, model.evaluate(x, truth))
    a = result.parameter("amplitude")
    mu = result.parameter("center")
    fwhm = result.parameter("fwhm")
    c = result.parameter("offset")
    for edge in (mu - 0.5 * fwhm, mu + 0.5 * fwhm):
        value = result.predict(np.array([edge]))[0]
        assert value - c == pytest.approx(0.5 * a, rel=1e-12)


def test_exponential_tau_monte_carlo():
    rng = np.random.default_rng(20260825)
    model = FitModel("exponential-decay")
    tau = 33.1e-9
    truth = np.array([1.0, tau, 0.0])
    x = np.linspace(0.0, 5.0 * tau, 30)
    clean = model.evaluate(x, truth)
    taus = []
    variances = []
    for _ in range(200):
        y = clean + 0.05 * rng.standard_normal(len(x))
        result = fit_curve(model, x, y)
        assert result.converged
        taus.append(result.parameter("tau"))
        variances.append(result.stderr("tau") ** 2)
    taus = np.array(taus)
    assert np.mean(taus) == pytest.approx(tau, rel=0.02)
    ratio = np.var(taus, ddof=1) / np.mean(variances)
    assert 0.7**2 < ratio < 1.3**2


def test_monotone_rss_over_accepted_iterations():
    rng = np.random.default_rng(11)
    model = FitModel("gaussian")
    x = np.linspace(0.0, 6.0, 61)
    y = model.evaluate(x, np.array([1.0, 3.0, 0.5, 0.0])) + 0.05 * rng.standard_normal(61)
    result = fit_curve(model, x, y)
    trace = result.rss_trace
    assert len(trace) >= 2
    assert all(later <= earlier for earlier, later in zip(trace, trace[1:]))


def test_covariance_symmetric_positive_semidefinite():
    rng = np.random.default_rng(3)
    model = FitModel("lorentzian")
    x = np.linspace(-5.0, 5.0, 81)
    y = model.evaluate(x, np.array([2.0, 0.0, 1.0, 0.1])) + 0.02 * rng.standard_normal(81)
    result = fit_curve(model, x, y)
    assert result.converged
    cov = result.covariance
    assert np.allclose(cov, cov.T)
    eigs = np.linalg.eigvalsh(cov)
    assert np.min(eigs) >= -1e-12 * max(np.max(eigs), 1.0)


def test_sinusoid_phase_canonicalization():
    model = FitModel("sinusoid")
    x = np.linspace(0.0, 2.0, 90)
    # negative amplitude and out-of-range phase must fold into a >= 0,
    # phase in [0, 2pi)
    y = -0.7 * np.sin(2.0 * math.pi * 1.8 * x + 0.4) + 0.1
    result = fit_curve(model, x, y)
    assert result.converged
    assert result.parameter("amplitude") >= 0.0
    assert 0.0 <= result.parameter("phase") < 2.0 * math.pi
    assert result.parameter("phase") == pytest.approx(0.4 + math.pi, rel=1e-6)
    assert result.predict(x) == pytest.approx(y, abs=1e-8)


def test_unwrap_phase_series_continuity():
    t = np.linspace(0.0, 1.0, 40)
    ramp = 9.0 * (1.0 - np.exp(-3.0 * t))
    wrapped = np.mod(ramp, 2.0 * math.pi)
    unwrapped = unwrap_phases(wrapped)
    assert np.max(np.abs(np.diff(unwrapped))) < math.pi
    assert unwrapped == pytest.approx(ramp, abs=1e-9)


def test_constant_data_is_degenerate():
    x = np.linspace(0.0, 1.0, 20)
    y = np.full(20, 0.3)
    for family in ("gaussian", "lorentzian", "sinusoid", "exponential-decay"):
        with pytest.raises(DegenerateDataError):
            fit_curve(FitModel(family), x, y)


def test_data_preconditions():
    model = FitModel("gaussian")
    with pytest.raises(ValueError):
        fit_curve(model, np.arange(4.0), np.arange(4.0))
    x = np.linspace(0.0, 1.0, 10)
    y = x.copy()
    y[3] = np.nan
    with pytest.raises(ValueError):
        fit_curve(model, x, y)


def test_supplied_init_validation():
    model = FitModel("gaussian")
    x = np.linspace(0.0, 6.0, 41)
    y = model.evaluate(x, np.array([1.0, 3.0, 0.5, 0.0]))
    good = fit_curve(model, x, y, init=np.array([0.9, 2.8, 0.6, 0.01]))
    assert good.converged
    assert good.parameter("sigma") == pytest.approx(0.5, rel=1e-8)
    with pytest.raises(ValueError):
        fit_curve(model, x, y, init=np.array([1.0, 3.0]))
    with pytest.raises(ValueError):
        fit_curve(model, x, y, init=np.array([1.0, 3.0, -0.5, 0.0]))


def test_fit_model_validation():
    with pytest.raises(ValueError):
        FitModel("spline")
    with pytest.raises(ValueError):
        FitModel("polynomial")
    with pytest.raises(ValueError):
        FitModel("gaussian", order=2)


def test_polynomial_family_exact():
    model = FitModel("polynomial", order=2)
    x = np.linspace(-1.0, 2.0, 9)
    truth = np.array([0.5, -1.0, 2.0])
    result = fit_curve(model, x, model.evaluate(x, truth))
    assert result.converged
    assert result.parameters == pytest.approx(truth, rel=1e-12, abs=1e-12)
    assert result.parameter_names == ("c0", "c1", "c2")


def test_weighted_fit_covariance_uses_absolute_errors():
    rng = np.random.default_rng(5)
    model = FitModel("exponential-decay")
    truth = np.array([1.0, 2.0, 0.0])
    x = np.linspace(0.0, 8.0, 40)
    clean = model.evaluate(x, truth)
    sigma = 0.03
    taus = []
    variances = []
    for _ in range(200):
        y = clean + sigma * rng.standard_normal(len(x))
        result = fit_curve(model, x, y, y_err=np.full(len(x), sigma))
        taus.append(result.parameter("tau"))
        variances.append(result.stderr("tau") ** 2)
    ratio = np.var(np.array(taus), ddof=1) / np.mean(variances)
    assert 0.5 < ratio < 2.0


def test_interpolate_poly_exact_parabola():
    x = np.array([0.0, 1.0, 2.0])
    y = 0.5 + 2.0 * x - 3.0 * x**2
    interp = interpolate_poly(x, y, order=2)
    assert interp.coefficients == pytest.approx([0.5, 2.0, -3.0], rel=1e-12, abs=1e-12)
    value, outside = interp.evaluate(np.array([0.5, 1.5]))
    assert not np.any(outside)
    assert value == pytest.approx(0.5 + 2.0 * np.array([0.5, 1.5]) - 3.0 * np.array([0.5, 1.5]) ** 2)


def test_interpolate_poly_constant_data():
    x = np.linspace(0.0, 4.0, 7)
    y = np.full(7, 1.25)
    interp = interpolate_poly(x, y, order=2)
    assert interp.coefficients[0] == pytest.approx(1.25, rel=1e-12)
    assert abs(interp.coefficients[1]) < 1e-12
    assert abs(interp.coefficients[2]) < 1e-12


def test_interpolate_poly_flags_extrapolation():
    x = np.linspace(0.0, 2.0, 5)
    interp = interpolate_poly(x, x**2, order=2)
    _, outside = interp.evaluate(np.array([-0.5, 1.0, 2.5]))
    assert outside.tolist() == [True, False, True]


def test_interpolate_poly_rank_deficiency():
    x = np.array([1.0, 1.0, 1.0])
    y = np.array([0.0, 1.0, 2.0])
    with pytest.raises(FitRankError):
        interpolate_poly(x, y, order=2)


def test_result_accessors():
    model = FitModel("gaussian")
    x = np.linspace(0.0, 6.0, 41)
    result = fit_curve(model, x, model.evaluate(x, np.array([1.0, 3.0, 0.5, 0.0])))
    assert result.parameter("center") == pytest.approx(3.0, rel=1e-8)
    assert result.stderr("center") >= 0.0
    assert len(result.predict(x)) == len(x)
