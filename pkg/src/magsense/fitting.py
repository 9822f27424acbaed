"""Damped least-squares curve fitting for spectroscopy and decay analyses.

A small Levenberg-Marquardt engine with a fixed set of model families covers
every fit in the analysis chain: Gaussian and Lorentzian lines, exponential
decays, saturating exponentials, sinusoidal fringes (plain and damped),
double-Gaussian histograms, and least-squares polynomials. Families with a
width, rate, or frequency parameter fit its logarithm internally so those
parameters stay positive; reported parameters and covariances are in the
natural parameterization.

Initial guesses are automatic and deterministic: peaked models start from
max/centroid/second-moment estimates, exponentials from log-linear regression,
sinusoids from the discrete Fourier peak. Fitted sinusoid phases are
canonicalized to amplitude >= 0 and phase in [0, 2pi); series of phases are
unwrapped by choosing the branch within pi of the previous point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, FitRankError

MAX_ITERATIONS = 500
RELATIVE_STEP_TOL = 1e-10
LAMBDA_INIT = 1e-3
LAMBDA_UP = 4.0
LAMBDA_DOWN = 3.0
LAMBDA_MAX = 1e12

_FAMILIES = (
    "gaussian",
    "lorentzian",
    "exponential-decay",
    "saturating-exponential",
    "sinusoid",
    "damped-sinusoid",
    "double-gaussian",
    "polynomial",
)

# families whose trailing baseline term is controlled by the model flag
_BASELINE_FAMILIES = {"gaussian", "lorentzian", "double-gaussian"}


@dataclass(frozen=True)
class FitModel:
    """Fit family selector.

    Parameters
    ----------
    family : str
        One of gaussian, lorentzian, exponential-decay,
        saturating-exponential, sinusoid, damped-sinusoid, double-gaussian,
        polynomial.
    order : int, optional
        Polynomial order; required for the polynomial family.
    baseline : bool
        Whether peak families carry an additive constant term. Ignored by
        families whose layout already contains an offset.
    """

    family: str
    order: int | None = None
    baseline: bool = True

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown fit family {self.family!r}")
        if self.family == "polynomial":
            if self.order is None or self.order < 0:
                raise ValueError("polynomial family needs a non-negative order")
        elif self.order is not None:
            raise ValueError("order is only meaningful for the polynomial family")

    def parameter_names(self) -> tuple[str, ...]:
        if self.family == "polynomial":
            return tuple(f"c{k}" for k in range(self.order + 1))
        names = {
            "gaussian": ("amplitude", "center", "sigma"),
            "lorentzian": ("amplitude", "center", "fwhm"),
            "exponential-decay": ("amplitude", "tau", "offset"),
            "saturating-exponential": ("plateau", "amplitude", "tau"),
            "sinusoid": ("amplitude", "frequency", "phase", "offset"),
            "damped-sinusoid": ("amplitude", "tau", "frequency", "phase", "offset"),
            "double-gaussian": (
                "amplitude_1",
                "center_1",
                "sigma_1",
                "amplitude_2",
                "center_2",
                "sigma_2",
            ),
        }[self.family]
        if self.family in _BASELINE_FAMILIES and self.baseline:
            names = names + ("offset",)
        return names

    def n_parameters(self) -> int:
        return len(self.parameter_names())

    def _positive_indices(self) -> tuple[int, ...]:
        return {
            "gaussian": (2,),
            "lorentzian": (2,),
            "exponential-decay": (1,),
            "saturating-exponential": (2,),
            "sinusoid": (1,),
            "damped-sinusoid": (1, 2),
            "double-gaussian": (2, 5),
            "polynomial": (),
        }[self.family]

    def evaluate(self, x: np.ndarray, parameters: np.ndarray) -> np.ndarray:
        """Model prediction at ``x`` for natural-space parameters."""
        x = np.asarray(x, dtype=float)
        p = np.asarray(parameters, dtype=float)
        fam = self.family
        if fam == "polynomial":
            return np.polynomial.polynomial.polyval(x, p)
        if fam == "gaussian":
            c = p[3] if self.baseline else 0.0
            return p[0] * np.exp(-0.5 * ((x - p[1]) / p[2]) ** 2) + c
        if fam == "lorentzian":
            c = p[3] if self.baseline else 0.0
            half = 0.5 * p[2]
            return p[0] / (1.0 + ((x - p[1]) / half) ** 2) + c
        if fam == "exponential-decay":
            return p[0] * np.exp(-x / p[1]) + p[2]
        if fam == "saturating-exponential":
            return p[0] - p[1] * np.exp(-x / p[2])
        if fam == "sinusoid":
            return p[0] * np.sin(2.0 * math.pi * p[1] * x + p[2]) + p[3]
        if fam == "damped-sinusoid":
            return (
                p[0]
                * np.exp(-x / p[1])
                * np.sin(2.0 * math.pi * p[2] * x + p[3])
                + p[4]
            )
        # double-gaussian
        c = p[6] if self.baseline else 0.0
        return (
            p[0] * np.exp(-0.5 * ((x - p[1]) / p[2]) ** 2)
            + p[3] * np.exp(-0.5 * ((x - p[4]) / p[5]) ** 2)
            + c
        )


@dataclass
class FitResult:
    """Outcome of one least-squares fit."""

    model: FitModel
    parameter_names: tuple[str, ...]
    parameters: np.ndarray
    covariance: np.ndarray
    rss: float
    n_iter: int
    converged: bool
    message: str = ""
    rss_trace: list = field(default_factory=list)

    def parameter(self, name: str) -> float:
        return float(self.parameters[self.parameter_names.index(name)])

    def stderr(self, name: str) -> float:
        k = self.parameter_names.index(name)
        return float(math.sqrt(max(self.covariance[k, k], 0.0)))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.model.evaluate(x, self.parameters)


def _to_internal(model: FitModel, p: np.ndarray) -> np.ndarray:
    theta = np.array(p, dtype=float)
    for k in model._positive_indices():
        if theta[k] <= 0:
            raise ValueError(f"parameter {model.parameter_names()[k]} must be > 0")
        theta[k] = math.log(theta[k])
    return theta


def _from_internal(model: FitModel, theta: np.ndarray) -> np.ndarray:
    p = np.array(theta, dtype=float)
    for k in model._positive_indices():
        p[k] = math.exp(min(p[k], 700.0))
    return p


def _residuals(model: FitModel, theta, x, y, weights) -> np.ndarray:
    r = y - model.evaluate(x, _from_internal(model, theta))
    return r * np.sqrt(weights)


def _jacobian(model: FitModel, theta, x, y, weights) -> np.ndarray:
    n = len(theta)
    jac = np.empty((len(x), n))
    for k in range(n):
        h = 1e-6 * max(1.0, abs(theta[k]))
        up = theta.copy()
        dn = theta.copy()
        up[k] += h
        dn[k] -= h
        jac[:, k] = (
            _residuals(model, up, x, y, weights)
            - _residuals(model, dn, x, y, weights)
        ) / (2.0 * h)
    return jac


def _check_data(model: FitModel, x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be matching one-dimensional arrays")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("fit data must be finite")
    if len(x) < model.n_parameters() + 1:
        raise ValueError(
            f"{model.family} fit needs at least {model.n_parameters() + 1} points"
        )
    if model.family != "polynomial":
        spread = np.ptp(y)
        scale = np.max(np.abs(y)) if len(y) else 0.0
        if spread == 0.0 or spread < 1e-14 * max(scale, 1e-300):
            raise DegenerateDataError(
                f"constant data carries no information for a {model.family} fit"
            )


def _fit_polynomial(model, x, y, weights) -> FitResult:
    order = model.order
    design = np.vander(x, order + 1, increasing=True)
    sw = np.sqrt(weights)
    coeffs, _, rank, _ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
    if rank < order + 1:
        raise FitRankError(
            f"polynomial design matrix has rank {rank} < {order + 1}"
        )
    resid = (y - design @ coeffs) * sw
    rss = float(resid @ resid)
    dof = max(len(x) - (order + 1), 1)
    normal = design.T @ (weights[:, None] * design)
    cov = (rss / dof) * np.linalg.inv(normal)
    return FitResult(
        model=model,
        parameter_names=model.parameter_names(),
        parameters=coeffs,
        covariance=cov,
        rss=rss,
        n_iter=0,
        converged=True,
        rss_trace=[rss],
    )


def _canonicalize_sinusoid(model: FitModel, p: np.ndarray, cov: np.ndarray):
    """Fold amplitude sign into the phase and reduce it to [0, 2pi)."""
    phase_k = {"sinusoid": 2, "damped-sinusoid": 3}[model.family]
    if p[0] < 0:
        flip = np.ones(len(p))
        flip[0] = -1.0
        p = p * flip
        cov = cov * np.outer(flip, flip)
        p[phase_k] += math.pi
    p[phase_k] = p[phase_k] % (2.0 * math.pi)
    return p, cov


def fit_curve(
    model: FitModel,
    x: np.ndarray,
    y: np.ndarray,
    y_err: np.ndarray | None = None,
    init: np.ndarray | None = None,
) -> FitResult:
    """Fit ``model`` to data with damped (Levenberg-Marquardt) least squares.

    Parameters
    ----------
    model : FitModel
        Family selector; the polynomial family is solved directly by linear
        least squares.
    x, y : ndarray
        Sample locations and values, one-dimensional and finite.
    y_err : ndarray, optional
        Per-point standard errors. When given, residuals are weighted by
        1/y_err**2 and the covariance treats the errors as absolute; when
        omitted, the covariance is scaled by the residual variance rss/dof.
    init : ndarray, optional
        Starting parameters in natural units; defaults to the automatic
        initializer for the family.

    Returns
    -------
    FitResult
        With converged=False and a diagnostic message on non-convergence;
        the residual sum of squares over accepted iterations is
        non-increasing.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_data(model, x, y)
    if y_err is not None:
        y_err = np.asarray(y_err, dtype=float)
        if np.any(~np.isfinite(y_err)) or np.any(y_err <= 0):
            raise ValueError("y_err must be finite and > 0")
        weights = 1.0 / y_err**2
        absolute_errors = True
    else:
        weights = np.ones_like(y)
        absolute_errors = False

    if model.family == "polynomial":
        return _fit_polynomial(model, x, y, weights)

    p0 = np.asarray(init, dtype=float) if init is not None else _auto_init(model, x, y)
    if len(p0) != model.n_parameters():
        raise ValueError(
            f"{model.family} expects {model.n_parameters()} parameters, got {len(p0)}"
        )
    theta = _to_internal(model, p0)

    r = _residuals(model, theta, x, y, weights)
    rss = float(r @ r)
    lam = LAMBDA_INIT
    trace = [rss]
    converged = False
    message = ""
    n_iter = 0
    for n_iter in range(1, MAX_ITERATIONS + 1):
        jac = _jacobian(model, theta, x, y, weights)
        hess = jac.T @ jac
        grad = jac.T @ r
        if not np.all(np.isfinite(hess)) or not np.all(np.isfinite(grad)):
            message = "non-finite model derivatives"
            break
        accepted = False
        while lam <= LAMBDA_MAX:
            damping = np.diag(np.maximum(np.diag(hess), 1e-12 * np.max(np.abs(hess)) + 1e-300))
            try:
                step = -np.linalg.solve(hess + lam * damping, grad)
            except np.linalg.LinAlgError:
                lam *= LAMBDA_UP
                continue
            trial = theta + step
            r_trial = _residuals(model, trial, x, y, weights)
            rss_trial = float(r_trial @ r_trial)
            if np.isfinite(rss_trial) and rss_trial < rss:
                accepted = True
                break
            lam *= LAMBDA_UP
        if not accepted:
            # no damped step lowers the residual: stationary to machine
            # precision (exact for zero residual or zero gradient)
            converged = True
            if rss > 0.0 and float(np.max(np.abs(grad))) > 0.0:
                message = "stalled: no damped step reduces the residual"
            break
        rel = float(
            np.max(np.abs(step) / np.maximum(np.abs(trial), 1e-12))
        )
        theta = trial
        r = r_trial
        rss = rss_trial
        trace.append(rss)
        lam = max(lam / LAMBDA_DOWN, 1e-14)
        if rel < RELATIVE_STEP_TOL:
            converged = True
            break
    else:
        message = f"no convergence within {MAX_ITERATIONS} iterations"

    params = _from_internal(model, theta)
    jac = _jacobian(model, theta, x, y, weights)
    dof = max(len(x) - len(params), 1)
    scale = 1.0 if absolute_errors else rss / dof
    try:
        cov_theta = scale * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov_theta = scale * np.linalg.pinv(jac.T @ jac)
    # delta method back to natural space: d p / d theta = p for log parameters
    deriv = np.ones(len(params))
    for k in model._positive_indices():
        deriv[k] = params[k]
    cov = cov_theta * np.outer(deriv, deriv)
    cov = 0.5 * (cov + cov.T)
    if model.family in ("sinusoid", "damped-sinusoid"):
        params, cov = _canonicalize_sinusoid(model, params, cov)
    return FitResult(
        model=model,
        parameter_names=model.parameter_names(),
        parameters=params,
        covariance=cov,
        rss=rss,
        n_iter=n_iter,
        converged=converged,
        message=message,
        rss_trace=trace,
    )


def _grid_step(x: np.ndarray) -> float:
    dx = np.diff(np.sort(x))
    dx = dx[dx > 0]
    return float(np.min(dx)) if len(dx) else 1.0


def _peak_moments(x, y, baseline):
    """Signed peak location/width estimates shared by the peak families."""
    lo = float(np.min(y))
    hi = float(np.max(y))
    med = float(np.median(y))
    upward = (hi - med) >= (med - lo)
    c0 = lo if upward else hi
    if not baseline:
        c0 = 0.0 if upward and lo >= -0.1 * (hi - lo) else c0
    w = np.abs(y - c0)
    total = float(np.sum(w))
    if total == 0.0:
        mu0 = float(np.mean(x))
        sigma0 = max(np.std(x), _grid_step(x))
    else:
        mu0 = float(np.sum(w * x) / total)
        var = float(np.sum(w * (x - mu0) ** 2) / total)
        sigma0 = max(math.sqrt(max(var, 0.0)), 0.5 * _grid_step(x))
    amp0 = (hi - c0) if upward else (lo - c0)
    if amp0 == 0.0:
        amp0 = hi - lo if upward else lo - hi
    return amp0, mu0, sigma0, c0, upward


def _init_gaussian(model, x, y):
    amp0, mu0, sigma0, c0, _ = _peak_moments(x, y, model.baseline)
    p = [amp0, mu0, sigma0]
    if model.baseline:
        p.append(c0)
    return np.array(p)


def _init_lorentzian(model, x, y):
    amp0, mu0, sigma0, c0, upward = _peak_moments(x, y, model.baseline)
    w = (y - c0) if upward else (c0 - y)
    n_half = int(np.sum(w >= 0.5 * abs(amp0)))
    fwhm0 = max(n_half, 1) * _grid_step(x)
    p = [amp0, mu0, fwhm0]
    if model.baseline:
        p.append(c0)
    return np.array(p)


def _log_linear_rate(x, w):
    """Decay time from a log-linear regression on the dominant-sign part."""
    mask = w > 1e-3 * np.max(w)
    if int(np.sum(mask)) < 2:
        return None
    coef = np.polynomial.polynomial.polyfit(x[mask], np.log(w[mask]), 1)
    slope = coef[1]
    if slope >= 0:
        return None
    return float(np.exp(coef[0])), float(-1.0 / slope)


def _init_exponential(model, x, y):
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    n_tail = max(3, len(xs) // 10)
    c0 = float(np.mean(ys[-n_tail:]))
    w = ys - c0
    sign = 1.0 if abs(np.max(w)) >= abs(np.min(w)) else -1.0
    span = float(xs[-1] - xs[0]) or 1.0
    est = _log_linear_rate(xs - xs[0], sign * w)
    if est is None:
        a0, tau0 = float(ys[0] - c0), span / 2.0
    else:
        a0, tau0 = sign * est[0], est[1]
        a0 *= math.exp(xs[0] / tau0) if xs[0] / tau0 < 50 else 1.0
    if a0 == 0.0:
        a0 = float(np.ptp(ys)) or 1.0
    return np.array([a0, max(tau0, 1e-3 * span), c0])


def _init_saturating(model, x, y):
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    n_tail = max(3, len(xs) // 10)
    y_inf0 = float(np.mean(ys[-n_tail:]))
    w = y_inf0 - ys
    sign = 1.0 if abs(np.max(w)) >= abs(np.min(w)) else -1.0
    span = float(xs[-1] - xs[0]) or 1.0
    est = _log_linear_rate(xs - xs[0], sign * w)
    if est is None:
        a0, tau0 = float(y_inf0 - ys[0]), span / 2.0
    else:
        a0, tau0 = sign * est[0], est[1]
        a0 *= math.exp(xs[0] / tau0) if xs[0] / tau0 < 50 else 1.0
    if a0 == 0.0:
        a0 = float(np.ptp(ys)) or 1.0
    return np.array([y_inf0, a0, max(tau0, 1e-3 * span)])


def _init_sinusoid_core(x, y):
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    c0 = float(np.mean(ys))
    d = ys - c0
    n = len(xs)
    dx = float(xs[-1] - xs[0]) / max(n - 1, 1)
    if dx <= 0:
        dx = _grid_step(xs)
    spectrum = np.fft.rfft(d)
    if len(spectrum) < 2:
        return 1.0, 1.0 / (n * dx), 0.0, c0
    k = 1 + int(np.argmax(np.abs(spectrum[1:])))
    f0 = k / (n * dx)
    a0 = 2.0 * abs(spectrum[k]) / n
    phi0 = float(np.angle(spectrum[k])) + 0.5 * math.pi - 2.0 * math.pi * f0 * xs[0]
    return max(a0, 1e-3 * np.ptp(ys)), f0, phi0 % (2.0 * math.pi), c0


def _init_sinusoid(model, x, y):
    a0, f0, phi0, c0 = _init_sinusoid_core(x, y)
    return np.array([a0, f0, phi0, c0])


def _init_damped_sinusoid(model, x, y):
    a0, f0, phi0, c0 = _init_sinusoid_core(x, y)
    span = float(np.max(x) - np.min(x)) or 1.0
    return np.array([1.5 * a0, 0.5 * span, f0, phi0, c0])


def _init_double_gaussian(model, x, y):
    c0 = float(np.min(y)) if model.baseline else 0.0
    w = y - np.min(y)
    total = float(np.sum(w))
    if total == 0.0:
        raise DegenerateDataError("flat histogram for double-gaussian fit")
    centroid = float(np.sum(w * x) / total)
    sigma_glob = math.sqrt(max(float(np.sum(w * (x - centroid) ** 2) / total), 0.0))
    sigma_glob = max(sigma_glob, _grid_step(x))
    k1 = int(np.argmax(y))
    mu1 = float(x[k1])
    away = np.abs(x - mu1) > sigma_glob
    if not np.any(away):
        away = np.abs(x - mu1) > 0.25 * np.ptp(x)
    if not np.any(away):
        raise DegenerateDataError("no second peak candidate for double-gaussian fit")
    k2 = int(np.argmax(np.where(away, y, -np.inf)))
    mu2 = float(x[k2])
    s0 = max(0.5 * sigma_glob, _grid_step(x))
    a1 = float(y[k1]) - c0
    a2 = float(y[k2]) - c0
    if a2 <= 0:
        a2 = 0.1 * a1
    p = [a1, mu1, s0, a2, mu2, s0]
    if model.baseline:
        p.append(c0)
    return np.array(p)


_INITIALIZERS = {
    "gaussian": _init_gaussian,
    "lorentzian": _init_lorentzian,
    "exponential-decay": _init_exponential,
    "saturating-exponential": _init_saturating,
    "sinusoid": _init_sinusoid,
    "damped-sinusoid": _init_damped_sinusoid,
    "double-gaussian": _init_double_gaussian,
}


def _auto_init(model: FitModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return _INITIALIZERS[model.family](model, x, y)


@dataclass(frozen=True)
class PolyInterpolant:
    """Least-squares polynomial with its validity interval."""

    coefficients: np.ndarray  # ascending powers
    x_min: float
    x_max: float

    def evaluate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Value and per-point extrapolation flag (True outside the hull)."""
        x = np.asarray(x, dtype=float)
        value = np.polynomial.polynomial.polyval(x, self.coefficients)
        outside = (x < self.x_min) | (x > self.x_max)
        return value, outside

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)[0]


def interpolate_poly(x: np.ndarray, y: np.ndarray, order: int = 2) -> PolyInterpolant:
    """Least-squares polynomial interpolant of the given order.

    Raises FitRankError when the design matrix is rank deficient (fewer
    distinct abscissas than coefficients).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < order + 1:
        raise ValueError(f"order-{order} interpolation needs >= {order + 1} points")
    design = np.vander(x, order + 1, increasing=True)
    coeffs, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < order + 1:
        raise FitRankError(f"interpolation design matrix has rank {rank} < {order + 1}")
    return PolyInterpolant(
        coefficients=coeffs, x_min=float(np.min(x)), x_max=float(np.max(x))
    )


def unwrap_phases(phases: np.ndarray) -> np.ndarray:
    """Unwrap a phase series by keeping adjacent steps within pi.

    Each value is shifted by the multiple of 2pi that brings it closest to
    its predecessor; the first value is kept as reported (in [0, 2pi)).
    """
    return np.unwrap(np.asarray(phases, dtype=float))
