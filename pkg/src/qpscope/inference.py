"""Physical-rate inference from a drive-amplitude sweep.

Fits the closed-form switch-rate curve over (gamma0, gamma1) to measured
rates at known (gamma, delta), then predicts the mean-parity curve with no
free parameters and converts the rate ratio into an effective bath
temperature.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import h as planck_h, k as k_boltzmann

from .dynamics import (
    RateModel,
    SINGLE_TONE,
    build_generator,
    gamma_p_closed_form,
    mean_parity,
    steady_state,
)
from .errors import FitError, ValidationError
from .fitting import damped_gauss_newton


@dataclass(frozen=True)
class SweepPoint:
    """One drive-amplitude setting: x = Omega/Gamma and its measured rate."""

    x: float
    gamma_p: float
    gamma_p_err: float | None = None
    mean_parity: float | None = None
    mean_parity_err: float | None = None

    def __post_init__(self):
        if self.x < 0:
            raise ValidationError("x must be >= 0")
        if not self.gamma_p > 0:
            raise ValidationError("measured gamma_p must be > 0")
        if self.gamma_p_err is not None and self.gamma_p_err < 0:
            raise ValidationError("errors must be >= 0")


@dataclass(frozen=True)
class RateFit:
    """Fitted (gamma0, gamma1) with covariance and goodness of fit."""

    gamma0: float
    gamma1: float
    covariance: np.ndarray = field(repr=False)
    chi2_dof: float
    n_iter: int


def fit_rates(points, gamma, delta, max_iter=200):
    """Weighted least squares of the closed-form rate curve over the sweep.

    Parameters
    ----------
    points : sequence of SweepPoint
        At least four points, with coverage on both sides of x = 1.
    gamma, delta : float
        Decay rate and parity detuning (rad/s), known from spectroscopy;
        they are inputs, not fit parameters.

    Notes
    -----
    Optimizes (log gamma0, log gamma1), which enforces positivity without
    active bounds.  Weights are 1/err**2 when every point carries an error,
    unit weights otherwise.  Deterministic initialization:
    ``gamma0 = min(gamma_p)``, ``gamma1 = 2 (max - min)``.
    """
    points = list(points)
    if len(points) < 4:
        raise ValidationError(f"need >= 4 sweep points, got {len(points)}")
    xs = np.array([p.x for p in points])
    ys = np.array([p.gamma_p for p in points])
    if not (np.any(xs < 1.0) and np.any(xs > 1.0)):
        raise ValidationError("sweep must span both sides of x = 1")

    errs = [p.gamma_p_err for p in points]
    if all(e is not None and e > 0 for e in errs):
        weights = 1.0 / np.asarray(errs, dtype=float)
    else:
        weights = np.ones_like(ys)

    g0_init = max(float(ys.min()), 1e-12)
    g1_init = max(2.0 * float(ys.max() - ys.min()), 1e-12)

    def residual(theta):
        g0, g1 = np.exp(theta)
        model = gamma_p_closed_form(g0, g1, gamma, delta, xs)
        return (model - ys) * weights

    res = damped_gauss_newton(residual, np.log([g0_init, g1_init]), max_iter=max_iter)
    g0, g1 = np.exp(res.x)
    if g0 < 1e-9 * g1 or g1 < 1e-12:
        raise FitError(
            "fit collapsed onto a boundary (one rate vanishes)", last_iterate=res.x
        )
    dof = max(len(points) - 2, 1)
    jac_t = np.diag([g0, g1])
    return RateFit(
        gamma0=float(g0),
        gamma1=float(g1),
        covariance=jac_t @ res.covariance @ jac_t.T,
        chi2_dof=res.rss / dof,
        n_iter=res.n_iter,
    )


def predict_parity_curve(gamma0, gamma1, gamma, delta, xs):
    """Steady-state mean parity at each drive setting, single-tone mode.

    No free parameters: this is the same four-state model evaluated at the
    fitted rates.
    """
    out = np.empty(len(xs))
    for i, x in enumerate(xs):
        model = RateModel(
            gamma0=gamma0,
            gamma1=gamma1,
            gamma=gamma,
            omega=x * gamma,
            delta=delta,
            drive_mode=SINGLE_TONE,
        )
        out[i] = mean_parity(steady_state(build_generator(model)))
    return out


def arrhenius_temperature(gamma0, gamma1, f_q_hz):
    """Effective bath temperature from ``gamma1/gamma0 = exp(h f_q / kB T)``.

    Returns Kelvin.  Requires ``gamma1 > gamma0 > 0``; otherwise there is no
    positive temperature and a ValidationError is raised.
    """
    if not (gamma1 > gamma0 > 0):
        raise ValidationError(
            f"need gamma1 > gamma0 > 0 for a positive temperature, got "
            f"({gamma0}, {gamma1})"
        )
    if f_q_hz <= 0:
        raise ValidationError("transition frequency must be > 0")
    return (planck_h * f_q_hz / k_boltzmann) / np.log(gamma1 / gamma0)
