"""Coherent reflection of a driven two-level emitter terminating a waveguide.

The emitter reflects a weak resonant probe with a pi phase shift (r = -1).
Driving it harder saturates the transition; at the "magic" drive rate
``Omega = Gamma/sqrt(2)`` the directly reflected and coherently re-scattered
fields interfere destructively and ``|r| -> 0`` on resonance.  All
frequencies and rates in this module are angular (rad/s).
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar

from .errors import NoDipError, ValidationError
from .fitting import damped_gauss_newton

#: drive-strength warning threshold relative to the anharmonicity
DRIVE_ANHARMONICITY_FRACTION = 0.2


@dataclass(frozen=True)
class EmitterParams:
    """Two-level emitter coupled to a semi-infinite waveguide.

    Parameters
    ----------
    gamma_r : float
        Radiative decay rate into the waveguide (rad/s), > 0.
    gamma_nr : float
        Nonradiative decay rate (rad/s), >= 0.
    gamma_phi : float
        Pure dephasing rate (rad/s), >= 0.
    w01 : float
        Transition angular frequency (rad/s).
    """

    gamma_r: float
    gamma_nr: float = 0.0
    gamma_phi: float = 0.0
    w01: float = 0.0

    def __post_init__(self):
        if self.gamma_r <= 0:
            raise ValidationError(f"gamma_r must be > 0, got {self.gamma_r}")
        if self.gamma_nr < 0 or self.gamma_phi < 0:
            raise ValidationError("gamma_nr and gamma_phi must be >= 0")

    @property
    def gamma1_tot(self):
        """Total energy decay rate."""
        return self.gamma_r + self.gamma_nr

    @property
    def gamma2(self):
        """Coherence decay rate ``gamma1_tot/2 + gamma_phi``."""
        return 0.5 * self.gamma1_tot + self.gamma_phi


@dataclass(frozen=True)
class DriveTone:
    """A coherent drive: angular frequency and Rabi rate (both rad/s)."""

    frequency: float
    omega: float

    def __post_init__(self):
        if self.omega < 0:
            raise ValidationError("Rabi rate must be >= 0")

    @classmethod
    def from_power(cls, frequency, p_in_w, emitter):
        return cls(frequency, rabi_rate_from_power(p_in_w, emitter))


def reflection_coefficient(detuning, omega, emitter):
    """Steady-state reflection coefficient of the driven emitter.

    Parameters
    ----------
    detuning : float or ndarray
        ``w_drive - w01`` (rad/s).
    omega : float
        Rabi drive rate (rad/s).
    emitter : EmitterParams

    Returns
    -------
    complex or ndarray
        ``r = 1 - (gamma_r/g2) (1 - i d/g2) / (1 + (d/g2)^2 + W^2/(g1 g2))``
        with ``g1 = gamma1_tot`` and ``g2 = gamma2``.
    """
    d = np.asarray(detuning, dtype=float)
    g1 = emitter.gamma1_tot
    g2 = emitter.gamma2
    sat = omega * omega / (g1 * g2)
    r = 1.0 - (emitter.gamma_r / g2) * (1.0 - 1j * d / g2) / (1.0 + (d / g2) ** 2 + sat)
    if np.ndim(detuning) == 0:
        return complex(r)
    return r


def rabi_rate_from_power(p_in_w, emitter):
    """Rabi rate ``Omega = 2 sqrt(gamma_r P_in / (hbar w01))`` (rad/s)."""
    if p_in_w < 0:
        raise ValidationError(f"input power must be >= 0, got {p_in_w}")
    if emitter.w01 <= 0:
        raise ValidationError("emitter w01 must be set to convert power")
    return 2.0 * np.sqrt(emitter.gamma_r * p_in_w / (hbar * emitter.w01))


def power_from_rabi(omega, emitter):
    """Exact algebraic inverse of :func:`rabi_rate_from_power` (W)."""
    if omega < 0:
        raise ValidationError(f"Rabi rate must be >= 0, got {omega}")
    if emitter.w01 <= 0:
        raise ValidationError("emitter w01 must be set to convert power")
    return omega * omega * hbar * emitter.w01 / (4.0 * emitter.gamma_r)


def magic_power(emitter):
    """Input power at which ``|r(0)| -> 0``: ``hbar w01 gamma_r / 8`` (W)."""
    return power_from_rabi(emitter.gamma_r / np.sqrt(2.0), emitter)


def check_drive_strength(omega, anharmonicity):
    """Warn when the drive approaches the anharmonicity (two-level model breaks)."""
    if abs(anharmonicity) > 0 and omega >= DRIVE_ANHARMONICITY_FRACTION * abs(anharmonicity):
        warnings.warn(
            f"drive rate {omega:.3g} rad/s is not small against the "
            f"anharmonicity {abs(anharmonicity):.3g} rad/s; two-level "
            "approximation becomes unreliable",
            stacklevel=2,
        )


@dataclass
class ResonanceFit:
    """Result of :func:`fit_resonance`.

    ``scale`` and ``offset`` are floats for magnitude fits and complex
    (chain gain and offset) for complex fits.  ``covariance`` is the 2x2
    covariance of (w0, gamma_r).
    """

    w0: float
    gamma_r: float
    scale: float | complex
    offset: float | complex
    rms_residual: float
    n_iter: int
    covariance: np.ndarray


def _initial_dip_guess(freqs, mags):
    # offset from the trace edges, dip position from the minimum, width from
    # the full width at half depth; fixed rule for determinism
    n_edge = max(2, mags.size // 8)
    offset0 = float(np.median(np.concatenate([mags[:n_edge], mags[-n_edge:]])))
    i_min = int(np.argmin(mags))
    depth = offset0 - mags[i_min]
    if not depth > 1e-3 * max(abs(offset0), np.ptp(mags), 1e-30):
        raise NoDipError("trace has no discernible dip")
    half = offset0 - 0.5 * depth
    below = np.nonzero(mags < half)[0]
    if below.size >= 2:
        width = abs(freqs[below[-1]] - freqs[below[0]])
    else:
        width = abs(freqs[-1] - freqs[0]) / 4.0
    if width <= 0:
        width = abs(freqs[-1] - freqs[0]) / 4.0
    return freqs[i_min], width, depth, offset0


def fit_resonance(freqs, values, omega, max_iter=200, complex_fit=False):
    """Fit the saturable reflection dip to extract (w0, gamma_r, scale, offset).

    Parameters
    ----------
    freqs : ndarray
        Probe angular frequencies (rad/s), at least 8 points spanning the dip.
    values : ndarray
        ``|r|`` samples, or complex r (either works; magnitude is fitted
        unless ``complex_fit``).
    omega : float
        Known Rabi rate of the probe (rad/s).
    complex_fit : bool
        Fit real and imaginary parts jointly instead of ``|r|``.

    Returns
    -------
    ResonanceFit

    Raises
    ------
    NoDipError
        Flat or dip-free data.
    FitError
        No convergence within ``max_iter`` iterations.
    """
    freqs = np.asarray(freqs, dtype=float)
    values = np.asarray(values)
    if freqs.size < 8:
        raise ValidationError(f"need >= 8 points, got {freqs.size}")
    if freqs.size != values.size:
        raise ValidationError("frequency and value arrays differ in length")

    mags = np.abs(values) if np.iscomplexobj(values) else values.astype(float)
    w0_0, width0, depth0, offset0 = _initial_dip_guess(freqs, mags)
    gamma0 = max(width0, 1e-6 * (abs(freqs[-1] - freqs[0]) + abs(w0_0)))

    # variable projection: (scale, offset) enter linearly, so solve them
    # exactly at every step and run Gauss-Newton only over the nonlinear
    # pair (dip position, decay rate).  The dip position is parameterized
    # in units of the initial width to keep both parameters of order one.
    complex_mode = complex_fit and np.iscomplexobj(values)
    data = (
        np.concatenate([values.real, values.imag]) if complex_mode else mags
    )
    ones = np.ones(freqs.size)
    zeros = np.zeros(freqs.size)

    def shape(theta):
        w0 = w0_0 + theta[0] * width0
        em = EmitterParams(gamma_r=np.exp(np.clip(theta[1], -300.0, 300.0)))
        return reflection_coefficient(freqs - w0, omega, em)

    def linear_solve(theta):
        r = shape(theta)
        if complex_mode:
            # complex gain and complex offset of the receive chain
            basis = np.column_stack(
                [
                    np.concatenate([r.real, r.imag]),
                    np.concatenate([-r.imag, r.real]),
                    np.concatenate([ones, zeros]),
                    np.concatenate([zeros, ones]),
                ]
            )
        else:
            basis = np.column_stack([np.abs(r), ones])
        coef, *_ = np.linalg.lstsq(basis, data, rcond=None)
        return basis @ coef - data, coef

    def residual(theta):
        return linear_solve(theta)[0]

    theta0 = np.array([0.0, np.log(gamma0)])
    res = damped_gauss_newton(residual, theta0, max_iter=max_iter)

    w0 = float(w0_0 + res.x[0] * width0)
    gamma_r = float(np.exp(res.x[1]))
    _, coef = linear_solve(res.x)
    if complex_mode:
        scale = complex(coef[0], coef[1])
        off = complex(coef[2], coef[3])
    else:
        scale, off = float(coef[0]), float(coef[1])

    # covariance over (w0, gamma_r) via the delta method; the linear pair
    # is conditionally optimal, so its uncertainty is not reported here
    jac_t = np.diag([width0, gamma_r])
    cov = jac_t @ res.covariance @ jac_t.T
    return ResonanceFit(
        w0=w0,
        gamma_r=gamma_r,
        scale=scale,
        offset=off,
        rms_residual=res.rms_residual,
        n_iter=res.n_iter,
        covariance=cov,
    )


def assign_parity_branch(w0_fitted, w01_plus, w01_minus):
    """Label a fitted resonance with the nearer parity branch (+1 or -1)."""
    return +1 if abs(w0_fitted - w01_plus) <= abs(w0_fitted - w01_minus) else -1
