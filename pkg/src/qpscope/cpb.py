"""Charge-dispersed spectrum of a single-island transmon.

The Hamiltonian is the standard Cooper-pair-box form in the charge basis
``n in [-n_cutoff, n_cutoff]``: diagonal ``4*EC*(n - ng)**2`` and
nearest-neighbour coupling ``-EJ/2``.  All energies are stored in Hz (E/h);
conversion to angular units happens at the boundary to the scattering and
dynamics modules.

A quasiparticle tunneling event shifts the offset charge by half a Cooper
pair, so the two charge-parity branches of the qubit transition are
``w01(ng)`` and ``w01(ng + 1/2)``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import CalibrationError, SolverError, ValidationError

DEFAULT_CUTOFF = 15
_CALIBRATION_BRACKET_HZ = (100e6, 2e9)
_CALIBRATION_TOL_HZ = 1e3


@dataclass(frozen=True)
class CpbParams:
    """Cooper-pair-box parameters.

    Parameters
    ----------
    ej_hz, ec_hz : float
        Josephson and charging energies in Hz.  ``ej_hz = 0`` is allowed and
        decouples the charge states (useful as an analytic limit).
    ng : float
        Offset charge in Cooper-pair units.
    n_cutoff : int
        Charge-basis truncation; the matrix has ``2*n_cutoff + 1`` states.
        The default of 15 keeps the lowest transitions converged to well
        below 1 Hz for EJ/EC up to ~100.
    """

    ej_hz: float
    ec_hz: float
    ng: float = 0.0
    n_cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if not (self.ej_hz >= 0 and math.isfinite(self.ej_hz)):
            raise ValidationError(f"EJ must be >= 0 and finite, got {self.ej_hz}")
        if not (self.ec_hz > 0 and math.isfinite(self.ec_hz)):
            raise ValidationError(f"EC must be > 0 and finite, got {self.ec_hz}")
        if self.n_cutoff < 5:
            raise ValidationError(f"n_cutoff must be >= 5, got {self.n_cutoff}")

    @property
    def ratio(self):
        return self.ej_hz / self.ec_hz

    def with_ng(self, ng):
        return CpbParams(self.ej_hz, self.ec_hz, ng, self.n_cutoff)


@dataclass(frozen=True)
class ParitySpectrum:
    """Parity-split transition frequencies over an offset-charge grid.

    ``w01_plus[i]`` is the 0-1 transition at ``ng_grid[i]`` and
    ``w01_minus[i]`` the one at ``ng_grid[i] + 1/2``; ``splitting`` is their
    absolute difference.  All values in Hz.
    """

    ng_grid: np.ndarray
    w01_plus: np.ndarray
    w01_minus: np.ndarray
    splitting: np.ndarray
    anharmonicity: np.ndarray

    @property
    def max_splitting(self):
        return float(np.max(self.splitting))

    @property
    def argmax_ng(self):
        return float(self.ng_grid[int(np.argmax(self.splitting))])


def diagonalize_cpb(params, ng=None, n_levels=3):
    """Lowest eigenvalues of the Cooper-pair-box Hamiltonian, in Hz.

    Parameters
    ----------
    params : CpbParams
    ng : float, optional
        Offset charge override; defaults to ``params.ng``.
    n_levels : int
        Number of eigenvalues returned (ascending).

    Returns
    -------
    ndarray
        ``n_levels`` lowest eigenvalues, ``E0 <= E1 <= ...``.
    """
    if ng is None:
        ng = params.ng
    n = np.arange(-params.n_cutoff, params.n_cutoff + 1)
    diag = 4.0 * params.ec_hz * (n - ng) ** 2
    off = np.full(n.size - 1, -params.ej_hz / 2.0)
    try:
        levels = eigh_tridiagonal(
            diag, off, eigvals_only=True, select="i", select_range=(0, n_levels - 1)
        )
    except Exception as exc:  # scipy raises LinAlgError on non-convergence
        raise SolverError(f"tridiagonal eigensolve failed: {exc}") from exc
    if not np.all(np.isfinite(levels)):
        raise SolverError("eigensolve returned non-finite levels")
    return levels


def w01(params, ng=None):
    """0-1 transition frequency in Hz at offset charge ``ng``."""
    e = diagonalize_cpb(params, ng=ng, n_levels=2)
    return float(e[1] - e[0])


def splitting_at(params, ng):
    """Parity splitting ``|w01(ng) - w01(ng + 1/2)|`` in Hz."""
    return abs(w01(params, ng) - w01(params, ng + 0.5))


def parity_spectrum(params, ng_grid=None):
    """Evaluate both parity branches of w01 over an offset-charge grid.

    The default grid is 201 uniform points on [0, 1/2]; by charge-translation
    and ng -> -ng symmetry this covers the full period.
    """
    if ng_grid is None:
        ng_grid = np.linspace(0.0, 0.5, 201)
    ng_grid = np.asarray(ng_grid, dtype=float)
    if ng_grid.ndim != 1 or ng_grid.size == 0:
        raise ValidationError("ng grid must be a non-empty 1-d sequence")
    if np.any(ng_grid < 0.0) or np.any(ng_grid >= 1.0):
        raise ValidationError("ng grid must lie inside [0, 1)")

    w_plus = np.empty(ng_grid.size)
    w_minus = np.empty(ng_grid.size)
    anh = np.empty(ng_grid.size)
    for i, g in enumerate(ng_grid):
        e = diagonalize_cpb(params, ng=g)
        w_plus[i] = e[1] - e[0]
        anh[i] = (e[2] - e[1]) - (e[1] - e[0])
        w_minus[i] = w01(params, g + 0.5)
    return ParitySpectrum(ng_grid, w_plus, w_minus, np.abs(w_plus - w_minus), anh)


def asymptotic_dispersion(ej_hz, ec_hz, m):
    """Large-EJ/EC charge-dispersion amplitude of level ``m``, in Hz.

    ``eps_m = EC * (2**(4m+5)/m!) * sqrt(2/pi) * (EJ/2EC)**(m/2+3/4)
    * exp(-sqrt(8 EJ/EC))``.  Only a consistency oracle; valid for
    EJ/EC >= 10 and m in {0, 1}.
    """
    ratio = ej_hz / ec_hz
    if ratio < 10.0:
        raise ValidationError(f"asymptotic dispersion needs EJ/EC >= 10, got {ratio:.3g}")
    if m not in (0, 1):
        raise ValidationError(f"level index must be 0 or 1, got {m}")
    return (
        ec_hz
        * (2.0 ** (4 * m + 5) / math.factorial(m))
        * math.sqrt(2.0 / math.pi)
        * (ej_hz / (2.0 * ec_hz)) ** (m / 2.0 + 0.75)
        * math.exp(-math.sqrt(8.0 * ratio))
    )


def mean_w01(params):
    """ng-averaged transition frequency: mean of w01 at ng = 0 and ng = 1/2."""
    return 0.5 * (w01(params, 0.0) + w01(params, 0.5))


def calibrate_ec(ratio, target_w01_hz, n_cutoff=DEFAULT_CUTOFF):
    """Find EC such that the ng-averaged w01 hits ``target_w01_hz``.

    Bisection on EC in [100 MHz, 2 GHz] (the spectrum is homogeneous of
    degree 1 in (EJ, EC), so the mean w01 is monotone in EC).  Converges to
    within 1 kHz on the target.

    Returns
    -------
    CpbParams
        Full parameter set with ``ej_hz = ratio * ec_hz`` and ``ng = 0``.
    """
    if ratio <= 1.0:
        raise ValidationError(f"EJ/EC ratio must exceed 1, got {ratio}")
    if target_w01_hz <= 0:
        raise ValidationError("target transition frequency must be positive")

    lo, hi = _CALIBRATION_BRACKET_HZ

    def mean_at(ec):
        return mean_w01(CpbParams(ratio * ec, ec, 0.0, n_cutoff))

    f_lo = mean_at(lo) - target_w01_hz
    f_hi = mean_at(hi) - target_w01_hz
    if f_lo * f_hi > 0:
        raise CalibrationError(
            f"target {target_w01_hz:.6g} Hz not bracketed by EC in "
            f"[{lo:.3g}, {hi:.3g}] Hz (mean w01 spans "
            f"[{f_lo + target_w01_hz:.6g}, {f_hi + target_w01_hz:.6g}] Hz)",
            bracket=(lo, hi),
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = mean_at(mid) - target_w01_hz
        if abs(f_mid) < _CALIBRATION_TOL_HZ:
            return CpbParams(ratio * mid, mid, 0.0, n_cutoff)
        if f_lo * f_mid <= 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    raise CalibrationError(
        "bisection did not reach 1 kHz on the target", bracket=(lo, hi)
    )
