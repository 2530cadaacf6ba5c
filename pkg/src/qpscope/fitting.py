"""Damped Gauss-Newton least squares used by the resonance, Lorentzian and
rate fits.

One small deterministic solver instead of three ad-hoc loops: Levenberg-style
diagonal damping, forward-difference Jacobian, fixed update schedule.  All
fits in this package run through :func:`damped_gauss_newton` so that
"identical inputs -> identical outputs" holds across estimators.
"""

from dataclasses import dataclass

import numpy as np

from .errors import FitError

_REL_STEP = 1e-7  # forward-difference step, relative to parameter scale


@dataclass
class GnResult:
    x: np.ndarray
    rss: float
    n_iter: int
    covariance: np.ndarray
    rms_residual: float


def _jacobian(fun, x, r0):
    n = x.size
    jac = np.empty((r0.size, n))
    for j in range(n):
        h = _REL_STEP * max(abs(x[j]), 1.0)
        xp = x.copy()
        xp[j] += h
        jac[:, j] = (fun(xp) - r0) / h
    return jac


def damped_gauss_newton(fun, x0, max_iter=200, tol=1e-12, lam0=1e-3):
    """Minimize ``sum(fun(x)**2)`` over x.

    Parameters
    ----------
    fun : callable
        Maps a parameter vector to a residual vector.  Must be deterministic.
    x0 : array_like
        Initial guess.
    max_iter : int
        Iteration cap; exceeding it raises :class:`FitError` carrying the
        last iterate.
    tol : float
        Convergence threshold on the relative decrease of the residual sum
        of squares and on the relative step size.
    lam0 : float
        Initial damping parameter.

    Returns
    -------
    GnResult
        Converged parameters, residual statistics and the parameter
        covariance ``(J^T J)^-1 * rss / (m - n)``.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(fun(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FitError("residuals not finite at the initial guess", last_iterate=x)
    rss = float(r @ r)
    lam = lam0
    nu = 2.0
    made_progress = False

    for it in range(1, max_iter + 1):
        jac = _jacobian(fun, x, r)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = 1.0

        # damping control by gain ratio (Marquardt-Nielsen schedule): the
        # ratio of the actual to the model-predicted decrease steers lambda,
        # which avoids the accept/reject oscillation of fixed factors
        step_ok = False
        for _ in range(60):
            try:
                dx = np.linalg.solve(jtj + lam * np.diag(diag), -jtr)
            except np.linalg.LinAlgError:
                dx = None
            if dx is not None and np.all(np.isfinite(dx)):
                x_new = x + dx
                r_new = np.asarray(fun(x_new), dtype=float)
                if np.all(np.isfinite(r_new)):
                    rss_new = float(r_new @ r_new)
                    if rss_new <= rss * (1.0 + 1e-12):
                        predicted = float(dx @ (lam * diag * dx - jtr))
                        gain = (rss - rss_new) / predicted if predicted > 0 else 1.0
                        lam = max(lam * max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3), 1e-14)
                        nu = 2.0
                        step_ok = True
                        break
            if lam > 1e18:
                break
            lam *= nu
            nu = min(nu * 2.0, 64.0)
        if not step_ok:
            # after real progress, an exhausted step search means the
            # finite-difference gradient is below the noise floor: done
            if made_progress:
                dof = max(r.size - x.size, 1)
                return GnResult(
                    x, rss, it, _covariance(jac, rss, dof), float(np.sqrt(rss / r.size))
                )
            raise FitError(
                "no descent direction from the initial guess", last_iterate=x, n_iter=it
            )

        rel_decrease = (rss - rss_new) / max(rss, 1e-300)
        rel_step = np.max(np.abs(dx) / np.maximum(np.abs(x_new), 1.0))
        x, r, rss = x_new, r_new, rss_new
        made_progress = True
        if rel_decrease < tol or rel_step < tol:
            dof = max(r.size - x.size, 1)
            cov = _covariance(jac, rss, dof)
            return GnResult(x, rss, it, cov, float(np.sqrt(rss / r.size)))

    raise FitError(
        f"no convergence after {max_iter} iterations", last_iterate=x, n_iter=max_iter
    )


def _covariance(jac, rss, dof):
    jtj = jac.T @ jac
    try:
        inv = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        inv = np.linalg.pinv(jtj)
    return inv * (rss / dof)
