"""Small shared numerics: damped least squares with covariance."""

from __future__ import annotations

import numpy as np

from .errors import NumericalError

__all__ = ["levenberg_marquardt"]


def _numeric_jacobian(fun, p, r0):
    J = np.empty((len(r0), len(p)))
    for k in range(len(p)):
        h = 1e-7 * (1.0 + abs(p[k]))
        pp = p.copy()
        pp[k] += h
        pm = p.copy()
        pm[k] -= h
        J[:, k] = (fun(pp) - fun(pm)) / (2.0 * h)
    return J


def levenberg_marquardt(fun, p0, jac=None, max_iter: int = 200,
                        rel_step_tol: float = 1e-9):
    """Minimize ||fun(p)||^2 by Levenberg-Marquardt.

    fun maps a parameter vector to a residual vector.  Converges when
    the relative parameter step drops below rel_step_tol or after
    max_iter iterations; raises NumericalError if the damping runs
    away without ever improving.

    Returns
    -------
    p : ndarray
        Best parameters found.
    cov : ndarray or None
        Residual-scaled inverse normal matrix (JtJ)^-1 * SSR/(n-k);
        None when the normal matrix is singular or the fit has no
        degrees of freedom.
    info : dict
        n_iter, converged flag, ssr.
    """
    p = np.asarray(p0, dtype=float).copy()
    r = fun(p)
    ssr = float(r @ r)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = jac(p) if jac is not None else _numeric_jacobian(fun, p, r)
        g = J.T @ r
        A = J.T @ J
        d = np.diag(A).copy()
        d[d <= 0] = 1e-30
        accepted = False
        for _ in range(60):
            try:
                dp = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_new = fun(p + dp)
            ssr_new = float(r_new @ r_new)
            if np.isfinite(ssr_new) and ssr_new <= ssr:
                p = p + dp
                r, ssr = r_new, ssr_new
                lam = max(lam * 0.3, 1e-14)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            if it == 1:
                raise NumericalError(
                    f"least-squares fit made no progress (ssr {ssr:.3g})"
                )
            break
        rel = np.max(np.abs(dp) / (np.abs(p) + 1e-300))
        if rel < rel_step_tol:
            converged = True
            break

    J = jac(p) if jac is not None else _numeric_jacobian(fun, p, r)
    A = J.T @ J
    dof = len(r) - len(p)
    cov = None
    if dof > 0:
        try:
            cov = np.linalg.inv(A) * ssr / dof
        except np.linalg.LinAlgError:
            cov = None
    return p, cov, {"n_iter": it, "converged": converged, "ssr": ssr}
