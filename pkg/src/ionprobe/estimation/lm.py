"""Bounded Levenberg-Marquardt with finite-difference Jacobians.

The solver works on scaled variables ``z = x / scale``, where ``scale``
defaults to the magnitude of the initial guess; rates and amplitudes in SI
otherwise span many decades.  Trial points are projected onto the bounds.
"""
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConditioningError, DomainError

__all__ = ["LMResult", "central_jacobian", "levenberg_marquardt"]

REL_STEP = 1e-6
ABS_STEP_FLOOR = 1e-12


@dataclass
class LMResult:
    x: np.ndarray
    residuals: np.ndarray
    cost: float
    jacobian: np.ndarray  # d residual / d x, unscaled
    iterations: int
    converged: bool
    message: str
    cost_history: list = field(default_factory=list)
    nfev: int = 0


def central_jacobian(fun, z, rel_step=REL_STEP, abs_floor=ABS_STEP_FLOOR):
    """Central-difference Jacobian of ``fun`` at ``z``.

    The step for each coordinate is ``max(rel_step*|z_j|, abs_floor)``.
    """
    z = np.asarray(z, dtype=np.float64)
    cols = []
    for j in range(z.size):
        h = max(rel_step * abs(z[j]), abs_floor)
        zp = z.copy()
        zm = z.copy()
        zp[j] += h
        zm[j] -= h
        cols.append((np.asarray(fun(zp)) - np.asarray(fun(zm))) / (zp[j] - zm[j]))
    return np.column_stack(cols)


def _solve_damped(jtj, g, lam):
    diag = np.maximum(np.diag(jtj), 1e-300)
    a = jtj + lam * np.diag(diag)
    try:
        return np.linalg.solve(a, -g)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(a, -g, rcond=None)[0]


def levenberg_marquardt(fun, x0, lower, upper, scale=None, max_iter=200,
                        ftol=1e-10, gtol=1e-8, rel_step=REL_STEP):
    """Minimise ``0.5 * ||fun(x)||^2`` subject to ``lower <= x <= upper``.

    Converges when an accepted step lowers the cost by less than ``ftol``
    relative, or when the scaled gradient (the cosine between the residual
    and every Jacobian column) drops below ``gtol``.  ``max_iter`` counts
    trial steps.  Exhausting it returns the best point with
    ``converged=False``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if np.any(lower >= upper) or np.any(x0 < lower) or np.any(x0 > upper):
        raise DomainError("initial guess must lie inside finite bounds with lower < upper")
    if scale is None:
        scale = np.abs(x0)
    scale = np.where(np.asarray(scale, dtype=np.float64) > 0, scale,
                     np.maximum((upper - lower) * 1e-6, 1e-300))
    lo, hi = lower / scale, upper / scale
    nfev = 0

    def f(z):
        nonlocal nfev
        nfev += 1
        return np.asarray(fun(z * scale), dtype=np.float64)

    def jac(z):
        return central_jacobian(f, z, rel_step)

    z = x0 / scale
    r = f(z)
    if not np.all(np.isfinite(r)):
        raise DomainError("model is not finite at the initial guess")
    cost = 0.5 * float(r @ r)
    J = jac(z)
    if not np.all(np.isfinite(J)):
        raise ConditioningError("Jacobian is not finite at the initial guess")
    sv = np.linalg.svd(J, compute_uv=False)
    if sv.size and (sv[-1] <= sv[0] * 1e-13 or sv[0] == 0):
        raise ConditioningError("Jacobian is singular at the initial guess; "
                                "some free parameter does not affect the model")

    history = [cost]
    jtj = J.T @ J
    lam = 1e-3 * float(np.max(np.diag(jtj)))
    nu = 2.0
    converged = False
    message = "iteration budget exhausted"
    it = 0
    while it < max_iter:
        if cost == 0.0:
            converged, message = True, "zero residual"
            break
        g = J.T @ r
        colnorm = np.sqrt(np.diag(jtj))
        rnorm = np.sqrt(2.0 * cost)
        with np.errstate(invalid="ignore", divide="ignore"):
            cosines = np.where(colnorm > 0, np.abs(g) / (colnorm * rnorm), 0.0)
        if np.max(cosines) < gtol:
            converged, message = True, "gradient below tolerance"
            break
        it += 1
        step = _solve_damped(jtj, g, lam)
        z_new = np.clip(z + step, lo, hi)
        step = z_new - z
        r_new = f(z_new)
        cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
        predicted = -float(step @ g) - 0.5 * float(step @ jtj @ step)
        if cost_new < cost:
            rho = (cost - cost_new) / predicted if predicted > 0 else 0.0
            rel_drop = (cost - cost_new) / cost
            z, r, cost = z_new, r_new, cost_new
            history.append(cost)
            J = jac(z)
            jtj = J.T @ J
            lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
            if rel_drop < ftol:
                converged, message = True, "relative cost decrease below tolerance"
                break
        else:
            lam *= nu
            nu *= 2.0
            if lam > 1e20 * max(1.0, float(np.max(np.diag(jtj)))):
                converged, message = True, "no further decrease possible"
                break
    return LMResult(x=z * scale, residuals=r, cost=cost, jacobian=J / scale,
                    iterations=it, converged=converged, message=message,
                    cost_history=history, nfev=nfev)
