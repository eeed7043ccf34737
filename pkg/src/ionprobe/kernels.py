"""Hot inner loops, each in a numba and a pure-numpy flavour.

The public names (``coulomb_gradient_hessian``, ``propagate_charge``)
point at the numba versions unless numba is missing or disabled through
``IONPROBE_DISABLE_NUMBA``.  The ``*_numpy`` / ``*_numba`` variants stay
importable so tests and ``benchmarks/`` can compare them directly.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit


# --- Coulomb crystal ------------------------------------------------------

def coulomb_gradient_hessian_numpy(u):
    """Energy, gradient and Hessian of the dimensionless axial potential.

    ``U(u) = sum_i u_i**2 / 2 + sum_{i<j} 1/|u_i - u_j|`` with lengths in
    units of the crystal length scale and energies in ``m w^2 l^2``.
    """
    u = np.asarray(u, dtype=np.float64)
    n = u.size
    diff = u[:, None] - u[None, :]
    off = ~np.eye(n, dtype=bool)
    dist = np.abs(diff)
    inv = np.zeros_like(diff)
    inv[off] = 1.0 / dist[off]
    energy = 0.5 * np.dot(u, u) + 0.5 * inv.sum()
    grad = u - (np.sign(diff) * inv**2).sum(axis=1)
    hess = -2.0 * inv**3
    hess[np.diag_indices(n)] = 1.0 - hess.sum(axis=1)
    return energy, grad, hess


@njit
def coulomb_gradient_hessian_numba(u):
    n = u.shape[0]
    grad = np.empty(n)
    hess = np.zeros((n, n))
    energy = 0.0
    for i in range(n):
        energy += 0.5 * u[i] * u[i]
        grad[i] = u[i]
        hess[i, i] = 1.0
    for i in range(n):
        for j in range(i + 1, n):
            d = u[i] - u[j]
            r = abs(d)
            inv = 1.0 / r
            energy += inv
            f = math.copysign(inv * inv, d)
            grad[i] -= f
            grad[j] += f
            k = 2.0 * inv * inv * inv
            hess[i, j] = -k
            hess[j, i] = -k
            hess[i, i] += k
            hess[j, j] += k
    return energy, grad, hess


# --- Charge kinetics ------------------------------------------------------

def _segment_step(n0, scale, p0, p0delta, gamma, tau):
    # closed form of dn/dt = s*p0*(1 - delta*n) - gamma*n over a time tau
    rate = gamma + scale * p0delta
    if rate == 0.0:
        return n0 + scale * p0 * tau
    return n0 * math.exp(-rate * tau) - scale * p0 * math.expm1(-rate * tau) / rate


_segment_step_numba = njit(_segment_step)


def propagate_charge_numpy(p0, p0delta, gamma, seg_start, seg_scale, n_start, times):
    """Charge count of one process at ``times`` for a piecewise schedule.

    ``seg_start`` has one more entry than ``seg_scale``: the last element is
    the end of the schedule.  Times must lie inside ``[seg_start[0],
    seg_start[-1]]``; the caller validates that.
    """
    seg_start = np.asarray(seg_start, dtype=np.float64)
    seg_scale = np.asarray(seg_scale, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    nseg = seg_scale.size
    n_at = np.empty(nseg)
    n = float(n_start)
    for k in range(nseg):
        n_at[k] = n
        n = _segment_step(n, seg_scale[k], p0, p0delta, gamma,
                          seg_start[k + 1] - seg_start[k])
    idx = np.clip(np.searchsorted(seg_start, times, side="right") - 1, 0, nseg - 1)
    tau = times - seg_start[idx]
    scale = seg_scale[idx]
    rate = gamma + scale * p0delta
    out = np.empty_like(times)
    flat = rate == 0.0
    out[flat] = n_at[idx[flat]] + scale[flat] * p0 * tau[flat]
    r = rate[~flat]
    t = tau[~flat]
    out[~flat] = (n_at[idx[~flat]] * np.exp(-r * t)
                  - scale[~flat] * p0 * np.expm1(-r * t) / r)
    return out


@njit
def propagate_charge_numba(p0, p0delta, gamma, seg_start, seg_scale, n_start, times):
    nseg = seg_scale.shape[0]
    out = np.empty(times.shape[0])
    k = 0
    n_k = n_start
    for m in range(times.shape[0]):
        t = times[m]
        # times are sorted in practice; rewind only if they are not
        if t < seg_start[k]:
            k = 0
            n_k = n_start
        while k < nseg - 1 and t >= seg_start[k + 1]:
            n_k = _segment_step_numba(n_k, seg_scale[k], p0, p0delta, gamma,
                                      seg_start[k + 1] - seg_start[k])
            k += 1
        out[m] = _segment_step_numba(n_k, seg_scale[k], p0, p0delta, gamma,
                                     t - seg_start[k])
    return out


if USE_NUMBA:
    coulomb_gradient_hessian = coulomb_gradient_hessian_numba
    propagate_charge = propagate_charge_numba
else:
    coulomb_gradient_hessian = coulomb_gradient_hessian_numpy
    propagate_charge = propagate_charge_numpy
