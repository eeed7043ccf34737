"""Axial equilibrium of an ion string and its centre-of-mass response."""
from dataclasses import dataclass, field
import math

import numpy as np

from .constants import CA40, CODATA2018, IonSpecies
from .errors import ConvergenceError, DomainError
from . import kernels

__all__ = [
    "TrapConfig", "CrystalState", "equilibrium_positions",
    "com_displacement", "field_from_displacement", "force_from_displacement",
    "MAX_IONS",
]

MAX_IONS = 16


@dataclass(frozen=True)
class TrapConfig:
    """Axial trap parameters.

    ``radial_frequencies`` (rad/s) are carried for bookkeeping only; no
    calculation uses them.
    """

    axial_frequency: float
    trap_height: float = 800e-6
    ion: IonSpecies = CA40
    ion_count: int = 3
    radial_frequencies: tuple = ()
    consts: object = field(default=CODATA2018, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.axial_frequency) and self.axial_frequency > 0):
            raise DomainError("axial_frequency must be positive")
        if not self.trap_height > 0:
            raise DomainError("trap_height must be positive")
        if int(self.ion_count) != self.ion_count or not 1 <= self.ion_count <= MAX_IONS:
            raise DomainError(f"ion_count must be an integer in [1, {MAX_IONS}]")
        if not (math.isfinite(self.length_scale) and self.length_scale > 0):
            raise DomainError("crystal length scale is not finite")

    @classmethod
    def from_hz(cls, axial_frequency_hz, **kwargs):
        return cls(axial_frequency=2 * math.pi * axial_frequency_hz, **kwargs)

    @property
    def stiffness(self):
        """Axial spring constant ``m w^2`` of one ion (N/m)."""
        return self.ion.mass * self.axial_frequency ** 2

    @property
    def length_scale(self):
        """``(q^2 / (4 pi eps0 m w^2))**(1/3)``, the natural ion spacing."""
        k = self.consts.coulomb_constant
        return (k * self.ion.charge ** 2 / self.stiffness) ** (1.0 / 3.0)


@dataclass(frozen=True)
class CrystalState:
    positions: np.ndarray
    com_position: float

    @classmethod
    def from_positions(cls, positions):
        positions = np.asarray(positions, dtype=np.float64)
        return cls(positions=positions, com_position=float(positions.mean()))


def _solve_dimensionless(n, max_iter=100, tol=1e-12, external=None):
    # Damped Newton on grad U; ``external(u) -> (force, dforce/du)`` adds a
    # position-dependent axial force in the same units.
    if n == 1 and external is None:
        return np.zeros(1)
    half = n ** 0.6
    u = np.linspace(-half, half, n)
    for _ in range(max_iter):
        energy, grad, hess = kernels.coulomb_gradient_hessian(u)
        if external is not None:
            f, df = external(u)
            grad = grad - f
            hess = hess - np.diag(df)
        gnorm = np.linalg.norm(grad)
        if gnorm <= tol:
            return u
        step = np.linalg.solve(hess, -grad)
        # keep ions ordered: never let a step close more than half a gap
        gaps = np.diff(u)
        closing = np.diff(step)
        t = 1.0
        shrink = closing < 0
        if np.any(shrink):
            t = min(1.0, 0.5 * np.min(gaps[shrink] / -closing[shrink]))
        u_new = u + t * step
        # backtrack on the gradient norm, the quantity the tolerance is on
        for _ in range(30):
            _, g_new, _ = kernels.coulomb_gradient_hessian(u_new)
            if external is not None:
                g_new = g_new - external(u_new)[0]
            if np.linalg.norm(g_new) < gnorm or t < 1e-6:
                break
            t *= 0.5
            u_new = u + t * step
        u = u_new
    _, grad, _ = kernels.coulomb_gradient_hessian(u)
    if external is not None:
        grad = grad - external(u)[0]
    raise ConvergenceError(
        f"equilibrium not reached in {max_iter} iterations",
        residual=float(np.linalg.norm(grad)))


def equilibrium_positions(cfg):
    """Equilibrium axial positions (m) of ``cfg.ion_count`` identical ions.

    The gradient of the potential energy is driven below ``1e-12 m w^2 l``.
    """
    u = _solve_dimensionless(int(cfg.ion_count))
    return CrystalState.from_positions(u * cfg.length_scale)


def com_displacement(cfg, field_at, linearized=True, crystal=None):
    """Centre-of-mass shift (m) of the string under an axial field profile.

    ``field_at`` maps an array of axial positions (m) to fields (V/m).  By
    default the field is sampled at the unperturbed positions and each ion
    responds with the bare stiffness, so a uniform field ``E`` gives
    ``qE/(m w^2)`` independent of the ion count.

    With ``linearized=False`` the string is re-equilibrated in the
    perturbed potential instead, using a finite-difference field gradient.
    """
    if crystal is None:
        crystal = equilibrium_positions(cfg)
    x = crystal.positions
    if linearized:
        e = np.asarray(field_at(x), dtype=np.float64)
        return float(cfg.ion.charge * e.sum() / (cfg.ion_count * cfg.stiffness))

    ell = cfg.length_scale
    force_unit = cfg.stiffness * ell
    eps = 1e-6 * ell

    def external(u):
        xs = u * ell
        f = cfg.ion.charge * np.asarray(field_at(xs), dtype=np.float64)
        df = cfg.ion.charge * (np.asarray(field_at(xs + eps), dtype=np.float64)
                               - np.asarray(field_at(xs - eps), dtype=np.float64)) / (2 * eps)
        return f / force_unit, df * ell / force_unit

    u = _solve_dimensionless(int(cfg.ion_count), external=external)
    return float(u.mean() * ell - crystal.com_position)


def field_from_displacement(cfg, dx_com):
    """Uniform axial field (V/m) that shifts the string by ``dx_com``."""
    return cfg.stiffness * dx_com / cfg.ion.charge


def force_from_displacement(cfg, dx_com):
    """Force (N) on a single ion equivalent to a shift ``dx_com``."""
    return cfg.stiffness * dx_com
