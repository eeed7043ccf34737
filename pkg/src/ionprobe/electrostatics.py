"""Axial fields of surface charge seen by an ion string.

Two source models are supported: an electron trapped on a thin insulating
patch of a grounded electrode, which together with its image forms a point
dipole normal to the surface, and a bare charge on a dielectric plate,
optionally shielded by an opposite image charge behind the trap plane.

Sign convention
---------------
All functions here take ``dx`` as the axial position of the charged spot
measured from the ion, and return the field component along +x produced by
an *attracting* source, i.e. positive values for ``dx > 0`` point from the
ion towards the spot.  The electrode source (electrons above a metal,
acting on a positive ion) is attracting as given.  A repelling source,
such as holes left on the glass, is obtained by flipping the sign; the
forward model does that.
"""
from dataclasses import dataclass
import math

import numpy as np

from .constants import CODATA2018
from .errors import DomainError

__all__ = [
    "ElectrodeDipoleSource", "GlassMonopoleSource",
    "dipole_axial_kernel", "monopole_axial_kernel",
    "axial_field_electrode", "axial_field_glass",
    "DIPOLE_PEAK_RATIO", "MONOPOLE_PEAK_RATIO",
]

DIPOLE_PEAK_RATIO = 0.5
MONOPOLE_PEAK_RATIO = 1.0 / math.sqrt(2.0)


def _check_height(h):
    if not np.all(np.asarray(h) > 0):
        raise DomainError(f"height must be positive, got {h!r}")


def dipole_axial_kernel(dx, h):
    """``h*dx / (dx**2 + h**2)**(5/2)``, in 1/m^4.

    Shape of the axial field of a vertical point dipole a height ``h``
    below the probe.  Odd in ``dx`` with its positive maximum at ``h/2``.
    Accepts scalars or arrays.
    """
    _check_height(h)
    return h * dx / (dx * dx + h * h) ** 2.5


def monopole_axial_kernel(dx, h):
    """``dx / (dx**2 + h**2)**(3/2)``, in 1/m^2; maximum at ``h/sqrt(2)``."""
    _check_height(h)
    return dx / (dx * dx + h * h) ** 1.5


@dataclass(frozen=True)
class ElectrodeDipoleSource:
    """Charge on an insulating patch of a grounded electrode.

    ``dipole_length`` is the separation between the charge and its image,
    twice the patch thickness.
    """

    surface_offset_x: float
    trap_height: float
    dipole_length: float
    charge_count: float = 1.0

    def __post_init__(self):
        if not self.trap_height > 0:
            raise DomainError("trap_height must be positive")
        if not self.dipole_length > 0:
            raise DomainError("dipole_length must be positive")
        if not self.charge_count >= 0:
            raise DomainError("charge_count must be non-negative")


@dataclass(frozen=True)
class GlassMonopoleSource:
    """Charge on the face of a dielectric plate at ``glass_height`` from the ion.

    With ``include_image`` an opposite charge of equal magnitude sits at
    ``glass_height + 2*trap_height`` from the ion, i.e. mirrored in the
    grounded trap plane.
    """

    surface_offset_x: float
    glass_height: float
    trap_height: float
    charge_count: float = 1.0
    include_image: bool = True

    def __post_init__(self):
        if not self.glass_height > 0:
            raise DomainError("glass_height must be positive")
        if not self.trap_height > 0:
            raise DomainError("trap_height must be positive")
        if not self.charge_count >= 0:
            raise DomainError("charge_count must be non-negative")

    @property
    def image_distance(self):
        return self.glass_height + 2.0 * self.trap_height


def electrode_field_per_charge(dx, trap_height, dipole_length, consts=CODATA2018):
    """Axial field (V/m) of a single patch charge; vectorised over ``dx``."""
    return (3.0 * consts.coulomb_constant * consts.elementary_charge * dipole_length
            * dipole_axial_kernel(dx, trap_height))


def glass_field_per_charge(dx, glass_height, trap_height, include_image=True,
                           consts=CODATA2018):
    """Axial field (V/m) of a single glass charge, attracting sign convention."""
    kernel = monopole_axial_kernel(dx, glass_height)
    if include_image:
        kernel = kernel - monopole_axial_kernel(dx, glass_height + 2.0 * trap_height)
    return consts.coulomb_constant * consts.elementary_charge * kernel


def axial_field_electrode(src, consts=CODATA2018):
    """Field at the ion of ``src.charge_count`` patch charges (V/m)."""
    return src.charge_count * electrode_field_per_charge(
        src.surface_offset_x, src.trap_height, src.dipole_length, consts)


def axial_field_glass(src, consts=CODATA2018):
    """Field at the ion of ``src.charge_count`` glass charges (V/m)."""
    return src.charge_count * glass_field_per_charge(
        src.surface_offset_x, src.glass_height, src.trap_height,
        src.include_image, consts)
