"""Physical constants, ion species and unit conversions.

Everything inside the package is SI.  Experiment units (µm, µW, zN, mV/m)
only appear at the API boundary through :func:`unit_convert`.
"""
from dataclasses import dataclass
import math

from .errors import DomainError, UnitError

__all__ = [
    "PhysicalConstants", "CODATA2018", "IonSpecies", "CA40",
    "photon_rate", "unit_convert", "UNITS",
]


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA-2018 values, exact where the SI defines them."""

    vacuum_permittivity: float = 8.8541878128e-12  # F/m
    elementary_charge: float = 1.602176634e-19  # C
    atomic_mass_unit: float = 1.66053906660e-27  # kg
    planck_constant: float = 6.62607015e-34  # J s
    speed_of_light: float = 299792458.0  # m/s

    def __post_init__(self):
        for name in ("vacuum_permittivity", "elementary_charge",
                     "atomic_mass_unit", "planck_constant", "speed_of_light"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive, got {value!r}")

    @property
    def coulomb_constant(self):
        """k = 1/(4 pi eps0) in N m^2/C^2."""
        return 1.0 / (4.0 * math.pi * self.vacuum_permittivity)


CODATA2018 = PhysicalConstants()


@dataclass(frozen=True)
class IonSpecies:
    mass: float
    charge: float
    label: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.mass) and self.mass > 0):
            raise DomainError(f"ion mass must be positive, got {self.mass!r}")
        if not math.isfinite(self.charge) or self.charge == 0:
            raise DomainError(f"ion charge must be nonzero, got {self.charge!r}")

    @classmethod
    def calcium40(cls, consts=CODATA2018):
        return cls(mass=40 * consts.atomic_mass_unit,
                   charge=consts.elementary_charge, label="40Ca+")


CA40 = IonSpecies.calcium40()


def photon_rate(power, wavelength, consts=CODATA2018):
    """Photons per second carried by a beam of ``power`` watts.

    >>> round(photon_rate(2.5e-6, 375e-9) / 1e12, 2)
    4.72
    """
    if not (math.isfinite(power) and math.isfinite(wavelength)):
        raise DomainError("power and wavelength must be finite")
    if power < 0:
        raise DomainError(f"power must be non-negative, got {power!r}")
    if wavelength <= 0:
        raise DomainError(f"wavelength must be positive, got {wavelength!r}")
    return power * wavelength / (consts.planck_constant * consts.speed_of_light)


# tag -> (dimension, decimal exponent relative to the SI unit)
UNITS = {
    "m": ("length", 0), "mm": ("length", -3), "um": ("length", -6),
    "µm": ("length", -6), "nm": ("length", -9),
    "s": ("time", 0), "ms": ("time", -3),
    "Hz": ("frequency", 0), "kHz": ("frequency", 3),
    "W": ("power", 0), "mW": ("power", -3), "uW": ("power", -6),
    "µW": ("power", -6),
    "N": ("force", 0), "zN": ("force", -21),
    "V/m": ("field", 0), "mV/m": ("field", -3),
    "m/s": ("velocity", 0), "um/s": ("velocity", -6), "µm/s": ("velocity", -6),
}


def unit_convert(value, from_unit, to_unit):
    """Rescale ``value`` between two units of the same dimension.

    Scaling is done with a single multiplication or division by an exact
    power of ten so that a round trip is exact to within one ulp.
    """
    try:
        dim_a, exp_a = UNITS[from_unit]
        dim_b, exp_b = UNITS[to_unit]
    except KeyError as exc:
        raise UnitError(f"unknown unit {exc.args[0]!r}") from None
    if dim_a != dim_b:
        raise UnitError(f"cannot convert {dim_a} ({from_unit}) to {dim_b} ({to_unit})")
    shift = exp_a - exp_b
    if shift >= 0:
        return value * float(10 ** shift)
    return value / float(10 ** -shift)
