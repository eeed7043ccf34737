"""Noise-floor arithmetic of the ion-string probe.

The COM position noise falls as ``1/sqrt(N T)``.  Quoting it for a single
ion and one second of averaging gives the position sensitivity, and the
trap stiffness turns that into field and force sensitivities.  The
smallest detectable charge is the one whose field, at the most sensitive
beam offset, shifts the string by one standard deviation (a 1-sigma
criterion).
"""
from dataclasses import dataclass
import math

from ..electrostatics import MONOPOLE_PEAK_RATIO, GlassMonopoleSource, axial_field_glass
from ..errors import DomainError

__all__ = ["SensitivityReport", "sensitivity", "position_noise", "REFERENCE_ION_COUNT"]

REFERENCE_ION_COUNT = 3
REFERENCE_TIME = 1.0


@dataclass(frozen=True)
class SensitivityReport:
    position_sensitivity: float  # m/sqrt(Hz), single ion
    field_sensitivity: float  # V/(m sqrt(Hz))
    force_sensitivity: float  # N/sqrt(Hz)
    min_detectable_charges: int
    min_detectable_charges_raw: float
    threshold_displacement: float  # m, at the requested N and T
    field_per_charge: float  # V/m at the optimal offset
    optimal_offset: float  # m


def position_noise(noise_ref, ion_count, integration_time,
                   reference_ion_count=REFERENCE_ION_COUNT, reference_time=REFERENCE_TIME):
    """COM position noise for ``ion_count`` ions averaged over ``integration_time``."""
    return noise_ref * math.sqrt(reference_ion_count / ion_count) \
        * math.sqrt(reference_time / integration_time)


def sensitivity(trap, position_noise_1s_3ion, ion_count, integration_time, source):
    """Sensitivity figures of the probe.

    ``source`` supplies the glass geometry (``glass_height``,
    ``trap_height``, ``include_image``); its offset and charge count are
    ignored.  The charge threshold is evaluated at ``glass_height/sqrt(2)``.
    """
    for name, value in (("position noise", position_noise_1s_3ion),
                        ("ion_count", ion_count), ("integration_time", integration_time)):
        if not value > 0:
            raise DomainError(f"{name} must be positive, got {value!r}")
    stiffness = trap.stiffness
    q = trap.ion.charge
    single = position_noise(position_noise_1s_3ion, 1, REFERENCE_TIME)
    threshold = position_noise(position_noise_1s_3ion, ion_count, integration_time)
    threshold_field = stiffness * threshold / q
    offset = MONOPOLE_PEAK_RATIO * source.glass_height
    unit = GlassMonopoleSource(offset, source.glass_height, source.trap_height, 1.0,
                               source.include_image)
    per_charge = axial_field_glass(unit, trap.consts)
    raw = threshold_field / per_charge
    return SensitivityReport(
        position_sensitivity=single,
        field_sensitivity=stiffness * single / q,
        force_sensitivity=stiffness * single,
        min_detectable_charges=math.ceil(raw),
        min_detectable_charges_raw=raw,
        threshold_displacement=threshold,
        field_per_charge=per_charge,
        optimal_offset=offset,
    )
