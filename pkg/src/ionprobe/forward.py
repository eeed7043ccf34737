"""Synthetic observables: centre-of-mass traces and initial-velocity maps.

Electrode charging attracts the string towards the laser spot; glass
charging repels it.  Displacements are the linear sum of both sources.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .constants import CODATA2018, photon_rate
from .crystal import TrapConfig, com_displacement, equilibrium_positions
from .electrostatics import (
    dipole_axial_kernel, electrode_field_per_charge, glass_field_per_charge,
    monopole_axial_kernel)
from .errors import ConfigError, DomainError
from .kinetics import (
    ChargingParams, IlluminationSchedule, MultiProcessParams, Segment,
    charge_trajectory)

__all__ = [
    "ExperimentSetup", "TimeSeries", "VelocityMap",
    "default_noise_sigma", "sample_times", "displacement_per_charge",
    "noiseless_displacement", "synthesize_timeseries", "dipole_rate_coefficient", "monopole_rate_coefficient",
    "initial_velocity_electrode", "initial_velocity_glass", "synthesize_velocity_map",
    "efficiency_from_rate", "dipole_efficiency_from_rate",
    "glass_preset", "electrode_preset", "both_preset",
    "REFERENCE_NOISE", "ETA_GLASS_375", "ETA_GLASS_397", "ETA_DIPOLE_375",
]

SOURCE_KINDS = ("electrode", "glass", "both")

REFERENCE_NOISE = 0.12e-6  # m, three ions, 1 s
ETA_GLASS_375 = 1.2e-10
ETA_GLASS_397 = 0.4e-10
ETA_DIPOLE_375 = 14e-9  # per (r_dip / 1 um)


@dataclass(frozen=True)
class ExperimentSetup:
    """Geometry and optics of one charging measurement.

    ``beam_offset_x`` is the axial position of the laser spot relative to
    the string centre and may be negative.
    """

    trap: TrapConfig
    source_kind: str = "electrode"
    beam_offset_x: float = 200e-6
    glass_height: float = None
    dipole_length: float = 1e-6
    calibration_power: float = 1e-6
    wavelength: float = 375e-9
    glass_image: bool = True

    def __post_init__(self):
        if self.source_kind not in SOURCE_KINDS:
            raise ConfigError(f"source_kind must be one of {SOURCE_KINDS}", "setup.source_kind")
        if self.source_kind in ("glass", "both"):
            if self.glass_height is None or not self.glass_height > 0:
                raise ConfigError("glass sources need a positive glass_height",
                                  "setup.glass_height_um")
        if not math.isfinite(self.beam_offset_x):
            raise ConfigError("beam_offset_x must be finite", "setup.beam_offset_um")
        if not self.dipole_length > 0:
            raise ConfigError("dipole_length must be positive", "setup.dipole_length_um")
        if not self.calibration_power > 0:
            raise ConfigError("calibration_power must be positive", "setup.power_uw")
        if not self.wavelength > 0:
            raise ConfigError("wavelength must be positive", "setup.wavelength_nm")

    @property
    def has_electrode(self):
        return self.source_kind in ("electrode", "both")

    @property
    def has_glass(self):
        return self.source_kind in ("glass", "both")

    def replace(self, **changes):
        fields = dict(self.__dict__)
        fields.update(changes)
        return ExperimentSetup(**fields)


@dataclass(frozen=True)
class TimeSeries:
    t: np.ndarray
    x: np.ndarray
    noise_sigma: float = 0.0
    cadence: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.float64)
        if t.shape != x.shape or t.ndim != 1:
            raise DomainError("t and x must be 1-d arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise DomainError("sample times must be strictly increasing")
        if not self.noise_sigma >= 0:
            raise DomainError("noise_sigma must be non-negative")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)

    @property
    def samples(self):
        return list(zip(self.t.tolist(), self.x.tolist()))

    def __len__(self):
        return self.t.size


@dataclass(frozen=True)
class VelocityMap:
    offsets: np.ndarray
    velocities: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=np.float64) for a in
                  (self.offsets, self.velocities, self.powers)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise DomainError("offsets, velocities and powers must be equal-length 1-d arrays")
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise DomainError("velocity map entries must be finite")
        for name, a in zip(("offsets", "velocities", "powers"), arrays):
            object.__setattr__(self, name, a)

    @property
    def points(self):
        return list(zip(self.offsets.tolist(), self.velocities.tolist(), self.powers.tolist()))

    def __len__(self):
        return self.offsets.size


def default_noise_sigma(ion_count, cadence=1.0):
    """Per-sample COM noise, scaled from 0.12 um at three ions and 1 s."""
    return REFERENCE_NOISE * math.sqrt(1.0 / cadence) * math.sqrt(3.0 / ion_count)


def sample_times(schedule, cadence):
    """``k * cadence`` for every sample that starts inside the schedule."""
    if not cadence > 0:
        raise DomainError("cadence must be positive")
    n = int(math.floor(schedule.duration / cadence + 1e-9))
    return np.arange(max(n, 1)) * cadence


def displacement_per_charge(setup, source):
    """COM shift (m) caused by one charge of ``source`` ('electrode' or 'glass')."""
    trap = setup.trap
    crystal = equilibrium_positions(trap)
    beam = setup.beam_offset_x
    if source == "electrode":
        def field_at(x):
            return electrode_field_per_charge(beam - x, trap.trap_height,
                                              setup.dipole_length, trap.consts)
    elif source == "glass":
        if setup.glass_height is None:
            raise ConfigError("setup has no glass_height", "setup.glass_height_um")

        def field_at(x):
            return -glass_field_per_charge(beam - x, setup.glass_height, trap.trap_height,
                                           setup.glass_image, trap.consts)
    else:
        raise ValueError(f"unknown source {source!r}")
    return com_displacement(trap, field_at, crystal=crystal)


def _with_calibration(schedule, setup):
    if schedule.calibration_power is None:
        return IlluminationSchedule(schedule.segments, setup.calibration_power)
    return schedule


def noiseless_displacement(setup, electrode_params, glass_params, schedule, times):
    """COM displacement (m) at ``times`` without measurement noise."""
    schedule = _with_calibration(schedule, setup)
    x = np.zeros(len(times))
    if setup.has_electrode and electrode_params is not None:
        n = charge_trajectory(electrode_params, schedule, times)
        x += displacement_per_charge(setup, "electrode") * n
    if setup.has_glass and glass_params is not None:
        n = charge_trajectory(glass_params, schedule, times)
        x += displacement_per_charge(setup, "glass") * n
    return x


def synthesize_timeseries(setup, electrode_params, glass_params, schedule,
                          cadence=1.0, noise_sigma=None, rng_seed=0):
    """Simulated COM trace with i.i.d. Gaussian position noise.

    ``noise_sigma=None`` selects :func:`default_noise_sigma` for the trap's
    ion count and the cadence.  The same seed always gives the same trace.
    """
    if setup.has_electrode and electrode_params is None:
        raise ConfigError("electrode source configured without electrode kinetics",
                          "kinetics.electrode")
    if setup.has_glass and glass_params is None:
        raise ConfigError("glass source configured without glass kinetics", "kinetics.glass")
    if not setup.has_electrode and electrode_params is not None:
        raise ConfigError("electrode kinetics given but source_kind is 'glass'",
                          "setup.source_kind")
    if not setup.has_glass and glass_params is not None:
        raise ConfigError("glass kinetics given but source_kind is 'electrode'",
                          "setup.source_kind")
    if noise_sigma is None:
        noise_sigma = default_noise_sigma(setup.trap.ion_count, cadence)
    times = sample_times(schedule, cadence)
    x = noiseless_displacement(setup, electrode_params, glass_params, schedule, times)
    rng = np.random.default_rng(rng_seed)
    x = x + rng.normal(0.0, 1.0, size=times.size) * noise_sigma
    return TimeSeries(times, x, float(noise_sigma), float(cadence))


# --- initial velocities ---------------------------------------------------

def _response(trap):
    # COM shift per unit field, q / (m w^2)
    return trap.ion.charge / trap.stiffness


def dipole_rate_coefficient(setup):
    """Factor turning a charge production rate into the dipole velocity
    amplitude ``D_rel`` (m^5/s)."""
    trap = setup.trap
    c = trap.consts
    return 3.0 * c.coulomb_constant * c.elementary_charge * setup.dipole_length * _response(trap)


def monopole_rate_coefficient(setup):
    """Factor turning a production rate into ``Q_rel`` (m^3/s)."""
    trap = setup.trap
    c = trap.consts
    return c.coulomb_constant * c.elementary_charge * _response(trap)


def shielded_monopole_kernel(dx, setup):
    kernel = monopole_axial_kernel(dx, setup.glass_height)
    if setup.glass_image:
        kernel = kernel - monopole_axial_kernel(dx, setup.glass_height + 2 * setup.trap.trap_height)
    return kernel


def initial_velocity_electrode(setup, rate, offset=None):
    """Initial string velocity (m/s) towards the spot for patch charging at ``rate``."""
    dx = setup.beam_offset_x if offset is None else offset
    return dipole_rate_coefficient(setup) * rate * dipole_axial_kernel(dx, setup.trap.trap_height)


def initial_velocity_glass(setup, rate, offset=None):
    """Initial string velocity (m/s) for glass charging at ``rate``.

    Negative for a positive offset: the string is pushed away from the spot.
    """
    if setup.glass_height is None:
        raise ConfigError("setup has no glass_height", "setup.glass_height_um")
    dx = setup.beam_offset_x if offset is None else offset
    return -monopole_rate_coefficient(setup) * rate * shielded_monopole_kernel(dx, setup)


def synthesize_velocity_map(setup, model, rate, offsets, powers=None,
                            noise_sigma=0.0, rng_seed=0):
    """Initial velocities over beam offsets for a production ``rate`` at the
    calibration power; rates at other ``powers`` scale linearly."""
    offsets = np.asarray(offsets, dtype=np.float64)
    if powers is None:
        powers = np.full(offsets.shape, setup.calibration_power)
    powers = np.broadcast_to(np.asarray(powers, dtype=np.float64), offsets.shape)
    rates = rate * powers / setup.calibration_power
    if model == "dipole":
        v = initial_velocity_electrode(setup, rates, offsets)
    elif model == "monopole":
        v = initial_velocity_glass(setup, rates, offsets)
    else:
        raise ValueError(f"unknown velocity model {model!r}")
    rng = np.random.default_rng(rng_seed)
    v = v + rng.normal(0.0, 1.0, size=offsets.size) * noise_sigma
    return VelocityMap(offsets, v, np.array(powers))


def efficiency_from_rate(rate, power, wavelength, consts=CODATA2018):
    """Charges created per incident photon."""
    if not power > 0:
        raise DomainError(f"power must be positive, got {power!r}")
    return rate / photon_rate(power, wavelength, consts)


def dipole_efficiency_from_rate(rate, power, wavelength, dipole_length, consts=CODATA2018):
    """Patch-charging efficiency quoted per micrometre of dipole length.

    The velocity data only fix ``rate * dipole_length``, so the efficiency
    is reported as the coefficient ``c`` in ``eta = c / (r_dip / 1 um)``.
    """
    return efficiency_from_rate(rate, power, wavelength, consts) * dipole_length / 1e-6


# --- presets --------------------------------------------------------------

def _trap(ion_count=3):
    return TrapConfig.from_hz(90e3, trap_height=800e-6, ion_count=ion_count,
                              radial_frequencies=(2 * math.pi * 230e3, 2 * math.pi * 790e3))


def glass_preset(ion_count=3):
    """Glass plate 2 mm from the string, 2.5 uW at 375 nm, 300 s trace.

    Returns ``(setup, glass_params, schedule)``; the charge saturates with
    ``1/gamma_on = 38 s`` and never relaxes.
    """
    setup = ExperimentSetup(trap=_trap(ion_count), source_kind="glass", beam_offset_x=300e-6,
                            glass_height=2e-3, calibration_power=2.5e-6, wavelength=375e-9)
    p0 = ETA_GLASS_375 * photon_rate(setup.calibration_power, setup.wavelength)
    params = ChargingParams(p0, 1.0 / (38.0 * p0), 0.0)
    schedule = IlluminationSchedule([Segment(150.0, True), Segment(150.0, False)],
                                    setup.calibration_power)
    return setup, params, schedule


ELECTRODE_TIMES = ((2.0, 5.0), (16.0, 120.0))  # (1/gamma_on, 1/gamma_off) in s


def electrode_params_at(setup, share=(8.0 / 9.0, 1.0 / 9.0)):
    """Two-process patch kinetics whose initial production matches
    ``ETA_DIPOLE_375`` at the setup's power and dipole length.

    ``share`` splits the initial production between the fast and the slow
    process; the default gives both the same saturated charge.
    """
    total = (ETA_DIPOLE_375 / (setup.dipole_length / 1e-6)
             * photon_rate(setup.calibration_power, setup.wavelength))
    procs = []
    for (tau_on, tau_off), frac in zip(ELECTRODE_TIMES, share):
        p0 = frac * total
        if p0 == 0:
            continue
        procs.append(ChargingParams.from_rates(1.0 / tau_on, 1.0 / tau_off, p0 * tau_on))
    return MultiProcessParams(procs)


def electrode_preset(ion_count=3):
    """Bare trap, 8.5 uW at 375 nm focused 200 um from the string.

    Returns ``(setup, electrode_params, schedule)`` with a 100 s exposure
    followed by 400 s of relaxation.
    """
    setup = ExperimentSetup(trap=_trap(ion_count), source_kind="electrode", beam_offset_x=200e-6,
                            dipole_length=1e-6, calibration_power=8.5e-6, wavelength=375e-9)
    schedule = IlluminationSchedule([Segment(100.0, True), Segment(400.0, False)],
                                    setup.calibration_power)
    return setup, electrode_params_at(setup), schedule


def both_preset(ion_count=3):
    """Glass plate at 2 mm plus patch charging, 2.5 uW at 375 nm, 300 um offset."""
    setup = ExperimentSetup(trap=_trap(ion_count), source_kind="both", beam_offset_x=300e-6,
                            glass_height=2e-3, dipole_length=1e-6,
                            calibration_power=2.5e-6, wavelength=375e-9)
    _, glass, _ = glass_preset(ion_count)
    electrode = electrode_params_at(setup, (0.0, 1.0))
    schedule = IlluminationSchedule([Segment(150.0, True), Segment(250.0, False)],
                                    setup.calibration_power)
    return setup, electrode, glass, schedule
