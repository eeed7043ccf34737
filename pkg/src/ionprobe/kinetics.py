"""Light-induced charge population kinetics.

Each process obeys ``dn/dt = P0*(1 - delta*n) - gamma*n`` while the laser
is on and ``dn/dt = -gamma*n`` while it is off.  Production scales
linearly with laser power; only ``P0`` is rescaled, never ``gamma``.
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError
from . import kernels

__all__ = [
    "ChargingParams", "MultiProcessParams", "Segment", "IlluminationSchedule",
    "charge_at", "charge_trajectory", "initial_production_rate",
]


@dataclass(frozen=True)
class ChargingParams:
    """Production rate ``P0`` (1/s), barrier ``delta`` (1/charge), relaxation ``gamma`` (1/s)."""

    base_production_rate: float
    barrier_coefficient: float = 0.0
    relaxation_rate: float = 0.0

    def __post_init__(self):
        for name in ("base_production_rate", "barrier_coefficient", "relaxation_rate"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {value!r}")

    @classmethod
    def from_rates(cls, gamma_on, gamma_off, n_eq):
        """Build from the observable settling rates and steady-state charge."""
        if not gamma_on >= gamma_off >= 0:
            raise DomainError("need gamma_on >= gamma_off >= 0")
        if not (n_eq > 0 and gamma_on > 0):
            raise DomainError("need n_eq > 0 and gamma_on > 0")
        p0 = n_eq * gamma_on
        return cls(p0, (gamma_on - gamma_off) / p0, gamma_off)

    @property
    def gamma_on(self):
        return self.relaxation_rate + self.base_production_rate * self.barrier_coefficient

    @property
    def gamma_off(self):
        return self.relaxation_rate

    @property
    def n_eq(self):
        """Steady state under illumination; ``inf`` if nothing limits growth."""
        g = self.gamma_on
        if g > 0:
            return self.base_production_rate / g
        return math.inf if self.base_production_rate > 0 else 0.0


@dataclass(frozen=True, init=False)
class MultiProcessParams:
    """One or two independent processes, stored by descending ``gamma_on``."""

    processes: tuple

    def __init__(self, processes):
        procs = tuple(processes)
        if not 1 <= len(procs) <= 2:
            raise DomainError("between one and two charging processes are supported")
        procs = tuple(sorted(procs, key=lambda p: (-p.gamma_on, -p.base_production_rate)))
        object.__setattr__(self, "processes", procs)

    def __iter__(self):
        return iter(self.processes)

    def __len__(self):
        return len(self.processes)


@dataclass(frozen=True)
class Segment:
    """A stretch of constant illumination.

    ``power`` in W; ``None`` means the calibration power of the schedule.
    """

    duration: float
    laser_on: bool
    power: float = None

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise DomainError(f"segment duration must be positive, got {self.duration!r}")
        if self.power is not None and not (math.isfinite(self.power) and self.power >= 0):
            raise DomainError(f"segment power must be >= 0, got {self.power!r}")


@dataclass(frozen=True, init=False)
class IlluminationSchedule:
    """Back-to-back laser segments starting at ``t = 0``.

    Production in a segment is scaled by ``power / calibration_power``.
    Without a calibration power every lit segment runs at scale 1.
    """

    segments: tuple
    calibration_power: float

    def __init__(self, segments, calibration_power=None):
        segs = tuple(s if isinstance(s, Segment) else Segment(*s) for s in segments)
        if not segs:
            raise DomainError("schedule needs at least one segment")
        if calibration_power is not None and not calibration_power > 0:
            raise DomainError("calibration_power must be positive")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "calibration_power", calibration_power)

    @classmethod
    def on_off(cls, t_on, t_off, power=None, calibration_power=None):
        return cls([Segment(t_on, True, power), Segment(t_off, False)], calibration_power)

    @property
    def duration(self):
        return float(sum(s.duration for s in self.segments))

    def boundaries(self):
        """Segment start times followed by the schedule end."""
        return np.concatenate(([0.0], np.cumsum([s.duration for s in self.segments])))

    def scales(self):
        out = np.zeros(len(self.segments))
        for k, s in enumerate(self.segments):
            if not s.laser_on:
                continue
            if s.power is None or self.calibration_power is None:
                out[k] = 1.0
            else:
                out[k] = s.power / self.calibration_power
        return out

    def scaled(self, factor):
        """Same timing with every lit segment's power multiplied by ``factor``."""
        cal = self.calibration_power if self.calibration_power is not None else 1.0
        segs = [Segment(s.duration, s.laser_on,
                        (cal if s.power is None else s.power) * factor if s.laser_on else s.power)
                for s in self.segments]
        return IlluminationSchedule(segs, cal)


def charge_at(params, t, phase, n_start=0.0):
    """Charge after time ``t`` in a single on or off phase.

    On: ``n_eq + (n_start - n_eq) exp(-gamma_on t)``; off: ``n_start
    exp(-gamma t)``.  With nothing limiting growth (``gamma_on = 0``) the
    on-phase grows linearly, and with ``gamma = 0`` the off-phase holds.
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("t must be finite and non-negative")
    if phase not in ("on", "off"):
        raise DomainError(f"phase must be 'on' or 'off', got {phase!r}")
    scale = 1.0 if phase == "on" else 0.0
    p0 = params.base_production_rate
    rate = params.relaxation_rate + scale * p0 * params.barrier_coefficient
    if rate == 0.0:
        out = n_start + scale * p0 * t
    else:
        out = n_start * np.exp(-rate * t) - scale * p0 * np.expm1(-rate * t) / rate
    return out if out.ndim else float(out)


def _as_times(sample_times, schedule):
    times = np.ascontiguousarray(sample_times, dtype=np.float64)
    if times.ndim != 1:
        raise DomainError("sample_times must be one-dimensional")
    if not np.all(np.isfinite(times)):
        raise DomainError("sample_times must be finite")
    if times.size and (times[0] < 0 or times[-1] > schedule.duration):
        raise DomainError(
            f"sample times must lie within [0, {schedule.duration}] s")
    if np.any(np.diff(times) < 0):
        raise DomainError("sample_times must be nondecreasing")
    return times


def process_trajectory(proc, schedule, times, n_start=0.0):
    """Charge of a single process at (validated) ``times``."""
    return kernels.propagate_charge(
        proc.base_production_rate,
        proc.base_production_rate * proc.barrier_coefficient,
        proc.relaxation_rate,
        np.ascontiguousarray(schedule.boundaries()),
        np.ascontiguousarray(schedule.scales()),
        float(n_start), times)


def charge_trajectory(params, schedule, sample_times, n_start=None, per_process=False):
    """Total charge at each of ``sample_times`` under ``schedule``.

    ``params`` may be a :class:`MultiProcessParams` or a single
    :class:`ChargingParams`.  The charge is continuous across segment
    boundaries.  With ``per_process`` an array of shape
    ``(n_processes, n_times)`` is returned instead of the sum.
    """
    if isinstance(params, ChargingParams):
        params = MultiProcessParams([params])
    times = _as_times(sample_times, schedule)
    starts = [0.0] * len(params) if n_start is None else list(np.broadcast_to(n_start, len(params)))
    rows = np.array([process_trajectory(p, schedule, times, n0)
                     for p, n0 in zip(params, starts)])
    return rows if per_process else rows.sum(axis=0)


def initial_production_rate(params, power_scale=1.0):
    """Production rate (charges/s) at zero charge, where the barrier vanishes."""
    if not power_scale >= 0:
        raise DomainError("power_scale must be non-negative")
    if isinstance(params, ChargingParams):
        params = MultiProcessParams([params])
    return power_scale * sum(p.base_production_rate for p in params)
