"""Run configuration files and CSV traces.

Config files hold one ``key = value`` per line; ``#`` starts a comment.
Units are part of the key name (``_um``, ``_uw``, ``_hz``, ``_nm``, ``_s``)
and everything is converted to SI on load.
"""
import csv
import math
import re

import numpy as np

from .constants import CA40
from .crystal import MAX_IONS, TrapConfig
from .errors import ConfigError, DomainError, IonProbeError
from .forward import ExperimentSetup, TimeSeries, VelocityMap
from .kinetics import ChargingParams, IlluminationSchedule, MultiProcessParams, Segment

__all__ = [
    "RunConfig", "load_config", "parse_config", "TraceFormatError",
    "TRACE_HEADER", "VELOCITY_HEADER", "FIELD_MAP_HEADER",
    "read_trace", "write_trace", "read_velocity_map", "write_velocity_map",
    "write_field_map", "format_float",
]

TRACE_HEADER = "t_s,x_um"
VELOCITY_HEADER = "dx_um,v_um_per_s,power_uw"
FIELD_MAP_HEADER = "dx_um,e_v_per_m"


class TraceFormatError(IonProbeError, ValueError):
    """A CSV file does not follow the trace format; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def _float(key, text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}", key) from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite", key)
    return value


def _positive(key, text):
    value = _float(key, text)
    if not value > 0:
        raise ConfigError(f"{key}: must be positive, got {text!r}", key)
    return value


def _nonneg(key, text):
    value = _float(key, text)
    if value < 0:
        raise ConfigError(f"{key}: must be non-negative, got {text!r}", key)
    return value


def _int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}", key) from None


def _bool(key, text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected true or false, got {text!r}", key)


def _choice(*options):
    def parse(key, text):
        if text not in options:
            raise ConfigError(f"{key}: must be one of {', '.join(options)}, got {text!r}", key)
        return text
    return parse


def _float_list(key, text):
    return tuple(_positive(key, part.strip()) for part in text.split(",") if part.strip())


_SEGMENT = re.compile(r"^(on|off)\s*:\s*([^@\s]+)\s*(?:@\s*(\S+))?$")


def _segments(key, text):
    segs = []
    for part in text.split(","):
        part = part.strip()
        m = _SEGMENT.match(part)
        if not m:
            raise ConfigError(f"{key}: cannot parse segment {part!r}; "
                              "expected on:<seconds>[@<power_uw>] or off:<seconds>", key)
        state, dur, power = m.groups()
        if state == "off" and power is not None:
            raise ConfigError(f"{key}: off segments take no power ({part!r})", key)
        duration = _positive(key, dur)
        power_w = None if power is None else _nonneg(key, power) * 1e-6
        segs.append(Segment(duration, state == "on", power_w))
    if not segs:
        raise ConfigError(f"{key}: no segments given", key)
    return tuple(segs)


KEYS = {
    "trap.axial_frequency_hz": _positive,
    "trap.ion_count": _int,
    "trap.trap_height_um": _positive,
    "trap.radial_frequencies_hz": _float_list,
    "setup.source_kind": _choice("electrode", "glass", "both"),
    "setup.glass_height_um": _positive,
    "setup.glass_image": _bool,
    "setup.beam_offset_um": _float,
    "setup.dipole_length_um": _positive,
    "setup.wavelength_nm": _positive,
    "setup.power_uw": _positive,
    "schedule.segments": _segments,
    "noise.sigma_um": _nonneg,
    "noise.cadence_s": _positive,
    "seed": _int,
    "field_map.start_um": _float,
    "field_map.stop_um": _float,
    "field_map.step_um": _positive,
    "field_map.source": _choice("electrode", "glass", "both"),
    "field_map.charge_count": _nonneg,
    "sensitivity.position_noise_um": _positive,
    "sensitivity.integration_time_s": _positive,
    "fit.free_offset": _bool,
    "fit.max_iter": _int,
}
for _n in ("1", "2"):
    for _p in ("p0", "delta", "gamma"):
        KEYS[f"kinetics.electrode.{_n}.{_p}"] = _nonneg
for _p in ("p0", "delta", "gamma"):
    KEYS[f"kinetics.glass.{_p}"] = _nonneg


class RunConfig:
    """Parsed configuration with accessors that build the model objects.

    ``values`` holds the parsed (still experiment-unit) values by key.
    """

    def __init__(self, values):
        self.values = dict(values)
        self._validate()

    def __contains__(self, key):
        return key in self.values

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key):
        if key not in self.values:
            raise ConfigError(f"{key}: required key is missing", key)
        return self.values[key]

    def _validate(self):
        n = self.get("trap.ion_count", 3)
        if not 1 <= n <= MAX_IONS:
            raise ConfigError(f"trap.ion_count: must be in [1, {MAX_IONS}]", "trap.ion_count")
        if "fit.max_iter" in self and self.values["fit.max_iter"] < 1:
            raise ConfigError("fit.max_iter: must be at least 1", "fit.max_iter")
        for idx in ("1", "2"):
            given = [k for k in self.values if k.startswith(f"kinetics.electrode.{idx}.")]
            if given and f"kinetics.electrode.{idx}.p0" not in self.values:
                raise ConfigError(f"kinetics.electrode.{idx}.p0: required when other "
                                  f"process {idx} keys are set", f"kinetics.electrode.{idx}.p0")
        if any(k.startswith("kinetics.glass.") for k in self.values) \
                and "kinetics.glass.p0" not in self.values:
            raise ConfigError("kinetics.glass.p0: required when other glass kinetics "
                              "keys are set", "kinetics.glass.p0")
        # build eagerly so physical inconsistencies surface at load time
        self.trap()
        self.setup()
        self.electrode_params()
        self.glass_params()
        if "schedule.segments" in self:
            self.schedule()

    def trap(self):
        try:
            return TrapConfig.from_hz(
                self.require("trap.axial_frequency_hz"),
                trap_height=self.get("trap.trap_height_um", 800.0) * 1e-6,
                ion=CA40,
                ion_count=self.get("trap.ion_count", 3),
                radial_frequencies=tuple(2 * math.pi * f for f in
                                         self.get("trap.radial_frequencies_hz", ())))
        except DomainError as exc:
            raise ConfigError(f"trap: {exc}", "trap") from None

    def setup(self):
        glass = self.get("setup.glass_height_um")
        return ExperimentSetup(
            trap=self.trap(),
            source_kind=self.get("setup.source_kind", "electrode"),
            beam_offset_x=self.get("setup.beam_offset_um", 200.0) * 1e-6,
            glass_height=None if glass is None else glass * 1e-6,
            dipole_length=self.get("setup.dipole_length_um", 1.0) * 1e-6,
            calibration_power=self.get("setup.power_uw", 1.0) * 1e-6,
            wavelength=self.get("setup.wavelength_nm", 375.0) * 1e-9,
            glass_image=self.get("setup.glass_image", True),
        )

    @property
    def has_optics(self):
        return "setup.power_uw" in self and "setup.wavelength_nm" in self

    def electrode_params(self):
        procs = []
        for idx in ("1", "2"):
            key = f"kinetics.electrode.{idx}"
            if f"{key}.p0" in self:
                procs.append(ChargingParams(self.values[f"{key}.p0"],
                                            self.get(f"{key}.delta", 0.0),
                                            self.get(f"{key}.gamma", 0.0)))
        return MultiProcessParams(procs) if procs else None

    def glass_params(self):
        if "kinetics.glass.p0" not in self:
            return None
        return ChargingParams(self.values["kinetics.glass.p0"],
                              self.get("kinetics.glass.delta", 0.0),
                              self.get("kinetics.glass.gamma", 0.0))

    def schedule(self):
        return IlluminationSchedule(self.require("schedule.segments"),
                                    self.get("setup.power_uw", 1.0) * 1e-6)


def parse_config(text):
    """Parse config text into a :class:`RunConfig`."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{key}: unknown key (line {lineno})", key)
        if key in values:
            raise ConfigError(f"{key}: given twice (line {lineno})", key)
        values[key] = KEYS[key](key, value)
    return RunConfig(values)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_float(value):
    """Shortest decimal that round-trips to the same double."""
    return repr(float(value))


def _read_rows(path, header, ncols):
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0].rstrip("\r") != header:
        raise TraceFormatError(f"header must be exactly {header!r}", 1)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.rstrip("\r")
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != ncols:
            raise TraceFormatError(f"expected {ncols} fields, got {len(parts)}", lineno)
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise TraceFormatError(f"non-numeric field in {line!r}", lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise TraceFormatError("fields must be finite", lineno)
        rows.append((lineno, vals))
    return rows


def read_trace(path, noise_sigma=0.0):
    """Read a ``t_s,x_um`` CSV into a :class:`TimeSeries` (SI units)."""
    rows = _read_rows(path, TRACE_HEADER, 2)
    if not rows:
        raise TraceFormatError("trace has no data rows")
    prev = -math.inf
    for lineno, (t, _) in rows:
        if not t > prev:
            raise TraceFormatError("t_s must be strictly increasing", lineno)
        prev = t
    arr = np.array([vals for _, vals in rows])
    cadence = float(np.median(np.diff(arr[:, 0]))) if len(arr) > 1 else 1.0
    return TimeSeries(arr[:, 0], arr[:, 1] * 1e-6, noise_sigma, cadence)


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        fh.write(header + "\n")
        for row in rows:
            writer.writerow([format_float(v) for v in row])


def write_trace(path, series):
    _write_rows(path, TRACE_HEADER, zip(series.t, series.x * 1e6))


def read_velocity_map(path):
    """Read a ``dx_um,v_um_per_s,power_uw`` CSV into a :class:`VelocityMap`."""
    rows = _read_rows(path, VELOCITY_HEADER, 3)
    if not rows:
        raise TraceFormatError("velocity map has no data rows")
    arr = np.array([vals for _, vals in rows])
    for lineno, vals in rows:
        if vals[2] < 0:
            raise TraceFormatError("power_uw must be non-negative", lineno)
    return VelocityMap(arr[:, 0] * 1e-6, arr[:, 1] * 1e-6, arr[:, 2] * 1e-6)


def write_velocity_map(path, vmap):
    _write_rows(path, VELOCITY_HEADER,
                zip(vmap.offsets * 1e6, vmap.velocities * 1e6, vmap.powers * 1e6))


def write_field_map(path, offsets, fields):
    _write_rows(path, FIELD_MAP_HEADER, zip(np.asarray(offsets) * 1e6, fields))
