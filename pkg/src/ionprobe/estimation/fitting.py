"""Fitting charging models to COM traces and initial-velocity maps.

A single on/off trace cannot separate ``P0``, ``delta`` and ``gamma``;
it only fixes the settling rates and the saturation displacement.  Trace
models are therefore written per process as

    x(t) = offset + amplitude * nu(t; gamma_on, gamma_off)

where ``nu`` is the charge in units of its steady state at calibration
power.  ``P0``, ``delta`` and the quantum efficiency are derived afterwards
from the known displacement per charge.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .. import kernels
from ..errors import ConfigError, DomainError
from ..forward import (
    TimeSeries, VelocityMap, dipole_efficiency_from_rate, dipole_rate_coefficient,
    displacement_per_charge, efficiency_from_rate, monopole_rate_coefficient)
from ..electrostatics import dipole_axial_kernel, monopole_axial_kernel
from ..kinetics import IlluminationSchedule
from .lm import levenberg_marquardt

__all__ = [
    "FitProblem", "FitResult", "FreeParameter", "PARAMETER_NAMES", "KINDS",
    "fit", "fit_two_process", "model_values", "residual_function",
    "timeseries_problem", "velocity_map_problem", "derived_values",
    "DEGENERACY_RATIO",
]

KINDS = ("timeseries-electrode", "timeseries-glass", "timeseries-both",
         "velocity-map-dipole", "velocity-map-monopole")

PARAMETER_NAMES = {
    ("timeseries-electrode", 1): ("offset", "amplitude", "gamma_on", "gamma_off"),
    ("timeseries-electrode", 2): ("offset", "amplitude_1", "amplitude_2", "gamma_on_1",
                                  "on_ratio", "gamma_off_1", "gamma_off_2"),
    ("timeseries-glass", 1): ("offset", "amplitude", "gamma_on", "gamma_off"),
    ("timeseries-both", 1): ("offset", "amplitude_electrode", "gamma_on_electrode",
                             "gamma_off_electrode", "amplitude_glass", "gamma_on_glass",
                             "gamma_off_glass"),
    ("velocity-map-dipole", 1): ("d_rel", "trap_height"),
    ("velocity-map-monopole", 1): ("q_rel", "glass_height", "trap_height"),
}

DEGENERACY_RATIO = 1.2


@dataclass(frozen=True)
class FreeParameter:
    guess: float
    lower: float
    upper: float

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ConfigError("parameter bounds must be finite")
        if not self.lower < self.upper:
            raise ConfigError("lower bound must be below upper bound")
        if not self.lower <= self.guess <= self.upper:
            raise ConfigError(f"initial guess {self.guess!r} outside "
                              f"[{self.lower!r}, {self.upper!r}]")


@dataclass
class FitProblem:
    """Everything needed to fit one data set.

    ``free_parameters`` maps names to :class:`FreeParameter` (or to
    ``(guess, lower, upper)`` tuples); ``fixed_parameters`` maps names to
    values.  Together they must cover the model's parameters exactly once.
    Trace fits also need the illumination ``schedule``.  ``sigma`` weights
    the residuals; it defaults to the trace's noise level.
    """

    kind: str
    data: object
    setup: object
    free_parameters: dict
    fixed_parameters: dict = field(default_factory=dict)
    schedule: IlluminationSchedule = None
    processes: int = 1
    sigma: float = None
    max_iter: int = 200

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown fit kind {self.kind!r}")
        key = (self.kind, self.processes)
        if key not in PARAMETER_NAMES:
            raise ConfigError(f"{self.kind} does not support {self.processes} processes")
        self.free_parameters = {k: v if isinstance(v, FreeParameter) else FreeParameter(*v)
                                for k, v in self.free_parameters.items()}
        self.fixed_parameters = {k: float(v) for k, v in self.fixed_parameters.items()}
        names = PARAMETER_NAMES[key]
        both = set(self.free_parameters) & set(self.fixed_parameters)
        if both:
            raise ConfigError(f"parameters both free and fixed: {sorted(both)}")
        given = set(self.free_parameters) | set(self.fixed_parameters)
        if given != set(names):
            missing = sorted(set(names) - given)
            extra = sorted(given - set(names))
            raise ConfigError(f"parameter lists do not match the model: "
                              f"missing {missing}, unknown {extra}")
        if self.kind.startswith("timeseries"):
            if not isinstance(self.data, TimeSeries):
                raise ConfigError("trace fits need TimeSeries data")
            if self.schedule is None:
                raise ConfigError("trace fits need the illumination schedule")
            if self.schedule.calibration_power is None:
                self.schedule = IlluminationSchedule(self.schedule.segments,
                                                     self.setup.calibration_power)
            if self.data.t[-1] > self.schedule.duration or self.data.t[0] < 0:
                raise DomainError("trace extends beyond the illumination schedule")
            if self.sigma is None and self.data.noise_sigma > 0:
                self.sigma = self.data.noise_sigma
        elif not isinstance(self.data, VelocityMap):
            raise ConfigError("velocity-map fits need VelocityMap data")
        if len(self.data) < 2 * len(self.free_parameters):
            raise DomainError(f"{len(self.data)} points cannot constrain "
                              f"{len(self.free_parameters)} free parameters")

    @property
    def parameter_names(self):
        return PARAMETER_NAMES[(self.kind, self.processes)]

    @property
    def free_names(self):
        return [n for n in self.parameter_names if n in self.free_parameters]

    def full_parameters(self, free_values):
        params = dict(self.fixed_parameters)
        params.update(zip(self.free_names, np.asarray(free_values, dtype=float).tolist()))
        return params


@dataclass
class FitResult:
    parameters: dict
    standard_error_proxy: dict
    residual_rms: float
    iterations: int
    converged: bool
    derived: dict
    message: str = ""
    poorly_identifiable: bool = False
    cost_history: list = field(default_factory=list)
    cost: float = 0.0


# --- model evaluation -----------------------------------------------------

def _unit_trajectory(schedule, times, gamma_on, gamma_off):
    # charge in units of its calibration-power steady state
    return kernels.propagate_charge(
        gamma_on, gamma_on - gamma_off, gamma_off,
        np.ascontiguousarray(schedule.boundaries()),
        np.ascontiguousarray(schedule.scales()), 0.0, times)


def model_values(problem, params):
    """Model prediction at the data's abscissae for a full parameter dict."""
    p = params
    kind = problem.kind
    if kind.startswith("timeseries"):
        t = problem.data.t
        sch = problem.schedule
        x = np.full(t.shape, p["offset"])
        if kind == "timeseries-both":
            x += p["amplitude_electrode"] * _unit_trajectory(
                sch, t, p["gamma_on_electrode"], p["gamma_off_electrode"])
            x += p["amplitude_glass"] * _unit_trajectory(
                sch, t, p["gamma_on_glass"], p["gamma_off_glass"])
        elif problem.processes == 2:
            g2 = p["gamma_on_1"] * p["on_ratio"]
            x += p["amplitude_1"] * _unit_trajectory(sch, t, p["gamma_on_1"], p["gamma_off_1"])
            x += p["amplitude_2"] * _unit_trajectory(sch, t, g2, p["gamma_off_2"])
        else:
            x += p["amplitude"] * _unit_trajectory(sch, t, p["gamma_on"], p["gamma_off"])
        return x
    vm = problem.data
    scale = vm.powers / problem.setup.calibration_power
    if kind == "velocity-map-dipole":
        return p["d_rel"] * scale * dipole_axial_kernel(vm.offsets, p["trap_height"])
    kernel = monopole_axial_kernel(vm.offsets, p["glass_height"])
    if problem.setup.glass_image:
        kernel = kernel - monopole_axial_kernel(vm.offsets,
                                                p["glass_height"] + 2 * p["trap_height"])
    return -p["q_rel"] * scale * kernel


def _observed(problem):
    if isinstance(problem.data, TimeSeries):
        return problem.data.x
    return problem.data.velocities


def residual_function(problem):
    """Weighted residuals as a function of the free-parameter vector."""
    y = _observed(problem)
    w = 1.0 / problem.sigma if problem.sigma else 1.0

    def fun(free_values):
        return (model_values(problem, problem.full_parameters(free_values)) - y) * w

    return fun


# --- derived quantities ---------------------------------------------------

def derived_values(problem, params):
    """Physical quantities implied by fitted parameters.

    Rates ``gamma_on``/``gamma_off`` (1/s) and time constants per process;
    when the geometry fixes the displacement per charge also ``n_eq``,
    ``p0`` (charges/s at calibration power), ``delta``, the velocity
    amplitude ``d_rel``/``q_rel`` and the efficiency ``eta`` (glass) or
    ``eta_dip`` (electrode, per micrometre of dipole length).
    """
    setup = problem.setup
    p = params
    out = {}
    if problem.kind.startswith("velocity-map"):
        if problem.kind == "velocity-map-dipole":
            rate = p["d_rel"] / dipole_rate_coefficient(setup)
            out["production_rate"] = rate
            out["eta_dip"] = dipole_efficiency_from_rate(
                rate, setup.calibration_power, setup.wavelength, setup.dipole_length)
        else:
            rate = p["q_rel"] / monopole_rate_coefficient(setup)
            out["production_rate"] = rate
            out["eta"] = efficiency_from_rate(rate, setup.calibration_power, setup.wavelength)
        return out

    groups = []  # (suffix, source, amplitude, gamma_on, gamma_off)
    if problem.kind == "timeseries-both":
        for src in ("electrode", "glass"):
            groups.append(("_" + src, src, p["amplitude_" + src],
                           p["gamma_on_" + src], p["gamma_off_" + src]))
    elif problem.processes == 2:
        groups.append(("_1", "electrode", p["amplitude_1"], p["gamma_on_1"], p["gamma_off_1"]))
        groups.append(("_2", "electrode", p["amplitude_2"],
                       p["gamma_on_1"] * p["on_ratio"], p["gamma_off_2"]))
    else:
        src = "glass" if problem.kind == "timeseries-glass" else "electrode"
        groups.append(("", src, p["amplitude"], p["gamma_on"], p["gamma_off"]))

    totals = {}
    for suffix, src, amp, g_on, g_off in groups:
        out["gamma_on" + suffix] = g_on
        out["gamma_off" + suffix] = g_off
        out["tau_on" + suffix] = 1.0 / g_on if g_on > 0 else math.inf
        out["tau_off" + suffix] = 1.0 / g_off if g_off > 0 else math.inf
        coupling = displacement_per_charge(setup, src)
        if coupling == 0:
            continue
        n_eq = amp / coupling
        p0 = n_eq * g_on
        out["n_eq" + suffix] = n_eq
        out["p0" + suffix] = p0
        out["delta" + suffix] = (g_on - g_off) / p0 if p0 != 0 else math.nan
        totals[src] = totals.get(src, 0.0) + p0
    if "electrode" in totals:
        rate = totals["electrode"]
        out["production_rate_electrode"] = rate
        out["d_rel"] = dipole_rate_coefficient(setup) * rate
        out["eta_dip"] = dipole_efficiency_from_rate(
            rate, setup.calibration_power, setup.wavelength, setup.dipole_length)
    if "glass" in totals:
        rate = totals["glass"]
        out["production_rate_glass"] = rate
        out["q_rel"] = monopole_rate_coefficient(setup) * rate
        out["eta"] = efficiency_from_rate(rate, setup.calibration_power, setup.wavelength)
    return out


# --- fitting --------------------------------------------------------------

def _standard_errors(problem, jac, residuals):
    m, n = jac.shape
    if problem.sigma:
        s2 = 1.0
    else:
        s2 = float(residuals @ residuals) / max(m - n, 1)
    u, sv, vt = np.linalg.svd(jac, full_matrices=False)
    keep = sv > sv[0] * 1e-12 if sv.size and sv[0] > 0 else np.zeros(n, bool)
    cov = (vt[keep].T / sv[keep] ** 2) @ vt[keep] * s2
    var = np.diag(cov).copy()
    # parameters with weight in the null space are unconstrained
    if np.any(~keep):
        null_weight = np.sum(vt[~keep] ** 2, axis=0)
        var[null_weight > 1e-8] = np.inf
    return np.sqrt(var)


def fit(problem, start=None):
    """Least-squares fit of ``problem``.

    ``start`` optionally overrides the initial guesses (a dict of free
    parameter values).
    """
    names = problem.free_names
    fp = problem.free_parameters
    x0 = np.array([fp[n].guess for n in names], dtype=float)
    lower = np.array([fp[n].lower for n in names], dtype=float)
    upper = np.array([fp[n].upper for n in names], dtype=float)
    if start is not None:
        x0 = np.clip([start.get(n, v) for n, v in zip(names, x0)], lower, upper)
    fun = residual_function(problem)
    res = levenberg_marquardt(fun, x0, lower, upper, max_iter=problem.max_iter)
    params = problem.full_parameters(res.x)
    se = _standard_errors(problem, res.jacobian, res.residuals)
    y = _observed(problem)
    resid = model_values(problem, params) - y
    result = FitResult(
        parameters=params,
        standard_error_proxy=dict(zip(names, se.tolist())),
        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
        iterations=res.iterations,
        converged=res.converged,
        derived=derived_values(problem, params),
        message=res.message,
        cost_history=res.cost_history,
        cost=res.cost,
    )
    if problem.processes == 2:
        result.poorly_identifiable = _two_process_flag(result)
    return result


def _near_degenerate(ratio, rel_se):
    # ratio >= 1; flag unless it clears the threshold by two standard errors
    return not (ratio - 2.0 * ratio * rel_se >= DEGENERACY_RATIO)


def _two_process_flag(result):
    p = result.parameters
    se = result.standard_error_proxy
    r = p["on_ratio"]
    if _near_degenerate(1.0 / r, se.get("on_ratio", 0.0) / r):
        return True
    g1, g2 = p["gamma_off_1"], p["gamma_off_2"]
    if g1 <= 0 or g2 <= 0:
        return True
    rel = math.hypot(se.get("gamma_off_1", 0.0) / g1, se.get("gamma_off_2", 0.0) / g2)
    return _near_degenerate(max(g1, g2) / min(g1, g2), rel)


def fit_two_process(problem, n_starts=None):
    """Two-process trace fit with a small multi-start over the rate guesses.

    The second on-rate is ``on_ratio * gamma_on_1`` with ``0 < on_ratio < 1``,
    so the processes stay ordered.  The result is flagged
    ``poorly_identifiable`` when the two on-rates (or the two off-rates) are
    within a factor 1.2 of each other, or cannot be shown to differ by more
    than that at two standard errors of the proxy.
    """
    if problem.kind != "timeseries-electrode" or problem.processes != 2:
        raise ConfigError("fit_two_process needs a two-process electrode trace problem")
    fp = problem.free_parameters
    base = {n: fp[n].guess for n in problem.free_names}
    starts = [base]
    for ratio in (0.05, 0.15, 0.4):
        for g_fac in (0.5, 1.0, 2.0):
            s = dict(base)
            if "on_ratio" in s:
                s["on_ratio"] = ratio
            if "gamma_on_1" in s:
                s["gamma_on_1"] = base["gamma_on_1"] * g_fac
            starts.append(s)
    if n_starts is not None:
        starts = starts[:n_starts]
    best = None
    for s in starts:
        try:
            r = fit(problem, start=s)
        except (DomainError, np.linalg.LinAlgError):
            continue
        if best is None or (r.converged, -r.cost) > (best.converged, -best.cost):
            best = r
    if best is None:
        return fit(problem)
    return best


# --- problem builders -----------------------------------------------------

def _lit_window(schedule):
    bounds = schedule.boundaries()
    scales = schedule.scales()
    for k, s in enumerate(scales):
        if s > 0:
            return bounds[k], bounds[k + 1]
    raise ConfigError("schedule has no illuminated segment")


def _rate_from_crossing(t, y, start, level):
    # first time |y| crosses ``level`` after ``start``; returns 1/elapsed
    hit = np.nonzero(np.abs(y) >= level)[0]
    if hit.size == 0:
        return None
    dt = t[hit[0]] - start
    return 1.0 / dt if dt > 0 else None


def _single_guess(t, x, base, t_on, t_off, cadence, span):
    on = (t >= t_on) & (t <= t_off)
    y_on = x[on] - base
    tail = y_on[-3:] if y_on.size >= 3 else y_on
    a_end = float(np.mean(tail)) if tail.size else float(x.max() - base)
    g_on = _rate_from_crossing(t[on], y_on, t_on, 0.632 * abs(a_end)) or 4.0 / (t_off - t_on)
    amp = a_end / -math.expm1(-g_on * (t_off - t_on))
    off = t > t_off
    g_off = None
    if off.any() and a_end != 0:
        y_off = (x[off] - base) / a_end
        drop = np.nonzero(y_off <= math.exp(-1.0))[0]
        if drop.size:
            g_off = 1.0 / max(t[off][drop[0]] - t_off, cadence)
        else:
            last = float(np.mean(y_off[-3:]))
            if 0 < last < 1:
                g_off = -math.log(last) / (t[off][-1] - t_off)
    if g_off is None:
        g_off = 0.1 / span
    return amp, g_on, g_off


def timeseries_problem(data, setup, schedule, model="single", free_offset=False, max_iter=200):
    """Build a trace fit problem with initial guesses read off the data.

    ``model`` is ``single`` (one electrode process), ``two-process``,
    ``glass`` (no relaxation) or ``both`` (one electrode process plus glass).
    """
    t, x = data.t, data.x
    span = max(schedule.duration, t[-1])
    cadence = float(np.min(np.diff(t))) if t.size > 1 else 1.0
    t_on, t_off = _lit_window(schedule)
    before = t < t_on
    base = float(np.mean(x[before])) if before.any() else 0.0
    noise = data.noise_sigma
    amp_bound = 100.0 * (float(np.max(np.abs(x - base))) + 10.0 * noise) + 1e-12
    g_lo, g_hi = 1e-3 / span, 10.0 / cadence

    def rate(g):
        return FreeParameter(float(np.clip(g, g_lo * 1.001, g_hi * 0.999)), g_lo, g_hi)

    def amp(a):
        return FreeParameter(float(np.clip(a, -0.999 * amp_bound, 0.999 * amp_bound)),
                             -amp_bound, amp_bound)

    if free_offset:
        free = {"offset": FreeParameter(base, base - amp_bound, base + amp_bound)}
        fixed = {}
    else:
        free, fixed = {}, {"offset": 0.0}
    a, g_on, g_off = _single_guess(t, x, base, t_on, t_off, cadence, span)
    if a == 0:
        a = max(noise, 1e-12)
    if model in ("single", "glass"):
        free.update(amplitude=amp(a), gamma_on=rate(g_on))
        kind = "timeseries-electrode" if model == "single" else "timeseries-glass"
        if model == "glass":
            fixed["gamma_off"] = 0.0
        else:
            free["gamma_off"] = rate(g_off)
        return FitProblem(kind, data, setup, free, fixed, schedule, 1, max_iter=max_iter)
    if model == "two-process":
        free.update(amplitude_1=amp(0.3 * a), amplitude_2=amp(0.7 * a),
                    gamma_on_1=rate(2.0 * g_on),
                    on_ratio=FreeParameter(0.2, 1e-4, 1.0 - 1e-9),
                    gamma_off_1=rate(3.0 * g_off), gamma_off_2=rate(0.5 * g_off))
        return FitProblem("timeseries-electrode", data, setup, free, fixed, schedule, 2,
                          max_iter=max_iter)
    if model == "both":
        # glass charge persists, so the late-time level is mostly glass
        tail = x[t > t_off]
        late = float(np.mean(tail[-5:])) - base if tail.size else 0.0
        dur = t_off - t_on
        g_glass = 3.0 / dur
        a_glass = late / -math.expm1(-g_glass * dur) if late else -a
        peak_idx = np.argmax(np.abs(x[(t >= t_on) & (t <= t_off)] - base))
        a_elec = float((x[(t >= t_on) & (t <= t_off)][peak_idx] - base) - late) or a
        free.update(amplitude_electrode=amp(a_elec), gamma_on_electrode=rate(5.0 / dur),
                    gamma_off_electrode=rate(max(g_off, 5.0 / span)),
                    amplitude_glass=amp(a_glass), gamma_on_glass=rate(g_glass))
        fixed["gamma_off_glass"] = 0.0
        return FitProblem("timeseries-both", data, setup, free, fixed, schedule, 1,
                          max_iter=max_iter)
    raise ConfigError(f"unknown trace model {model!r}")


def velocity_map_problem(data, setup, model="dipole", max_iter=200):
    """Fit problem for an initial-velocity map with the geometry held fixed."""
    v = data.velocities
    scale = data.powers / setup.calibration_power
    if model == "dipole":
        k = scale * dipole_axial_kernel(data.offsets, setup.trap.trap_height)
        peak = float(np.max(np.abs(k)))
        guess = float(np.max(np.abs(v))) / peak if peak else 1.0
        free = {"d_rel": FreeParameter(guess if guess > 0 else 1e-30, 0.0, 1e3 * max(guess, 1e-30))}
        fixed = {"trap_height": setup.trap.trap_height}
        kind = "velocity-map-dipole"
    elif model == "monopole":
        if setup.glass_height is None:
            raise ConfigError("monopole fit needs setup.glass_height_um", "setup.glass_height_um")
        k = scale * monopole_axial_kernel(data.offsets, setup.glass_height)
        peak = float(np.max(np.abs(k)))
        guess = float(np.max(np.abs(v))) / peak if peak else 1.0
        free = {"q_rel": FreeParameter(guess if guess > 0 else 1e-30, 0.0, 1e3 * max(guess, 1e-30))}
        fixed = {"glass_height": setup.glass_height, "trap_height": setup.trap.trap_height}
        kind = "velocity-map-monopole"
    else:
        raise ConfigError(f"unknown velocity model {model!r}")
    return FitProblem(kind, data, setup, free, fixed, max_iter=max_iter)
