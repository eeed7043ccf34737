import math

import numpy as np
import pytest
from scipy.optimize import least_squares, minimize_scalar

from ionprobe.errors import ConditioningError, ConfigError, DomainError
from ionprobe.estimation import (
    FitProblem, derived_values, fit, fit_two_process, model_values, timeseries_problem,
    velocity_map_problem)
from ionprobe.forward import (
    ETA_DIPOLE_375, ETA_GLASS_375, TimeSeries, both_preset, displacement_per_charge,
    dipole_rate_coefficient, electrode_params_at, electrode_preset, glass_preset,
    sample_times, synthesize_timeseries, synthesize_velocity_map)
from ionprobe.constants import photon_rate
from ionprobe.kinetics import ChargingParams, MultiProcessParams


def noiseless(setup, e, g, sched):
    return synthesize_timeseries(setup, e, g, sched, noise_sigma=0.0)


def test_glass_noiseless_round_trip():
    setup, params, sched = glass_preset()
    res = fit(timeseries_problem(noiseless(setup, None, params, sched), setup, sched, "glass"))
    assert res.converged
    assert res.parameters["gamma_on"] == pytest.approx(params.gamma_on, rel=1e-6)
    assert res.derived["p0"] == pytest.approx(params.base_production_rate, rel=1e-6)
    assert res.derived["delta"] == pytest.approx(params.barrier_coefficient, rel=1e-6)
    assert res.derived["eta"] == pytest.approx(ETA_GLASS_375, rel=1e-6)


def test_single_electrode_noiseless_round_trip():
    setup, _, sched = electrode_preset()
    truth = ChargingParams.from_rates(1 / 16, 1 / 120, 5000.0)
    data = noiseless(setup, MultiProcessParams([truth]), None, sched)
    res = fit(timeseries_problem(data, setup, sched, "single"))
    assert res.converged
    assert res.parameters["gamma_on"] == pytest.approx(1 / 16, rel=1e-6)
    assert res.parameters["gamma_off"] == pytest.approx(1 / 120, rel=1e-6)
    assert res.derived["n_eq"] == pytest.approx(5000.0, rel=1e-6)


def test_two_process_noiseless_round_trip():
    setup, params, sched = electrode_preset()
    res = fit_two_process(timeseries_problem(noiseless(setup, params, None, sched),
                                             setup, sched, "two-process"))
    assert res.converged and not res.poorly_identifiable
    d = res.derived
    got = (d["tau_on_1"], d["tau_off_1"], d["tau_on_2"], d["tau_off_2"])
    assert got == pytest.approx((2.0, 5.0, 16.0, 120.0), rel=1e-6)
    assert d["eta_dip"] == pytest.approx(ETA_DIPOLE_375, rel=1e-6)


def test_both_noiseless_round_trip():
    setup, e, g, sched = both_preset()
    res = fit(timeseries_problem(noiseless(setup, e, g, sched), setup, sched, "both"))
    assert res.converged
    d = res.derived
    assert d["tau_on_electrode"] == pytest.approx(16.0, rel=1e-6)
    assert d["tau_off_electrode"] == pytest.approx(120.0, rel=1e-6)
    assert d["tau_on_glass"] == pytest.approx(38.0, rel=1e-6)
    assert d["eta"] == pytest.approx(ETA_GLASS_375, rel=1e-6)


@pytest.mark.parametrize("model", ["dipole", "monopole"])
def test_velocity_map_noiseless_round_trip(model):
    if model == "dipole":
        setup, _, _ = electrode_preset()
    else:
        setup, _, _ = glass_preset()
    offsets = np.linspace(-700e-6, 700e-6, 15)
    vm = synthesize_velocity_map(setup, model, 3e4, offsets)
    res = fit(velocity_map_problem(vm, setup, model))
    assert res.converged
    assert res.derived["production_rate"] == pytest.approx(3e4, rel=1e-8)


def test_glass_grid_oracle():
    """Profile the amplitude out analytically and scan gamma_on by brute force."""
    setup, params, sched = glass_preset()
    data = synthesize_timeseries(setup, None, params, sched, rng_seed=21)
    problem = timeseries_problem(data, setup, sched, "glass")
    res = fit(problem)
    t = data.t

    def profile(g):
        t_on = 150.0
        unit = np.where(t <= t_on, -np.expm1(-g * t), -np.expm1(-g * t_on))
        a = (unit @ data.x) / (unit @ unit)
        return np.sum((a * unit - data.x) ** 2), a
    grid = np.geomspace(1e-3, 1.0, 4001)
    best = grid[np.argmin([profile(g)[0] for g in grid])]
    opt = minimize_scalar(lambda g: profile(g)[0], bracket=(best / 1.01, best, best * 1.01),
                          tol=1e-12)
    assert res.parameters["gamma_on"] == pytest.approx(opt.x, rel=1e-5)
    assert res.parameters["amplitude"] == pytest.approx(profile(opt.x)[1], rel=1e-5)


def test_dipole_map_matches_linear_least_squares():
    setup, _, _ = electrode_preset()
    offsets = np.linspace(-700e-6, 700e-6, 15)
    vm = synthesize_velocity_map(setup, "dipole", 3e4, offsets, noise_sigma=0.02e-6, rng_seed=2)
    problem = velocity_map_problem(vm, setup, "dipole")
    res = fit(problem)
    k = model_values(problem, {"d_rel": 1.0, "trap_height": setup.trap.trap_height})
    d_ls = (k @ vm.velocities) / (k @ k)
    assert res.parameters["d_rel"] == pytest.approx(d_ls, rel=1e-8)


@pytest.mark.parametrize("model", ["single", "two-process", "both"])
def test_matches_independent_least_squares(model):
    if model == "both":
        setup, e, g, sched = both_preset()
    else:
        setup, e, sched = electrode_preset()
        g = None
    if model == "single":
        e = MultiProcessParams([ChargingParams.from_rates(1 / 16, 1 / 120, 5000.0)])
    data = synthesize_timeseries(setup, e, g, sched, rng_seed=5)
    problem = timeseries_problem(data, setup, sched, model)
    res = fit_two_process(problem) if model == "two-process" else fit(problem)
    names = problem.free_names
    x0 = np.array([res.parameters[n] for n in names])
    lo = [problem.free_parameters[n].lower for n in names]
    hi = [problem.free_parameters[n].upper for n in names]
    y = data.x / data.noise_sigma

    def fun(v):
        p = problem.full_parameters(v * np.abs(x0))
        return model_values(problem, p) / data.noise_sigma - y
    ref = least_squares(fun, np.ones_like(x0), bounds=(np.array(lo) / np.abs(x0),
                                                       np.array(hi) / np.abs(x0)),
                        xtol=1e-14, ftol=1e-14, gtol=1e-14)
    assert res.cost <= ref.cost * (1 + 1e-8)
    assert ref.x * np.abs(x0) == pytest.approx(x0, rel=1e-4)


def test_derived_values_recomputable():
    setup, params, sched = electrode_preset()
    data = synthesize_timeseries(setup, params, None, sched, rng_seed=1)
    problem = timeseries_problem(data, setup, sched, "two-process")
    res = fit_two_process(problem)
    p, d = res.parameters, res.derived
    assert d == derived_values(problem, p)
    k = displacement_per_charge(setup, "electrode")
    n1 = p["amplitude_1"] / k
    assert d["n_eq_1"] == pytest.approx(n1, rel=1e-12)
    assert d["p0_1"] == pytest.approx(n1 * p["gamma_on_1"], rel=1e-12)
    g2 = p["gamma_on_1"] * p["on_ratio"]
    assert d["gamma_on_2"] == pytest.approx(g2, rel=1e-12)
    assert d["delta_2"] == pytest.approx((g2 - p["gamma_off_2"]) / d["p0_2"], rel=1e-12)
    rate = d["p0_1"] + d["p0_2"]
    assert d["d_rel"] == pytest.approx(dipole_rate_coefficient(setup) * rate, rel=1e-12)
    eta = rate / photon_rate(setup.calibration_power, setup.wavelength)
    assert d["eta_dip"] == pytest.approx(eta * setup.dipole_length / 1e-6, rel=1e-12)


def test_zero_trace():
    setup, _, sched = glass_preset()
    t = sample_times(sched, 1.0)
    data = TimeSeries(t, np.zeros_like(t), 0.12e-6, 1.0)
    res = fit(timeseries_problem(data, setup, sched, "glass"))
    assert abs(res.parameters["amplitude"]) < 3 * 0.12e-6


def test_degenerate_two_process_is_flagged():
    setup, _, sched = electrode_preset()
    close = MultiProcessParams([ChargingParams.from_rates(1 / 15, 1 / 110, 4000.0),
                                ChargingParams.from_rates(1 / 16, 1 / 120, 4000.0)])
    data = synthesize_timeseries(setup, close, None, sched, rng_seed=4)
    res = fit_two_process(timeseries_problem(data, setup, sched, "two-process"))
    assert res.poorly_identifiable


def test_single_truth_two_process_fit():
    setup, _, sched = electrode_preset()
    one = MultiProcessParams([ChargingParams.from_rates(1 / 16, 1 / 120, 8000.0)])
    data = synthesize_timeseries(setup, one, None, sched, rng_seed=6)
    res = fit_two_process(timeseries_problem(data, setup, sched, "two-process"))
    p, se = res.parameters, res.standard_error_proxy
    small = min(abs(p["amplitude_1"]), abs(p["amplitude_2"]))
    small_name = "amplitude_1" if abs(p["amplitude_1"]) <= abs(p["amplitude_2"]) else "amplitude_2"
    assert res.poorly_identifiable or small <= 2 * se[small_name]


def test_preset_two_process_not_flagged():
    setup, params, sched = electrode_preset()
    data = synthesize_timeseries(setup, params, None, sched, rng_seed=0)
    assert not fit_two_process(timeseries_problem(data, setup, sched, "two-process")) \
        .poorly_identifiable


def test_problem_validation():
    setup, params, sched = glass_preset()
    data = synthesize_timeseries(setup, None, params, sched, rng_seed=0)
    good = dict(amplitude=(1e-6, -1e-5, 1e-5), gamma_on=(0.02, 1e-4, 1.0))
    fixed = dict(offset=0.0, gamma_off=0.0)
    FitProblem("timeseries-glass", data, setup, good, fixed, sched)
    with pytest.raises(ConfigError):
        FitProblem("timeseries-glass", data, setup, good, {"offset": 0.0}, sched)
    with pytest.raises(ConfigError):
        FitProblem("timeseries-glass", data, setup, good, dict(fixed, amplitude=1.0), sched)
    with pytest.raises(ConfigError):
        FitProblem("timeseries-glass", data, setup, good, dict(fixed, bogus=1.0), sched)
    with pytest.raises(ConfigError):
        FitProblem("timeseries-glass", data, setup, good, fixed, None)
    with pytest.raises(ConfigError):
        FitProblem("nonsense", data, setup, good, fixed, sched)
    with pytest.raises(ConfigError):
        FitProblem("timeseries-glass", data, setup,
                   dict(good, gamma_on=(2.0, 1e-4, 1.0)), fixed, sched)
    short = TimeSeries(data.t[:3], data.x[:3], data.noise_sigma, 1.0)
    with pytest.raises(DomainError):
        FitProblem("timeseries-glass", short, setup, good, fixed, sched)


def test_unidentifiable_start_raises():
    setup, params, sched = glass_preset()
    data = synthesize_timeseries(setup, None, params, sched, rng_seed=0)
    # with zero amplitude the rate has no effect on the model
    problem = FitProblem("timeseries-glass", data, setup,
                         dict(amplitude=(0.0, -1e-5, 1e-5), gamma_on=(0.02, 1e-4, 1.0)),
                         dict(offset=0.0, gamma_off=0.0), sched)
    with pytest.raises(ConditioningError):
        fit(problem)
