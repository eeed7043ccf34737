import numpy as np
import pytest

from ionprobe.errors import ConfigError
from ionprobe.electrostatics import DIPOLE_PEAK_RATIO, MONOPOLE_PEAK_RATIO
from ionprobe.forward import (
    ETA_GLASS_375, ExperimentSetup, both_preset, default_noise_sigma, dipole_efficiency_from_rate,
    displacement_per_charge, efficiency_from_rate, electrode_preset, glass_preset,
    initial_velocity_electrode, initial_velocity_glass, noiseless_displacement, sample_times,
    synthesize_timeseries, synthesize_velocity_map)
from ionprobe.constants import photon_rate
from ionprobe.kinetics import ChargingParams, IlluminationSchedule, MultiProcessParams, initial_production_rate


def test_default_noise_scaling():
    assert default_noise_sigma(3, 1.0) == pytest.approx(0.12e-6)
    assert default_noise_sigma(12, 4.0) == pytest.approx(0.12e-6 / 4)


def test_sample_times_cover_schedule():
    _, _, sched = glass_preset()
    t = sample_times(sched, 1.0)
    assert t.size == 300 and t[0] == 0.0 and t[-1] == 299.0


def test_same_seed_same_trace():
    setup, params, sched = glass_preset()
    a = synthesize_timeseries(setup, None, params, sched, rng_seed=11)
    b = synthesize_timeseries(setup, None, params, sched, rng_seed=11)
    c = synthesize_timeseries(setup, None, params, sched, rng_seed=12)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.t, b.t)
    assert not np.array_equal(a.x, c.x)


@pytest.mark.parametrize("offset", [150e-6, 300e-6, 800e-6])
def test_signs(offset):
    setup, eparams, _ = electrode_preset()
    setup = setup.replace(beam_offset_x=offset)
    assert displacement_per_charge(setup, "electrode") > 0
    mirrored = setup.replace(beam_offset_x=-offset)
    assert displacement_per_charge(mirrored, "electrode") == pytest.approx(
        -displacement_per_charge(setup, "electrode"), rel=1e-12)
    gsetup, _, _ = glass_preset()
    gsetup = gsetup.replace(beam_offset_x=offset)
    assert displacement_per_charge(gsetup, "glass") < 0
    assert displacement_per_charge(gsetup.replace(beam_offset_x=-offset), "glass") > 0


def test_glass_persists_electrode_relaxes():
    gsetup, gparams, gsched = glass_preset()
    t = sample_times(gsched, 1.0)
    x = noiseless_displacement(gsetup, None, gparams, gsched, t)
    assert x[-1] == pytest.approx(x[150], rel=1e-12)
    esetup, eparams, esched = electrode_preset()
    t = sample_times(esched, 1.0)
    x = noiseless_displacement(esetup, eparams, None, esched, t)
    assert abs(x[-1]) < 0.1 * abs(x[100])


def test_superposition_is_exact():
    setup, eparams, gparams, sched = both_preset()
    t = sample_times(sched, 1.0)
    both = noiseless_displacement(setup, eparams, gparams, sched, t)
    only_e = noiseless_displacement(setup.replace(source_kind="electrode"), eparams, None, sched, t)
    only_g = noiseless_displacement(setup.replace(source_kind="glass"), None, gparams, sched, t)
    assert np.allclose(both, only_e + only_g, rtol=1e-14, atol=1e-25)


def test_zero_rates_give_pure_noise():
    setup, _, sched = glass_preset()
    series = synthesize_timeseries(setup, None, ChargingParams(0.0), sched,
                                   noise_sigma=0.0)
    assert np.all(series.x == 0.0)


def test_param_kind_consistency():
    setup, params, sched = glass_preset()
    with pytest.raises(ConfigError):
        synthesize_timeseries(setup, None, None, sched)
    with pytest.raises(ConfigError):
        synthesize_timeseries(setup, MultiProcessParams([params]), params, sched)
    esetup, eparams, esched = electrode_preset()
    with pytest.raises(ConfigError):
        synthesize_timeseries(esetup, eparams, params, esched)
    with pytest.raises(ConfigError):
        synthesize_timeseries(esetup, None, None, esched)


def test_setup_validation():
    setup, _, _ = glass_preset()
    with pytest.raises(ConfigError):
        setup.replace(source_kind="plasma")
    with pytest.raises(ConfigError):
        setup.replace(glass_height=None)
    with pytest.raises(ConfigError):
        setup.replace(dipole_length=-1e-6)


def test_velocity_maps_are_odd_with_expected_peaks():
    esetup, _, _ = electrode_preset()
    h = esetup.trap.trap_height
    x = np.linspace(-3 * h, 3 * h, 6001)
    v = synthesize_velocity_map(esetup, "dipole", 1e4, x).velocities
    assert np.allclose(v, -v[::-1], rtol=1e-12, atol=1e-30)
    assert x[np.argmax(v)] == pytest.approx(DIPOLE_PEAK_RATIO * h, abs=x[1] - x[0])
    gsetup, _, _ = glass_preset()
    gsetup = gsetup.replace(glass_image=False)
    hg = gsetup.glass_height
    x = np.linspace(-3 * hg, 3 * hg, 6001)
    v = synthesize_velocity_map(gsetup, "monopole", 1e4, x).velocities
    assert np.allclose(v, -v[::-1], rtol=1e-12, atol=1e-30)
    # pushed away: the most negative velocity sits at +h/sqrt(2)
    assert x[np.argmin(v)] == pytest.approx(MONOPOLE_PEAK_RATIO * hg, abs=x[1] - x[0])


def test_glass_initial_velocity_example():
    setup, params, _ = glass_preset()
    v = initial_velocity_glass(setup.replace(glass_image=False), initial_production_rate(params))
    assert abs(v) == pytest.approx(0.22e-6, rel=0.02)
    assert v < 0


def test_electrode_initial_velocity_is_physical():
    setup, params, _ = electrode_preset()
    v = initial_velocity_electrode(setup, initial_production_rate(params))
    assert 0.1e-6 < v < 10e-6


def test_efficiency_round_trip():
    rate = 566.338
    eta = efficiency_from_rate(rate, 2.5e-6, 375e-9)
    assert eta * photon_rate(2.5e-6, 375e-9) == pytest.approx(rate, rel=1e-14)
    assert eta == pytest.approx(ETA_GLASS_375, rel=1e-5)
    c = dipole_efficiency_from_rate(rate, 2.5e-6, 375e-9, 2e-6)
    assert c == pytest.approx(2 * eta, rel=1e-14)


def _small_time_slope(setup, eparams, gparams, sched):
    dt = 1e-3
    x = noiseless_displacement(setup, eparams, gparams, sched, np.array([0.0, dt]))
    return (x[1] - x[0]) / dt


@pytest.mark.parametrize("ion_count", [1, 3])
def test_small_time_consistency(ion_count):
    setup, gparams, sched = glass_preset(ion_count)
    slope = _small_time_slope(setup, None, gparams, sched)
    v0 = initial_velocity_glass(setup, initial_production_rate(gparams))
    assert slope == pytest.approx(v0, rel=5e-3)
    setup, eparams, sched = electrode_preset(ion_count)
    slope = _small_time_slope(setup, eparams, None, sched)
    v0 = initial_velocity_electrode(setup, initial_production_rate(eparams))
    assert slope == pytest.approx(v0, rel=5e-3)


def test_power_scales_velocity_linearly():
    setup, _, _ = electrode_preset()
    x = np.array([100e-6, 400e-6])
    one = synthesize_velocity_map(setup, "dipole", 1e4, x).velocities
    two = synthesize_velocity_map(setup, "dipole", 1e4, x, powers=2 * setup.calibration_power)
    assert np.allclose(two.velocities, 2 * one, rtol=1e-14)
