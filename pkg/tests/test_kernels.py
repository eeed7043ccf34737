import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ionprobe import kernels
from ionprobe._accel import HAVE_NUMBA

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def _schedule_arrays(rng, nseg):
    durations = rng.uniform(1.0, 50.0, nseg)
    starts = np.concatenate(([0.0], np.cumsum(durations)))
    scales = rng.choice([0.0, 0.5, 1.0, 2.0], nseg)
    times = np.sort(rng.uniform(0, starts[-1], 200))
    return starts, scales, times


@needs_numba
@pytest.mark.parametrize("seed", range(5))
def test_propagate_numba_matches_numpy(seed):
    rng = np.random.default_rng(seed)
    starts, scales, times = _schedule_arrays(rng, 6)
    args = (rng.uniform(1, 1e3), rng.uniform(0, 0.5), rng.uniform(0, 0.3), starts, scales,
            rng.uniform(0, 10), times)
    a = kernels.propagate_charge_numpy(*args)
    b = kernels.propagate_charge_numba(*args)
    assert np.allclose(a, b, rtol=1e-13, atol=0)


@needs_numba
@pytest.mark.parametrize("n", [2, 3, 6, 12])
def test_coulomb_numba_matches_numpy(n):
    u = np.linspace(-2, 2, n) + 0.01 * np.arange(n) ** 2
    ea, ga, ha = kernels.coulomb_gradient_hessian_numpy(u)
    eb, gb, hb = kernels.coulomb_gradient_hessian_numba(u)
    assert ea == pytest.approx(eb, rel=1e-14)
    assert np.allclose(ga, gb, rtol=1e-12, atol=1e-14)
    assert np.allclose(ha, hb, rtol=1e-12, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=6, unique=True))
def test_coulomb_gradient_is_energy_derivative(values):
    u = np.sort(np.array(values))
    if np.min(np.diff(u)) < 0.05:
        return
    e, g, h = kernels.coulomb_gradient_hessian_numpy(u)
    eps = 1e-6
    for j in range(u.size):
        up, um = u.copy(), u.copy()
        up[j] += eps
        um[j] -= eps
        fd = (kernels.coulomb_gradient_hessian_numpy(up)[0]
              - kernels.coulomb_gradient_hessian_numpy(um)[0]) / (2 * eps)
        assert fd == pytest.approx(g[j], rel=1e-5, abs=1e-6)
        gd = (kernels.coulomb_gradient_hessian_numpy(up)[1]
              - kernels.coulomb_gradient_hessian_numpy(um)[1]) / (2 * eps)
        assert np.allclose(gd, h[:, j], rtol=1e-4, atol=1e-5)


def test_segment_step_limits():
    # no relaxation and no barrier: linear growth
    out = kernels.propagate_charge_numpy(5.0, 0.0, 0.0, np.array([0.0, 10.0]),
                                         np.array([1.0]), 1.0, np.array([0.0, 4.0, 10.0]))
    assert out.tolist() == [1.0, 21.0, 51.0]
    # dark and no relaxation: charge holds
    out = kernels.propagate_charge_numpy(5.0, 0.1, 0.0, np.array([0.0, 10.0]),
                                         np.array([0.0]), 3.0, np.array([0.0, 10.0]))
    assert out.tolist() == [3.0, 3.0]


def test_public_alias_is_consistent():
    starts, scales, times = _schedule_arrays(np.random.default_rng(9), 3)
    args = (100.0, 0.01, 0.05, starts, scales, 0.0, times)
    assert np.allclose(kernels.propagate_charge(*args), kernels.propagate_charge_numpy(*args),
                       rtol=1e-13)
