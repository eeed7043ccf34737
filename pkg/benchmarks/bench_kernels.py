"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N]

Both implementations live side by side in ``ionprobe.kernels``, so one
process can time both; ``IONPROBE_DISABLE_NUMBA`` only picks which one the
library calls.
"""
import argparse
import timeit

import numpy as np

from ionprobe import kernels
from ionprobe._accel import HAVE_NUMBA


def cases():
    rng = np.random.default_rng(0)
    durations = rng.uniform(5.0, 50.0, 40)
    starts = np.concatenate(([0.0], np.cumsum(durations)))
    scales = np.tile([1.0, 0.0], 20)
    times = np.linspace(0.0, starts[-1], 5000)
    yield ("propagate_charge (40 segments, 5000 samples)",
           kernels.propagate_charge_numpy, kernels.propagate_charge_numba,
           (500.0, 0.02, 0.01, starts, scales, 0.0, times))
    u = np.linspace(-3.0, 3.0, 16)
    yield ("coulomb_gradient_hessian (16 ions)",
           kernels.coulomb_gradient_hessian_numpy, kernels.coulomb_gradient_hessian_numba, (u,))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy path can run")
    for label, f_np, f_nb, fargs in cases():
        f_nb(*fargs)  # compile outside the timing
        t_np = min(timeit.repeat(lambda: f_np(*fargs), number=args.repeat, repeat=3)) / args.repeat
        line = f"{label}: numpy {t_np * 1e6:9.1f} us"
        if HAVE_NUMBA:
            t_nb = min(timeit.repeat(lambda: f_nb(*fargs), number=args.repeat, repeat=3)) / args.repeat
            line += f", numba {t_nb * 1e6:9.1f} us, speed-up {t_np / t_nb:5.1f}x"
        print(line)


if __name__ == "__main__":
    main()
