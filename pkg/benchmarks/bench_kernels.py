"""Time the compiled kernels against their numpy counterparts.

    python benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from ms_steer import kernels


def cases(rng):
    n = 400
    x = rng.normal(scale=15.0, size=(n, 3))
    ii = rng.integers(0, n, 200)
    jj = rng.integers(0, n, 200)
    dmin = np.zeros(200)
    dmax = np.full(200, 15.0)
    subj = rng.integers(0, n, 50)
    partners = rng.integers(0, n, 50 * 40)
    ptr = np.arange(0, 50 * 40 + 1, 40)
    neigh = np.arange(n)
    radii = np.full(n, 3.1)
    pts = kernels.fibonacci_sphere(960)
    return {
        "pair_flat_bottom": (x, ii, jj, dmin, dmax),
        "softmin_contact": (x, subj, ptr, partners, np.full(50, 6.0), 2.0),
        "burial_loss": (x, subj, neigh, 5.0, 5.0, 0.5, 10.0),
        "sasa": (x, radii, pts),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 0
    print(f"{'kernel':<18}{'numpy ms':>10}{'numba ms':>10}{'speed-up':>10}")
    for name, call_args in cases(np.random.default_rng(0)).items():
        slow = getattr(kernels, f"{name}_numpy")
        fast = getattr(kernels, f"{name}_numba")
        fast(*call_args)  # compile outside the timing
        t_slow = min(timeit.repeat(lambda: slow(*call_args), number=1, repeat=args.repeat)) * 1e3
        t_fast = min(timeit.repeat(lambda: fast(*call_args), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<18}{t_slow:>10.3f}{t_fast:>10.3f}{t_slow / t_fast:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
