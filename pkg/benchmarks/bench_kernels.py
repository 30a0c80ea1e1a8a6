"""Time the pair-sum kernels on both backends.

    python benchmarks/bench_kernels.py [--sizes 32 64] [--repeat 3]

The first numba call compiles (or loads from cache) and is excluded.  Each row
also reports the max relative difference between the two backends.
"""

import argparse
import time

import numpy as np

from roughcont import _accel
from roughcont.kernels import commutator_profile, control_at_offsets, diff_profile, kruzkov_profile


def cases(n, rng):
    u1 = rng.standard_normal(n * n)
    u2 = rng.standard_normal((n, n))
    a2 = rng.standard_normal((2, n, n))
    offs = rng.integers(-n // 2, n // 2, (64, 2))
    return {
        f"diff_profile p=1 1d N={n * n}": lambda: diff_profile(u1, 1.0),
        f"diff_profile p=1 2d {n}x{n}": lambda: diff_profile(u2, 1.0),
        f"commutator_profile 2d {n}x{n}": lambda: commutator_profile(a2, u2),
        f"kruzkov_profile 2d {n}x{n}": lambda: kruzkov_profile(a2, u2, u2**2),
        f"control_at_offsets 64 offsets {n}x{n}": lambda: control_at_offsets(a2, u2, offs),
    }


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def flat(x):
    return np.concatenate([np.ravel(v) for v in x]) if isinstance(x, tuple) else np.ravel(x)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba not installed; nothing to compare")
    print(f"{'kernel':44s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s} {'max rel diff':>13s}")
    for n in args.sizes:
        for name, fn in cases(n, np.random.default_rng(n)).items():
            _accel.set_backend("numba")
            fn()  # compile
            tb, ob = best_of(fn, args.repeat)
            _accel.set_backend("numpy")
            tn, on = best_of(fn, args.repeat)
            on, ob = flat(on), flat(ob)
            rel = float(np.max(np.abs(on - ob)) / max(np.max(np.abs(on)), 1e-300))
            print(f"{name:44s} {tn:10.4f} {tb:10.4f} {tn / tb:8.1f} {rel:13.2e}")
    _accel.set_backend("numba")


if __name__ == "__main__":
    main()
