"""Time the numba kernels against their numpy fallbacks.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is checked
for agreement first, then timed (best of ``--repeat`` runs, after one
warm-up call that also triggers compilation). The numba column reads
``n/a`` when numba is unavailable or disabled via SLEF_DISABLE_NUMBA.
"""

import argparse
import time

import numpy as np

from slef import _accel, gfb


def best_time(fn, args, repeat):
    fn(*args)  # warm-up / JIT compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(size, points, rng):
    image = rng.standard_normal((size, size))
    kernel = gfb.build_bank(gfb.GfbConfig(periods=(7.0,), orientations=1))[0]
    padded = np.pad(image, kernel.half_width, mode="symmetric")
    taps = np.ascontiguousarray(kernel.taps)

    resp = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))

    def wta(impl):
        def run(r):
            mag = np.full(r.shape, -1.0)
            best = np.zeros(r.shape, dtype=np.complex128)
            idx = np.zeros(r.shape, dtype=np.int64)
            impl(mag, best, idx, r, 0)
            return best
        return run

    x = rng.standard_normal(points)
    y = rng.standard_normal(points)
    w = rng.random(points)
    return [
        ("convolve_valid", (padded, taps), "convolve_valid", None),
        ("wta_update", (resp,), "wta_update", wta),
        ("ellipse_moments", (x, y, w), "ellipse_moments", None),
        ("leclerc_weights", (x, y, 0.33, 1.0, 0.1), "leclerc_weights", None),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256, help="image side length")
    ap.add_argument("--points", type=int, default=65536, help="cloud size")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"backend in use: {_accel.BACKEND}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, inputs, stem, wrap in cases(args.size, args.points, rng):
        np_fn = getattr(_accel, stem + "_numpy")
        nb_fn = getattr(_accel, stem + "_numba", None) if _accel.HAS_NUMBA else None
        if wrap is not None:
            np_fn = wrap(np_fn)
            nb_fn = wrap(nb_fn) if nb_fn is not None else None
        t_np = best_time(np_fn, inputs, args.repeat)
        if nb_fn is None:
            print(f"{name:<18}{t_np * 1e3:12.3f}{'n/a':>12}{'':>10}")
            continue
        a, b = np.asarray(np_fn(*inputs)), np.asarray(nb_fn(*inputs))
        if not np.allclose(a, b, rtol=1e-10, atol=1e-12):
            raise SystemExit(f"{name}: numba and numpy paths disagree")
        t_nb = best_time(nb_fn, inputs, args.repeat)
        print(f"{name:<18}{t_np * 1e3:12.3f}{t_nb * 1e3:12.3f}{t_np / t_nb:9.1f}x")


if __name__ == "__main__":
    main()
