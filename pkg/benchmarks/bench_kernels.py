"""Time the compiled and pure-Python likelihood kernels on the same inputs.

Usage::

    python benchmarks/bench_kernels.py [--n 256] [--repeat 200]

Prints one line per (kernel, backend) with the median time per call and the
speed-up of the compiled backend. Also checks that both backends agree.
"""

import argparse
import statistics
import time

import numpy as np

from semigen.kernels import available_backends


def make_inputs(n, rng):
    xc = rng.normal(size=n)
    xe = rng.normal(size=n)
    y_bin = rng.integers(0, 2, n).astype(float)
    y_real = rng.normal(size=n)
    w = rng.uniform(0.5, 2.0, n)
    dc, de = 2, 2
    bxc = rng.integers(0, 2, (n, dc)).astype(float)
    bxe = rng.integers(0, 2, (n, de)).astype(float)
    return {
        "gc_sup": (rng.normal(size=3), xc, y_bin, xe, w),
        "gc_unsup": (rng.normal(size=3), xc, xe),
        "lg_sup": (rng.normal(size=6), xc, y_real, xe, w),
        "lg_unsup": (rng.normal(size=6), xc, xe),
        "disc_sup": (rng.normal(size=1 + dc + 2 * de), bxc, y_bin, bxe, w),
        "disc_unsup": (rng.normal(size=1 + dc + 2 * de), bxc, bxe, w),
    }


def median_time(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=256, help="rows per call")
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; timing the Python fallback only")
    inputs = make_inputs(args.n, np.random.default_rng(args.seed))
    print(f"{'kernel':<11} {'backend':<7} {'median us':>10} {'speed-up':>9}")
    for name, call_args in inputs.items():
        base = None
        results = {}
        for backend in ("python", "cython"):
            if backend not in backends:
                continue
            fn = getattr(backends[backend], name)
            results[backend] = fn(*call_args)
            t = median_time(fn, call_args, args.repeat)
            base = t if backend == "python" else base
            speed = f"{base / t:8.1f}x" if backend == "cython" else ""
            print(f"{name:<11} {backend:<7} {t * 1e6:10.1f} {speed:>9}")
        if len(results) == 2:
            (vp, gp), (vc, gc) = results["python"], results["cython"]
            if not (np.isclose(vp, vc, rtol=1e-10) and np.allclose(gp, gc, rtol=1e-9, atol=1e-12)):
                raise SystemExit(f"backends disagree on {name}")


if __name__ == "__main__":
    main()
