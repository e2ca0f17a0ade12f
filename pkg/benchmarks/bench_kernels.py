"""Compare the compiled and numpy phasor-sum backends.

Times one response spectrum (direct and uniform-grid paths) for a 20 mm
crystal with 7.85 um domains, checks the backends agree, and times a full
pedestal ensemble per backend.

    python benchmarks/bench_kernels.py --grid 2001 --repeat 5 --trials 200
"""
import argparse
import statistics
import time

import numpy as np

from qpm_noise import kernels
from qpm_noise.poling_mc import ErrorModel, generate_sequence, pedestal_estimate, response_spectrum


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--grid", type=int, default=2001, help="dk grid points over 0..2 rad/um")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--trials", type=int, default=200, help="trials for the pedestal timing (0 to skip)")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    model = ErrorModel(7.85, 0.5, 0.2)
    seq = generate_sequence(model, 20.0, seed=1)
    dk = np.linspace(0.0, 2.0, args.grid)
    print(f"{seq.n_domains} domains, {dk.size} grid points, backends: {', '.join(kernels.BACKENDS)}")
    print(f"{'backend':<10}{'path':<10}{'best [ms]':>12}{'median [ms]':>14}")
    results = {}
    for name in kernels.BACKENDS:
        for fast in (False, True):
            path = "uniform" if fast else "direct"
            results[name, path] = response_spectrum(seq, dk, backend=name, fast=fast)
            best, med = best_of(lambda: response_spectrum(seq, dk, backend=name, fast=fast), args.repeat)
            print(f"{name:<10}{path:<10}{best * 1e3:>12.2f}{med * 1e3:>14.2f}")

    ref = results["python", "direct"]
    scale = np.max(ref)
    for key, val in results.items():
        print(f"max |{key[0]}/{key[1]} - python/direct| / max = {np.max(np.abs(val - ref)) / scale:.2e}")

    if args.trials:
        for name in kernels.BACKENDS:
            t0 = time.perf_counter()
            pedestal_estimate(model, 20.0, args.trials, dk, seed=0, workers=args.threads, backend=name)
            print(f"pedestal {args.trials} trials x {dk.size} points, {name}: {time.perf_counter() - t0:.2f} s")


if __name__ == "__main__":
    main()
