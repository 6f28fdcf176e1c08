"""Time the numba kernels against the pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the SHOTKIT_DISABLE_NUMBA flag does
not matter here. The first numba call (compilation) is excluded.
"""
import argparse
import time

import numpy as np

from shotkit._kernels import numpy_impl

try:
    from shotkit._kernels import numba_impl
except ImportError:
    numba_impl = None


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    poses = rng.normal(size=(5000, 22, 3))
    rank = np.arange(5000, dtype=np.int64)
    scores = rng.normal(size=200_000)
    iou = rng.random(size=(2000, 500))
    return {
        "fps_greedy 5000 poses, k=500": lambda m: m.fps_greedy(poses, 0, 500, rank),
        "nms_1d 200k frames, r=8, k=2000": lambda m: m.nms_1d(scores, 8, 2000),
        "greedy_match 2000x500": lambda m: m.greedy_match(iou, 0.5),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'numpy (s)':>10s} {'numba (s)':>10s} {'speedup':>8s}")
    for name, run in cases(rng).items():
        t_np = best_time(lambda: run(numpy_impl), args.repeat)
        if numba_impl is None:
            print(f"{name:34s} {t_np:10.4f} {'n/a':>10s}")
            continue
        run(numba_impl)  # compile
        t_nb = best_time(lambda: run(numba_impl), args.repeat)
        print(f"{name:34s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
