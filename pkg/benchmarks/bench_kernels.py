"""Compare the numba and numpy backends of the hot kernels.

Run with ``python benchmarks/bench_kernels.py``. Each timing is the best of
``--repeat`` runs after one warm-up call, so numba compilation is excluded.
"""
import argparse
import time

import numpy as np

from tensormmsb import kernels
from tensormmsb._accel import HAVE_NUMBA
from tensormmsb.tensor_power import rank_one_sum


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_threestar(n_heads, k, backend, repeat):
    rng = np.random.default_rng(0)
    a, b, c = (rng.standard_normal((n_heads, k)) for _ in range(3))
    return best_of(lambda: kernels.threestar_accumulate(a, b, c, backend), repeat)


def bench_power(k, n_init, n_iter, backend, repeat):
    rng = np.random.default_rng(1)
    V, _ = np.linalg.qr(rng.standard_normal((k, k)))
    T = rank_one_sum(np.linspace(2.0, 1.0, k), V)
    th = rng.standard_normal((n_init, k))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    lam, phi = np.array([2.0]), V[:, :1].copy()
    return best_of(lambda: kernels.power_iterate(T, th, lam, phi, 0.02, n_iter, 0.0, backend),
                   repeat)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    if not HAVE_NUMBA:
        print("numba not installed; timing numpy only")
    cases = [("threestar", dict(n_heads=n, k=k)) for n, k in [(2000, 3), (20000, 3), (20000, 10)]]
    cases += [("power", dict(k=k, n_init=L, n_iter=60)) for k, L in [(3, 130), (10, 200), (20, 300)]]
    print(f"{'kernel':<10} {'params':<32} " + " ".join(f"{b:>10}" for b in backends) + "  speedup")
    for name, params in cases:
        fn = bench_threestar if name == "threestar" else bench_power
        t = {b: fn(**params, backend=b, repeat=args.repeat) for b in backends}
        label = ", ".join(f"{k}={v}" for k, v in params.items())
        row = " ".join(f"{t[b] * 1e3:>8.2f}ms" for b in backends)
        speed = f"  {t['numpy'] / t['numba']:.1f}x" if "numba" in t else ""
        print(f"{name:<10} {label:<32} {row}{speed}")


if __name__ == "__main__":
    main()
