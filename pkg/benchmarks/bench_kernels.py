"""Timing comparison of the jit kernels against the pure-numpy fallback.

Runs the frequency-profile scan and the descent rounds on synthetic curves
of increasing size and reports median wall time per call for each backend.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --points 20,50,100,200 --repeat 9
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mbperiod.grid import build_grid
from mbperiod.kernels import get_impl
from mbperiod.model import PenaltyConfig
from mbperiod.synth import SimConfig, simulate


def _curve(n_bands, obs_per_band, seed):
    cfg = SimConfig(
        n_curves=1, n_bands=n_bands, obs_per_band=obs_per_band,
        noise_scale=0.05, time_span=30.0, seed=seed,
    )
    curves, _ = simulate(cfg)
    return curves[0]


def _median_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def bench_profile(impl, lc, grid, repeat):
    t, m, w, offsets = lc.packed
    return _median_time(lambda: impl.profile_detail(t, m, w, offsets, grid.omegas), repeat)


def bench_bcd(impl, lc, omega, cfg, repeat):
    t, m, w, offsets = lc.packed
    n_bands = lc.n_bands
    trace = np.zeros(1)
    amp_degen = np.zeros(n_bands, dtype=np.bool_)

    def run():
        beta0 = np.zeros(n_bands)
        amp = np.ones(n_bands)
        rho = np.zeros(n_bands)
        impl.bcd_rounds(
            t, m, w, offsets, omega, cfg.gamma1, cfg.gamma2, cfg.a_tilde,
            beta0, amp, rho, 1e-10, 200, 1, False, trace, amp_degen,
        )

    return _median_time(run, repeat)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", default="20,50,100,200",
                        help="comma-separated observations per band")
    parser.add_argument("--bands", type=int, default=5)
    parser.add_argument("--repeat", type=int, default=7)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = {}
    for name in ("numpy", "numba"):
        try:
            backends[name] = get_impl(name)
        except ImportError:
            print(f"{name} backend unavailable, skipping")
    if len(backends) < 1:
        return

    sizes = [int(s) for s in args.points.split(",")]
    cfg = PenaltyConfig.uniform(args.bands, 2.0, 1.0)

    # warm the jit cache outside the timed region
    warm = _curve(args.bands, sizes[0], args.seed)
    warm_grid = build_grid(0.2, 1.0, *warm.time_span())
    for impl in backends.values():
        bench_profile(impl, warm, warm_grid, 1)
        bench_bcd(impl, warm, warm_grid.omegas[0], cfg, 1)

    header = f"{'n/band':>7} {'grid':>7}"
    for name in backends:
        header += f"  {name + ' profile':>15} {name + ' bcd':>13}"
    if len(backends) == 2:
        header += f"  {'speedup(prof)':>13} {'speedup(bcd)':>13}"
    print(header)

    for n in sizes:
        lc = _curve(args.bands, n, args.seed)
        grid = build_grid(0.2, 1.0, *lc.time_span())
        omega = grid.omegas[grid.n // 2]
        row = f"{n:>7d} {grid.n:>7d}"
        prof_t, bcd_t = {}, {}
        for name, impl in backends.items():
            prof_t[name] = bench_profile(impl, lc, grid, args.repeat)
            bcd_t[name] = bench_bcd(impl, lc, omega, cfg, args.repeat)
            row += f"  {prof_t[name] * 1e3:>13.2f}ms {bcd_t[name] * 1e6:>11.1f}us"
        if len(backends) == 2:
            row += f"  {prof_t['numpy'] / prof_t['numba']:>12.2f}x"
            row += f" {bcd_t['numpy'] / bcd_t['numba']:>12.2f}x"
        print(row)


if __name__ == "__main__":
    main()
