"""Benchmark the njit kernels against the vectorized numpy fallback.

Runs every dispatched kernel on representative problem sizes and prints
a table with per-call medians for both paths, plus the end-to-end
surrogate-vs-simulator comparison.  The active path for the library is
controlled by the UQPIPE_DISABLE_NUMBA environment variable; this
script always measures both implementations side by side.

Usage:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from uqpipe import doe, kernels, pce, simulators


def median_time(func, repeats=200, warmup=3):
    for _ in range(warmup):
        func()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        func()
        times.append(time.perf_counter() - t0)
    times.sort()
    return times[len(times) // 2]


def row(name, np_fn, nb_fn, repeats=200):
    t_np = median_time(np_fn, repeats)
    if nb_fn is None:
        print(f"{name:34s} {1e6 * t_np:10.1f} {'-':>10} {'-':>8}")
        return
    t_nb = median_time(nb_fn, repeats)
    print(f"{name:34s} {1e6 * t_np:10.1f} {1e6 * t_nb:10.1f} "
          f"{t_np / t_nb:7.1f}x")


def main():
    rng = np.random.default_rng(0)
    print(f"numba available and enabled: {kernels.NUMBA_ENABLED}")
    have_numba = kernels.NUMBA_ENABLED
    if have_numba:
        kernels.warm_up()
    print(f"{'kernel':34s} {'numpy us':>10} {'numba us':>10} {'speedup':>8}")

    u_small = rng.uniform(-1, 1, 8)
    u_big = np.ascontiguousarray(rng.uniform(-1, 1, 2048))
    row("legendre_table n=8 deg=5",
        lambda: kernels.legendre_table_np(u_small, 5),
        (lambda: kernels.legendre_table(u_small, 5)) if have_numba else None)
    row("legendre_table n=2048 deg=10",
        lambda: kernels.legendre_table_np(u_big, 10),
        (lambda: kernels.legendre_table(u_big, 10)) if have_numba else None,
        repeats=50)

    tables = np.ascontiguousarray(rng.normal(size=(8, 2048, 6)))
    indices = rng.integers(0, 6, size=(495, 8)).astype(np.int64)
    row("basis_matrix 2048x495 (M=8)",
        lambda: kernels.basis_matrix_np(tables, indices),
        (lambda: kernels.basis_matrix(tables, indices)) if have_numba else None,
        repeats=20)

    table1 = np.ascontiguousarray(rng.normal(size=(8, 6)))
    row("basis_row P=495 (M=8)",
        lambda: kernels.basis_row_np(table1, indices),
        (lambda: kernels.basis_row(table1, indices)) if have_numba else None)

    resid = np.ascontiguousarray(rng.normal(0, 2, 601))
    row("ar1_loglik n=601",
        lambda: kernels.ar1_loglik_np(resid, 2.0, 0.5),
        (lambda: kernels.ar1_loglik(resid, 2.0, 0.5)) if have_numba else None)

    stacked = rng.normal(size=(495, 9))
    eigvecs = rng.normal(size=(601, 9))
    mean = rng.normal(size=601)
    scale = np.ones(8)
    shift = np.zeros(8)
    row("series_point P=495 C=9 T=601",
        lambda: kernels.legendre_series_point_np(u_small, scale, shift,
                                                 indices, stacked, eigvecs,
                                                 mean, 5),
        (lambda: kernels.legendre_series_point(u_small, scale, shift,
                                               indices, stacked, eigvecs,
                                               mean, 5))
        if have_numba else None)

    print("\nend-to-end: one surrogate call vs one toy-simulator call")
    storm = simulators.synthetic_storm(600, 120.0)
    bounds = list(simulators.PARAMETER_BOUNDS)
    design = doe.chunked_design(bounds, [128], 3)
    outputs = simulators.simulate_design(design.points, storm)
    surr = pce.fit_multi(design, outputs, 0.99, (1, 3))
    x0 = design.points[0]
    t_sur = median_time(lambda: pce.predict_series(surr, x0), 500)
    t_sim = median_time(lambda: simulators.toy_catchment(x0, storm), 15)
    print(f"  surrogate predict_series: {1e6 * t_sur:8.1f} us  (active path: "
          f"{'numba' if have_numba else 'numpy'})")
    print(f"  toy_catchment (601 steps): {1e3 * t_sim:7.2f} ms")
    print(f"  ratio: {t_sim / t_sur:.0f}x")


if __name__ == "__main__":
    main()
