"""Time the numba kernels against their numpy fallbacks and check they agree.

Run with ``python3 benchmarks/bench_kernels.py``. An end-to-end comparison of
the whole pipeline is printed last; that part toggles the dispatch flag
in-process, which is equivalent to setting AMFCC_DISABLE_NUMBA.
"""

import time

import numpy as np

from amfcc import _kernels, charting, simgen
from amfcc.basis import make_basis


def best_of(fn, repeat=5):
    fn()  # warm-up, includes JIT compilation on first call
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def report(name, numba_fn, numpy_fn):
    a, b = numba_fn(), numpy_fn()
    err = float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float))))
    tn, tp = best_of(numba_fn), best_of(numpy_fn)
    print(f"{name:<22} numba {tn * 1e3:9.3f} ms   numpy {tp * 1e3:9.3f} ms   speedup {tp / tn:6.2f}x   max|diff| {err:.1e}")


def main():
    rng = np.random.default_rng(0)
    basis = make_basis(0.0, 1.0, 20)
    knots = basis.knot_vector
    x = np.sort(rng.uniform(0, 1, 100_000))
    report("basis_values", lambda: _kernels.basis_values_numba(knots, 4, x),
           lambda: _kernels.basis_values_numpy(knots, 4, x))

    a = rng.standard_normal((5000, 20, 20))
    mats = a @ a.transpose(0, 2, 1) + 20 * np.eye(20)
    rhs = rng.standard_normal((5000, 20))
    report("spd_solve_batch", lambda: _kernels.spd_solve_batch_numba(mats, rhs),
           lambda: _kernels.spd_solve_batch_numpy(mats, rhs))

    ref = np.sort(rng.standard_normal((1000, 79)), axis=0)
    obs = rng.standard_normal((500, 79))
    report("upper_counts", lambda: _kernels.upper_counts_numba(ref, obs),
           lambda: _kernels.upper_counts_numpy(ref, obs))

    spec = simgen.ScenarioSpec(seed=1)
    train, tune = simgen.generate(spec, 300), simgen.generate(spec.with_(seed=2), 300)
    test = simgen.generate(spec.with_(seed=3), 200)
    saved = _kernels.USE_NUMBA
    try:
        for flag in (True, False):
            _kernels.USE_NUMBA = flag

            def run():
                chart = charting.fit_chart(basis, train, tune)
                return charting.score_batch(chart, test).combined

            t = best_of(run, repeat=2)
            print(f"pipeline fit+score    {'numba' if flag else 'numpy'} {t:7.2f} s")
    finally:
        _kernels.USE_NUMBA = saved


if __name__ == "__main__":
    main()
