"""Compare the compiled and numpy Efron kernels.

    python benchmarks/bench_kernels.py [--sims N]

Times the raw kernel call, one weighted Cox fit, and the generalized
root search on simulated Weibull interim datasets, once per backend.
"""

import argparse
import timeit

from extborrow import _efron_py
from extborrow import survival_models as sm
from extborrow.borrow_estimation import d_eff_generalized
from extborrow.experiment import scenario_config
from extborrow.trial_sim import simulate_dataset

try:
    from extborrow import _efron
except ImportError:
    _efron = None


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sims", type=int, default=50)
    args = parser.parse_args()

    cfg = scenario_config("weibull")
    snaps = [simulate_dataset(cfg, s % 4, s)[0] for s in range(args.sims)]
    arrays = [sm.SurvivalArrays.from_subjects(list(s.subjects)) for s in snaps]
    hyb = [sm.fit_cox(a).precision for a in arrays]

    backends = {"python": _efron_py.efron_terms}
    if _efron is not None:
        backends["cython"] = _efron.efron_terms
    else:
        print("compiled extension not built; timing the numpy fallback only")

    original = sm.efron_terms
    results = {}
    for name, kernel in backends.items():
        sm.efron_terms = kernel
        try:
            def kernel_calls():
                for a in arrays:
                    kernel(0.1, a.time, a.event, a.experimental, a.weight)

            def fits():
                for a in arrays:
                    sm.fit_cox(a)

            def searches():
                for snap, h in zip(snaps, hyb):
                    d_eff_generalized(snap, h, "cox")

            results[name] = [
                min(timeit.repeat(f, number=n, repeat=3)) / (n * len(snaps))
                for f, n in ((kernel_calls, 20), (fits, 5), (searches, 1))
            ]
        finally:
            sm.efron_terms = original

    print(f"{'backend':<8} {'kernel (us)':>12} {'cox fit (us)':>13} {'root search (ms)':>17}")
    for name, (k, f, s) in results.items():
        print(f"{name:<8} {k * 1e6:12.1f} {f * 1e6:13.1f} {s * 1e3:17.2f}")
    if len(results) == 2:
        ratio = [p / c for p, c in zip(results["python"], results["cython"])]
        print(f"{'speedup':<8} {ratio[0]:11.1f}x {ratio[1]:12.1f}x {ratio[2]:16.1f}x")


if __name__ == "__main__":
    main()
