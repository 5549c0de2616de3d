"""Compare the compiled and pure-Python coordinate-descent kernels.

Runs both kernels on identical penalized-quadratic problems (the inner loop of
every GLM solve), checks they agree to 1e-12, and prints a timing table.

    python3 benchmarks/bench_cd.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from tenmtl import _cd_py

try:
    from tenmtl import _cd_fast
except ImportError:
    _cd_fast = None


def make_problem(rng, n, q, l1):
    """Gram/linear pair from a random lasso-style regression."""
    x = rng.standard_normal((n, q))
    beta_true = rng.standard_normal(q) * (rng.random(q) < 0.3)
    y = x @ beta_true + 0.1 * rng.standard_normal(n)
    return x.T @ x, x.T @ y, l1


def run(kernel, gram, lin, l1, repeats):
    best = np.inf
    for _ in range(repeats):
        beta = np.zeros(lin.shape[0])
        start = time.perf_counter()
        sweeps, kkt = kernel(gram, lin, l1, 0.0, beta, 10000, 1e-10)
        best = min(best, time.perf_counter() - start)
    return beta, sweeps, kkt, best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per case (best is reported)")
    args = parser.parse_args()

    if _cd_fast is None:
        print("compiled kernel not available; showing pure-Python timings only")

    rng = np.random.default_rng(0)
    cases = [(200, 10, 0.5), (500, 50, 1.0), (1000, 100, 2.0), (2000, 200, 5.0)]

    header = f"{'n':>6} {'q':>5} {'l1':>6} {'sweeps':>7} {'pure (ms)':>10}"
    if _cd_fast is not None:
        header += f" {'compiled (ms)':>14} {'speedup':>8} {'max |diff|':>11}"
    print(header)

    for n, q, l1 in cases:
        gram, lin, l1 = make_problem(rng, n, q, l1)
        beta_py, sweeps, kkt, t_py = run(_cd_py.cd_quadratic, gram, lin, l1,
                                         args.repeats)
        assert kkt <= 1e-10, f"pure kernel failed to converge (kkt={kkt})"
        line = f"{n:>6} {q:>5} {l1:>6.1f} {sweeps:>7} {t_py * 1e3:>10.3f}"
        if _cd_fast is not None:
            beta_c, sweeps_c, kkt_c, t_c = run(_cd_fast.cd_quadratic, gram, lin,
                                               l1, args.repeats)
            assert kkt_c <= 1e-10, f"compiled kernel failed (kkt={kkt_c})"
            diff = float(np.max(np.abs(beta_py - beta_c)))
            assert diff <= 1e-12, f"kernels disagree: max |diff| = {diff}"
            line += f" {t_c * 1e3:>14.3f} {t_py / t_c:>7.1f}x {diff:>11.2e}"
        print(line)

    if _cd_fast is not None:
        print("\nkernels agree to 1e-12 on all cases")


if __name__ == "__main__":
    main()
