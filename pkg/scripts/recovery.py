"""Exact-recovery sweep for both solvers: error and iterations against
corruption density (RPCA) and number of active groups (SC-RPCA).

    python3 scripts/recovery.py --seeds 0 1 2
"""

import argparse
import time
import warnings

import numpy as np

from dynabg.bench import group_instance, relative_error, sparse_instance
from dynabg.solver import ConvergenceWarning, solve_rpca, solve_sc_rpca


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2])
    p.add_argument("--densities", nargs="+", type=float, default=[0.01, 0.05, 0.1, 0.2, 0.3])
    p.add_argument("--active", nargs="+", type=int, default=[1, 3, 5, 10, 20])
    args = p.parse_args()
    warnings.simplefilter("ignore", ConvergenceWarning)

    print("rpca, 200x50 rank 2")
    print(f"{'density':>8} {'err A':>10} {'err E':>10} {'iters':>6} {'seconds':>8}")
    for d in args.densities:
        out = []
        for s in args.seeds:
            inst = sparse_instance(density=d, seed=s)
            t = time.perf_counter()
            dec = solve_rpca(inst.D)
            out.append((relative_error(dec.A, inst.A0), relative_error(dec.E, inst.E0), dec.iterations,
                        time.perf_counter() - t))
        a, e, it, sec = np.mean(out, axis=0)
        print(f"{d:>8.2f} {a:>10.2e} {e:>10.2e} {it:>6.0f} {sec:>8.3f}")

    print("\nsc-rpca, 200x50 rank 2, 50 groups")
    print(f"{'active':>8} {'err A':>10} {'err E':>10} {'stray':>6} {'iters':>6} {'seconds':>8}")
    for k in args.active:
        out = []
        for s in args.seeds:
            inst = group_instance(active=k, seed=s)
            t = time.perf_counter()
            dec = solve_sc_rpca(inst.D, inst.partition)
            off = ~np.isin(inst.partition.labels, inst.active_groups)
            out.append((relative_error(dec.A, inst.A0), relative_error(dec.E, inst.E0),
                        np.count_nonzero(dec.E[off]), dec.iterations, time.perf_counter() - t))
        a, e, stray, it, sec = np.mean(out, axis=0)
        print(f"{k:>8d} {a:>10.2e} {e:>10.2e} {stray:>6.0f} {it:>6.0f} {sec:>8.3f}")


if __name__ == "__main__":
    main()
