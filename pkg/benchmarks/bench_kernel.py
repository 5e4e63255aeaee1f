"""Benchmark the compiled log-posterior kernel against the numpy reference.

Usage: python3 benchmarks/bench_kernel.py [--points 2000] [--pairs 30]

Times one fused (log posterior, gradient) evaluation per backend across the
variant grid and reports the speedup, plus an estimated wall time for a
default sampling run (3 chains x 11,000 iterations x 33 evaluations).
"""

import argparse
import time

import numpy as np

from prefbayes.domain import load_bundled_problem
from prefbayes.kernel import available_backends
from prefbayes.likelihood import (
    EXPONENTIAL,
    GAMMA,
    PC_ONLY,
    PC_RT_ATT,
    POISSON,
    Hyperparams,
    PosteriorKernel,
    VariantSpec,
)
from prefbayes.simulator import sample_dm, sample_pairs, simulate_dataset
from prefbayes.valuefn import PiecewiseConfig


def bench(kern, points):
    rng = np.random.default_rng(0)
    xs = rng.normal(scale=0.5, size=(points, kern.dim))
    kern.logp_and_grad(xs[0])  # warm up
    t0 = time.perf_counter()
    for x in xs:
        kern.logp_and_grad(x)
    return (time.perf_counter() - t0) / points


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--points", type=int, default=2000)
    parser.add_argument("--pairs", type=int, default=30)
    args = parser.parse_args()

    problem = load_bundled_problem()
    config = PiecewiseConfig.shared(problem, 2)
    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{args.pairs} comparisons, {args.points} evaluations per cell\n")
    header = f"{'variant':<18}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)

    specs = [VariantSpec(channels=PC_ONLY)]
    for family in (EXPONENTIAL, GAMMA, POISSON):
        specs.append(VariantSpec(channels=PC_RT_ATT, family=family))
    evals_per_run = 3 * 11_000 * 33
    for spec in specs:
        gen_spec = VariantSpec(channels=PC_RT_ATT, family=spec.family)
        gen_theta = Hyperparams.defaults(config.total_dim(problem), gen_spec.k)
        dm = sample_dm(gen_theta, gen_spec, seed=1)
        pairs = sample_pairs(problem, args.pairs, seed=2)
        dataset = simulate_dataset(dm, problem, config, pairs, seed=3)
        row = f"{spec.code():<18}"
        times = []
        for backend in backends:
            kern = PosteriorKernel(dataset, problem, config, spec, backend=backend)
            per_eval = bench(kern, args.points)
            times.append(per_eval)
            row += f"{per_eval * 1e6:>11.1f} us"
        if len(times) == 2:
            row += f"{times[1] / times[0]:>9.1f}x"
        print(row)
        if spec.code() == "i2":
            est = times[0] * evals_per_run
            print(
                f"{'':<18}(default i2 sampling run, {evals_per_run:,} evals: "
                f"~{est:.0f} s with {backends[0]})"
            )


if __name__ == "__main__":
    main()
