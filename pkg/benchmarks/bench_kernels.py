"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--T 2000] [--dim 50]

Each kernel runs on the same seeded gradient history under both backends; the
table reports the best wall time per call and the speed-up of the compiled one.
"""
import argparse
import timeit

import numpy as np

from regretlab._kernels import backend


def cases(T, d):
    rng = np.random.default_rng(0)
    G = rng.normal(size=(T, d))
    theta, acc, m, v, g = (np.ascontiguousarray(rng.random(d)) for _ in range(5))
    return {
        "prefix_sq_norms": lambda k: k.prefix_sq_norms(G),
        "lemma4_terms": lambda k: k.lemma4_terms(G),
        "lemma103_terms": lambda k: k.lemma103_terms(G),
        "adam_moments": lambda k: k.adam_moments(G, 0.9, 0.999, 1.0),
        "lemma104_terms": lambda k: k.lemma104_terms(G, 0.9, 0.999),
        "adagrad_update": lambda k: k.adagrad_update(theta, acc, g, 0.1, 1e-8),
        "adam_update": lambda k: k.adam_update(theta, m, v, g, 0.9, 0.999, 0.1, 0.001, 0.01, 1e-8),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--T", type=int, default=2000)
    ap.add_argument("--dim", type=int, default=50)
    args = ap.parse_args(argv)
    try:
        compiled = backend("cython")
    except ImportError:
        print("compiled kernels not built; nothing to compare")
        return 1
    pure = backend("python")
    print(f"history {args.T} x {args.dim}, best of {args.repeat}")
    print(f"{'kernel':<16} {'python (s)':>12} {'cython (s)':>12} {'speed-up':>9}")
    for name, fn in cases(args.T, args.dim).items():
        best = {}
        for label, mod in (("python", pure), ("cython", compiled)):
            timer = timeit.Timer(lambda: fn(mod))
            n, _ = timer.autorange()
            best[label] = min(timer.repeat(args.repeat, n)) / n
        print(f"{name:<16} {best['python']:12.3e} {best['cython']:12.3e} "
              f"{best['python'] / best['cython']:8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
