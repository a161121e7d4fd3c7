"""Compare the numba-compiled kernels with their pure-Python bodies.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on the same seeded inputs in both forms; the compiled form
is warmed up first so compilation time is not counted.  Results are checked
for equality before timings are printed.
"""
import argparse
import random
import sys
import timeit

import numpy as np

from amrsumm import kernels
from amrsumm._jit import USE_NUMBA, python_impl
from amrsumm.decoder import TIE_EPS
from amrsumm.metrics import _smatch_arrays, smatch_triples
from amrsumm.synthetic import random_amr, random_source_graph


def lcs_case(rng):
    a = np.array([rng.randrange(30) for _ in range(60)], dtype=np.int64)
    b = np.array([rng.randrange(30) for _ in range(60)], dtype=np.int64)
    return (a, b), lambda f, args: f(*args)


def kmeans_case(rng):
    gen = np.random.default_rng(rng.randrange(2**32))
    points, centers = gen.normal(size=(400, 8)), gen.normal(size=(6, 8))

    def call(f, args):
        labels = np.empty(len(points), dtype=np.int64)
        return f(points, centers, labels), tuple(labels)

    return (), call


def smatch_case(rng):
    a, b = random_amr(rng, 20, p_reentrancy=1.0), random_amr(rng, 20, p_reentrancy=1.0)
    arrays = _smatch_arrays(smatch_triples(a), smatch_triples(b))

    def call(f, args):
        mapping = np.full(arrays[0].shape[0], -1, dtype=np.int64)
        return f(mapping, *arrays), tuple(mapping)

    return (), call


def bnb_case(rng):
    g = random_source_graph(rng, 22, n_sentences=3, extra_edges=20)
    node_w = np.array([0.0] + [rng.uniform(-1, 1) for _ in range(len(g.nodes) - 1)])
    edge_w = np.array([0.0 if e.is_snt_root else rng.uniform(-1, 1) for e in g.edges])
    a = g.arrays
    args = (node_w, a["src"], a["dst"], edge_w, a["out_ptr"], a["out_idx"], a["in_ptr"], a["in_idx"],
            7, 10**7, TIE_EPS)

    def call(f, _):
        nodes, edges, value, expansions = f(*args)
        return tuple(nodes), tuple(edges), value, expansions

    return (), call


CASES = {
    "lcs_length": (kernels.lcs_length, lcs_case),
    "kmeans_assign": (kernels.kmeans_assign, kmeans_case),
    "smatch_hill_climb": (kernels.smatch_hill_climb, smatch_case),
    "bnb_max_subtree": (kernels.bnb_max_subtree, bnb_case),
}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if not USE_NUMBA:
        print("numba unavailable or disabled; both columns time the Python body", file=sys.stderr)
    print(f"{'kernel':<20}{'compiled ms':>14}{'python ms':>14}{'speed-up':>10}")
    for name, (fn, make) in CASES.items():
        call_args, call = make(random.Random(args.seed))
        compiled, plain = fn, python_impl(fn)
        if call(compiled, call_args) != call(plain, call_args):
            raise SystemExit(f"{name}: compiled and Python results differ")
        t_jit = min(timeit.repeat(lambda: call(compiled, call_args), number=1, repeat=args.repeat))
        t_py = min(timeit.repeat(lambda: call(plain, call_args), number=1, repeat=args.repeat))
        print(f"{name:<20}{t_jit * 1e3:>14.3f}{t_py * 1e3:>14.3f}{t_py / t_jit:>9.1f}x")


if __name__ == "__main__":
    main()
