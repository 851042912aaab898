"""Time the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--teams G] [--repeat R]

Both backends run on the same planted graph; their outputs are checked for
exact agreement before timings are reported.
"""

import argparse
import timeit

import numpy as np

from hinforge import _pycore
from hinforge.influence import coauthor_projection
from hinforge.synthetic import PlantedConfig, gen_synthetic

try:
    from hinforge import _core
except ImportError:
    _core = None


def walk_args(g, node_types):
    from hinforge.graph import MetaPath

    mp = MetaPath.of(list(node_types))
    steps = [g.step_csr(e, t) for e, t in zip(mp.resolve(g), mp.node_types[1:])]
    return steps, g.nodes_of_type(mp.start_type)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--teams", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _core is None:
        print("compiled extension not built; nothing to compare")
        return
    pg = gen_synthetic(PlantedConfig(team_count=args.teams, rng_seed=0))
    g = pg.graph
    proj = coauthor_projection(g)
    cases = {
        "count_walks A-P-A": (lambda m: m.count_walks(*walk_args(g, ["author", "paper", "author"]))),
        "count_walks A-P-V-P-A": (lambda m: m.count_walks(
            *walk_args(g, ["author", "paper", "venue", "paper", "author"]))),
        "shortest_path_scores": (lambda m: m.shortest_path_scores(proj.indptr, proj.indices, proj.n)),
    }
    print(f"graph: {g.n_nodes} nodes, {proj.n} authors, {proj.indices.size // 2} co-author pairs")
    print(f"{'kernel':<24}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, fn in cases.items():
        a, b = fn(_pycore), fn(_core)
        for x, y in zip(a, b):
            assert np.array_equal(x, y) or np.allclose(x, y, rtol=0, atol=1e-9), name
        tp = min(timeit.repeat(lambda: fn(_pycore), number=1, repeat=args.repeat))
        tc = min(timeit.repeat(lambda: fn(_core), number=1, repeat=args.repeat))
        print(f"{name:<24}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
