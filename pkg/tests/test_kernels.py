import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import APVPA, random_hin
from hinforge import _pycore, kernels
from hinforge.graph import MetaPath
from hinforge.influence import coauthor_projection

try:
    from hinforge import _core
except ImportError:  # pragma: no cover - extension not built
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled extension not built")


def walk_inputs(g, mp):
    mp = MetaPath.of(mp)
    steps = [g.step_csr(e, t) for e, t in zip(mp.resolve(g), mp.node_types[1:])]
    return steps, g.nodes_of_type(mp.start_type)


@needs_core
@pytest.mark.parametrize("seed", range(10))
def test_backends_agree(seed):
    rng = np.random.default_rng(seed)
    g = random_hin(rng, 15, 20, 3, max_mult=3)
    for mp in (["author", "paper", "author"], APVPA, ["paper", "venue", "paper"]):
        a = _pycore.count_walks(*walk_inputs(g, mp))
        b = _core.count_walks(*walk_inputs(g, mp))
        for x, y in zip(a, b):
            assert np.array_equal(x, y)
    p = coauthor_projection(g)
    bc_a, cc_a = _pycore.shortest_path_scores(p.indptr, p.indices, p.n)
    bc_b, cc_b = _core.shortest_path_scores(p.indptr, p.indices, p.n)
    assert np.allclose(bc_a, bc_b, rtol=0, atol=1e-12)
    assert np.allclose(cc_a, cc_b, rtol=0, atol=1e-12)


def test_backend_selection_env():
    code = "from hinforge import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, HINFORGE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("python", "cython")
    if _core is not None and os.environ.get("HINFORGE_PURE_PYTHON") != "1":
        assert kernels.BACKEND == "cython"


def test_empty_inputs():
    bc, cc = _pycore.shortest_path_scores(np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64), 0)
    assert bc.size == 0 and cc.size == 0
