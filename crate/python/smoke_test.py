"""Smoke test for the asyncann_py extension.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`,
or put the compiled library on PYTHONPATH as asyncann_py.so.
"""

import math
import random
import tempfile
from pathlib import Path

import asyncann_py as ann


def main() -> None:
    rng = random.Random(3)
    dim = 8
    rows = [[rng.gauss(0.0, 1.0) for _ in range(dim)] for _ in range(400)]
    queries = [[rng.gauss(0.0, 1.0) for _ in range(dim)] for _ in range(20)]
    store = ann.VectorStore(rows)
    qstore = ann.VectorStore(queries)
    assert len(store) == 400 and store.dim == dim

    graph = ann.GraphIndex.build(store, max_degree=12, build_beam=24, seed=7)
    assert len(graph) == 400
    truth = ann.brute_force_topk(store, qstore, 10)

    serial, pathwise, asyn, degenerate = [], [], [], []
    for q in queries:
        s = ann.bfis_search(q, graph, store, 48, 10)
        serial.append(s.ids)
        pathwise.append(ann.pathwise_search(q, graph, store, 48, 10, threads=2, width=2).ids)
        asyn.append(ann.async_search(q, graph, store, 48, 10, groups=2, discal=1, debug=True).ids)
        d = ann.async_search(q, graph, store, 48, 10, groups=1, discal=0)
        assert d.ids == s.ids and d.traces[0] == s.traces[0]
        degenerate.append(d.ids)

    for name, res in [("serial", serial), ("pathwise", pathwise), ("async", asyn)]:
        r = ann.recall_at_k(res, truth, 10)
        print(f"{name:9s} recall@10 = {r:.3f}")
        assert r > 0.85, name

    assert ann.estimate_l_threshold([[1.0, 4.0], [2.0, 3.0]], 3) == 3.0
    assert math.isinf(ann.estimate_l_threshold([[1.0, 2.0, 3.0]], 3))
    assert ann.distance([0.0, 0.0], [3.0, 4.0]) == 25.0

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "g.graph"
        graph.save(path)
        again = ann.GraphIndex.load(path)
        assert all(again.neighbors(v) == graph.neighbors(v) for v in range(len(graph)))
        fv = Path(tmp) / "base.fvecs"
        store.save_fvecs(fv)
        assert len(ann.VectorStore.load(fv)) == 400

    try:
        ann.bfis_search(queries[0], graph, store, 5, 10)
    except ValueError:
        pass
    else:
        raise AssertionError("L < K must raise ValueError")
    print("smoke test passed")


if __name__ == "__main__":
    main()
