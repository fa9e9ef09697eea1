"""Smoke test for the pypeelmeans extension module.

Build and run from the repository root:

    cargo build -p peelmeans-py --features extension-module --release
    cp target/release/libpypeelmeans.so python/pypeelmeans.so
    python3 python/smoke_test.py
"""

import math
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import pypeelmeans as pm


def two_clusters(n, seed):
    rng = random.Random(seed)
    rows = []
    for i in range(n):
        cx = 0.0 if i < n // 2 else 10.0
        rows.append([rng.gauss(cx, 1.0), rng.gauss(0.0, 1.0)])
    return rows


def main():
    rows = two_clusters(12, 1)
    pts = pm.PointSet(rows)
    assert (pts.n, pts.d, len(pts)) == (12, 2, 12)
    c = pts.centroid()
    assert abs(pts.f2(c) - sum((x - c[0]) ** 2 + (y - c[1]) ** 2 for x, y in rows)) < 1e-9

    faithful = pm.ParameterSet(0.05)
    assert faithful.paper_faithful and not faithful.violations
    d = faithful.to_dict()
    assert abs(4 / d["alpha6"] + 4 / d["alpha5"] - 0.9) < 1e-12

    ps = pm.ParameterSet(0.3, m=8)
    assert not ps.paper_faithful
    cands = pm.run_2means(pts, ps, seed=0, cap=100_000)
    assert len(cands) == cands.phase1_count + 1 + cands.phase2_count
    assert cands.phase_iterations <= ps.iteration_bound(12)
    again = pm.run_2means(pts, ps, seed=0, cap=100_000)
    assert cands.pairs() == again.pairs()

    index, cost, assignment = cands.best(pts)
    labels, opt = pm.brute_opt2(pts)
    assert cost >= opt - 1e-9
    print(f"run_2means: {len(cands)} pairs, ratio {cost / opt:.4f}")

    restored = pm.CandidateSet.from_jsonl(cands.to_jsonl())
    assert restored.pairs() == cands.pairs()

    _, bal_cost, feasible = pm.assign(pts, list(cands.pair(index)), "balanced:c=1")
    assert feasible and bal_cost >= cost - 1e-9

    big = max((0, 1), key=labels.count)
    m = [
        [sum(r[j] for r, l in zip(rows, labels) if l == lab) / labels.count(lab) for j in range(2)]
        for lab in (0, 1)
    ]
    report = pm.check_case_lemmas(pts, labels, m[big], m[1 - big], pm.ParameterSet(0.05))
    assert all(l["pass"] or l["vacuous"] for l in report["lemmas"]), report

    edges = [(0, 1), (1, 2), (2, 3), (0, 3)]
    emb = pm.reduce_graph(4, edges)
    assert emb.n == 4
    ident = pm.verify_identity(4, edges)
    assert ident["holds"] and ident["max_bisection"] == 4
    assert pm.max_bisection(4, edges)[0] == 4
    assert math.isclose(ident["min_cost"], 2 * 4 - 4 / 4 * 4, abs_tol=1e-9)

    k3 = pm.PointSet(
        [[random.Random(i).gauss(10.0 * (i % 3), 1.0), 0.0] for i in range(10)]
    )
    tuples, info = pm.run_kmeans_framework(k3, 3, 0.3, extension="brute", m=2, n_a=4, n_b=4)
    assert info["prefix_count"] == 37 and not info["truncated"]
    assert all(len(t) == 3 for t in tuples)

    try:
        pm.ParameterSet(1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("epsilon outside (0, 1) accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
