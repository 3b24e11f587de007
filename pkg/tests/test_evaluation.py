import io

import numpy as np
import pytest

from stance_embed.contexts import ContextConfig
from stance_embed.edges import EdgeOp
from stance_embed.evaluation import (
    CSV_HEADER,
    AUCRecord,
    EvalConfig,
    EvalReport,
    balance_downsample,
    coldstart_subset,
    evaluate,
    make_folds,
)
from stance_embed.graph import Edge, SignedTopicGraph, aggregate_parallel_edges
from stance_embed.sgns import TrainerConfig
from stance_embed.synthetic import SyntheticConfig, generate
from stance_embed.walks import WalkConfig


def _graph(n_edges, n_nodes=30, n_topics=2, seed=0):
    rng = np.random.default_rng(seed)
    keys = set()
    edges = []
    while len(edges) < n_edges:
        u, v = (int(x) for x in rng.choice(n_nodes, 2, replace=False))
        t = int(rng.integers(n_topics))
        if (u, v, t) not in keys:
            keys.add((u, v, t))
            edges.append(Edge(u, v, int(rng.choice([-1, 1])), t))
    g = SignedTopicGraph(edges, [f"n{i}" for i in range(n_nodes)], [f"t{i}" for i in range(n_topics)])
    return aggregate_parallel_edges(g)


def test_folds_partition_edges():
    g = _graph(100)
    folds = make_folds(g, 5, seed=3)
    assert [len(f.test_edges) for f in folds] == [20] * 5
    all_test = [e for f in folds for e in f.test_edges]
    assert sorted(all_test, key=repr) == sorted(g.edges, key=repr)
    for f in folds:
        assert not set(f.train_edges) & set(f.test_edges)
        assert len(f.train_edges) + len(f.test_edges) == 100
    again = make_folds(g, 5, seed=3)
    assert [f.test_edges for f in again] == [f.test_edges for f in folds]
    assert [f.test_edges for f in make_folds(g, 5, seed=4)] != [f.test_edges for f in folds]


def test_fold_sizes_within_one_edge():
    sizes = [len(f.test_edges) for f in make_folds(_graph(103), 5)]
    assert max(sizes) - min(sizes) <= 1 and sum(sizes) == 103


def test_fold_errors():
    with pytest.raises(ValueError):
        make_folds(_graph(3), 5)
    with pytest.raises(ValueError):
        make_folds(_graph(10), 1)


def _signed(n_pos, n_neg):
    return [Edge(i, i + 1, 1, 0) for i in range(n_pos)] + [Edge(i + 1, i, -1, 0) for i in range(n_neg)]


def test_balance_downsample():
    edges = _signed(90, 10)
    out = balance_downsample(edges, seed=1)
    assert sum(e.sign > 0 for e in out) == 10 and sum(e.sign < 0 for e in out) == 10
    assert {e for e in edges if e.sign < 0} <= set(out)
    assert len(set(out)) == 20
    assert balance_downsample(edges, seed=1) == out
    balanced = _signed(5, 5)
    assert sorted(balance_downsample(balanced, seed=2), key=repr) == sorted(balanced, key=repr)
    with pytest.raises(ValueError):
        balance_downsample(_signed(4, 0))


def test_coldstart_examples():
    a, b, c = 0, 1, 2
    assert coldstart_subset([Edge(a, b, 1, 0)], [Edge(a, c, 1, 1)]) == [Edge(a, c, 1, 1)]
    assert coldstart_subset([Edge(a, b, 1, 0)], [Edge(a, b, -1, 0)]) == []
    # the target side alone is enough
    assert coldstart_subset([Edge(a, b, 1, 0)], [Edge(a, c, 1, 0)]) == [Edge(a, c, 1, 0)]
    # engagements are position specific: b was a target, not a source
    assert coldstart_subset([Edge(a, b, 1, 0), Edge(c, a, 1, 0)], [Edge(b, a, 1, 0)]) == [Edge(b, a, 1, 0)]


def test_coldstart_limits():
    test = [Edge(0, 1, 1, 0), Edge(1, 2, -1, 1)]
    assert coldstart_subset([], test) == test
    assert coldstart_subset(test, []) == []
    disjoint_topics = [Edge(0, 1, 1, 5), Edge(1, 0, 1, 6)]
    assert coldstart_subset(disjoint_topics, test) == test


def test_report_bookkeeping():
    rep = EvalReport()
    for fold in range(3):
        rep.add(AUCRecord("knn5", "mask", "l1", fold, "all", 0.6 + 0.1 * fold, 10))
        rep.add(AUCRecord("knn5", "mask", "l2", fold, "all", 0.5, 10))
        rep.add(AUCRecord("knn5", "mask", "l1", fold, "coldstart", 0.55, 3))
    assert rep.fold_aucs("knn5", "mask", "l1") == pytest.approx([0.6, 0.7, 0.8])
    assert rep.mean_auc("knn5", "mask", "l1") == pytest.approx(0.7)
    assert rep.best_over_phi("knn5", "mask") == ("l1", pytest.approx(0.7))
    assert rep.best_over_phi("knn5", "mask", "coldstart") == ("l1", pytest.approx(0.55))
    with pytest.raises(KeyError):
        rep.best_over_phi("lr", "mask")
    buf = io.StringIO()
    rep.write_csv(buf)
    lines = buf.getvalue().split("\n")
    assert lines[0] == ",".join(CSV_HEADER) == "classifier,sigma,phi,fold,split,auc"
    assert lines[1] == "knn5,mask,l1,0,all,0.600000"
    assert len(lines) == 1 + 9 + 1 and lines[-1] == ""
    assert "best over phi" in rep.table()


@pytest.fixture(scope="module")
def small_sweep():
    g, _ = generate(SyntheticConfig(n_nodes=60, n_topics=4, edges_per_topic=120, n_groups=2, seed=1))
    g = aggregate_parallel_edges(g)
    cfg = EvalConfig(
        walk=WalkConfig(walks_per_node=2, walk_length=10),
        context=ContextConfig(3),
        knn_k=(5, 10),
        learned_topics=True,
    )
    trainers = [TrainerConfig(dim=8, sigma_mode=m, negatives=3, subsample=1e-2, epochs=1) for m in ("mask", "addition")]
    return g, cfg, trainers, evaluate(g, trainers, cfg)


def test_sweep_structure(small_sweep):
    g, cfg, trainers, rep = small_sweep
    combos = rep.combinations()
    classifiers = {c for c, _, _ in combos}
    assert classifiers == {"knn5", "knn10", "lr", "lr_learned_addition", "lr_learned_hadamard"}
    # learned topic tables only make sense on topic-free embeddings
    assert {s for c, s, _ in combos if c.startswith("lr_learned")} == {"mask"}
    assert {p for _, _, p in combos} == {op.value for op in EdgeOp}
    for c, s, p in combos:
        aucs = rep.fold_aucs(c, s, p)
        assert len(aucs) == 5
        assert all(0.0 <= a <= 1.0 for a in aucs)
        best = rep.best_over_phi(c, s)[1]
        assert all(best >= rep.mean_auc(c, s, q) for cc, ss, q in combos if (cc, ss) == (c, s))
    for sizes in rep.fold_sizes.values():
        assert sizes["coldstart"] <= sizes["test"]
    assert sum(s["test"] for s in rep.fold_sizes.values()) == len(g.edges)
    for r in rep.records:
        assert r.n_test <= rep.fold_sizes[r.fold][r.split if r.split == "coldstart" else "test"]


def test_sweep_deterministic(small_sweep):
    g, cfg, trainers, rep = small_sweep
    again = evaluate(g, trainers, cfg)
    assert again.records == rep.records


def test_coldstart_only_scoring(small_sweep):
    g, cfg, trainers, _ = small_sweep
    from dataclasses import replace

    rep = evaluate(g, trainers[:1], replace(cfg, coldstart_only=True, learned_topics=False, phis=(EdgeOp.L1,)))
    assert {r.split for r in rep.records} == {"coldstart"}
