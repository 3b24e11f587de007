"""Cross-validated link-sign (stance) prediction."""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, TextIO

import numpy as np

from ._seeding import derive_seed
from .classifiers import LRConfig, knn_scores, train_logistic, train_logistic_learned_topics
from .contexts import ContextConfig
from .edges import EdgeOp, edge_matrix
from .graph import Edge, SignedTopicGraph
from .metrics import auc
from .sgns import CombineMode, TrainerConfig, train
from .walks import WalkConfig, generate_corpus

log = logging.getLogger(__name__)

CSV_HEADER = ("classifier", "sigma", "phi", "fold", "split", "auc")


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_edges: tuple[Edge, ...]
    test_edges: tuple[Edge, ...]


def make_folds(g: SignedTopicGraph, n_folds: int = 5, seed: int = 0) -> list[FoldSplit]:
    """Seeded shuffle of the edges, cut into ``n_folds`` near-equal test folds."""
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    if len(g.edges) < n_folds:
        raise ValueError(f"{len(g.edges)} edges cannot fill {n_folds} folds")
    if not g.is_aggregated:
        raise ValueError("make_folds requires an aggregated graph")
    perm = np.random.default_rng(seed).permutation(len(g.edges))
    parts = np.array_split(perm, n_folds)
    folds = []
    for i, test_idx in enumerate(parts):
        in_test = np.zeros(len(g.edges), dtype=bool)
        in_test[test_idx] = True
        folds.append(
            FoldSplit(
                i,
                tuple(e for e, t in zip(g.edges, in_test) if not t),
                tuple(g.edges[j] for j in test_idx),
            )
        )
    return folds


def balance_downsample(edges: Sequence[Edge], seed: int = 0) -> list[Edge]:
    """Keep every minority-sign edge and an equal-size random subset of the majority."""
    pos = [e for e in edges if e.sign > 0]
    neg = [e for e in edges if e.sign < 0]
    if not pos or not neg:
        raise ValueError("balancing needs edges of both signs")
    minority, majority = (pos, neg) if len(pos) <= len(neg) else (neg, pos)
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(majority), size=len(minority), replace=False))
    return minority + [majority[i] for i in keep]


def coldstart_subset(train_edges: Iterable[Edge], test_edges: Iterable[Edge]) -> list[Edge]:
    """Test edges ``(u1, u2, w, t)`` where ``u1`` has no training edge as source on
    ``t`` or ``u2`` has none as target on ``t``."""
    sources, targets = set(), set()
    for e in train_edges:
        sources.add((e.source, e.topic))
        targets.add((e.target, e.topic))
    return [e for e in test_edges if (e.source, e.topic) not in sources or (e.target, e.topic) not in targets]


@dataclass(frozen=True)
class EvalConfig:
    n_folds: int = 5
    phis: tuple[EdgeOp, ...] = tuple(EdgeOp)
    knn_k: tuple[int, ...] = (5, 10)
    logistic: bool = True
    learned_topics: bool = False
    eval_sigma: str = "trained"  # or "none": features never see topic vectors
    coldstart_only: bool = False
    walk: WalkConfig = WalkConfig()
    context: ContextConfig = ContextConfig()
    lr: LRConfig = LRConfig()
    symmetrize: bool = True
    seed: int = 0
    threads: int = 1


@dataclass(frozen=True)
class AUCRecord:
    classifier: str
    sigma: str
    phi: str
    fold: int
    split: str
    auc: float
    n_test: int


@dataclass
class EvalReport:
    records: list[AUCRecord] = field(default_factory=list)
    fold_sizes: dict[int, dict[str, int]] = field(default_factory=dict)

    def add(self, rec: AUCRecord) -> None:
        self.records.append(rec)

    def combinations(self) -> list[tuple[str, str, str]]:
        seen = dict.fromkeys((r.classifier, r.sigma, r.phi) for r in self.records)
        return list(seen)

    def fold_aucs(self, classifier: str, sigma: str, phi: str, split: str = "all") -> list[float]:
        return [
            r.auc for r in self.records
            if (r.classifier, r.sigma, r.phi, r.split) == (classifier, sigma, phi, split)
        ]

    def mean_auc(self, classifier: str, sigma: str, phi: str, split: str = "all") -> float:
        vals = self.fold_aucs(classifier, sigma, phi, split)
        return float(np.mean(vals)) if vals else float("nan")

    def best_over_phi(self, classifier: str, sigma: str, split: str = "all") -> tuple[str, float]:
        """Best Φ by mean AUC. Selection is on the test folds themselves, so
        this number is optimistic; the full sweep is kept alongside it."""
        means = {
            phi: self.mean_auc(classifier, sigma, phi, split)
            for c, s, phi in self.combinations()
            if (c, s) == (classifier, sigma) and self.fold_aucs(classifier, sigma, phi, split)
        }
        if not means:
            raise KeyError(f"no results for {classifier}/{sigma}/{split}")
        phi = max(means, key=lambda p: means[p])
        return phi, means[phi]

    def write_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.records:
            writer.writerow((r.classifier, r.sigma, r.phi, r.fold, r.split, f"{r.auc:.6f}"))

    def table(self) -> str:
        splits = sorted({r.split for r in self.records}, key=lambda s: s != "all")
        lines = [f"{'classifier':<22}{'sigma':<10}{'phi':<15}" + "".join(f"{s:>12}" for s in splits)]
        for c, s, p in self.combinations():
            cells = "".join(f"{self.mean_auc(c, s, p, sp):>12.4f}" for sp in splits)
            lines.append(f"{c:<22}{s:<10}{p:<15}{cells}")
        lines.append("")
        lines.append("best over phi (selected on test folds):")
        pairs = dict.fromkeys((c, s) for c, s, _ in self.combinations())
        for c, s in pairs:
            cells = []
            for sp in splits:
                try:
                    phi, val = self.best_over_phi(c, s, sp)
                    cells.append(f"{sp}={val:.4f} ({phi})")
                except KeyError:
                    pass
            lines.append(f"{c:<22}{s:<10}" + "  ".join(cells))
        return "\n".join(lines)


def _score_splits(report, scores, test_labels, cold_mask, classifier, sigma, phi, fold, coldstart_only):
    splits = [("coldstart", cold_mask)] if coldstart_only else [("all", None), ("coldstart", cold_mask)]
    for split, mask in splits:
        s = scores if mask is None else scores[mask]
        y = test_labels if mask is None else test_labels[mask]
        if len(y) and (y > 0).any() and (y < 0).any():
            report.add(AUCRecord(classifier, sigma, phi, fold, split, auc(s, y), len(y)))


def _columns(edges: Sequence[Edge]):
    arr = np.array([(e.source, e.target, e.topic, e.sign) for e in edges], dtype=np.int64).reshape(-1, 4)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]


def evaluate_fold(
    g: SignedTopicGraph,
    fold: FoldSplit,
    trainer_cfgs: Sequence[TrainerConfig],
    cfg: EvalConfig,
    report: EvalReport | None = None,
) -> EvalReport:
    """Train embeddings on the fold's training edges only, then score its test edges."""
    report = report if report is not None else EvalReport()
    f = fold.fold_index
    train_g = g.with_edges(fold.train_edges)
    walk_cfg = replace(cfg.walk, seed=derive_seed(cfg.seed, "walks", f))
    corpus = generate_corpus(train_g, walk_cfg, symmetrize=cfg.symmetrize, threads=cfg.threads)

    balanced = balance_downsample(fold.train_edges, derive_seed(cfg.seed, "balance", f))
    tr_src, tr_dst, tr_top, tr_y = _columns(balanced)
    te_src, te_dst, te_top, te_y = _columns(fold.test_edges)
    cold = set(coldstart_subset(fold.train_edges, fold.test_edges))
    cold_mask = np.array([e in cold for e in fold.test_edges], dtype=bool)
    report.fold_sizes[f] = {"train": len(fold.train_edges), "test": len(fold.test_edges), "coldstart": len(cold)}
    lr_cfg = replace(cfg.lr, seed=derive_seed(cfg.seed, "lr", f))

    for tcfg in trainer_cfgs:
        tcfg = replace(tcfg, seed=derive_seed(tcfg.seed, "fold", f), threads=cfg.threads)
        store = train(corpus, train_g, cfg.context, tcfg)
        sigma = tcfg.sigma_mode.value
        eval_mode = None if cfg.eval_sigma == "none" else tcfg.sigma_mode
        log.info("fold %d sigma=%s final loss %.4f", f, sigma, store.epoch_losses[-1])
        for op in cfg.phis:
            x_tr = edge_matrix(store, tr_src, tr_dst, tr_top, eval_mode, op)
            x_te = edge_matrix(store, te_src, te_dst, te_top, eval_mode, op)
            for k in cfg.knn_k:
                k_eff = min(k, len(x_tr))
                scores = knn_scores(x_tr, tr_y, x_te, k_eff)
                _score_splits(report, scores, te_y, cold_mask, f"knn{k}", sigma, op.value, f, cfg.coldstart_only)
            if cfg.logistic:
                model = train_logistic(x_tr, tr_y, lr_cfg)
                _score_splits(
                    report, model.predict_proba(x_te), te_y, cold_mask, "lr", sigma, op.value, f, cfg.coldstart_only
                )
            if cfg.learned_topics and tcfg.sigma_mode is CombineMode.MASK:
                for learned in (CombineMode.ADDITION, CombineMode.HADAMARD):
                    model = train_logistic_learned_topics(
                        store.node_table[tr_src], store.node_table[tr_dst], tr_top, tr_y,
                        g.n_topics, learned, op, lr_cfg,
                    )
                    scores = model.edge_scores(store.node_table[te_src], store.node_table[te_dst], te_top)
                    _score_splits(
                        report, scores, te_y, cold_mask, f"lr_learned_{learned.value}", sigma, op.value, f,
                        cfg.coldstart_only,
                    )
    return report


def evaluate(g: SignedTopicGraph, trainer_cfgs: Sequence[TrainerConfig], cfg: EvalConfig) -> EvalReport:
    """Full sweep over folds, trainer configs, Φ operators and classifiers."""
    folds = make_folds(g, cfg.n_folds, derive_seed(cfg.seed, "folds"))
    report = EvalReport()
    for fold in folds:
        evaluate_fold(g, fold, trainer_cfgs, cfg, report)
    return report
