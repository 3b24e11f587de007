import numpy as np
from scipy.stats import rankdata


def _positive_mask(labels) -> np.ndarray:
    labels = np.asarray(labels)
    return labels > 0


def auc(scores, labels) -> float:
    """Area under the ROC curve from the Mann-Whitney U statistic.

    Tied scores get average ranks, so each positive/negative tie counts 1/2.
    ``labels`` are signs (+1/-1) or booleans.
    """
    scores = np.asarray(scores, dtype=np.float64)
    pos = _positive_mask(labels)
    if scores.shape != pos.shape:
        raise ValueError("scores and labels must have the same length")
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative labels")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_pairwise(scores, labels) -> float:
    """O(n^2) definition: P(score_pos > score_neg) + 0.5 P(tie)."""
    scores = np.asarray(scores, dtype=np.float64)
    pos = _positive_mask(labels)
    sp, sn = scores[pos], scores[~pos]
    if len(sp) == 0 or len(sn) == 0:
        raise ValueError("AUC needs both positive and negative labels")
    diff = sp[:, None] - sn[None, :]
    wins = (diff > 0).sum() + 0.5 * (diff == 0).sum()
    return float(wins / (len(sp) * len(sn)))
