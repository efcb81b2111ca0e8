"""Ranking metrics (PNR, AUC, DCG@N, delta-GSB) and per-branch diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ingest import QualityGrade, SOFT_LABELS, is_positive

INF = math.inf


class UndefinedMetricError(ValueError):
    pass


def pair_counts(labels, scores) -> tuple[int, int]:
    """(concordant, discordant) over unordered pairs with distinct labels.

    Pairs tied on score count toward neither.
    """
    y = np.asarray(labels, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError(f"labels {y.shape} and scores {s.shape} must be equal-length vectors")
    label_gt = y[:, None] > y[None, :]
    score_gt = s[:, None] > s[None, :]
    score_lt = s[:, None] < s[None, :]
    return int(np.sum(label_gt & score_gt)), int(np.sum(label_gt & score_lt))


def pnr(labels, scores) -> float:
    """Concordant / discordant pairs; ``math.inf`` when nothing is discordant."""
    if len(labels) < 2:
        raise UndefinedMetricError("pnr needs at least two items")
    y = np.asarray(labels, dtype=np.float64)
    if np.all(y == y[0]):
        raise UndefinedMetricError("pnr undefined: no pair with distinct labels")
    concordant, discordant = pair_counts(labels, scores)
    if discordant == 0:
        if concordant == 0:
            raise UndefinedMetricError("pnr undefined: every comparable pair is tied on score")
        return INF
    return concordant / discordant


def auc(binary_labels, scores) -> float:
    """Probability a random positive outscores a random negative (ties count 1/2)."""
    y = np.asarray(binary_labels)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise ValueError(f"labels {y.shape} and scores {s.shape} differ")
    pos, neg = s[y == 1], s[y == 0]
    if len(pos) == 0 or len(neg) == 0 or len(pos) + len(neg) != len(y):
        raise UndefinedMetricError("auc needs binary labels with both classes present")
    wins = np.sum(pos[:, None] > neg[None, :]) + 0.5 * np.sum(pos[:, None] == neg[None, :])
    return float(wins / (len(pos) * len(neg)))


def roc_auc_trapezoid(binary_labels, scores) -> float:
    """AUC by integrating the empirical ROC curve with the trapezoid rule.

    Thresholds sweep distinct scores from high to low; tied scores move TPR and
    FPR together, which the trapezoid credits with one half.
    """
    y = np.asarray(binary_labels)
    s = np.asarray(scores, dtype=np.float64)
    n_pos, n_neg = int(np.sum(y == 1)), int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("auc needs both classes present")
    tpr, fpr = [0.0], [0.0]
    for t in np.unique(s)[::-1]:
        above = s >= t
        tpr.append(np.sum(above & (y == 1)) / n_pos)
        fpr.append(np.sum(above & (y == 0)) / n_neg)
    area = 0.0
    for i in range(1, len(tpr)):
        area += (fpr[i] - fpr[i - 1]) * (tpr[i] + tpr[i - 1]) / 2
    return float(area)


def dcg_at_n(gains_in_rank_order, n: int) -> float:
    if n < 1:
        raise ValueError("N must be at least 1")
    # accumulate in rank order so the value does not depend on summation tree
    total = 0.0
    for i, g in enumerate(list(gains_in_rank_order)[:n]):
        total += float(g) / math.log2(i + 2)
    return total


@dataclass
class GSBCounts:
    good: int
    same: int
    bad: int

    def __post_init__(self):
        if min(self.good, self.same, self.bad) < 0:
            raise ValueError("GSB counts must be non-negative")


def delta_gsb(counts: GSBCounts) -> float:
    total = counts.good + counts.same + counts.bad
    if total == 0:
        raise UndefinedMetricError("delta GSB undefined for zero judgments")
    return (counts.good - counts.bad) / total


def relative_delta(candidate: float, baseline: float) -> float:
    """Relative change (candidate - baseline) / baseline, as reported against a live system."""
    if baseline == 0:
        raise UndefinedMetricError("relative delta undefined for a zero baseline")
    return (candidate - baseline) / baseline


def binary_labels(records) -> np.ndarray:
    return np.array([is_positive(r.grade) for r in records])


def ranked_gains(scores, grades) -> np.ndarray:
    """Soft-label gains ordered by descending score (stable on ties)."""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    gains = np.array([SOFT_LABELS[QualityGrade(g)] for g in grades])
    return gains[order]


# ---------------------------------------------------------------- reports

BRANCH_NAMES = ("vtmab", "fcab", "fqab", "tqab")
DCG_CUTOFFS = (2, 4, 10)


@dataclass
class RankingReport:
    pnr: float | None
    auc: float | None
    dcg: dict[int, float]
    branch_mean_logits: dict[str, dict[str, float | None]] = field(default_factory=dict)
    branch_pnr: dict[str, float | None] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "pnr": _jsonable(self.pnr),
            "auc": self.auc,
            "dcg": {str(k): v for k, v in self.dcg.items()},
            "branch_mean_logits": self.branch_mean_logits,
            "branch_pnr": {k: _jsonable(v) for k, v in self.branch_pnr.items()},
        }

    def format_table(self) -> str:
        grades = [g.label for g in QualityGrade]
        lines = ["branch  " + "".join(f"{g:>11}" for g in grades) + f"{'pnr':>11}"]
        for b in BRANCH_NAMES:
            row = self.branch_mean_logits.get(b, {})
            cells = "".join(f"{_fmt(row.get(g)):>11}" for g in grades)
            lines.append(f"{b:<8}{cells}{_fmt(self.branch_pnr.get(b)):>11}")
        lines.append(f"overall pnr={_fmt(self.pnr)} auc={_fmt(self.auc)} "
                     + " ".join(f"dcg@{k}={v:.4f}" for k, v in self.dcg.items()))
        return "\n".join(lines)


def _jsonable(x):
    if x is not None and math.isinf(x):
        return "inf"
    return x


def _fmt(x) -> str:
    if x is None:
        return "-"
    if math.isinf(x):
        return "inf"
    return f"{x:.3f}"


def _safe(metric, *args):
    try:
        return metric(*args)
    except UndefinedMetricError:
        return None


def build_report(grades: Sequence, scores, branch_logits: np.ndarray,
                 cutoffs: Sequence[int] = DCG_CUTOFFS) -> RankingReport:
    """Report from already-computed scores; ``branch_logits`` is (n, 4)."""
    grades = [QualityGrade(g) for g in grades]
    labels = np.array([int(g) for g in grades])
    scores = np.asarray(scores, dtype=np.float64)
    branch_logits = np.asarray(branch_logits, dtype=np.float64)
    gains = ranked_gains(scores, grades)
    report = RankingReport(
        pnr=_safe(pnr, labels, scores),
        auc=_safe(auc, np.array([is_positive(g) for g in grades]), scores),
        dcg={n: dcg_at_n(gains, n) for n in cutoffs},
    )
    for k, name in enumerate(BRANCH_NAMES):
        col = branch_logits[:, k]
        report.branch_mean_logits[name] = {
            g.label: (float(col[labels == int(g)].mean()) if np.any(labels == int(g)) else None)
            for g in QualityGrade
        }
        report.branch_pnr[name] = _safe(pnr, labels, col)
    return report


def branch_report(corpus, model) -> RankingReport:
    from .scoring import score_corpus

    if any(r.grade is None for r in corpus):
        raise ValueError("branch report requires a graded corpus")
    scored = score_corpus(corpus, model)
    return build_report(
        [r.grade for r in corpus],
        [s.score for s in scored],
        np.array([s.branch_scores.as_vector() for s in scored]),
    )
