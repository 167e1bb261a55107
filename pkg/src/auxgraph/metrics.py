"""Equal error rate and detection-tradeoff operating points.

Decision convention: a trial is accepted when its score is greater than
or equal to the threshold. FAR(t) is the fraction of nontarget scores
accepted, FRR(t) the fraction of target scores rejected. Both are step
functions of the threshold, so sweeping the midpoints between adjacent
distinct scores plus the two infinities visits every operating point.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ScoredTrials:
    target_scores: np.ndarray
    nontarget_scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "target_scores", np.asarray(self.target_scores, dtype=np.float64))
        object.__setattr__(self, "nontarget_scores", np.asarray(self.nontarget_scores, dtype=np.float64))
        if not np.all(np.isfinite(self.target_scores)) or not np.all(np.isfinite(self.nontarget_scores)):
            raise DataError("scores must be finite")


@dataclass(frozen=True)
class EerResult:
    eer: float
    threshold: float


def _rates_at(trials: ScoredTrials, thresholds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    tar = np.sort(trials.target_scores)
    non = np.sort(trials.nontarget_scores)
    far = (non.size - np.searchsorted(non, thresholds, side="left")) / non.size
    frr = np.searchsorted(tar, thresholds, side="left") / tar.size
    return far, frr


def from_labeled(scores: np.ndarray, labels) -> ScoredTrials:
    """Split scores into target/nontarget lists given per-trial labels."""
    scores = np.asarray(scores, dtype=np.float64)
    is_target = np.array([bool(x) for x in labels])
    if scores.shape[0] != is_target.shape[0]:
        raise DataError("score/label count mismatch")
    return ScoredTrials(scores[is_target], scores[~is_target])


def eer(trials: ScoredTrials) -> EerResult:
    """Interpolated equal error rate and the threshold achieving it.

    FAR - FRR is non-increasing in the threshold; the crossing is located
    and, when FAR and FRR do not meet exactly, the two bracketing
    operating points are joined linearly.
    """
    if trials.target_scores.size == 0 or trials.nontarget_scores.size == 0:
        raise DataError("both target and nontarget score lists must be nonempty")
    distinct = np.unique(np.concatenate([trials.target_scores, trials.nontarget_scores]))
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    thresholds = np.concatenate([[-np.inf], mids, [np.inf]])
    far, frr = _rates_at(trials, thresholds)
    diffs = far - frr
    j = int(np.argmax(diffs <= 0.0))  # first index at or past the crossing
    if diffs[j] == 0.0:
        return EerResult(float(far[j]), float(thresholds[j]))
    i = j - 1
    u = diffs[i] / (diffs[i] - diffs[j])
    value = float(frr[i] + u * (frr[j] - frr[i]))
    lo, hi = thresholds[i], thresholds[j]
    if np.isinf(lo):
        thr = float(hi)
    elif np.isinf(hi):
        thr = float(lo)
    else:
        thr = float(lo + u * (hi - lo))
    return EerResult(value, thr)


def det_points(trials: ScoredTrials) -> list[tuple[float, float, float]]:
    """Full (FAR, FRR, threshold) staircase, one point per distinct score
    plus the reject-everything endpoint."""
    if trials.target_scores.size == 0 or trials.nontarget_scores.size == 0:
        raise DataError("both target and nontarget score lists must be nonempty")
    distinct = np.unique(np.concatenate([trials.target_scores, trials.nontarget_scores]))
    thresholds = np.concatenate([distinct, [np.inf]])
    far, frr = _rates_at(trials, thresholds)
    return [(float(a), float(r), float(t)) for a, r, t in zip(far, frr, thresholds)]
