"""Cohort-based score normalization (z, t, zt and s-norm).

All statistics are computed over the cosine scores between an utterance
and a cohort of impostor embeddings, using the population standard
deviation. When an utterance also appears in the cohort (matched by id),
that cohort entry is skipped so a score never normalizes against itself.

zt-norm first z-norms the raw score against the enroll side, then t-norms
it with statistics taken over the test utterance's cohort scores, each of
which is itself z-normed with that cohort member's own cohort statistics.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .scorer import unit_rows, vertex_score
from .store import EmbeddingSet, TrialList

Z = "z"
T = "t"
ZT = "zt"
S = "s"
NORM_KINDS = (Z, T, ZT, S)


@dataclass(frozen=True)
class CohortStats:
    """Mean and population standard deviation of cohort scores."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DataError(f"degenerate cohort: sigma = {self.sigma}")


@dataclass(frozen=True)
class NormMethod:
    """Normalization variant. adaptive_top limits s-norm statistics to the
    top-scoring cohort entries; None uses the whole cohort."""

    kind: str
    adaptive_top: int | None = None

    def __post_init__(self):
        if self.kind not in NORM_KINDS:
            raise DataError(f"unknown normalization {self.kind!r}")
        if self.adaptive_top is not None:
            if self.kind != S:
                raise DataError("adaptive_top applies to s-norm only")
            if self.adaptive_top < 2:
                raise DataError("adaptive_top must be >= 2")


def _stats_from_scores(scores: np.ndarray, top: int | None = None) -> CohortStats:
    scores = np.asarray(scores, dtype=np.float64)
    if top is not None and top < scores.size:
        scores = np.sort(scores)[::-1][:top]
    if scores.size < 2:
        raise DataError(f"cohort too small for statistics ({scores.size} scores)")
    mu = float(scores.mean())
    sigma = float(np.sqrt(np.mean((scores - mu) ** 2)))
    if sigma == 0.0:
        raise DataError("degenerate cohort: all scores identical")
    return CohortStats(mu, sigma)


def cohort_stats(embedding: np.ndarray, cohort: np.ndarray, scorer=None, top: int | None = None) -> CohortStats:
    """Statistics of the scores between one embedding and a cohort.

    scorer defaults to cosine similarity; top keeps only the largest
    `top` scores (adaptive s-norm).
    """
    cohort = np.atleast_2d(np.asarray(cohort, dtype=np.float64))
    if cohort.shape[0] < 2:
        raise DataError("cohort must contain at least 2 embeddings")
    if scorer is None:
        scorer = vertex_score
    scores = np.array([scorer(embedding, c) for c in cohort])
    return _stats_from_scores(scores, top)


def normalize(
    raw: float,
    method: NormMethod,
    enroll_stats: CohortStats | None = None,
    test_stats: CohortStats | None = None,
) -> float:
    """Apply one normalization formula to a raw score.

    For zt, `test_stats` must be the statistics of the test utterance's
    z-normed cohort scores (PairNormalizer prepares these).
    """
    if method.kind == Z:
        if enroll_stats is None:
            raise DataError("z-norm needs enroll-side statistics")
        return (raw - enroll_stats.mu) / enroll_stats.sigma
    if method.kind == T:
        if test_stats is None:
            raise DataError("t-norm needs test-side statistics")
        return (raw - test_stats.mu) / test_stats.sigma
    if method.kind == S:
        if enroll_stats is None or test_stats is None:
            raise DataError("s-norm needs statistics for both sides")
        return 0.5 * (
            (raw - enroll_stats.mu) / enroll_stats.sigma
            + (raw - test_stats.mu) / test_stats.sigma
        )
    if enroll_stats is None or test_stats is None:
        raise DataError("zt-norm needs statistics for both sides")
    z = (raw - enroll_stats.mu) / enroll_stats.sigma
    return (z - test_stats.mu) / test_stats.sigma


class PairNormalizer:
    """Caches per-utterance cohort statistics for pairwise normalization."""

    def __init__(self, cohort: EmbeddingSet, method: NormMethod):
        if len(cohort) < 2:
            raise DataError("cohort must contain at least 2 embeddings")
        self.method = method
        self.cohort_ids = list(cohort.ids)
        self.cohort_unit = unit_rows(cohort.vectors)
        self._raw: dict[str, CohortStats] = {}
        self._zt: dict[str, CohortStats] = {}
        self._internal: tuple[np.ndarray, np.ndarray] | None = None

    def _scores_vs_cohort(self, vec: np.ndarray) -> np.ndarray:
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise DataError("zero-norm embedding cannot be normalized")
        return np.clip(self.cohort_unit @ (np.asarray(vec, dtype=np.float64) / norm), -1.0, 1.0)

    def _self_mask(self, uid: str) -> np.ndarray:
        return np.array([cid != uid for cid in self.cohort_ids])

    def raw_stats(self, uid: str, vec: np.ndarray) -> CohortStats:
        if uid not in self._raw:
            scores = self._scores_vs_cohort(vec)[self._self_mask(uid)]
            top = self.adaptive_top if self.method.kind == S else None
            self._raw[uid] = _stats_from_scores(scores, top)
        return self._raw[uid]

    @property
    def adaptive_top(self) -> int | None:
        return self.method.adaptive_top

    def _internal_stats(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-cohort-member statistics against the rest of the cohort."""
        if self._internal is None:
            gram = np.clip(self.cohort_unit @ self.cohort_unit.T, -1.0, 1.0)
            k = gram.shape[0]
            off = ~np.eye(k, dtype=bool)
            mus = np.empty(k)
            sigmas = np.empty(k)
            for i in range(k):
                row = gram[i][off[i]]
                st = _stats_from_scores(row)
                mus[i] = st.mu
                sigmas[i] = st.sigma
            self._internal = (mus, sigmas)
        return self._internal

    def zt_stats(self, uid: str, vec: np.ndarray) -> CohortStats:
        """Statistics over the utterance's z-normed cohort scores."""
        if uid not in self._zt:
            mus, sigmas = self._internal_stats()
            mask = self._self_mask(uid)
            scores = self._scores_vs_cohort(vec)
            znormed = (scores[mask] - mus[mask]) / sigmas[mask]
            self._zt[uid] = _stats_from_scores(znormed)
        return self._zt[uid]

    def normalize_pair(self, raw: float, enroll: tuple[str, np.ndarray], test: tuple[str, np.ndarray]) -> float:
        kind = self.method.kind
        e_stats = self.raw_stats(*enroll) if kind in (Z, ZT, S) else None
        if kind == ZT:
            t_stats = self.zt_stats(*test)
        elif kind in (T, S):
            t_stats = self.raw_stats(*test)
        else:
            t_stats = None
        return normalize(raw, self.method, e_stats, t_stats)

    def normalize_matrix(self, raw: np.ndarray, enroll_sides: list, test_sides: list) -> np.ndarray:
        """Normalize an (enroll x test) matrix of raw scores."""
        raw = np.asarray(raw, dtype=np.float64)
        if raw.shape != (len(enroll_sides), len(test_sides)):
            raise DataError(f"score matrix shape {raw.shape} does not match sides")
        kind = self.method.kind
        out = raw.copy()
        if kind in (Z, ZT, S):
            e_mu = np.array([self.raw_stats(*e).mu for e in enroll_sides])
            e_sig = np.array([self.raw_stats(*e).sigma for e in enroll_sides])
        if kind == Z:
            return (out - e_mu[:, None]) / e_sig[:, None]
        if kind == T:
            t_mu = np.array([self.raw_stats(*t).mu for t in test_sides])
            t_sig = np.array([self.raw_stats(*t).sigma for t in test_sides])
            return (out - t_mu[None, :]) / t_sig[None, :]
        if kind == S:
            t_mu = np.array([self.raw_stats(*t).mu for t in test_sides])
            t_sig = np.array([self.raw_stats(*t).sigma for t in test_sides])
            return 0.5 * (
                (out - e_mu[:, None]) / e_sig[:, None]
                + (out - t_mu[None, :]) / t_sig[None, :]
            )
        t_mu = np.array([self.zt_stats(*t).mu for t in test_sides])
        t_sig = np.array([self.zt_stats(*t).sigma for t in test_sides])
        z = (out - e_mu[:, None]) / e_sig[:, None]
        return (z - t_mu[None, :]) / t_sig[None, :]


def normalize_trials(
    trials: TrialList,
    emb_set: EmbeddingSet,
    cohort: EmbeddingSet,
    method: NormMethod,
    raw_scores: np.ndarray | None = None,
) -> np.ndarray:
    """Normalized score per trial; raw cosine scores computed if not given.

    Statistics are computed once per distinct utterance and reused, so the
    result does not depend on trial order.
    """
    trials = list(trials)
    if raw_scores is None:
        from .scorer import trial_scores

        raw_scores = trial_scores(emb_set, TrialList(trials))
    raw_scores = np.asarray(raw_scores, dtype=np.float64)
    if raw_scores.shape[0] != len(trials):
        raise DataError("raw score count does not match trial count")
    normalizer = PairNormalizer(cohort, method)
    out = np.empty(len(trials))
    for k, t in enumerate(trials):
        out[k] = normalizer.normalize_pair(
            float(raw_scores[k]),
            (t.enroll, emb_set.vector(t.enroll)),
            (t.test, emb_set.vector(t.test)),
        )
    return out
