import math

import numpy as np
import pytest

from auxgraph import (
    CohortStats,
    DataError,
    EmbeddingSet,
    NormMethod,
    PairNormalizer,
    cohort_stats,
    eer,
    from_labeled,
    normalize,
    normalize_trials,
    trial_scores,
)
from auxgraph.store import Trial, TrialList


class TestCohortStats:
    def test_two_point(self):
        # cosine of (1,0) against (1,0) and (0,1): scores 1 and 0
        st = cohort_stats(np.array([1.0, 0.0]), np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert st.mu == pytest.approx(0.5, abs=1e-15)
        assert st.sigma == pytest.approx(0.5, abs=1e-15)

    def test_identical_cohort_degenerate(self):
        with pytest.raises(DataError):
            cohort_stats(np.array([1.0, 0.0]), np.array([[1.0, 1.0], [1.0, 1.0]]))

    def test_hand_sigma_with_custom_scorer(self):
        fixed = iter([0.2, 0.4, 0.6])
        st = cohort_stats(np.ones(2), np.ones((3, 2)), scorer=lambda a, b: next(fixed))
        assert st.mu == pytest.approx(0.4, abs=1e-15)
        assert st.sigma == pytest.approx(math.sqrt(0.08 / 3.0), abs=1e-7)

    def test_adaptive_top(self):
        scores = iter([0.9, 0.1, 0.8, 0.2])
        st = cohort_stats(np.ones(2), np.ones((4, 2)), scorer=lambda a, b: next(scores), top=2)
        assert st.mu == pytest.approx(0.85, abs=1e-15)


class TestNormalize:
    def test_z_at_mean_is_zero(self):
        st = CohortStats(0.37, 0.21)
        assert normalize(0.37, NormMethod("z"), enroll_stats=st) == 0.0

    def test_z_hand_value(self):
        assert normalize(1.0, NormMethod("z"), enroll_stats=CohortStats(0.5, 0.5)) == 1.0

    def test_z_maps_mu_plus_sigma_to_one(self):
        st = CohortStats(0.2, 0.4)
        assert normalize(0.2 + 0.4, NormMethod("z"), enroll_stats=st) == pytest.approx(1.0, abs=1e-15)

    def test_s_hand_value(self):
        got = normalize(
            1.0, NormMethod("s"),
            enroll_stats=CohortStats(0.5, 0.5), test_stats=CohortStats(0.0, 1.0),
        )
        assert got == pytest.approx(1.0, abs=1e-15)

    def test_s_symmetric_under_swap(self):
        e = CohortStats(0.3, 0.2)
        t = CohortStats(-0.1, 0.5)
        m = NormMethod("s")
        assert normalize(0.7, m, e, t) == normalize(0.7, m, t, e)

    def test_strictly_increasing(self):
        e = CohortStats(0.1, 0.3)
        t = CohortStats(0.2, 0.6)
        for m in (NormMethod("z"), NormMethod("t"), NormMethod("zt"), NormMethod("s")):
            values = [normalize(x, m, e, t) for x in np.linspace(-1, 1, 20)]
            assert all(a < b for a, b in zip(values, values[1:]))

    def test_missing_stats_rejected(self):
        with pytest.raises(DataError):
            normalize(0.5, NormMethod("z"))
        with pytest.raises(DataError):
            normalize(0.5, NormMethod("s"), enroll_stats=CohortStats(0, 1))

    def test_method_validation(self):
        with pytest.raises(DataError):
            NormMethod("q")
        with pytest.raises(DataError):
            NormMethod("z", adaptive_top=5)


def _clustered_set(seed=0):
    """Two well-separated speaker clusters plus a disjoint cohort."""
    rng = np.random.default_rng(seed)
    base_a = np.array([1.0, 0.0, 0.0, 0.0])
    base_b = np.array([0.0, 1.0, 0.0, 0.0])
    rows, ids, spks = [], [], []
    for k in range(4):
        rows.append(base_a + 0.1 * rng.normal(size=4))
        ids.append(f"a{k}")
        spks.append("a")
    for k in range(4):
        rows.append(base_b + 0.1 * rng.normal(size=4))
        ids.append(f"b{k}")
        spks.append("b")
    emb = EmbeddingSet(ids, spks, np.array(rows))
    cohort_rows = rng.normal(size=(12, 4))
    cohort = EmbeddingSet([f"c{k}" for k in range(12)], [f"c{k}" for k in range(12)], cohort_rows)
    trials = TrialList([
        Trial(ids[i], ids[j], "target" if spks[i] == spks[j] else "nontarget")
        for i in range(8) for j in range(i + 1, 8)
    ])
    return emb, cohort, trials


class TestNormalizeTrials:
    @pytest.mark.parametrize("kind", ["z", "t", "zt", "s"])
    def test_separated_clusters_stay_separated(self, kind):
        emb, cohort, trials = _clustered_set()
        scores = normalize_trials(trials, emb, cohort, NormMethod(kind))
        labels = [t.is_target for t in trials]
        assert eer(from_labeled(scores, labels)).eer == 0.0

    def test_common_enroll_stats_preserve_eer(self):
        # utterances on a cone around e1 all share cohort stats (mu 0,
        # sigma 0.6) against the cohort {e1, -e1}: z-norm is then a common
        # affine map and cannot change the EER
        rng = np.random.default_rng(5)
        d = 6
        rest = rng.normal(size=(10, d - 1))
        rest = 0.8 * rest / np.linalg.norm(rest, axis=1, keepdims=True)
        rows = np.hstack([np.full((10, 1), 0.6), rest])
        ids = [f"u{k}" for k in range(10)]
        emb = EmbeddingSet(ids, [f"s{k % 5}" for k in range(10)], rows)
        e1 = np.eye(d)[0]
        cohort = EmbeddingSet(["c0", "c1"], ["c0", "c1"], np.vstack([e1, -e1]))
        trials = TrialList([
            Trial(ids[i], ids[j], "target" if emb.speakers[i] == emb.speakers[j] else "nontarget")
            for i in range(10) for j in range(i + 1, 10)
        ])
        raw = trial_scores(emb, trials)
        labels = [t.is_target for t in trials]
        raw_eer = eer(from_labeled(raw, labels)).eer
        normed = normalize_trials(trials, emb, cohort, NormMethod("z"), raw_scores=raw)
        assert eer(from_labeled(normed, labels)).eer == pytest.approx(raw_eer, abs=1e-12)

    def test_empty_trials(self):
        emb, cohort, _ = _clustered_set()
        out = normalize_trials(TrialList([]), emb, cohort, NormMethod("s"))
        assert out.shape == (0,)

    def test_order_independence(self):
        emb, cohort, trials = _clustered_set(seed=2)
        fwd = normalize_trials(trials, emb, cohort, NormMethod("s"))
        rev_list = TrialList(list(trials)[::-1])
        rev = normalize_trials(rev_list, emb, cohort, NormMethod("s"))
        assert np.array_equal(fwd, rev[::-1])

    def test_self_exclusion(self):
        # an utterance inside its own cohort is skipped, so stats stay finite
        rng = np.random.default_rng(3)
        rows = rng.normal(size=(5, 4))
        ids = [f"u{k}" for k in range(5)]
        emb = EmbeddingSet(ids, ids, rows)
        trials = TrialList([Trial("u0", "u1", "nontarget")])
        scores = normalize_trials(trials, emb, emb, NormMethod("s"))
        assert np.all(np.isfinite(scores))

    def test_zt_differs_from_t(self):
        emb, cohort, trials = _clustered_set(seed=4)
        t_scores = normalize_trials(trials, emb, cohort, NormMethod("t"))
        zt_scores = normalize_trials(trials, emb, cohort, NormMethod("zt"))
        assert not np.allclose(t_scores, zt_scores)


def test_pair_normalizer_matrix_matches_pairwise():
    emb, cohort, trials = _clustered_set(seed=6)
    for kind in ("z", "t", "zt", "s"):
        normalizer = PairNormalizer(cohort, NormMethod(kind))
        raw = np.array([[0.4, -0.2], [0.1, 0.9]])
        enrolls = [(emb.ids[i], emb.vectors[i]) for i in (0, 1)]
        tests = [(emb.ids[i], emb.vectors[i]) for i in (4, 5)]
        block = normalizer.normalize_matrix(raw, enrolls, tests)
        for r in range(2):
            for c in range(2):
                want = normalizer.normalize_pair(raw[r, c], enrolls[r], tests[c])
                assert block[r, c] == pytest.approx(want, abs=1e-12)
