import numpy as np
import pytest

from auxgraph import DataError, SynthConfig, eer, from_labeled, gen_speakers, trial_scores


def test_deterministic_from_seed():
    cfg = SynthConfig(5, 3, 8, 0.2, 0.3, seed=42)
    a_set, a_trials = gen_speakers(cfg)
    b_set, b_trials = gen_speakers(cfg)
    assert np.array_equal(a_set.vectors, b_set.vectors)
    assert a_set.ids == b_set.ids
    assert a_trials.trials == b_trials.trials


def test_distinct_seeds_differ():
    a_set, _ = gen_speakers(SynthConfig(5, 3, 8, 0.2, 0.3, seed=1))
    b_set, _ = gen_speakers(SynthConfig(5, 3, 8, 0.2, 0.3, seed=2))
    assert not np.array_equal(a_set.vectors, b_set.vectors)


def test_counts_and_labels():
    emb, trials = gen_speakers(SynthConfig(6, 4, 5, 0.1, 0.2, seed=0))
    assert len(emb) == 24
    assert len(trials) == 24 * 23 // 2
    for t in trials:
        same = emb.speakers[emb.position(t.enroll)] == emb.speakers[emb.position(t.test)]
        assert t.is_target == same


def test_noiseless_clusters_zero_eer():
    emb, trials = gen_speakers(SynthConfig(4, 3, 6, 0.0, 0.0, seed=3))
    # all of a speaker's utterances coincide
    for spk, rows in emb.speaker_index.items():
        base = emb.vectors[rows[0]]
        for r in rows[1:]:
            assert np.array_equal(emb.vectors[r], base)
    scores = trial_scores(emb, trials)
    labels = [t.is_target for t in trials]
    assert eer(from_labeled(scores, labels)).eer == 0.0


def test_two_speakers_one_utt_each():
    emb, trials = gen_speakers(SynthConfig(2, 1, 4, 0.1, 0.0, seed=1))
    assert len(trials) == 1
    assert not trials.trials[0].is_target
    # EER is impossible without target trials and is flagged downstream
    with pytest.raises(DataError):
        eer(from_labeled(trial_scores(emb, trials), [t.is_target for t in trials]))


def test_config_validation():
    with pytest.raises(DataError):
        SynthConfig(0, 3, 8, 0.2, 0.3, seed=1)
    with pytest.raises(DataError):
        SynthConfig(2, 3, 8, -0.2, 0.3, seed=1)


def test_pinned_fixture_has_overlap():
    # the shared acceptance fixture must produce a nonzero error rate
    emb, trials = gen_speakers(SynthConfig(40, 6, 32, 0.25, 0.35, seed=7))
    scores = trial_scores(emb, trials)
    labels = [t.is_target for t in trials]
    assert eer(from_labeled(scores, labels)).eer > 0.0
