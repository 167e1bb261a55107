import numpy as np
import pytest

from auxgraph import EmbeddingSet, SynthConfig, gen_speakers
from auxgraph.store import NONTARGET, TARGET, Trial, TrialList


@pytest.fixture(scope="session")
def small_synth():
    """8 speakers x 4 utterances, enough for ladder batches."""
    return gen_speakers(SynthConfig(8, 4, 6, 0.3, 0.4, seed=1))


@pytest.fixture()
def tiny_set():
    vectors = np.array([
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.6, 0.8, 0.0],
        [0.0, 0.0, 2.0],
    ])
    return EmbeddingSet(["a1", "a2", "b1", "b2"], ["a", "a", "b", "b"], vectors)


def all_pairs_trials(emb_set: EmbeddingSet) -> TrialList:
    trials = []
    for i in range(len(emb_set)):
        for j in range(i + 1, len(emb_set)):
            label = TARGET if emb_set.speakers[i] == emb_set.speakers[j] else NONTARGET
            trials.append(Trial(emb_set.ids[i], emb_set.ids[j], label))
    return TrialList(trials)


def subset_by_speaker(emb_set: EmbeddingSet, keep) -> EmbeddingSet:
    rows = [i for i, s in enumerate(emb_set.speakers) if keep(s)]
    return EmbeddingSet(
        [emb_set.ids[i] for i in rows],
        [emb_set.speakers[i] for i in rows],
        emb_set.vectors[rows],
    )
