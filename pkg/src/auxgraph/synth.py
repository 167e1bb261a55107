"""Synthetic clustered embeddings with speaker and recording-condition structure.

Each speaker is a random unit-sphere centroid; each utterance adds
isotropic within-speaker noise plus an offset along one of a small pool
of shared "condition" directions. Conditions are shared across speakers,
so auxiliaries recorded under the same condition carry information that
transfers between speakers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .store import NONTARGET, TARGET, EmbeddingSet, Trial, TrialList


@dataclass(frozen=True)
class SynthConfig:
    num_speakers: int
    utts_per_speaker: int
    dim: int
    within_std: float
    condition_shift: float
    seed: int
    num_conditions: int = 3

    def __post_init__(self):
        if self.num_speakers < 1 or self.utts_per_speaker < 1 or self.dim < 1:
            raise DataError("num_speakers, utts_per_speaker and dim must be >= 1")
        if self.within_std < 0 or self.condition_shift < 0:
            raise DataError("within_std and condition_shift must be non-negative")
        if self.num_conditions < 1:
            raise DataError("num_conditions must be >= 1")


def _unit(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def gen_speakers(config: SynthConfig) -> tuple[EmbeddingSet, TrialList]:
    """Generate an embedding set and the all-pairs trial list, deterministically."""
    rng = np.random.default_rng(config.seed)
    centroids = _unit(rng.normal(size=(config.num_speakers, config.dim)))
    conditions = _unit(rng.normal(size=(config.num_conditions, config.dim)))

    total = config.num_speakers * config.utts_per_speaker
    cond_idx = rng.integers(0, config.num_conditions, size=total)
    noise = rng.normal(size=(total, config.dim))

    ids: list[str] = []
    speakers: list[str] = []
    vectors = np.empty((total, config.dim))
    row = 0
    for s in range(config.num_speakers):
        spk = f"spk{s:04d}"
        for u in range(config.utts_per_speaker):
            ids.append(f"{spk}-utt{u:02d}")
            speakers.append(spk)
            vectors[row] = (
                centroids[s]
                + config.within_std * noise[row]
                + config.condition_shift * conditions[cond_idx[row]]
            )
            row += 1
    emb_set = EmbeddingSet(ids, speakers, vectors)

    trials: list[Trial] = []
    for i in range(total):
        for j in range(i + 1, total):
            label = TARGET if speakers[i] == speakers[j] else NONTARGET
            trials.append(Trial(ids[i], ids[j], label))
    return emb_set, TrialList(trials)
