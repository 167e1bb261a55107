"""Embedding and trial-list storage.

An embedding set on disk is a triple of files sharing a path prefix:

    <prefix>.manifest   key=value lines: dim, count, dtype=f32le
    <prefix>.f32        count*dim little-endian float32, row-major
    <prefix>.ids        one "utterance_id<TAB>speaker_id" line per row

Vectors are stored as 32-bit floats and held in memory as 64-bit, so a
save/load round trip is the identity. To make that hold for sets built
in memory as well, vectors are snapped to their float32 values at
construction time; all arithmetic downstream stays in float64.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

TARGET = "target"
NONTARGET = "nontarget"


@dataclass(frozen=True)
class Embedding:
    """A single utterance embedding."""

    id: str
    speaker: str
    vector: np.ndarray


class EmbeddingSet:
    """Ordered, immutable collection of same-dimension embeddings.

    Attributes:
        dim: vector dimension shared by every entry
        ids: utterance ids, in file order
        speakers: speaker id per entry, aligned with ids
        vectors: (n, dim) float64 matrix of float32-exact values
    """

    def __init__(self, ids: list[str], speakers: list[str], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise DataError(f"vectors must be 2-D, got shape {vectors.shape}")
        if len(ids) != len(speakers) or len(ids) != vectors.shape[0]:
            raise DataError("ids, speakers and vectors disagree on entry count")
        if not np.all(np.isfinite(vectors)):
            bad = int(np.argwhere(~np.isfinite(vectors).all(axis=1))[0, 0])
            raise DataError(f"non-finite value at record {bad}")
        seen: set[str] = set()
        for i, uid in enumerate(ids):
            if uid in seen:
                raise DataError(f"duplicate utterance id {uid!r} at record {i}")
            seen.add(uid)
        # snap to float32 so serialization is lossless
        vectors = vectors.astype(np.float32).astype(np.float64)
        vectors.setflags(write=False)
        self.ids = list(ids)
        self.speakers = list(speakers)
        self.vectors = vectors
        self._index = {uid: i for i, uid in enumerate(self.ids)}
        self._by_speaker: dict[str, list[int]] = {}
        for i, spk in enumerate(self.speakers):
            self._by_speaker.setdefault(spk, []).append(i)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def speaker_index(self) -> dict[str, list[int]]:
        return self._by_speaker

    def position(self, utterance_id: str) -> int:
        try:
            return self._index[utterance_id]
        except KeyError:
            raise DataError(f"unknown utterance id {utterance_id!r}") from None

    def vector(self, utterance_id: str) -> np.ndarray:
        return self.vectors[self.position(utterance_id)]

    def entry(self, i: int) -> Embedding:
        return Embedding(self.ids[i], self.speakers[i], self.vectors[i])

    def entries(self):
        for i in range(len(self.ids)):
            yield self.entry(i)


@dataclass(frozen=True)
class Trial:
    enroll: str
    test: str
    label: str  # TARGET or NONTARGET

    @property
    def is_target(self) -> bool:
        return self.label == TARGET


@dataclass
class TrialList:
    trials: list[Trial] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    def validate_against(self, embeddings: EmbeddingSet) -> None:
        for t in self.trials:
            embeddings.position(t.enroll)
            embeddings.position(t.test)


def _paths(prefix: str | Path) -> tuple[Path, Path, Path]:
    base = str(prefix)
    return Path(base + ".manifest"), Path(base + ".f32"), Path(base + ".ids")


def _read_manifest(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: malformed manifest line {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def save_embeddings(emb_set: EmbeddingSet, prefix: str | Path) -> None:
    """Write the manifest/data/ids triple for `emb_set` under `prefix`."""
    manifest, data, ids = _paths(prefix)
    manifest.parent.mkdir(parents=True, exist_ok=True)
    manifest.write_text(f"dim={emb_set.dim}\ncount={len(emb_set)}\ndtype=f32le\n")
    emb_set.vectors.astype("<f4").tofile(data)
    with ids.open("w") as fh:
        for uid, spk in zip(emb_set.ids, emb_set.speakers):
            fh.write(f"{uid}\t{spk}\n")


def load_embeddings(prefix: str | Path) -> EmbeddingSet:
    """Load an embedding set saved by save_embeddings."""
    manifest_path, data_path, ids_path = _paths(prefix)
    manifest = _read_manifest(manifest_path)
    for key in ("dim", "count", "dtype"):
        if key not in manifest:
            raise DataError(f"{manifest_path}: missing manifest key {key!r}")
    if manifest["dtype"] != "f32le":
        raise DataError(f"{manifest_path}: unsupported dtype {manifest['dtype']!r}")
    try:
        dim = int(manifest["dim"])
        count = int(manifest["count"])
    except ValueError as exc:
        raise DataError(f"{manifest_path}: non-integer dim/count") from exc
    if dim <= 0 or count < 0:
        raise DataError(f"{manifest_path}: invalid dim={dim} count={count}")

    raw = np.fromfile(data_path, dtype="<f4")
    if raw.size != count * dim:
        # report the first incomplete record
        bad = raw.size // dim
        raise DataError(
            f"{data_path}: dimension mismatch at record {bad}: "
            f"expected {count * dim} floats, found {raw.size}"
        )
    vectors = raw.reshape(count, dim).astype(np.float64)

    ids: list[str] = []
    speakers: list[str] = []
    with ids_path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{ids_path}:{lineno}: malformed id line {line!r}")
            ids.append(parts[0])
            speakers.append(parts[1])
    if len(ids) != count:
        raise DataError(f"{ids_path}: {len(ids)} id lines, manifest says count={count}")
    if not np.all(np.isfinite(vectors)):
        bad = int(np.argwhere(~np.isfinite(vectors).all(axis=1))[0, 0])
        raise DataError(f"{data_path}: non-finite value at record {bad}")
    return EmbeddingSet(ids, speakers, vectors)


def speaker_average(emb_set: EmbeddingSet) -> EmbeddingSet:
    """Collapse a set to one embedding per speaker, the per-component mean.

    Output order follows each speaker's first appearance; the utterance id
    of an averaged entry is the speaker id itself.
    """
    if len(emb_set) == 0:
        raise DataError("cannot average an empty embedding set")
    order: list[str] = []
    seen: set[str] = set()
    for spk in emb_set.speakers:
        if spk not in seen:
            seen.add(spk)
            order.append(spk)
    rows = []
    for spk in order:
        idx = emb_set.speaker_index[spk]
        rows.append(emb_set.vectors[idx].mean(axis=0))
    return EmbeddingSet(order, order, np.vstack(rows))


def load_trials(path: str | Path) -> TrialList:
    """Parse "label enroll_id test_id" lines, label in {0, 1}."""
    trials: list[Trial] = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            label, enroll, test = parts
            if label not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
            trials.append(Trial(enroll, test, TARGET if label == "1" else NONTARGET))
    return TrialList(trials)


def save_trials(trials: TrialList, path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for t in trials:
            fh.write(f"{1 if t.is_target else 0} {t.enroll} {t.test}\n")


def load_scored_trials(path: str | Path) -> tuple[TrialList, np.ndarray]:
    """Parse "label enroll_id test_id score" lines."""
    trials: list[Trial] = []
    scores: list[float] = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            parts = stripped.split()
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            label, enroll, test, score = parts
            if label not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
            try:
                value = float(score)
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad score {score!r}") from None
            trials.append(Trial(enroll, test, TARGET if label == "1" else NONTARGET))
            scores.append(value)
    return TrialList(trials), np.asarray(scores, dtype=np.float64)


def save_scored_trials(trials: TrialList, scores: np.ndarray, path: str | Path) -> None:
    scores = np.asarray(scores, dtype=np.float64)
    if len(trials) != scores.shape[0]:
        raise DataError("trial/score count mismatch")
    with Path(path).open("w") as fh:
        for t, s in zip(trials, scores):
            fh.write(f"{1 if t.is_target else 0} {t.enroll} {t.test} {float(s)!r}\n")
