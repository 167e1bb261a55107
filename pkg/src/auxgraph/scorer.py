"""Vertex and edge similarity scoring.

Vertex scores are plain cosine similarity between embeddings. Edge scores
come in two modes:

    cosine   parameter-free cosine similarity, range [-1, 1]
    trained  sigmoid(fc . batchnorm((f_i - f_j) ** 2) + bias), range (0, 1)

The trained scorer normalizes the squared-difference feature with batch
statistics during training and with running statistics at inference.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DataError

COSINE = "cosine"
TRAINED = "trained"
EDGE_MODES = (COSINE, TRAINED)

_PARAM_VECTOR_KEYS = ("bn_gamma", "bn_beta", "bn_mean", "bn_var", "fc_weight")


@dataclass
class EdgeScorerParams:
    """Parameters of the trained edge scorer plus the weight scale alpha.

    bn_mean/bn_var are running statistics used at inference; bn_gamma and
    bn_beta are the affine part of the normalization.
    """

    bn_gamma: np.ndarray
    bn_beta: np.ndarray
    bn_mean: np.ndarray
    bn_var: np.ndarray
    fc_weight: np.ndarray
    bn_eps: float = 1e-5
    fc_bias: float = 0.0
    alpha: float = 1.0

    def __post_init__(self):
        for key in _PARAM_VECTOR_KEYS:
            value = np.asarray(getattr(self, key), dtype=np.float64)
            if value.ndim != 1:
                raise DataError(f"{key} must be a vector")
            if not np.all(np.isfinite(value)):
                raise DataError(f"{key} contains non-finite values")
            setattr(self, key, value)
        dims = {getattr(self, key).shape[0] for key in _PARAM_VECTOR_KEYS}
        if len(dims) != 1:
            raise DataError(f"parameter vectors disagree on dimension: {sorted(dims)}")
        if np.any(self.bn_var < 0):
            raise DataError("bn_var must be non-negative")
        if not self.bn_eps > 0:
            raise DataError("bn_eps must be positive")
        for name in ("bn_eps", "fc_bias", "alpha"):
            if not np.isfinite(getattr(self, name)):
                raise DataError(f"{name} is non-finite")

    @property
    def dim(self) -> int:
        return int(self.fc_weight.shape[0])

    def copy(self) -> "EdgeScorerParams":
        return replace(
            self,
            bn_gamma=self.bn_gamma.copy(),
            bn_beta=self.bn_beta.copy(),
            bn_mean=self.bn_mean.copy(),
            bn_var=self.bn_var.copy(),
            fc_weight=self.fc_weight.copy(),
        )


def init_params(dim: int, seed: int = 0, alpha: float = 1.0) -> EdgeScorerParams:
    """Fresh scorer parameters: identity normalization, small random fc."""
    if dim < 1:
        raise DataError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    return EdgeScorerParams(
        bn_gamma=np.ones(dim),
        bn_beta=np.zeros(dim),
        bn_mean=np.zeros(dim),
        bn_var=np.ones(dim),
        fc_weight=rng.normal(0.0, 1.0 / np.sqrt(dim), size=dim),
        bn_eps=1e-5,
        fc_bias=0.0,
        alpha=alpha,
    )


def sigmoid(x):
    # split by sign to avoid overflow in exp
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def vertex_score(f_i: np.ndarray, f_j: np.ndarray) -> float:
    """Cosine similarity between two embeddings, in [-1, 1]."""
    f_i = np.asarray(f_i, dtype=np.float64)
    f_j = np.asarray(f_j, dtype=np.float64)
    if f_i.shape != f_j.shape:
        raise DataError(f"dimension mismatch: {f_i.shape} vs {f_j.shape}")
    ni = np.linalg.norm(f_i)
    nj = np.linalg.norm(f_j)
    if ni == 0.0 or nj == 0.0:
        raise DataError("cosine similarity undefined for a zero vector")
    return float(np.clip(np.dot(f_i, f_j) / (ni * nj), -1.0, 1.0))


def unit_rows(matrix: np.ndarray) -> np.ndarray:
    """Rows scaled to unit norm; raises on zero rows."""
    matrix = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.argmax(norms == 0.0))
        raise DataError(f"zero-norm vector at row {bad}")
    return matrix / norms[:, None]


def cosine_matrix(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Pairwise cosine similarities between rows of a and rows of b."""
    ua = unit_rows(a)
    ub = ua if b is None else unit_rows(b)
    return np.clip(ua @ ub.T, -1.0, 1.0)


def edge_features(f_i: np.ndarray, f_j: np.ndarray) -> np.ndarray:
    """Element-wise squared difference, the trained scorer's input."""
    d = np.asarray(f_i, dtype=np.float64) - np.asarray(f_j, dtype=np.float64)
    return d * d


def score_edge_features(
    features: np.ndarray,
    params: EdgeScorerParams,
    batch_stats: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Run features of shape (..., d) through normalize, fc and sigmoid."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[-1] != params.dim:
        raise DataError(
            f"feature dim {features.shape[-1]} does not match params dim {params.dim}"
        )
    if batch_stats is None:
        mean, var = params.bn_mean, params.bn_var
    else:
        mean, var = batch_stats
    xhat = (features - mean) / np.sqrt(var + params.bn_eps)
    u = params.bn_gamma * xhat + params.bn_beta
    return sigmoid(u @ params.fc_weight + params.fc_bias)


def edge_score(
    f_i: np.ndarray,
    f_j: np.ndarray,
    params: EdgeScorerParams,
    batch_stats: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Trained edge affinity in (0, 1); symmetric in its two arguments."""
    f_i = np.asarray(f_i, dtype=np.float64)
    f_j = np.asarray(f_j, dtype=np.float64)
    if f_i.shape != f_j.shape:
        raise DataError(f"dimension mismatch: {f_i.shape} vs {f_j.shape}")
    return float(score_edge_features(edge_features(f_i, f_j), params, batch_stats))


def edge_matrix(
    vectors: np.ndarray,
    mode: str = COSINE,
    params: EdgeScorerParams | None = None,
) -> np.ndarray:
    """Symmetric N x N edge-score matrix with a zero diagonal.

    Each unordered pair is scored once and mirrored, so the result equals
    its transpose bit-exactly.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    n = vectors.shape[0]
    if n < 2:
        raise DataError("edge_matrix needs at least 2 vectors")
    if mode not in EDGE_MODES:
        raise DataError(f"unknown edge mode {mode!r}")
    iu, ju = np.triu_indices(n, k=1)
    if mode == COSINE:
        full = cosine_matrix(vectors)
        values = full[iu, ju]
    else:
        if params is None:
            raise DataError("trained edge mode requires params")
        feats = edge_features(vectors[iu], vectors[ju])
        values = score_edge_features(feats, params)
    s = np.zeros((n, n))
    s[iu, ju] = values
    s[ju, iu] = values
    return s


def trial_scores(emb_set, trials) -> np.ndarray:
    """Raw cosine score for every (enroll, test) trial pair."""
    unit = unit_rows(emb_set.vectors)
    out = np.empty(len(trials))
    for k, t in enumerate(trials):
        i = emb_set.position(t.enroll)
        j = emb_set.position(t.test)
        out[k] = np.clip(np.dot(unit[i], unit[j]), -1.0, 1.0)
    return out


def save_params(params: EdgeScorerParams, prefix: str | Path) -> None:
    """Serialize scorer parameters as manifest plus one f32 blob."""
    manifest = Path(str(prefix) + ".manifest")
    data = Path(str(prefix) + ".f32")
    manifest.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"dim={params.dim}",
        "dtype=f32le",
        f"keys={','.join(_PARAM_VECTOR_KEYS)}",
        f"bn_eps={params.bn_eps!r}",
        f"fc_bias={params.fc_bias!r}",
        f"alpha={params.alpha!r}",
    ]
    manifest.write_text("\n".join(lines) + "\n")
    blob = np.concatenate([getattr(params, key) for key in _PARAM_VECTOR_KEYS])
    blob.astype("<f4").tofile(data)


def load_params(prefix: str | Path) -> EdgeScorerParams:
    manifest_path = Path(str(prefix) + ".manifest")
    data_path = Path(str(prefix) + ".f32")
    manifest: dict[str, str] = {}
    for lineno, line in enumerate(manifest_path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{manifest_path}:{lineno}: malformed line {line!r}")
        key, value = line.split("=", 1)
        manifest[key.strip()] = value.strip()
    if manifest.get("dtype") != "f32le":
        raise DataError(f"{manifest_path}: unsupported dtype")
    keys = tuple(manifest.get("keys", "").split(","))
    if keys != _PARAM_VECTOR_KEYS:
        raise DataError(f"{manifest_path}: unexpected keys {keys}")
    dim = int(manifest["dim"])
    raw = np.fromfile(data_path, dtype="<f4").astype(np.float64)
    if raw.size != dim * len(_PARAM_VECTOR_KEYS):
        raise DataError(f"{data_path}: expected {dim * len(_PARAM_VECTOR_KEYS)} floats, found {raw.size}")
    parts = raw.reshape(len(_PARAM_VECTOR_KEYS), dim)
    return EdgeScorerParams(
        bn_gamma=parts[0],
        bn_beta=parts[1],
        bn_mean=parts[2],
        bn_var=parts[3],
        fc_weight=parts[4],
        bn_eps=float(manifest["bn_eps"]),
        fc_bias=float(manifest["fc_bias"]),
        alpha=float(manifest["alpha"]),
    )
