"""Auxiliary-speaker graph construction, weighting and score refinement.

For an anchor utterance, the graph holds one vertex per counterpart
utterance (reference segments and auxiliaries). Vertex values are the
anchor-vs-counterpart cosine scores; edges hold pairwise affinities among
the counterparts. Refinement repeatedly mixes each vertex with a convex
combination of its neighbors:

    y_k = (1 - lam) * y_0 + lam * W @ y_{k-1}

where W row-normalizes exp(alpha * S), optionally keeping only the top_k
edges per row and optionally adding a self edge valued 1.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .scorer import (
    COSINE,
    EDGE_MODES,
    TRAINED,
    EdgeScorerParams,
    cosine_matrix,
    edge_features,
    edge_matrix,
    score_edge_features,
    unit_rows,
)


@dataclass(frozen=True)
class AsgConfig:
    """Refinement settings.

    top_k of None keeps every candidate edge. alpha is used with cosine
    edges; trained edges take alpha from the scorer parameters.
    """

    lam: float = 0.2
    iterations: int = 1
    top_k: int | None = None
    self_edges: bool = False
    edge_mode: str = COSINE
    alpha: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise DataError(f"lam must be in [0, 1], got {self.lam}")
        if self.iterations < 0:
            raise DataError("iterations must be >= 0")
        if self.top_k is not None and self.top_k < 1:
            raise DataError("top_k must be >= 1 or None")
        if self.edge_mode not in EDGE_MODES:
            raise DataError(f"unknown edge mode {self.edge_mode!r}")


@dataclass
class Graph:
    """One anchor's graph: original vertex scores and the edge matrix."""

    y0: np.ndarray
    S: np.ndarray
    vertex_labels: list[str]

    @property
    def size(self) -> int:
        return int(self.y0.shape[0])


def effective_alpha(config: AsgConfig, params: EdgeScorerParams | None) -> float:
    if config.edge_mode == TRAINED:
        if params is None:
            raise DataError("trained edge mode requires scorer params")
        return float(params.alpha)
    return float(config.alpha)


def _topk_keep(values: np.ndarray, k: int) -> np.ndarray:
    """Mask keeping the k largest entries per row; ties keep the lower index."""
    order = np.argsort(-values, axis=-1, kind="stable")
    keep = np.zeros(values.shape, dtype=bool)
    np.put_along_axis(keep, order[..., :k], True, axis=-1)
    return keep


def _masked_softmax(logits: np.ndarray, keep: np.ndarray) -> np.ndarray:
    masked = np.where(keep, logits, -np.inf)
    shift = masked.max(axis=-1, keepdims=True)
    e = np.exp(masked - shift)
    return e / e.sum(axis=-1, keepdims=True)


def weight_matrix(
    S: np.ndarray,
    alpha: float,
    top_k: int | None = None,
    self_edges: bool = False,
) -> np.ndarray:
    """Contribution weights from a symmetric edge matrix.

    Row i softmaxes alpha * S[i, j] over the off-diagonal candidates,
    keeping only the top_k largest. With self_edges the diagonal enters
    as alpha * 1 and is always kept; otherwise W[i, i] = 0. Every row
    sums to 1. Accepts a batch of matrices (leading axes broadcast).
    """
    S = np.asarray(S, dtype=np.float64)
    n = S.shape[-1]
    if S.shape[-2] != n:
        raise DataError(f"edge matrix must be square, got {S.shape}")
    if n == 1:
        if not self_edges:
            raise DataError("single-vertex graph has no neighbors; enable self edges")
        return np.ones(S.shape)
    logits = alpha * S
    eye = np.eye(n, dtype=bool)
    k = n - 1 if top_k is None else min(int(top_k), n - 1)
    keep = _topk_keep(np.where(eye, -np.inf, logits), k)
    if self_edges:
        keep = keep | eye
        logits = np.where(eye, alpha * 1.0, logits)
    return _masked_softmax(logits, keep)


def refine(y0: np.ndarray, W: np.ndarray, lam: float, iterations: int) -> np.ndarray:
    """Iterate the mixing recursion `iterations` times starting from y0.

    y0 may be a vector or a matrix whose columns are independent graphs
    sharing W. lam = 0 or iterations = 0 return y0 unchanged.
    """
    y0 = np.asarray(y0, dtype=np.float64)
    if not 0.0 <= lam <= 1.0:
        raise DataError(f"lam must be in [0, 1], got {lam}")
    if iterations < 0:
        raise DataError("iterations must be >= 0")
    if lam == 0.0 or iterations == 0:
        return y0.copy()
    keep = 1.0 - lam
    y = y0
    for _ in range(iterations):
        y = keep * y0 + lam * (W @ y)
    return y


def fixed_point(y0: np.ndarray, W: np.ndarray, lam: float) -> np.ndarray:
    """Exact limit of the recursion, by direct linear solve.

    Solves (I - lam * W) y = (1 - lam) * y0, which is nonsingular for
    lam < 1 because W is row-stochastic.
    """
    y0 = np.asarray(y0, dtype=np.float64)
    if not 0.0 <= lam < 1.0:
        raise DataError(f"lam must be in [0, 1) for the fixed point, got {lam}")
    if lam == 0.0:
        return y0.copy()
    n = W.shape[0]
    return np.linalg.solve(np.eye(n) - lam * W, (1.0 - lam) * y0)


def build_graph(
    anchor: np.ndarray,
    others: np.ndarray,
    config: AsgConfig,
    params: EdgeScorerParams | None = None,
    labels: list[str] | None = None,
) -> Graph:
    """Graph for one anchor over a nonempty list of counterpart embeddings."""
    anchor = np.asarray(anchor, dtype=np.float64)
    others = np.asarray(others, dtype=np.float64)
    if others.ndim != 2 or others.shape[0] < 1:
        raise DataError("others must be a nonempty (N, d) array")
    y0 = cosine_matrix(anchor[None, :], others)[0]
    if others.shape[0] == 1:
        S = np.zeros((1, 1))
    else:
        S = edge_matrix(others, config.edge_mode, params)
    if labels is None:
        labels = [f"v{i}" for i in range(others.shape[0])]
    return Graph(y0=y0, S=S, vertex_labels=list(labels))


def _directional_score(
    anchors: np.ndarray,
    refs: np.ndarray,
    auxiliaries: np.ndarray,
    config: AsgConfig,
    params: EdgeScorerParams | None,
) -> float:
    q = refs.shape[0]
    vertices = refs if auxiliaries.shape[0] == 0 else np.vstack([refs, auxiliaries])
    if vertices.shape[0] >= 2:
        S = edge_matrix(vertices, config.edge_mode, params)
    else:
        S = np.zeros((1, 1))
    W = weight_matrix(S, effective_alpha(config, params), config.top_k, config.self_edges)
    y0 = cosine_matrix(anchors, vertices).T  # (N, p), one column per anchor segment
    yn = refine(y0, W, config.lam, config.iterations)
    return float(yn[:q].sum() / (anchors.shape[0] * q))


def pair_score(
    segs_a: np.ndarray,
    segs_b: np.ndarray,
    auxiliaries: np.ndarray,
    config: AsgConfig,
    params: EdgeScorerParams | None = None,
) -> float:
    """Symmetric refined score between two multi-segment utterances.

    Builds one graph per segment of A over B's segments plus the
    auxiliaries, averages the refined reference entries, repeats with the
    roles swapped, and returns the mean of the two directions.
    """
    segs_a = np.atleast_2d(np.asarray(segs_a, dtype=np.float64))
    segs_b = np.atleast_2d(np.asarray(segs_b, dtype=np.float64))
    auxiliaries = np.asarray(auxiliaries, dtype=np.float64)
    if auxiliaries.size == 0:
        auxiliaries = np.empty((0, segs_a.shape[1]))
    auxiliaries = np.atleast_2d(auxiliaries)
    if segs_a.shape[0] == 0 or segs_b.shape[0] == 0:
        raise DataError("both segment lists must be nonempty")
    ab = _directional_score(segs_a, segs_b, auxiliaries, config, params)
    ba = _directional_score(segs_b, segs_a, auxiliaries, config, params)
    return (ab + ba) / 2.0


def contribution_weights(
    test_embs: np.ndarray,
    auxiliaries: np.ndarray,
    config: AsgConfig,
    params: EdgeScorerParams | None = None,
) -> np.ndarray:
    """Weight row each test embedding assigns over the auxiliaries.

    Rows apply the same exp/top-k/normalize treatment as the in-graph
    weights, so each row is non-negative and sums to 1.
    """
    test_embs = np.atleast_2d(np.asarray(test_embs, dtype=np.float64))
    auxiliaries = np.atleast_2d(np.asarray(auxiliaries, dtype=np.float64))
    if test_embs.shape[0] == 0 or auxiliaries.shape[0] == 0:
        raise DataError("both test and auxiliary lists must be nonempty")
    if config.edge_mode == COSINE:
        scores = cosine_matrix(test_embs, auxiliaries)
    else:
        if params is None:
            raise DataError("trained edge mode requires scorer params")
        t_count, m_count = test_embs.shape[0], auxiliaries.shape[0]
        feats = edge_features(
            np.repeat(test_embs, m_count, axis=0),
            np.tile(auxiliaries, (t_count, 1)),
        )
        scores = score_edge_features(feats, params).reshape(t_count, m_count)
    alpha = effective_alpha(config, params)
    k = scores.shape[1] if config.top_k is None else min(config.top_k, scores.shape[1])
    logits = alpha * scores
    return _masked_softmax(logits, _topk_keep(logits, k))


def _utt_aux_edges(
    emb_set,
    aux_set,
    config: AsgConfig,
    params: EdgeScorerParams | None,
) -> np.ndarray:
    """Edge scores between every set utterance and every auxiliary."""
    if config.edge_mode == COSINE:
        return cosine_matrix(emb_set.vectors, aux_set.vectors)
    if params is None:
        raise DataError("trained edge mode requires scorer params")
    n, m = len(emb_set), len(aux_set)
    out = np.empty((n, m))
    for i in range(n):  # chunk by utterance to bound feature memory
        feats = edge_features(np.broadcast_to(emb_set.vectors[i], (m, emb_set.dim)), aux_set.vectors)
        out[i] = score_edge_features(feats, params)
    return out


def refine_trials(
    trials,
    emb_set,
    aux_set,
    config: AsgConfig,
    params: EdgeScorerParams | None = None,
    norm=None,
    cohort=None,
    jobs: int = 1,
) -> np.ndarray:
    """Refined symmetric scores for a trial list with shared auxiliaries.

    Vertex sets differ between trials only through the reference
    utterance, so the edge and weight matrices are built once per distinct
    reference and the anchors of all matching trials are refined together.

    When `norm` (a NormMethod) and `cohort` are given, vertex scores are
    normalized before refinement while edges stay raw; this is the score
    normalization followed by graph refinement composition.
    """
    from .normalization import PairNormalizer

    if len(aux_set) == 0:
        raise DataError("auxiliary set is empty")
    trials = list(trials)
    if not trials:
        return np.zeros(0)
    alpha = effective_alpha(config, params)

    normalizer = None
    if norm is not None:
        if cohort is None:
            raise DataError("vertex normalization requires a cohort set")
        normalizer = PairNormalizer(cohort, norm)

    unit = unit_rows(emb_set.vectors)
    aux_unit = unit_rows(aux_set.vectors)
    m = len(aux_set)
    utt_aux_cos = np.clip(unit @ aux_unit.T, -1.0, 1.0)
    if config.edge_mode == COSINE:
        aux_edges = np.clip(aux_unit @ aux_unit.T, -1.0, 1.0)
        np.fill_diagonal(aux_edges, 0.0)
        utt_aux_edges = utt_aux_cos
    else:
        aux_edges = edge_matrix(aux_set.vectors, TRAINED, params)
        utt_aux_edges = _utt_aux_edges(emb_set, aux_set, config, params)

    if normalizer is not None:
        aux_sides = [(aux_set.ids[j], aux_set.vectors[j]) for j in range(m)]

    def normalized_vertex_rows(anchor_ids, anchor_idx, ref_id, ref_idx):
        """(1 + M, A) matrix of vertex scores for the group's anchors."""
        raw_ref = np.clip(unit[anchor_idx] @ unit[ref_idx], -1.0, 1.0)
        raw_aux = utt_aux_cos[anchor_idx]  # (A, M)
        if normalizer is None:
            return np.vstack([raw_ref[None, :], raw_aux.T])
        enroll_sides = [(uid, emb_set.vectors[i]) for uid, i in zip(anchor_ids, anchor_idx)]
        ref_side = [(ref_id, emb_set.vectors[ref_idx])]
        norm_ref = normalizer.normalize_matrix(raw_ref[:, None], enroll_sides, ref_side)
        norm_aux = normalizer.normalize_matrix(raw_aux, enroll_sides, aux_sides)
        return np.vstack([norm_ref[:, 0][None, :], norm_aux.T])

    def run_direction(anchor_of, ref_of, out_col):
        by_ref: dict[int, list[int]] = {}
        for k, t in enumerate(trials):
            by_ref.setdefault(emb_set.position(ref_of(t)), []).append(k)

        def handle(ref_idx: int, trial_ids: list[int]):
            n_vertices = 1 + m
            S = np.zeros((n_vertices, n_vertices))
            S[0, 1:] = utt_aux_edges[ref_idx]
            S[1:, 0] = utt_aux_edges[ref_idx]
            S[1:, 1:] = aux_edges
            W = weight_matrix(S, alpha, config.top_k, config.self_edges)
            anchor_idx = np.array([emb_set.position(anchor_of(trials[k])) for k in trial_ids])
            anchor_ids = [anchor_of(trials[k]) for k in trial_ids]
            y0 = normalized_vertex_rows(anchor_ids, anchor_idx, emb_set.ids[ref_idx], ref_idx)
            yn = refine(y0, W, config.lam, config.iterations)
            return trial_ids, yn[0, :]

        items = sorted(by_ref.items())
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(lambda it: handle(*it), items))
        else:
            results = [handle(ref, ids) for ref, ids in items]
        for trial_ids, values in results:
            for k, v in zip(trial_ids, values):
                out_col[k] = float(v)

    forward = np.zeros(len(trials))
    backward = np.zeros(len(trials))
    run_direction(lambda t: t.enroll, lambda t: t.test, forward)
    run_direction(lambda t: t.test, lambda t: t.enroll, backward)
    return (forward + backward) / 2.0
