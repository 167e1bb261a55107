"""Ghost-dictionary and edge-scorer training over frozen embeddings.

Each training group takes 4 speakers with 4 utterances each and splits
them ladder-style: speaker r of the shuffled four contributes its last r
utterances as shared graph vertices and the remaining 4 - r as anchors.
That yields 6 utterance vertices and 10 anchor columns per group, so
anchors meet 0, 1, 2 or 3 same-speaker vertices, mimicking evaluation
graphs of varying difficulty. Ghost embeddings are appended to every
group's vertex set; entries involving ghosts never enter the loss but do
shape the propagation, which is how ghosts receive gradient.

The forward pass is

    features  e = (x_i - x_j)^2          for every vertex pair
    normalize with batch statistics, then fc + sigmoid -> edges S
    weights   W = row softmax of alpha * S (diagonal excluded)
    refine    Y_k = (1 - lam) Y_0 + lam W Y_{k-1}
    loss      mean BCE on refined vertex scores mapped by (y + 1) / 2
              plus mean BCE on the utterance-pair edges

and the backward pass differentiates the whole chain by hand, including
the batch statistics. Updates are SGD with momentum and weight decay.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DivergenceError
from .scorer import EdgeScorerParams, sigmoid
from .store import EmbeddingSet

ANCHORS_PER_GROUP = 10
VERTICES_PER_GROUP = 6
UTTS_PER_SPEAKER = 4
SPEAKERS_PER_GROUP = 4

BCE_CLAMP = 1e-7


@dataclass
class GhostDictionary:
    """Trainable auxiliary embeddings, one row per ghost."""

    embeddings: np.ndarray

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        if self.embeddings.ndim != 2:
            raise DataError("ghost embeddings must be a (count, dim) matrix")
        if not np.all(np.isfinite(self.embeddings)):
            raise DataError("ghost embeddings contain non-finite values")

    @property
    def count(self) -> int:
        return int(self.embeddings.shape[0])

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])

    def copy(self) -> "GhostDictionary":
        return GhostDictionary(self.embeddings.copy())


def init_ghosts(count: int, dim: int, seed: int) -> GhostDictionary:
    """Gaussian init with standard deviation 1/sqrt(dim)."""
    if count < 1 or dim < 1:
        raise DataError("count and dim must be >= 1")
    rng = np.random.default_rng(seed)
    return GhostDictionary(rng.normal(0.0, 1.0 / math.sqrt(dim), size=(count, dim)))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.005
    epochs: int = 1
    steps_per_epoch: int = 100
    groups_per_batch: int = 8
    lam: float = 0.2
    iterations: int = 1
    seed: int = 0
    ghost_count: int = 16
    top_k: int | None = None
    momentum: float = 0.9
    weight_decay: float = 0.001
    cosine_schedule: bool = False

    def __post_init__(self):
        if self.learning_rate < 0:
            raise DataError("learning_rate must be non-negative")
        if min(self.epochs, self.steps_per_epoch, self.groups_per_batch) < 1:
            raise DataError("epochs, steps_per_epoch and groups_per_batch must be >= 1")
        if not 0.0 <= self.lam <= 1.0:
            raise DataError("lam must be in [0, 1]")
        if self.iterations < 0:
            raise DataError("iterations must be >= 0")
        if self.ghost_count < 0:
            raise DataError("ghost_count must be >= 0")

    @property
    def total_steps(self) -> int:
        return self.epochs * self.steps_per_epoch


@dataclass
class LadderBatch:
    """A batch of ladder groups with labels and ghost masks.

    Label arrays cover the full vertex set (utterance vertices followed by
    ghost_count ghost rows); mask arrays are True where an entry involves
    a ghost and is therefore excluded from the loss.
    """

    anchors: np.ndarray        # (B, 10, d)
    vertices: np.ndarray       # (B, 6, d)
    vertex_labels: np.ndarray  # (B, 6 + G, 10)
    edge_labels: np.ndarray    # (B, 6 + G, 6 + G)
    ghost_vertex_mask: np.ndarray  # (6 + G, 10)
    ghost_edge_mask: np.ndarray    # (6 + G, 6 + G)
    ghost_count: int

    @property
    def groups(self) -> int:
        return int(self.anchors.shape[0])


def _sample_group(emb_set: EmbeddingSet, rng: np.random.Generator):
    eligible = [s for s, idx in emb_set.speaker_index.items() if len(idx) >= UTTS_PER_SPEAKER]
    if len(eligible) < SPEAKERS_PER_GROUP:
        raise DataError(
            f"need at least {SPEAKERS_PER_GROUP} speakers with "
            f"{UTTS_PER_SPEAKER} utterances, found {len(eligible)}"
        )
    chosen = rng.choice(len(eligible), size=SPEAKERS_PER_GROUP, replace=False)
    anchors, anchor_spk = [], []
    vertices, vertex_spk = [], []
    for role, spk_pos in enumerate(chosen):
        spk = eligible[spk_pos]
        idx = emb_set.speaker_index[spk]
        utts = rng.choice(len(idx), size=UTTS_PER_SPEAKER, replace=False)
        vecs = emb_set.vectors[[idx[u] for u in utts]]
        # speaker in role r contributes r vertices and 4 - r anchors
        for v in vecs[: UTTS_PER_SPEAKER - role]:
            anchors.append(v)
            anchor_spk.append(spk)
        for v in vecs[UTTS_PER_SPEAKER - role:]:
            vertices.append(v)
            vertex_spk.append(spk)
    return np.array(anchors), anchor_spk, np.array(vertices), vertex_spk


def _ladder_masks(ghost_count: int) -> tuple[np.ndarray, np.ndarray]:
    n = VERTICES_PER_GROUP + ghost_count
    vertex_mask = np.zeros((n, ANCHORS_PER_GROUP), dtype=bool)
    vertex_mask[VERTICES_PER_GROUP:, :] = True
    edge_mask = np.zeros((n, n), dtype=bool)
    edge_mask[VERTICES_PER_GROUP:, :] = True
    edge_mask[:, VERTICES_PER_GROUP:] = True
    return vertex_mask, edge_mask


def _make_batch(emb_set: EmbeddingSet, config: TrainConfig, rng: np.random.Generator) -> LadderBatch:
    b = config.groups_per_batch
    g = config.ghost_count
    n = VERTICES_PER_GROUP + g
    d = emb_set.dim
    anchors = np.empty((b, ANCHORS_PER_GROUP, d))
    vertices = np.empty((b, VERTICES_PER_GROUP, d))
    vertex_labels = np.zeros((b, n, ANCHORS_PER_GROUP))
    edge_labels = np.zeros((b, n, n))
    for gi in range(b):
        a, a_spk, v, v_spk = _sample_group(emb_set, rng)
        anchors[gi] = a
        vertices[gi] = v
        for i, vs in enumerate(v_spk):
            for c, cs in enumerate(a_spk):
                vertex_labels[gi, i, c] = 1.0 if vs == cs else 0.0
            for j, ws in enumerate(v_spk):
                if i != j:
                    edge_labels[gi, i, j] = 1.0 if vs == ws else 0.0
    vmask, emask = _ladder_masks(g)
    return LadderBatch(anchors, vertices, vertex_labels, edge_labels, vmask, emask, g)


def make_ladder_batch(emb_set: EmbeddingSet, config: TrainConfig, seed: int) -> LadderBatch:
    """Sample groups_per_batch ladder groups, reproducibly from seed."""
    return _make_batch(emb_set, config, np.random.default_rng(seed))


def _bce(pred: np.ndarray, label: np.ndarray) -> np.ndarray:
    return -(label * np.log(pred) + (1.0 - label) * np.log1p(-pred))


def pair_loss(
    y_n: np.ndarray,
    s_edges: np.ndarray,
    vertex_labels: np.ndarray,
    edge_labels: np.ndarray,
    ghost_vertex_mask: np.ndarray,
    ghost_edge_mask: np.ndarray,
) -> float:
    """Mean vertex BCE plus mean edge BCE, ghost entries excluded.

    Vertex scores are mapped from [-1, 1] to (0, 1) via (y + 1) / 2;
    predictions are clamped away from exact 0 and 1. Edge BCE counts each
    unordered utterance pair once.
    """
    y_n = np.asarray(y_n, dtype=np.float64)
    s_edges = np.asarray(s_edges, dtype=np.float64)
    if y_n.ndim == 2:
        y_n = y_n[None]
        s_edges = s_edges[None]
        vertex_labels = np.asarray(vertex_labels)[None]
        edge_labels = np.asarray(edge_labels)[None]
    n = y_n.shape[1]
    counted_v = ~np.asarray(ghost_vertex_mask, dtype=bool)
    q = np.clip((y_n + 1.0) / 2.0, BCE_CLAMP, 1.0 - BCE_CLAMP)
    v_terms = _bce(q, np.asarray(vertex_labels, dtype=np.float64))
    loss_v = float(v_terms[:, counted_v].sum() / (y_n.shape[0] * counted_v.sum()))

    iu, ju = np.triu_indices(n, k=1)
    pair_counted = ~np.asarray(ghost_edge_mask, dtype=bool)[iu, ju]
    if pair_counted.sum() == 0:
        return loss_v  # edgeless graph, vertex term only
    s_pairs = np.clip(s_edges[:, iu, ju][:, pair_counted], BCE_CLAMP, 1.0 - BCE_CLAMP)
    e_labels = np.asarray(edge_labels, dtype=np.float64)[:, iu, ju][:, pair_counted]
    loss_e = float(_bce(s_pairs, e_labels).sum() / s_pairs.size)
    return loss_v + loss_e


@dataclass
class GraphGrads:
    ghosts: np.ndarray
    bn_gamma: np.ndarray
    bn_beta: np.ndarray
    fc_weight: np.ndarray
    fc_bias: float
    alpha: float


@dataclass
class _ForwardCache:
    batch: LadderBatch
    X: np.ndarray
    iu: np.ndarray
    ju: np.ndarray
    diffs: np.ndarray
    feats: np.ndarray
    mu: np.ndarray
    var: np.ndarray
    inv: np.ndarray
    xhat: np.ndarray
    s_flat: np.ndarray
    S: np.ndarray
    W: np.ndarray
    xn: np.ndarray
    xu: np.ndarray
    au: np.ndarray
    ys: list = field(default_factory=list)
    yn: np.ndarray | None = None
    loss: float = 0.0


def _training_forward(
    batch: LadderBatch,
    ghosts: GhostDictionary,
    params: EdgeScorerParams,
    lam: float,
    iterations: int,
    top_k: int | None = None,
) -> _ForwardCache:
    from .graph import weight_matrix

    b = batch.groups
    v = batch.vertices.shape[1]
    g = ghosts.count
    if batch.ghost_count != g:
        raise DataError(f"batch built for {batch.ghost_count} ghosts, got {g}")
    n = v + g
    d = ghosts.dim

    X = np.empty((b, n, d))
    X[:, :v] = batch.vertices
    X[:, v:] = ghosts.embeddings

    iu, ju = np.triu_indices(n, k=1)
    diffs = X[:, iu, :] - X[:, ju, :]
    feats = (diffs * diffs).reshape(-1, d)
    m = feats.shape[0]
    mu = feats.mean(axis=0)
    var = feats.var(axis=0)
    inv = 1.0 / np.sqrt(var + params.bn_eps)
    xhat = (feats - mu) * inv
    u = params.bn_gamma * xhat + params.bn_beta
    z = u @ params.fc_weight + params.fc_bias
    s_flat = sigmoid(z)

    S = np.zeros((b, n, n))
    s_pairs = s_flat.reshape(b, -1)
    S[:, iu, ju] = s_pairs
    S[:, ju, iu] = s_pairs
    W = weight_matrix(S, params.alpha, top_k, self_edges=False)

    an = np.linalg.norm(batch.anchors, axis=2)
    xn = np.linalg.norm(X, axis=2)
    if np.any(an == 0.0) or np.any(xn == 0.0):
        raise DataError("zero-norm embedding in training batch")
    au = batch.anchors / an[:, :, None]
    xu = X / xn[:, :, None]
    y0 = xu @ au.transpose(0, 2, 1)  # (b, n, anchors)

    ys = []  # Y_0 .. Y_{iterations-1}, the inputs of each iteration
    y = y0
    keep = 1.0 - lam
    for _ in range(iterations):
        ys.append(y)
        y = keep * y0 + lam * (W @ y)
    yn = y

    loss = pair_loss(
        yn, S,
        batch.vertex_labels, batch.edge_labels,
        batch.ghost_vertex_mask, batch.ghost_edge_mask,
    )
    cache = _ForwardCache(
        batch=batch, X=X, iu=iu, ju=ju, diffs=diffs, feats=feats,
        mu=mu, var=var, inv=inv, xhat=xhat, s_flat=s_flat, S=S, W=W,
        xn=xn, xu=xu, au=au, ys=ys, yn=yn, loss=loss,
    )
    return cache


def _training_backward(cache: _ForwardCache, params: EdgeScorerParams, lam: float, iterations: int) -> GraphGrads:
    batch = cache.batch
    b = batch.groups
    v = batch.vertices.shape[1]
    n = cache.X.shape[1]
    yn = cache.yn
    iu, ju = cache.iu, cache.ju

    counted_v = ~batch.ghost_vertex_mask
    n_v = b * counted_v.sum()
    q_raw = (yn + 1.0) / 2.0
    q = np.clip(q_raw, BCE_CLAMP, 1.0 - BCE_CLAMP)
    in_range = (q_raw > BCE_CLAMP) & (q_raw < 1.0 - BCE_CLAMP)
    d_q = np.where(
        counted_v[None] & in_range,
        (q - batch.vertex_labels) / (q * (1.0 - q)) / n_v,
        0.0,
    )
    d_yn = 0.5 * d_q

    # back through the refinement recursion
    w_t = cache.W.transpose(0, 2, 1)
    grad = d_yn
    d_w = np.zeros_like(cache.W)
    d_y0 = np.zeros_like(d_yn)
    keep = 1.0 - lam
    for k in range(iterations, 0, -1):
        d_w += lam * (grad @ cache.ys[k - 1].transpose(0, 2, 1))
        d_y0 += keep * grad
        grad = lam * (w_t @ grad)
    d_y0 += grad

    # softmax rows of W; the structural zero diagonal drops out on its own
    rowdot = (d_w * cache.W).sum(axis=2, keepdims=True)
    d_t = cache.W * (d_w - rowdot)
    d_alpha = float((d_t * cache.S).sum())
    d_s_mat = params.alpha * d_t
    d_s_pairs = d_s_mat[:, iu, ju] + d_s_mat[:, ju, iu]

    # edge BCE on utterance pairs
    pair_counted = ~batch.ghost_edge_mask[iu, ju]
    n_e = b * pair_counted.sum()
    s_pairs = cache.s_flat.reshape(b, -1)
    s_clip = np.clip(s_pairs, BCE_CLAMP, 1.0 - BCE_CLAMP)
    s_in_range = (s_pairs > BCE_CLAMP) & (s_pairs < 1.0 - BCE_CLAMP)
    e_labels = batch.edge_labels[:, iu, ju]
    d_s_pairs = d_s_pairs + np.where(
        pair_counted[None] & s_in_range,
        (s_clip - e_labels) / (s_clip * (1.0 - s_clip)) / n_e,
        0.0,
    )

    # sigmoid, fc
    d_z = (d_s_pairs * s_pairs * (1.0 - s_pairs)).reshape(-1)
    u = params.bn_gamma * cache.xhat + params.bn_beta
    d_fc_w = u.T @ d_z
    d_fc_b = float(d_z.sum())
    d_u = d_z[:, None] * params.fc_weight[None, :]

    # batch norm, including the batch statistics
    d_gamma = (d_u * cache.xhat).sum(axis=0)
    d_beta = d_u.sum(axis=0)
    d_xhat = d_u * params.bn_gamma
    m = cache.feats.shape[0]
    d_feats = (cache.inv / m) * (
        m * d_xhat - d_xhat.sum(axis=0) - cache.xhat * (d_xhat * cache.xhat).sum(axis=0)
    )

    # squared-difference features back to the vertex embeddings
    d_diffs = 2.0 * cache.diffs * d_feats.reshape(b, -1, cache.X.shape[2])
    d_x = np.zeros_like(cache.X)
    bidx = np.repeat(np.arange(b)[:, None], iu.size, axis=1)
    np.add.at(d_x, (bidx, iu[None, :].repeat(b, axis=0)), d_diffs)
    np.add.at(d_x, (bidx, ju[None, :].repeat(b, axis=0)), -d_diffs)

    # cosine vertex scores back to the vertex embeddings
    d_xu = d_y0 @ cache.au
    d_x += (d_xu - (d_xu * cache.xu).sum(axis=2, keepdims=True) * cache.xu) / cache.xn[:, :, None]

    d_ghosts = d_x[:, v:, :].sum(axis=0)
    return GraphGrads(
        ghosts=d_ghosts,
        bn_gamma=d_gamma,
        bn_beta=d_beta,
        fc_weight=d_fc_w,
        fc_bias=d_fc_b,
        alpha=d_alpha,
    )


def batch_loss(
    batch: LadderBatch,
    ghosts: GhostDictionary,
    params: EdgeScorerParams,
    lam: float,
    iterations: int,
    top_k: int | None = None,
) -> float:
    """Training-mode loss of one batch (batch statistics, no side effects)."""
    return _training_forward(batch, ghosts, params, lam, iterations, top_k).loss


def batch_loss_and_grads(
    batch: LadderBatch,
    ghosts: GhostDictionary,
    params: EdgeScorerParams,
    lam: float,
    iterations: int,
    top_k: int | None = None,
):
    cache = _training_forward(batch, ghosts, params, lam, iterations, top_k)
    grads = _training_backward(cache, params, lam, iterations)
    return cache.loss, grads, (cache.mu, cache.var)


def grad_check(
    batch: LadderBatch,
    ghosts: GhostDictionary,
    params: EdgeScorerParams,
    config: TrainConfig,
    epsilon: float = 1e-5,
    max_ghost_entries: int | None = None,
) -> float:
    """Central-difference check of every analytic gradient.

    Returns the maximum relative error over all checked scalars, where
    the relative error of (g, g_fd) is |g - g_fd| / max(|g|, |g_fd|, 1e-8).
    A subset of ghost entries may be checked via max_ghost_entries.
    """
    if not 1e-7 <= epsilon <= 1e-4:
        raise DataError("epsilon must lie in [1e-7, 1e-4]")
    lam, iters, top_k = config.lam, config.iterations, config.top_k
    _, grads, _ = batch_loss_and_grads(batch, ghosts, params, lam, iters, top_k)

    def loss_with(gh, pr):
        return batch_loss(batch, gh, pr, lam, iters, top_k)

    def rel_err(analytic: float, fd: float) -> float:
        return abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-8)

    worst = 0.0

    ghost_flat = ghosts.embeddings.reshape(-1)
    total = ghost_flat.size
    if max_ghost_entries is None or max_ghost_entries >= total:
        positions = range(total)
    else:
        positions = np.linspace(0, total - 1, max_ghost_entries).astype(int)
    for pos in positions:
        gh = ghosts.copy()
        flat = gh.embeddings.reshape(-1)
        flat[pos] += epsilon
        hi = loss_with(gh, params)
        flat[pos] -= 2 * epsilon
        lo = loss_with(gh, params)
        worst = max(worst, rel_err(grads.ghosts.reshape(-1)[pos], (hi - lo) / (2 * epsilon)))

    for name, grad_vec in (("bn_gamma", grads.bn_gamma), ("bn_beta", grads.bn_beta), ("fc_weight", grads.fc_weight)):
        for pos in range(grad_vec.size):
            pr = params.copy()
            getattr(pr, name)[pos] += epsilon
            hi = loss_with(ghosts, pr)
            getattr(pr, name)[pos] -= 2 * epsilon
            lo = loss_with(ghosts, pr)
            worst = max(worst, rel_err(grad_vec[pos], (hi - lo) / (2 * epsilon)))

    for name, grad_val in (("fc_bias", grads.fc_bias), ("alpha", grads.alpha)):
        pr = params.copy()
        setattr(pr, name, getattr(pr, name) + epsilon)
        hi = loss_with(ghosts, pr)
        setattr(pr, name, getattr(pr, name) - 2 * epsilon)
        lo = loss_with(ghosts, pr)
        worst = max(worst, rel_err(grad_val, (hi - lo) / (2 * epsilon)))
    return worst


def train(
    emb_set: EmbeddingSet,
    ghosts: GhostDictionary,
    params: EdgeScorerParams,
    config: TrainConfig,
) -> tuple[GhostDictionary, EdgeScorerParams, list[float]]:
    """Run SGD over ladder batches; returns trained copies and the loss history.

    The recorded loss at each step is the batch loss before that step's
    update. Running normalization statistics are refreshed from each
    batch with momentum 0.9. Inputs are not modified.
    """
    if config.iterations < 1:
        raise DataError("training requires at least one refinement iteration")
    if ghosts.count != config.ghost_count:
        raise DataError(
            f"ghost dictionary has {ghosts.count} rows, config expects {config.ghost_count}"
        )
    if ghosts.dim != emb_set.dim or params.dim != emb_set.dim:
        raise DataError("ghosts, params and embeddings disagree on dimension")

    ghosts = ghosts.copy()
    params = params.copy()
    rng = np.random.default_rng(config.seed)
    total = config.total_steps
    history: list[float] = []

    slots = {
        "ghosts": ghosts.embeddings,
        "bn_gamma": params.bn_gamma,
        "bn_beta": params.bn_beta,
        "fc_weight": params.fc_weight,
    }
    buffers = {k: np.zeros_like(a) for k, a in slots.items()}
    buffers["fc_bias"] = 0.0
    buffers["alpha"] = 0.0

    for step in range(total):
        batch = _make_batch(emb_set, config, rng)
        loss, grads, (mu, var) = batch_loss_and_grads(
            batch, ghosts, params, config.lam, config.iterations, config.top_k
        )
        if not math.isfinite(loss):
            raise DivergenceError(step)
        history.append(loss)

        lr = config.learning_rate
        if config.cosine_schedule:
            lr = lr * 0.5 * (1.0 + math.cos(math.pi * step / total))

        for name, array in slots.items():
            g = getattr(grads, name) + config.weight_decay * array
            buffers[name] = config.momentum * buffers[name] + g
            array -= lr * buffers[name]
        for name in ("fc_bias", "alpha"):
            g = getattr(grads, name) + config.weight_decay * getattr(params, name)
            buffers[name] = config.momentum * buffers[name] + g
            setattr(params, name, getattr(params, name) - lr * buffers[name])

        params.bn_mean = 0.9 * params.bn_mean + 0.1 * mu
        params.bn_var = 0.9 * params.bn_var + 0.1 * var

    return ghosts, params, history
