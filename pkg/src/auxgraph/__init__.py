"""Graph-based score refinement backend for speaker verification."""

from .errors import DataError, DivergenceError
from .graph import (
    AsgConfig,
    Graph,
    build_graph,
    contribution_weights,
    fixed_point,
    pair_score,
    refine,
    refine_trials,
    weight_matrix,
)
from .metrics import EerResult, ScoredTrials, det_points, eer, from_labeled
from .normalization import (
    CohortStats,
    NormMethod,
    PairNormalizer,
    cohort_stats,
    normalize,
    normalize_trials,
)
from .scorer import (
    COSINE,
    TRAINED,
    EdgeScorerParams,
    edge_matrix,
    edge_score,
    init_params,
    load_params,
    save_params,
    trial_scores,
    vertex_score,
)
from .store import (
    EmbeddingSet,
    Trial,
    TrialList,
    load_embeddings,
    load_scored_trials,
    load_trials,
    save_embeddings,
    save_scored_trials,
    save_trials,
    speaker_average,
)
from .synth import SynthConfig, gen_speakers
from .training import (
    GhostDictionary,
    LadderBatch,
    TrainConfig,
    batch_loss,
    grad_check,
    init_ghosts,
    make_ladder_batch,
    pair_loss,
    train,
)

__all__ = [
    "AsgConfig",
    "CohortStats",
    "COSINE",
    "DataError",
    "DivergenceError",
    "EerResult",
    "EdgeScorerParams",
    "EmbeddingSet",
    "GhostDictionary",
    "Graph",
    "LadderBatch",
    "NormMethod",
    "PairNormalizer",
    "ScoredTrials",
    "SynthConfig",
    "TRAINED",
    "Trial",
    "TrialList",
    "TrainConfig",
    "batch_loss",
    "build_graph",
    "cohort_stats",
    "contribution_weights",
    "det_points",
    "edge_matrix",
    "edge_score",
    "eer",
    "fixed_point",
    "from_labeled",
    "gen_speakers",
    "grad_check",
    "init_ghosts",
    "init_params",
    "load_embeddings",
    "load_params",
    "load_scored_trials",
    "load_trials",
    "make_ladder_batch",
    "normalize",
    "normalize_trials",
    "pair_loss",
    "pair_score",
    "refine",
    "refine_trials",
    "save_embeddings",
    "save_params",
    "save_scored_trials",
    "save_trials",
    "speaker_average",
    "train",
    "trial_scores",
    "vertex_score",
    "weight_matrix",
]
