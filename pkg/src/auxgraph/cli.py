"""Command-line interface.

Subcommands compose through files: `gen-synth` writes embedding and trial
files, `score` and `refine` turn trials into scored trials, `normalize`
rewrites the score column, `eval` computes the equal error rate, and
`train-ghosts` / `dump-weights` cover training and weight diagnostics.
Report-producing commands render matplotlib figures next to their
delimited outputs.

Exit codes: 0 success, 1 data error, 2 usage error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import graph, metrics, normalization, reporting, scorer, store, synth, training
from .errors import DataError


def _topk_value(text: str) -> int | None:
    if text == "all":
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"top-k must be an integer or 'all', got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("top-k must be >= 1")
    return value


def _add_asg_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float, default=0.2, help="mixing weight in [0, 1]")
    p.add_argument("--iters", type=int, default=1, help="refinement iterations")
    p.add_argument("--topk", type=_topk_value, default="all", help="edges kept per row, or 'all'")
    p.add_argument("--alpha", type=float, default=1.0, help="edge scale (cosine mode)")
    p.add_argument("--self-edges", action="store_true", help="add self edges valued 1")
    p.add_argument("--edge-mode", choices=scorer.EDGE_MODES, default=scorer.COSINE)
    p.add_argument("--params", help="edge scorer parameter file prefix (trained mode)")


def _asg_config(args) -> tuple[graph.AsgConfig, scorer.EdgeScorerParams | None]:
    params = scorer.load_params(args.params) if args.params else None
    if args.edge_mode == scorer.TRAINED and params is None:
        raise DataError("--edge-mode trained requires --params")
    config = graph.AsgConfig(
        lam=args.lam,
        iterations=args.iters,
        top_k=args.topk,
        self_edges=args.self_edges,
        edge_mode=args.edge_mode,
        alpha=args.alpha,
    )
    return config, params


def _norm_method(args) -> normalization.NormMethod | None:
    if getattr(args, "norm", "none") in (None, "none"):
        return None
    top = None if args.snorm_top == "all" else int(args.snorm_top)
    return normalization.NormMethod(args.norm, top)


def cmd_gen_synth(args) -> int:
    config = synth.SynthConfig(
        num_speakers=args.speakers,
        utts_per_speaker=args.utts,
        dim=args.dim,
        within_std=args.within_std,
        condition_shift=args.condition_shift,
        seed=args.seed,
        num_conditions=args.conditions,
    )
    emb_set, trials = synth.gen_speakers(config)
    store.save_embeddings(emb_set, args.out)
    trials_path = args.trials_out or f"{args.out}.trials"
    store.save_trials(trials, trials_path)
    print(f"wrote {len(emb_set)} embeddings (dim {emb_set.dim}) to {args.out}.*")
    print(f"wrote {len(trials)} trials to {trials_path}")
    return 0


def cmd_score(args) -> int:
    emb_set = store.load_embeddings(args.embeddings)
    trials = store.load_trials(args.trials)
    trials.validate_against(emb_set)
    scores = scorer.trial_scores(emb_set, trials)
    store.save_scored_trials(trials, scores, args.out)
    print(f"scored {len(trials)} trials -> {args.out}")
    return 0


def cmd_refine(args) -> int:
    emb_set = store.load_embeddings(args.embeddings)
    trials = store.load_trials(args.trials)
    trials.validate_against(emb_set)
    aux = store.load_embeddings(args.aux)
    config, params = _asg_config(args)
    method = _norm_method(args)
    cohort = store.load_embeddings(args.cohort) if args.cohort else None
    if method is not None and cohort is None:
        raise DataError("--norm requires --cohort")
    scores = graph.refine_trials(
        trials, emb_set, aux, config, params,
        norm=method, cohort=cohort, jobs=args.jobs,
    )
    store.save_scored_trials(trials, scores, args.out)
    print(f"refined {len(trials)} trials with {len(aux)} auxiliaries -> {args.out}")
    return 0


def cmd_normalize(args) -> int:
    trials, raw = store.load_scored_trials(args.scores)
    emb_set = store.load_embeddings(args.embeddings)
    trials.validate_against(emb_set)
    cohort = store.load_embeddings(args.cohort)
    method = _norm_method(args)
    if method is None:
        scores = raw
    else:
        scores = normalization.normalize_trials(trials, emb_set, cohort, method, raw_scores=raw)
    store.save_scored_trials(trials, scores, args.out)
    print(f"normalized {len(trials)} trial scores ({args.norm}) -> {args.out}")
    return 0


def cmd_train_ghosts(args) -> int:
    emb_set = store.load_embeddings(args.embeddings)
    config = training.TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        steps_per_epoch=args.steps_per_epoch,
        groups_per_batch=args.groups,
        lam=args.lam,
        iterations=args.iters,
        seed=args.seed,
        ghost_count=args.ghosts,
        cosine_schedule=args.cosine_schedule,
    )
    ghosts = training.init_ghosts(config.ghost_count, emb_set.dim, args.seed)
    params = scorer.init_params(emb_set.dim, seed=args.seed)
    ghosts, params, history = training.train(emb_set, ghosts, params, config)

    ghost_ids = [f"ghost{i:04d}" for i in range(ghosts.count)]
    store.save_embeddings(store.EmbeddingSet(ghost_ids, ghost_ids, ghosts.embeddings), args.out_ghosts)
    scorer.save_params(params, args.out_params)
    print(f"trained {ghosts.count} ghosts over {config.total_steps} steps")
    print(f"loss {history[0]:.4f} -> {history[-1]:.4f}")
    if args.report_dir:
        report = Path(args.report_dir)
        report.mkdir(parents=True, exist_ok=True)
        csv_path = report / "loss.csv"
        with csv_path.open("w") as fh:
            fh.write("step,loss\n")
            for i, value in enumerate(history):
                fh.write(f"{i},{value!r}\n")
        reporting.save_loss_curve(history, report / "loss.png")
        print(f"wrote {csv_path} and {report / 'loss.png'}")
    return 0


def cmd_eval(args) -> int:
    trials, scores = store.load_scored_trials(args.scores)
    labeled = metrics.from_labeled(scores, [t.is_target for t in trials])
    result = metrics.eer(labeled)
    print(f"EER(%) = {100.0 * result.eer:.2f} @ threshold {result.threshold:.6g}")
    if args.report_dir:
        report = Path(args.report_dir)
        report.mkdir(parents=True, exist_ok=True)
        points = metrics.det_points(labeled)
        csv_path = report / "det_points.csv"
        with csv_path.open("w") as fh:
            fh.write("threshold,far,frr\n")
            for far, frr, thr in points:
                fh.write(f"{thr!r},{far!r},{frr!r}\n")
        reporting.save_det_curve(points, report / "det_curve.png", result.eer)
        print(f"wrote {csv_path} and {report / 'det_curve.png'}")
    return 0


def cmd_dump_weights(args) -> int:
    emb_set = store.load_embeddings(args.embeddings)
    aux = store.load_embeddings(args.aux)
    config, params = _asg_config(args)
    test_vectors = emb_set.vectors[: args.limit] if args.limit else emb_set.vectors
    weights = graph.contribution_weights(test_vectors, aux.vectors, config, params)
    with Path(args.out).open("w") as fh:
        for row in weights:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    print(f"wrote {weights.shape[0]}x{weights.shape[1]} weight rows to {args.out}")
    if not args.no_figure:
        figure = Path(args.out).with_suffix(".png")
        reporting.save_weight_heatmap(weights, figure)
        print(f"wrote {figure}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="auxgraph", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate synthetic speaker embeddings and trials")
    p.add_argument("--out", required=True, help="output embedding file prefix")
    p.add_argument("--trials-out", help="trial file path (default <out>.trials)")
    p.add_argument("--speakers", type=int, default=40)
    p.add_argument("--utts", type=int, default=6)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--within-std", type=float, default=0.25)
    p.add_argument("--condition-shift", type=float, default=0.35)
    p.add_argument("--conditions", type=int, default=3)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("score", help="raw cosine scores for a trial list")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("refine", help="graph-refined scores for a trial list")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--aux", required=True, help="auxiliary embedding file prefix")
    p.add_argument("--out", required=True)
    _add_asg_flags(p)
    p.add_argument("--norm", choices=("none",) + normalization.NORM_KINDS, default="none",
                   help="normalize vertex scores before refinement")
    p.add_argument("--cohort", help="cohort embedding file prefix for --norm")
    p.add_argument("--snorm-top", default="all", help="adaptive s-norm cohort size or 'all'")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers over references")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("normalize", help="normalize a scored trial file")
    p.add_argument("--scores", required=True, help="scored trial file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--norm", choices=normalization.NORM_KINDS, required=True)
    p.add_argument("--snorm-top", default="all")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("train-ghosts", help="train ghost embeddings and the edge scorer")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out-ghosts", required=True, help="output prefix for trained ghosts")
    p.add_argument("--out-params", required=True, help="output prefix for trained scorer params")
    p.add_argument("--ghosts", type=int, default=16, help="ghost count")
    p.add_argument("--lr", type=float, default=0.005)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--steps-per-epoch", type=int, default=200)
    p.add_argument("--groups", type=int, default=8)
    p.add_argument("--lambda", dest="lam", type=float, default=0.2)
    p.add_argument("--iters", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cosine-schedule", action="store_true")
    p.add_argument("--report-dir", help="write loss.csv and loss.png here")
    p.set_defaults(func=cmd_train_ghosts)

    p = sub.add_parser("eval", help="equal error rate of a scored trial file")
    p.add_argument("--scores", required=True)
    p.add_argument("--report-dir", help="write det_points.csv and det_curve.png here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("dump-weights", help="auxiliary contribution weights per test utterance")
    p.add_argument("--embeddings", required=True, help="test embedding file prefix")
    p.add_argument("--aux", required=True)
    p.add_argument("--out", required=True, help="output text file, one weight row per line")
    p.add_argument("--limit", type=int, help="use only the first N test embeddings")
    p.add_argument("--no-figure", action="store_true")
    _add_asg_flags(p)
    p.set_defaults(func=cmd_dump_weights)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
