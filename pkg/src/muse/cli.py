"""Command-line entry point.

Subcommands: train, eval-scws, eval-synonym, knn, decode,
make-pseudoword-corpus, diagnose-appendix-a. Exit codes: 0 success,
1 usage/configuration error, 2 runtime failure (I/O, bad files, divergence).
Every command echoes its resolved configuration to stderr before doing work,
and all randomness hangs off --seed, so reruns are reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import corpus as corpus_mod
from . import evaluation as eval_mod
from .config import Learner, TrainingConfig
from .errors import ConfigError, FormatError, MuseError, TrainingError
from .params import (ModelParams, SenseRef, export_text, init_params,
                     load_model, save_model)
from .representation import RewardKind
from .selection import Strategy, StrategyKind, decode_sequence
from .trainer import Trainer, run_appendix_a_diagnostic

_STRATEGIES = {
    "greedy": StrategyKind.GREEDY,
    "egreedy": StrategyKind.EPSILON_GREEDY,
    "boltzmann": StrategyKind.BOLTZMANN,
    "sample": StrategyKind.POLICY_SAMPLE,
}


def _echo_config(cfg: dict) -> None:
    print("config " + json.dumps(cfg, sort_keys=True), file=sys.stderr)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, default=300, help="embedding dimension")
    p.add_argument("--senses", type=int, default=3, help="senses per word")
    p.add_argument("--window", type=int, default=5, help="context window radius")
    p.add_argument("--lr", type=float, default=0.025, help="initial learning rate")
    p.add_argument("--negatives", type=int, default=25, help="negative samples")
    p.add_argument("--epsilon", type=float, default=0.05,
                   help="exploration rate for egreedy")
    p.add_argument("--batch-size", type=int, default=2048)
    p.add_argument("--learner", choices=["policy", "qlearning"],
                   default="qlearning")
    p.add_argument("--strategy", choices=sorted(_STRATEGIES), default=None,
                   help="sense selection strategy (default: boltzmann; "
                        "policy learner forces on-policy sampling)")
    p.add_argument("--reward", choices=["approx", "bernoulli"], default=None,
                   help="Q-learning reward target (default bernoulli)")
    p.add_argument("--reward-direction", choices=["forward", "reversed"],
                   default="forward")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--subsample", type=float, default=1e-4,
                   help="subsampling threshold, 0 disables")
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--min-sentence-tokens", type=int, default=10,
                   help="skip shorter sentences, 0 disables")
    p.add_argument("--lowercase", action="store_true")
    p.add_argument("--all-offsets", action="store_true",
                   help="train on every offset in the window, not one draw")
    p.add_argument("--power", type=float, default=0.75)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--relaxed", action="store_true",
                   help="lock-free multi-threaded mode (non-deterministic)")
    p.add_argument("--progress", type=int, default=0,
                   help="progress line every N samples (0 disables)")
    p.add_argument("--checkpoint-every", type=int, default=0,
                   help="checkpoint every N samples (0 disables)")


def _config_from_args(args: argparse.Namespace) -> TrainingConfig:
    strategy = None
    if args.strategy is not None:
        strategy = Strategy(_STRATEGIES[args.strategy], epsilon=args.epsilon)
    reward = RewardKind(args.reward) if args.reward else None
    cfg = TrainingConfig(
        d=args.dim, n=args.senses, m=args.window, lr0=args.lr,
        negatives=args.negatives, epsilon=args.epsilon,
        batch_size=args.batch_size, learner=Learner(args.learner),
        strategy=strategy, reward=reward,
        reward_direction=args.reward_direction, epochs=args.epochs,
        subsample_t=args.subsample, min_count=args.min_count,
        min_sentence_tokens=args.min_sentence_tokens,
        lowercase=args.lowercase, all_offsets=args.all_offsets,
        power=args.power, seed=args.seed, threads=args.threads,
        strict=not args.relaxed, progress_interval=args.progress,
        checkpoint_interval=args.checkpoint_every,
    )
    return cfg.validate()


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    _echo_config(cfg.to_dict())
    vocab = corpus_mod.build_vocabulary(
        args.corpus, cfg.min_count,
        min_sentence_tokens=cfg.min_sentence_tokens, lowercase=cfg.lowercase)
    init_seed = int(np.random.SeedSequence([cfg.seed, 5]).generate_state(1)[0])
    params = init_params(len(vocab), cfg.d, cfg.n, init_seed)
    trainer = Trainer(params, vocab, cfg)

    def on_progress(stats):
        print(f"samples={stats.samples_seen} lr={stats.lr:.6f} "
              f"reward={stats.mean_reward:.6f} entropy={stats.mean_entropy:.6f}",
              file=sys.stderr)

    stats = trainer.train(args.corpus, on_progress=on_progress,
                          checkpoint_path=args.out)
    echo = cfg.to_dict()
    echo["corpus_dropped_tokens"] = vocab.dropped_tokens
    save_model(params, vocab, args.out, echo)
    print(f"trained samples={stats.samples_seen} vocab={len(vocab)} "
          f"reward={stats.mean_reward:.6f}")
    return 0


def _cmd_eval_scws(args: argparse.Namespace) -> int:
    params, vocab, config = load_model(args.model)
    _echo_config(config)
    m = args.eval_window if args.eval_window else int(config.get("m", 5))
    items = eval_mod.load_scws(args.scws)
    report = eval_mod.evaluate_scws(items, params, vocab, m)
    print(f"MaxSimC={report.max_rho * 100:.4f} "
          f"AvgSimC={report.avg_rho * 100:.4f} skipped={report.skipped}")
    print(json.dumps({
        "avgsimc": None if np.isnan(report.avg_rho) else round(report.avg_rho * 100, 4),
        "maxsimc": None if np.isnan(report.max_rho) else round(report.max_rho * 100, 4),
        "scored": report.scored,
        "skipped": report.skipped,
    }, sort_keys=True))
    return 0


def _cmd_eval_synonym(args: argparse.Namespace) -> int:
    params, vocab, config = load_model(args.model)
    _echo_config(config)
    for path in args.questions:
        questions = eval_mod.load_synonym_questions(path)
        accuracy, skipped, total = eval_mod.evaluate_synonyms(
            questions, params, vocab)
        shown = float("nan") if np.isnan(accuracy) else accuracy * 100
        print(f"dataset={path} accuracy={shown:.4f} skipped={skipped} "
              f"total={total}")
        print(json.dumps({
            "accuracy": None if np.isnan(accuracy) else round(accuracy * 100, 4),
            "dataset": path, "skipped": skipped, "total": total,
        }, sort_keys=True))
    return 0


def _cmd_knn(args: argparse.Namespace) -> int:
    params, vocab, config = load_model(args.model)
    _echo_config(config)
    word_id = vocab.id_of(args.word)
    if word_id < 0:
        raise ConfigError(f"word {args.word!r} is not in the vocabulary")
    if not 0 <= args.sense < params.n:
        raise ConfigError(f"sense must lie in [0, {params.n})")
    query = SenseRef.of(word_id, args.sense, params.n)
    neighbors = eval_mod.knn_senses(query, params, vocab, args.k, args.metric)
    for rank, (ref, score) in enumerate(neighbors, 1):
        print(f"{rank}\t{vocab.words[ref.word]}#{ref.sense}\t{score:.6f}")
    return 0


def _cmd_decode(args: argparse.Namespace) -> int:
    params, vocab, config = load_model(args.model)
    _echo_config(config)
    m = args.window if args.window else int(config.get("m", 5))
    lowercase = bool(config.get("lowercase", False))
    lines = [args.text] if args.text is not None else sys.stdin.read().splitlines()
    for line in lines:
        tokens = line.lower().split() if lowercase else line.split()
        ids = [vocab.id_of(t) for t in tokens]
        known = [w for w in ids if w >= 0]
        senses = iter(decode_sequence(known, params, m))
        rendered = []
        for tok, wid in zip(tokens, ids):
            if wid < 0:
                rendered.append(tok)
            else:
                rendered.append(f"{tok}#{next(senses).sense}")
        print(" ".join(rendered))
    return 0


def _cmd_make_pseudoword_corpus(args: argparse.Namespace) -> int:
    pairs = []
    for spec in args.merge:
        parts = spec.split(",")
        if len(parts) != 3:
            raise ConfigError(f"--merge needs wordA,wordB,pseudoword: {spec!r}")
        pairs.append(tuple(parts))
    report = corpus_mod.make_pseudoword_corpus(args.corpus, pairs, args.out)
    for pseudo, per in report.counts.items():
        detail = " ".join(f"{w}={c}" for w, c in per.items())
        print(f"pseudoword={pseudo} {detail}")
    print(f"rewritten={report.total_rewritten} labels={report.labels_path}")
    return 0


def _cmd_diagnose(args: argparse.Namespace) -> int:
    cfg = TrainingConfig(
        d=args.dim, n=args.senses, m=2, lr0=args.lr,
        learner=Learner(args.learner), seed=args.seed,
    ).validate()
    _echo_config(cfg.to_dict())
    params = init_params(4, cfg.d, cfg.n, cfg.seed)
    # Start from a visibly non-uniform policy so the decay is observable.
    from .selection import encode_context
    from .corpus import ContextWindow
    window = ContextWindow(target=0, left=[1], right=[], m=cfg.m)
    c = encode_context(window, params).astype(np.float64)
    scale = 1.5 / max(float(c @ c), 1e-12)
    params.Q[0, 0] = (scale * c).astype(np.float32)
    trace = run_appendix_a_diagnostic(params, cfg, args.steps, window=window)
    label = "max_pi" if cfg.learner is Learner.POLICY_GRADIENT else "max_q"
    for step in range(args.steps):
        print(f"step={step} selected={trace.selected[step]} "
              f"{label}={trace.probs[step].max():.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="muse",
        description="Multi-sense word embeddings with reinforcement-learned "
                    "sense selection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a text corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="model output path")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval-scws", help="contextual word similarity")
    p.add_argument("--model", required=True)
    p.add_argument("--scws", required=True, help="TSV dataset path")
    p.add_argument("--eval-window", type=int, default=0,
                   help="context radius (default: the model's window)")
    p.set_defaults(func=_cmd_eval_scws)

    p = sub.add_parser("eval-synonym", help="synonym selection accuracy")
    p.add_argument("--model", required=True)
    p.add_argument("--questions", required=True, action="append",
                   help="question file; may repeat")
    p.set_defaults(func=_cmd_eval_synonym)

    p = sub.add_parser("knn", help="nearest senses of a word sense")
    p.add_argument("--model", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("--sense", type=int, default=0)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--metric", choices=["collocation", "cosine"],
                   default="collocation")
    p.set_defaults(func=_cmd_knn)

    p = sub.add_parser("decode", help="greedy sense decoding of text")
    p.add_argument("--model", required=True)
    p.add_argument("--text", default=None, help="decode this line instead of stdin")
    p.add_argument("--window", type=int, default=0)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("make-pseudoword-corpus",
                       help="merge word pairs into labeled pseudowords")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--merge", required=True, action="append",
                   metavar="A,B,PSEUDO")
    p.set_defaults(func=_cmd_make_pseudoword_corpus)

    p = sub.add_parser("diagnose-appendix-a",
                       help="frozen-reward selector pathology trace")
    p.add_argument("--learner", choices=["policy", "qlearning"],
                   default="policy")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--senses", type=int, default=3)
    p.add_argument("--lr", type=float, default=0.025)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=_cmd_diagnose)

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, TrainingError, MuseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
