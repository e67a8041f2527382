"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric error.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .blocks import ConfigError
from .checkpoint import (
    CheckpointError,
    config_hash,
    file_hash,
    load_checkpoint,
    load_config,
    load_embeddings,
    save_checkpoint,
    save_embeddings,
)
from .features import SAMPLE_RATE, AudioFormatError, InputTooShortError, MelConfig, frame_count
from .model import Model, NumericError, cost_table
from .ops import ShapeError
from .pipeline import embed_batch, load_segment
from .scoring import (
    TOP_K,
    DegenerateCohortError,
    DegenerateEmbeddingError,
    InsufficientCohortError,
    TrialFormatError,
    UndefinedMetricError,
    cosine_score,
    evaluate,
    read_scores,
    read_trials,
    snorm_scores,
    write_scores,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

DATA_ERRORS = (
    OSError,
    CheckpointError,
    ConfigError,
    ShapeError,
    AudioFormatError,
    InputTooShortError,
    TrialFormatError,
    UndefinedMetricError,
    InsufficientCohortError,
    DegenerateCohortError,
    tomli.TOMLDecodeError,
    KeyError,
    TypeError,
)
NUMERIC_ERRORS = (NumericError, DegenerateEmbeddingError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def read_wav_list(path):
    """``UTT_ID PATH`` per line (or bare ``PATH``; id = file stem).

    Relative paths are resolved against the list file's directory.
    """
    base = Path(path).parent
    items = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) == 1:
                utt, wav = Path(parts[0]).stem, parts[0]
            elif len(parts) == 2:
                utt, wav = parts
            else:
                raise TrialFormatError(f"{path}:{lineno}: expected 'UTT_ID PATH' or 'PATH'")
            items.append((utt, base / wav))
    ids = [u for u, _ in items]
    if len(set(ids)) != len(ids):
        raise TrialFormatError(f"{path}: duplicate utterance ids")
    return items


def _print_costs(rows, column):
    width = max(len(r.name) for r in rows)
    print(f"{'layer':<{width}}  {'kind':<9}  {column:>14}")
    for r in rows:
        print(f"{r.name:<{width}}  {r.kind:<9}  {getattr(r, column):>14,d}")


def cmd_init_random(args):
    config = load_config(args.config)
    model = Model.random(config, seed=args.seed)
    save_checkpoint(model, args.out, meta={"seed": args.seed})
    print(f"wrote {args.out}: {model.num_elements():,d} parameters")


def cmd_embed(args):
    model, meta = load_checkpoint(args.ckpt, with_meta=True)
    items = read_wav_list(args.wav_list)
    signals = [load_segment(p, args.offset_sec, args.dur_sec) for _, p in items]
    t0 = time.perf_counter()
    embs = embed_batch(model, signals, workers=args.workers)
    per_segment = (time.perf_counter() - t0) / max(len(signals), 1)
    save_embeddings(
        args.out,
        dict(zip((u for u, _ in items), embs)),
        model.config,
        meta={"checkpoint_sha256": file_hash(args.ckpt)},
    )
    manifest = {
        "tool_version": __version__,
        "config_hash": config_hash(model.config),
        "checkpoint_hash": file_hash(args.ckpt),
        "feature_config": vars(MelConfig()),
        "seed": meta.get("seed"),
        "offset_sec": args.offset_sec,
        "dur_sec": args.dur_sec,
        "n_utterances": len(items),
        "workers": args.workers,
        "seconds_per_segment": per_segment,
    }
    with open(f"{args.out}.manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, default=str)
    print(f"wrote {len(embs)} embeddings to {args.out}")
    print(f"wall-clock per segment: {per_segment * 1000:.1f} ms", file=sys.stderr)


def cmd_score(args):
    emb = load_embeddings(args.emb)
    rows = []
    for t in read_trials(args.trials):
        rows.append((t.enroll_id, t.test_id, cosine_score(emb[t.enroll_id], emb[t.test_id])))
    write_scores(args.out, rows)
    print(f"wrote {len(rows)} scores to {args.out}")


def cmd_snorm(args):
    emb = load_embeddings(args.emb)
    cohort = np.stack(list(load_embeddings(args.cohort_emb).values()))
    rows = snorm_scores(read_scores(args.scores), emb, cohort, args.top_k)
    write_scores(args.out, rows)
    print(f"wrote {len(rows)} normalized scores to {args.out}")


def cmd_eval(args):
    table = {(e, t): s for e, t, s in read_scores(args.scores)}
    scores, labels = [], []
    for t in read_trials(args.trials):
        key = (t.enroll_id, t.test_id)
        if key not in table:
            raise KeyError(f"no score for trial {t.enroll_id} {t.test_id}")
        scores.append(table[key])
        labels.append(t.label)
    print(evaluate(np.array(scores), np.array(labels), args.p_target).summary())


def cmd_params(args):
    config = load_config(args.config)
    rows = cost_table(config, 1)
    _print_costs(rows, "params")
    total = sum(r.params for r in rows)
    print(f"total params: {total:,d} ({total / 1e6:.2f}M)")


def cmd_macs(args):
    config = load_config(args.config)
    frames = frame_count(int(round(args.seconds * SAMPLE_RATE)))
    rows = cost_table(config, frames)
    _print_costs(rows, "macs")
    total = sum(r.macs for r in rows)
    print(f"total MACs at {frames} frames ({args.seconds:g} s): {total:,d} ({total / 1e9:.3f}G)")


def build_parser():
    p = _Parser(prog="nexttdnn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("init-random", help="write a seeded random checkpoint")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_init_random)

    s = sub.add_parser("embed", help="embed a list of WAV files")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--wav-list", required=True)
    s.add_argument("--offset-sec", type=float, default=0.0)
    s.add_argument("--dur-sec", type=float, default=None)
    s.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("score", help="cosine-score a trial list")
    s.add_argument("--emb", required=True)
    s.add_argument("--trials", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("snorm", help="adaptive s-norm against an imposter cohort")
    s.add_argument("--scores", required=True)
    s.add_argument("--emb", required=True, help="embeddings of the trial utterances")
    s.add_argument("--cohort-emb", required=True)
    s.add_argument("--top-k", type=int, default=TOP_K)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_snorm)

    s = sub.add_parser("eval", help="EER and minDCF of a score file")
    s.add_argument("--scores", required=True)
    s.add_argument("--trials", required=True)
    s.add_argument("--p-target", type=float, default=0.01)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("params", help="parameter count with per-layer breakdown")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_params)

    s = sub.add_parser("macs", help="multiply-accumulate count with per-layer breakdown")
    s.add_argument("--config", required=True)
    s.add_argument("--seconds", type=float, default=3.0)
    s.set_defaults(func=cmd_macs)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand; see --help")
        if getattr(args, "workers", 1) < 1:
            raise UsageError("--workers must be >= 1")
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    try:
        args.func(args)
    except NUMERIC_ERRORS as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except DATA_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
