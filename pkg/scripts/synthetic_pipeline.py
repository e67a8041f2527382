"""End-to-end run of the CLI on synthetic "speakers".

Each speaker is a harmonic source with its own pitch and spectral tilt; utterances
add pitch jitter and noise. Weights are random, so the EER only shows that the
plumbing works, not how well the model verifies speakers.

    python scripts/synthetic_pipeline.py --workdir /tmp/nxt --speakers 6
"""

import argparse
import itertools
from pathlib import Path

import numpy as np

from nexttdnn.checkpoint import config_to_toml
from nexttdnn.cli import main as cli
from nexttdnn.features import write_wav
from nexttdnn.model import ModelConfig

SR = 16000


def synth_utterance(rng, f0, tilt, seconds):
    t = np.arange(int(seconds * SR)) / SR
    f = f0 * (1 + 0.02 * rng.normal())
    wave = sum(tilt ** h * np.sin(2 * np.pi * h * f * t + rng.uniform(0, 2 * np.pi)) for h in range(1, 12))
    wave = wave / np.max(np.abs(wave)) * 0.5
    return wave + 0.02 * rng.normal(size=t.size)


def run(*argv):
    rc = cli([str(a) for a in argv])
    if rc != 0:
        raise SystemExit(f"nexttdnn {argv[0]} failed with exit code {rc}")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--workdir", type=Path, default=Path("synthetic_run"))
    ap.add_argument("--speakers", type=int, default=6)
    ap.add_argument("--utts", type=int, default=3, help="utterances per speaker")
    ap.add_argument("--cohort", type=int, default=12, help="cohort utterances")
    ap.add_argument("--channels", type=int, default=64)
    ap.add_argument("--blocks", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    wd = args.workdir
    (wd / "wav").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    cfg = ModelConfig(C=args.channels, B=args.blocks)
    (wd / "model.toml").write_text(config_to_toml(cfg))
    run("init-random", "--config", wd / "model.toml", "--seed", args.seed, "--out", wd / "model.ckpt")

    voices = [(rng.uniform(90, 260), rng.uniform(0.5, 0.9)) for _ in range(args.speakers + args.cohort)]
    eval_lines, cohort_lines, utts = [], [], []
    for s in range(args.speakers):
        for u in range(args.utts):
            uid = f"spk{s}_u{u}"
            write_wav(wd / "wav" / f"{uid}.wav", synth_utterance(rng, *voices[s], 4.0))
            eval_lines.append(f"{uid} wav/{uid}.wav")
            utts.append((s, uid))
    for c in range(args.cohort):
        uid = f"coh{c}"
        write_wav(wd / "wav" / f"{uid}.wav", synth_utterance(rng, *voices[args.speakers + c], 4.0))
        cohort_lines.append(f"{uid} wav/{uid}.wav")
    (wd / "eval.lst").write_text("\n".join(eval_lines) + "\n")
    (wd / "cohort.lst").write_text("\n".join(cohort_lines) + "\n")
    trials = [f"{int(a[0] == b[0])} {a[1]} {b[1]}" for a, b in itertools.combinations(utts, 2)]
    (wd / "trials.txt").write_text("\n".join(trials) + "\n")

    for name in ("eval", "cohort"):
        run("embed", "--ckpt", wd / "model.ckpt", "--wav-list", wd / f"{name}.lst",
            "--dur-sec", 3, "--workers", args.workers, "--out", wd / f"{name}.emb")
    run("score", "--emb", wd / "eval.emb", "--trials", wd / "trials.txt", "--out", wd / "scores.txt")
    run("snorm", "--scores", wd / "scores.txt", "--emb", wd / "eval.emb", "--cohort-emb", wd / "cohort.emb",
        "--top-k", min(args.cohort, 300), "--out", wd / "scores_snorm.txt")
    print("raw cosine:")
    run("eval", "--scores", wd / "scores.txt", "--trials", wd / "trials.txt")
    print("adaptive s-norm:")
    run("eval", "--scores", wd / "scores_snorm.txt", "--trials", wd / "trials.txt")


if __name__ == "__main__":
    main()
