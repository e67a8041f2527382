"""Batch embedding over many utterances with a bounded worker pool."""

import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .features import MelConfig, crop, log_mel, read_wav
from .model import Model, embed


def embed_samples(samples, model: Model, mel_cfg: MelConfig = MelConfig()):
    return embed(log_mel(samples, mel_cfg), model)


def embed_batch(model: Model, signals, workers=None, mel_cfg: MelConfig = MelConfig()):
    """Embed each 1-D signal; results keep input order whatever the pool size."""
    workers = workers or os.cpu_count() or 1
    if workers == 1:
        return [embed_samples(s, model, mel_cfg) for s in signals]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: embed_samples(s, model, mel_cfg), signals))


def load_segment(path, offset_sec=0.0, dur_sec=None):
    return crop(read_wav(path), offset_sec, dur_sec)


def time_per_segment(model: Model, samples, repeats=3, mel_cfg: MelConfig = MelConfig()):
    """Wall-clock seconds for one features+embedding pass (best of ``repeats``)."""
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        embed_samples(samples, model, mel_cfg)
        best = min(best, time.perf_counter() - t0)
    return best
