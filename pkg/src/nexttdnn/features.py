"""Log-mel filterbank front end for 16 kHz mono audio."""

import wave
from dataclasses import dataclass

import numpy as np

from .ops import DTYPE

SAMPLE_RATE = 16000
LOG_FLOOR = 1e-6


class InputTooShortError(ValueError):
    pass


class AudioFormatError(ValueError):
    pass


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = 80
    n_fft: int = 512
    win_length: int = 400  # 25 ms
    hop: int = 160  # 10 ms
    f_min: float = 20.0
    f_max: float = 7600.0
    sample_rate: int = SAMPLE_RATE


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_edges(cfg: MelConfig):
    """n_mels + 2 corner frequencies (Hz), equally spaced on the HTK mel scale."""
    return mel_to_hz(np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max), cfg.n_mels + 2))


def mel_center_frequencies(cfg: MelConfig):
    return mel_band_edges(cfg)[1:-1]


def mel_filterbank(cfg: MelConfig):
    """Triangular filters, shape (n_mels, n_fft // 2 + 1), unit peak height."""
    edges = mel_band_edges(cfg)
    freqs = np.arange(cfg.n_fft // 2 + 1) * cfg.sample_rate / cfg.n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def frame_count(n_samples, cfg: MelConfig = MelConfig()):
    if n_samples < cfg.win_length:
        raise InputTooShortError(
            f"need at least {cfg.win_length} samples for one frame, got {n_samples}"
        )
    return (n_samples - cfg.win_length) // cfg.hop + 1


def frame_signal(samples, cfg: MelConfig):
    n = frame_count(len(samples), cfg)
    idx = np.arange(cfg.win_length)[None, :] + cfg.hop * np.arange(n)[:, None]
    return samples[idx]


def power_spectrum(samples, cfg: MelConfig = MelConfig()):
    """Hamming-windowed power spectra, shape (frames, n_fft // 2 + 1)."""
    frames = frame_signal(np.asarray(samples, dtype=np.float64), cfg)
    frames = frames * np.hamming(cfg.win_length)
    return np.abs(np.fft.rfft(frames, n=cfg.n_fft, axis=1)) ** 2


def log_mel(samples, cfg: MelConfig = MelConfig(), sample_rate=SAMPLE_RATE, normalize=True):
    """Log-mel features, shape (n_mels, frames).

    With ``normalize`` each band has its utterance mean removed.
    """
    if sample_rate != cfg.sample_rate:
        raise AudioFormatError(f"sample rate must be {cfg.sample_rate} Hz, got {sample_rate}")
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise AudioFormatError(f"expected mono samples, got shape {samples.shape}")
    mel = mel_filterbank(cfg) @ power_spectrum(samples, cfg).T
    feats = np.log(mel + LOG_FLOOR)
    if normalize:
        feats -= feats.mean(axis=1, keepdims=True)
    return feats.astype(DTYPE)


def read_wav(path):
    """Read a 16 kHz, 16-bit PCM mono WAV as floats in [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate = w.getnchannels(), w.getsampwidth(), w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as e:
        raise AudioFormatError(f"{path}: not a PCM WAV file ({e})") from e
    if channels != 1:
        raise AudioFormatError(f"{path}: expected mono, got {channels} channels")
    if width != 2:
        raise AudioFormatError(f"{path}: expected 16-bit samples, got {8 * width}-bit")
    if rate != SAMPLE_RATE:
        raise AudioFormatError(f"{path}: expected {SAMPLE_RATE} Hz, got {rate} Hz")
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0


def write_wav(path, samples, sample_rate=SAMPLE_RATE):
    pcm = np.clip(np.round(np.asarray(samples) * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(pcm.tobytes())


def crop(samples, offset_sec=0.0, dur_sec=None, sample_rate=SAMPLE_RATE):
    """Explicit segment selection: ``dur_sec`` seconds starting at ``offset_sec``."""
    start = int(round(offset_sec * sample_rate))
    if start < 0 or start > len(samples):
        raise InputTooShortError(f"offset {offset_sec}s is outside the {len(samples)}-sample signal")
    if dur_sec is None:
        return samples[start:]
    n = int(round(dur_sec * sample_rate))
    if start + n > len(samples):
        raise InputTooShortError(
            f"requested {n} samples at offset {start}, signal has {len(samples)}"
        )
    return samples[start:start + n]
