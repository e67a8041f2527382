"""Verification scoring and detection metrics."""

from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np

TOP_K = 300
P_TARGET = 0.01


class DegenerateEmbeddingError(ValueError):
    pass


class DegenerateCohortError(ValueError):
    pass


class InsufficientCohortError(ValueError):
    pass


class UndefinedMetricError(ValueError):
    pass


class TrialFormatError(ValueError):
    pass


class TrialRecord(NamedTuple):
    label: int
    enroll_id: str
    test_id: str


@dataclass
class ScoredTrial:
    trial: TrialRecord
    raw_score: float
    normalized_score: Optional[float] = None


@dataclass
class EvalReport:
    eer: float
    eer_threshold: float
    min_dcf: float
    dcf_threshold: float
    n_target: int
    n_nontarget: int

    def summary(self):
        return (
            f"EER: {100 * self.eer:.4f}%  (threshold {self.eer_threshold:.6f})\n"
            f"minDCF(p_target={P_TARGET}): {self.min_dcf:.4f}  (threshold {self.dcf_threshold:.6f})\n"
            f"trials: {self.n_target} target / {self.n_nontarget} nontarget"
        )


# ---------------------------------------------------------------------------
# scores


def cosine_score(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DegenerateEmbeddingError("cosine score of a zero-norm embedding")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def unit_rows(emb):
    emb = np.asarray(emb, dtype=np.float64)
    norms = np.linalg.norm(emb, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise DegenerateEmbeddingError("zero-norm embedding")
    return emb / norms


def top_k_stats(cohort_scores, top_k=TOP_K):
    """Mean and population std of the ``top_k`` largest cohort scores."""
    cohort_scores = np.asarray(cohort_scores, dtype=np.float64)
    if cohort_scores.shape[-1] < top_k:
        raise InsufficientCohortError(
            f"cohort has {cohort_scores.shape[-1]} scores, top_k={top_k}"
        )
    if top_k < 1:
        raise InsufficientCohortError("top_k must be >= 1")
    top = -np.sort(-cohort_scores, axis=-1)[..., :top_k]
    mu, sigma = top.mean(axis=-1), top.std(axis=-1)
    if np.any(sigma == 0):
        raise DegenerateCohortError("top-k cohort scores have zero spread")
    return mu, sigma


def adaptive_snorm(raw, enroll_cohort, test_cohort, top_k=TOP_K):
    """Symmetric adaptive s-norm from both sides' top-k imposter statistics."""
    mu_e, sd_e = top_k_stats(enroll_cohort, top_k)
    mu_t, sd_t = top_k_stats(test_cohort, top_k)
    return float(0.5 * ((raw - mu_e) / sd_e + (raw - mu_t) / sd_t))


def snorm_scores(rows, embeddings, cohort, top_k=TOP_K):
    """Apply adaptive s-norm to ``(enroll, test, raw)`` rows.

    ``embeddings`` maps utterance ids to vectors; ``cohort`` is an
    (n_cohort, dim) array of imposter embeddings. Per-utterance top-k
    statistics are computed once and shared across trials.
    """
    cohort_unit = unit_rows(cohort)
    stats = {}

    def side(utt):
        if utt not in stats:
            if utt not in embeddings:
                raise KeyError(f"no embedding for utterance {utt!r}")
            stats[utt] = top_k_stats(cohort_unit @ unit_rows(embeddings[utt]), top_k)
        return stats[utt]

    out = []
    for enroll, test, raw in rows:
        mu_e, sd_e = side(enroll)
        mu_t, sd_t = side(test)
        out.append((enroll, test, float(0.5 * ((raw - mu_e) / sd_e + (raw - mu_t) / sd_t))))
    return out


# ---------------------------------------------------------------------------
# metrics


def _split(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D and equal length")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    tar, non = scores[labels == 1], scores[labels == 0]
    if tar.size == 0 or non.size == 0:
        raise UndefinedMetricError("need at least one target and one nontarget trial")
    return np.sort(tar), np.sort(non)


def sweep_thresholds(scores):
    """-inf, midpoints between adjacent unique scores, +inf."""
    u = np.unique(np.asarray(scores, dtype=np.float64))
    return np.concatenate([[-np.inf], (u[:-1] + u[1:]) / 2, [np.inf]])


def error_rates(scores, labels, thresholds):
    """Miss rate (targets below threshold) and false-alarm rate (nontargets at or above)."""
    tar, non = _split(scores, labels)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    p_miss = np.searchsorted(tar, thresholds, side="left") / tar.size
    p_fa = 1.0 - np.searchsorted(non, thresholds, side="left") / non.size
    return p_miss, p_fa


def compute_eer(scores, labels):
    """Equal error rate and its threshold.

    The crossing of miss and false-alarm rates is linearly interpolated
    between the two bracketing sweep points.
    """
    thr = sweep_thresholds(scores)
    p_miss, p_fa = error_rates(scores, labels, thr)
    diff = p_miss - p_fa  # nondecreasing in threshold
    i = int(np.argmax(diff >= 0))
    if diff[i] == 0 or i == 0:
        return float(p_miss[i]), float(thr[i])
    d0, d1 = diff[i - 1], diff[i]
    lam = -d0 / (d1 - d0)
    eer = p_miss[i - 1] + lam * (p_miss[i] - p_miss[i - 1])
    j = i - 1 if -d0 <= d1 else i
    return float(eer), float(thr[j])


def dcf_normalizer(p_target=P_TARGET, c_fa=1.0, c_miss=1.0):
    return min(c_miss * p_target, c_fa * (1.0 - p_target))


def dcf_at(scores, labels, thresholds, p_target=P_TARGET, c_fa=1.0, c_miss=1.0):
    """Normalized detection cost at the given threshold(s)."""
    p_miss, p_fa = error_rates(scores, labels, np.atleast_1d(thresholds))
    cost = c_miss * p_target * p_miss + c_fa * (1.0 - p_target) * p_fa
    return cost / dcf_normalizer(p_target, c_fa, c_miss)


def compute_mindcf(scores, labels, p_target=P_TARGET, c_fa=1.0, c_miss=1.0):
    thr = sweep_thresholds(scores)
    dcf = dcf_at(scores, labels, thr, p_target, c_fa, c_miss)
    i = int(np.argmin(dcf))  # first minimum = smallest threshold
    return float(dcf[i]), float(thr[i])


def evaluate(scores, labels, p_target=P_TARGET):
    eer, eer_thr = compute_eer(scores, labels)
    min_dcf, dcf_thr = compute_mindcf(scores, labels, p_target)
    labels = np.asarray(labels)
    return EvalReport(eer, eer_thr, min_dcf, dcf_thr, int((labels == 1).sum()), int((labels == 0).sum()))


# ---------------------------------------------------------------------------
# text formats


def read_trials(path) -> List[TrialRecord]:
    """Trial list: ``LABEL ENROLL_ID TEST_ID`` per line, LABEL in {0, 1}."""
    trials = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3 or parts[0] not in ("0", "1"):
                raise TrialFormatError(f"{path}:{lineno}: expected 'LABEL ENROLL_ID TEST_ID'")
            trials.append(TrialRecord(int(parts[0]), parts[1], parts[2]))
    return trials


def write_trials(path, trials):
    with open(path, "w", encoding="utf-8") as f:
        for t in trials:
            f.write(f"{t.label} {t.enroll_id} {t.test_id}\n")


def read_scores(path):
    """Score file: ``ENROLL_ID TEST_ID SCORE`` per line -> list of (enroll, test, score)."""
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.split()
            try:
                if len(parts) != 3:
                    raise ValueError
                rows.append((parts[0], parts[1], float(parts[2])))
            except ValueError:
                raise TrialFormatError(f"{path}:{lineno}: expected 'ENROLL_ID TEST_ID SCORE'") from None
    return rows


def write_scores(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for enroll, test, score in rows:
            f.write(f"{enroll} {test} {score:.6f}\n")
