"""Corpus and per-pair lexical metrics: BLEU-2/4, ROUGE-1/2/L, METEOR,
normalized Levenshtein similarity (average and threshold fractions), and the
action-type sequence similarity Seq-O. All scores live in [0, 100].
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .grammar import Procedure, ProcedureSyntaxError, parse_procedure
from .schema import DEFAULT_SCHEMA, SchemaConfig
from .stemming import porter_stem

log = logging.getLogger(__name__)

BLEU_EPS = 1e-9
DEFAULT_LEV_THRESHOLDS = (90, 75, 50)

_TOKEN_RE = re.compile(r"[a-z0-9]+|[^\sa-z0-9]")


class EmptyCorpusError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace and punctuation; punctuation marks are
    kept as single-character tokens."""
    return _TOKEN_RE.findall(text.lower())


# --- BLEU ---------------------------------------------------------------------


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_matches(pred: Sequence[str], ref: Sequence[str], n: int) -> tuple[int, int]:
    pred_counts = _ngram_counts(pred, n)
    ref_counts = _ngram_counts(ref, n)
    matches = sum(min(c, ref_counts[g]) for g, c in pred_counts.items())
    total = max(0, len(pred) - n + 1)
    return matches, total


def _bleu_from_stats(matches: list[int], totals: list[int], pred_len: int, ref_len: int) -> float:
    if pred_len == 0:
        return 0.0
    log_sum = 0.0
    for m, t in zip(matches, totals):
        p = m / t if t > 0 and m > 0 else BLEU_EPS
        log_sum += math.log(p)
    geo = math.exp(log_sum / len(matches))
    bp = 1.0 if pred_len >= ref_len else math.exp(1.0 - ref_len / pred_len)
    return 100.0 * bp * geo


def bleu(pred_tokens: Sequence[str], ref_tokens: Sequence[str], max_n: int = 4) -> float:
    """Sentence BLEU: geometric mean of modified n-gram precisions up to
    ``max_n`` with brevity penalty; zero counts are floored at 1e-9."""
    if not pred_tokens or not ref_tokens:
        log.warning("bleu: empty input, returning 0")
        return 0.0
    matches, totals = [], []
    for n in range(1, max_n + 1):
        m, t = _clipped_matches(pred_tokens, ref_tokens, n)
        matches.append(m)
        totals.append(t)
    return _bleu_from_stats(matches, totals, len(pred_tokens), len(ref_tokens))


# --- ROUGE --------------------------------------------------------------------


@dataclass(frozen=True)
class PRF:
    recall: float
    precision: float
    f1: float


def _prf(overlap: float, ref_total: float, pred_total: float) -> PRF:
    r = 100.0 * overlap / ref_total if ref_total else 0.0
    p = 100.0 * overlap / pred_total if pred_total else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return PRF(recall=r, precision=p, f1=f)


def _lcs_len(a: Sequence, b: Sequence) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge(pred_tokens: Sequence[str], ref_tokens: Sequence[str], variant: str = "1") -> PRF:
    """ROUGE-1/2 n-gram overlap or ROUGE-L (longest common subsequence);
    returns recall, precision, and F1, each in [0, 100]."""
    if not pred_tokens or not ref_tokens:
        return PRF(0.0, 0.0, 0.0)
    if variant == "L":
        lcs = _lcs_len(pred_tokens, ref_tokens)
        return _prf(lcs, len(ref_tokens), len(pred_tokens))
    n = int(variant)
    pred_counts = _ngram_counts(pred_tokens, n)
    ref_counts = _ngram_counts(ref_tokens, n)
    overlap = sum(min(c, pred_counts[g]) for g, c in ref_counts.items())
    return _prf(overlap, sum(ref_counts.values()), sum(pred_counts.values()))


# --- METEOR -------------------------------------------------------------------


def _align_stage(pred: Sequence[str], ref: Sequence[str], pred_free, ref_free, key) -> list[tuple[int, int]]:
    pairs = []
    for i in sorted(pred_free):
        ki = key(pred[i])
        for j in sorted(ref_free):
            if key(ref[j]) == ki:
                pairs.append((i, j))
                pred_free.discard(i)
                ref_free.discard(j)
                break
    return pairs


def meteor(pred_tokens: Sequence[str], ref_tokens: Sequence[str]) -> float:
    """Unigram alignment score with exact then stem matching stages and a
    fragmentation penalty (zero for a single contiguous chunk). The synonym
    stage of the reference implementation is omitted.
    """
    if not pred_tokens or not ref_tokens:
        return 0.0
    pred_free = set(range(len(pred_tokens)))
    ref_free = set(range(len(ref_tokens)))
    pairs = _align_stage(pred_tokens, ref_tokens, pred_free, ref_free, lambda w: w)
    pairs += _align_stage(pred_tokens, ref_tokens, pred_free, ref_free, porter_stem)
    m = len(pairs)
    if m == 0:
        return 0.0
    precision = m / len(pred_tokens)
    recall = m / len(ref_tokens)
    f_mean = 10.0 * precision * recall / (recall + 9.0 * precision)
    pairs.sort()
    chunks = 1
    for (pi, ri), (pj, rj) in zip(pairs, pairs[1:]):
        if pj != pi + 1 or rj != ri + 1:
            chunks += 1
    penalty = 0.0 if chunks <= 1 else 0.5 * (chunks / m) ** 3
    return 100.0 * f_mean * (1.0 - penalty)


# --- Levenshtein ----------------------------------------------------------------


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance over arbitrary sequences (two-row DP)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cost = 0 if x == y else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def lev_similarity(pred: str, ref: str) -> float:
    """1 - editdistance / max length, character-level; both empty -> 1."""
    if not pred and not ref:
        return 1.0
    return 1.0 - edit_distance(pred, ref) / max(len(pred), len(ref))


def lev_threshold_fraction(sims: Sequence[float], x: float) -> float:
    """Percent of similarity scores at or above x percent."""
    if not sims:
        raise EmptyCorpusError("no similarity scores")
    return 100.0 * sum(1 for s in sims if s >= x / 100.0) / len(sims)


# --- Seq-O ----------------------------------------------------------------------


def seq_o(pred_proc: Procedure, ref_proc: Procedure) -> float:
    """Normalized edit similarity over the ordered action-type sequences;
    parameter values play no part."""
    pred_types = [a.action_type.value for a in pred_proc.actions]
    ref_types = [a.action_type.value for a in ref_proc.actions]
    if not pred_types and not ref_types:
        return 100.0
    if not pred_types or not ref_types:
        return 0.0
    return 100.0 * (1.0 - edit_distance(pred_types, ref_types) / max(len(pred_types), len(ref_types)))


def seq_o_text(ref_text: str, pred_text: str, config: SchemaConfig = DEFAULT_SCHEMA) -> float:
    """Seq-O over raw texts; an unparseable prediction scores 0."""
    try:
        ref_proc = parse_procedure(ref_text, config)
    except ProcedureSyntaxError:
        return 0.0
    try:
        pred_proc = parse_procedure(pred_text, config)
    except ProcedureSyntaxError:
        return 0.0
    return seq_o(pred_proc, ref_proc)


# --- corpus aggregation -----------------------------------------------------------


@dataclass
class MetricReport:
    bleu2: float
    bleu4: float
    lev_avg: float
    lev_thresholds: dict[int, float]
    rouge1: float
    rouge2: float
    rougeL: float
    meteor: float
    seq_o: float
    n_pairs: int
    rouge_detail: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "bleu2": self.bleu2,
            "bleu4": self.bleu4,
            "lev_avg": self.lev_avg,
            "lev_thresholds": {str(k): v for k, v in self.lev_thresholds.items()},
            "rouge1": self.rouge1,
            "rouge2": self.rouge2,
            "rougeL": self.rougeL,
            "meteor": self.meteor,
            "seq_o": self.seq_o,
            "n_pairs": self.n_pairs,
            "rouge_detail": self.rouge_detail,
        }

    def to_table(self) -> str:
        headers = ["BLEU-2", "BLEU-4", "LEV avg"]
        values = [self.bleu2, self.bleu4, self.lev_avg]
        for x in sorted(self.lev_thresholds, reverse=True):
            headers.append(f"LEV {x}%")
            values.append(self.lev_thresholds[x])
        headers += ["Rouge-1", "Rouge-2", "Rouge-L", "METEOR", "Seq-O"]
        values += [self.rouge1, self.rouge2, self.rougeL, self.meteor, self.seq_o]
        head = "  ".join(f"{h:>8}" for h in headers)
        row = "  ".join(f"{v:8.1f}" for v in values)
        return f"{head}\n{row}"


def evaluate_corpus(
    pairs: Sequence[tuple[str, str]],
    thresholds: Sequence[int] = DEFAULT_LEV_THRESHOLDS,
    config: SchemaConfig = DEFAULT_SCHEMA,
) -> MetricReport:
    """Aggregate all metrics over (reference, prediction) text pairs.

    BLEU is corpus-level (statistics pooled before the geometric mean); ROUGE,
    METEOR, LEV, and Seq-O are means of per-pair scores.
    """
    if not pairs:
        raise EmptyCorpusError("empty corpus")
    n = len(pairs)
    bleu_stats = {2: ([0] * 2, [0] * 2), 4: ([0] * 4, [0] * 4)}
    pred_len_total = 0
    ref_len_total = 0
    rouge_sums = {"1": [0.0, 0.0, 0.0], "2": [0.0, 0.0, 0.0], "L": [0.0, 0.0, 0.0]}
    meteor_sum = 0.0
    sims: list[float] = []
    seq_sum = 0.0
    for ref_text, pred_text in pairs:
        ref_tokens = tokenize(ref_text)
        pred_tokens = tokenize(pred_text)
        pred_len_total += len(pred_tokens)
        ref_len_total += len(ref_tokens)
        for max_n, (matches, totals) in bleu_stats.items():
            for i in range(max_n):
                m, t = _clipped_matches(pred_tokens, ref_tokens, i + 1)
                matches[i] += m
                totals[i] += t
        for variant in ("1", "2", "L"):
            prf = rouge(pred_tokens, ref_tokens, variant)
            sums = rouge_sums[variant]
            sums[0] += prf.recall
            sums[1] += prf.precision
            sums[2] += prf.f1
        meteor_sum += meteor(pred_tokens, ref_tokens)
        sims.append(lev_similarity(pred_text, ref_text))
        seq_sum += seq_o_text(ref_text, pred_text, config)
    rouge_detail = {
        variant: {"recall": sums[0] / n, "precision": sums[1] / n, "f1": sums[2] / n}
        for variant, sums in rouge_sums.items()
    }
    return MetricReport(
        bleu2=_bleu_from_stats(*bleu_stats[2], pred_len_total, ref_len_total),
        bleu4=_bleu_from_stats(*bleu_stats[4], pred_len_total, ref_len_total),
        lev_avg=100.0 * sum(sims) / n,
        lev_thresholds={x: lev_threshold_fraction(sims, x) for x in thresholds},
        rouge1=rouge_detail["1"]["f1"],
        rouge2=rouge_detail["2"]["f1"],
        rougeL=rouge_detail["L"]["f1"],
        meteor=meteor_sum / n,
        seq_o=seq_sum / n,
        n_pairs=n,
        rouge_detail=rouge_detail,
    )
