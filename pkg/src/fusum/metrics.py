"""Recall-oriented n-gram metrics and classification scores.

ROUGE here is the plain recall variant: lowercase exact token match, no
stemming, no stopword removal, candidate truncated to a word limit before
counting. Matching is clipped multiset intersection.
"""

from __future__ import annotations

from collections import Counter

from .errors import ValidationError


def _normalize(tokens: list[str]) -> list[str]:
    return [t.lower() for t in tokens]


def _truncate(tokens: list[str], limit: int) -> list[str]:
    # limit 0 disables truncation
    return tokens if limit == 0 else tokens[:limit]


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _clipped_overlap(candidate: Counter, reference: Counter) -> int:
    return sum(min(c, reference[g]) for g, c in candidate.items() if g in reference)


def rouge_n(candidate: list[str], reference: list[str], n: int,
            limit: int = 300) -> float:
    """N-gram recall of the candidate against one reference."""
    if n < 1:
        raise ValidationError("n-gram order must be >= 1")
    if limit < 0:
        raise ValidationError("word limit must be >= 0")
    if not reference:
        raise ValidationError("reference must be non-empty")
    cand = _truncate(_normalize(candidate), limit)
    ref = _normalize(reference)
    ref_grams = _ngrams(ref, n)
    denom = sum(ref_grams.values())
    if denom == 0:
        return 0.0
    return _clipped_overlap(_ngrams(cand, n), ref_grams) / denom


def _skip_units(tokens: list[str], max_skip: int) -> Counter:
    """Skip-bigrams with the pair at most max_skip positions apart, plus unigrams."""
    units: Counter = Counter()
    for i, w in enumerate(tokens):
        units[(w,)] += 1
        for j in range(i + 1, min(i + max_skip + 1, len(tokens))):
            units[(w, tokens[j])] += 1
    return units


def rouge_su4(candidate: list[str], reference: list[str],
              limit: int = 300, max_skip: int = 4) -> float:
    """Skip-bigram plus unigram recall; pairs at most max_skip words apart."""
    if limit < 0:
        raise ValidationError("word limit must be >= 0")
    if max_skip < 1:
        raise ValidationError("max_skip must be >= 1")
    if not reference:
        raise ValidationError("reference must be non-empty")
    cand = _truncate(_normalize(candidate), limit)
    ref = _normalize(reference)
    ref_units = _skip_units(ref, max_skip)
    denom = sum(ref_units.values())
    if denom == 0:
        return 0.0
    return _clipped_overlap(_skip_units(cand, max_skip), ref_units) / denom


def classifier_prf(y_true: list[int], y_pred: list[int]) -> dict:
    """Per-class precision/recall/F1 plus support-weighted averages.

    Classes are 0 (negative) and 1 (positive). Empty denominators yield 0.
    """
    if len(y_true) != len(y_pred):
        raise ValidationError("label sequences differ in length")
    if not y_true:
        raise ValidationError("no labels to score")
    per_class = {}
    weighted = {"precision": 0.0, "recall": 0.0, "f_measure": 0.0}
    n = len(y_true)
    for cls in (0, 1):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p == cls)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != cls and p == cls)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p != cls)
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / support if support else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall else 0.0)
        per_class[cls] = {
            "precision": precision, "recall": recall,
            "f_measure": f1, "support": support,
        }
        for key, value in (("precision", precision), ("recall", recall),
                           ("f_measure", f1)):
            weighted[key] += value * support / n
    return {
        "precision": weighted["precision"],
        "recall": weighted["recall"],
        "f_measure": weighted["f_measure"],
        "classes": per_class,
    }
