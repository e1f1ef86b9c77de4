"""Per-utterance features for the extraction classifier.

Ten features per utterance, computed from the utterance itself, its topic
segment, and the whole meeting. None of them look at gold labels, so feature
extraction is safe to run on unlabeled data.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, fields

import numpy as np

from .corpus import Meeting, Segment, Utterance
from .errors import ValidationError

FEATURE_NAMES = (
    "len_tokens",
    "n_content",
    "frac_content",
    "n_new_nouns",
    "cos_meeting",
    "has_proper_noun",
    "is_top_speaker_meeting",
    "prev_content_words",
    "is_top_speaker_segment",
    "cos_segment",
)

# Columns holding booleans; everything else is numeric.
BINARY_FEATURES = (5, 6, 8)


@dataclass(frozen=True)
class FeatureVector:
    len_tokens: int
    n_content: int
    frac_content: float
    n_new_nouns: int
    cos_meeting: float
    has_proper_noun: bool
    is_top_speaker_meeting: bool
    prev_content_words: int
    is_top_speaker_segment: bool
    cos_segment: float

    def to_array(self) -> np.ndarray:
        return np.array([float(getattr(self, f.name)) for f in fields(self)],
                        dtype=float)


def _content_counts(utt: Utterance) -> Counter:
    return Counter(t.norm for t in utt.tokens if t.is_content)


def _cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    dot = sum(c * b[w] for w, c in a.items() if w in b)
    if dot == 0:
        return 0.0
    na = math.sqrt(sum(c * c for c in a.values()))
    nb = math.sqrt(sum(c * c for c in b.values()))
    return dot / (na * nb)


def _top_speaker(utterances: tuple[Utterance, ...]) -> str:
    """Speaker with the most tokens; ties go to the earliest-appearing speaker."""
    totals: dict[str, int] = {}
    for utt in utterances:
        totals[utt.speaker] = totals.get(utt.speaker, 0) + len(utt.tokens)
    best = None
    best_count = -1
    for utt in utterances:
        s = utt.speaker
        if totals[s] > best_count:
            best, best_count = s, totals[s]
    return best if best is not None else ""


def extract_features(utt: Utterance, meeting: Meeting,
                     segment: Segment) -> FeatureVector:
    if not (segment.start <= utt.position < segment.end):
        raise ValidationError(
            f"utterance {utt.id} at {utt.position} lies outside segment "
            f"[{segment.start}, {segment.end})")

    n_tokens = len(utt.tokens)
    own_content = _content_counts(utt)
    n_content = sum(own_content.values())

    earlier_norms: set[str] = set()
    for prior in meeting.utterances[:utt.position]:
        earlier_norms.update(t.norm for t in prior.tokens)
    new_nouns = {t.norm for t in utt.tokens
                 if t.pos.startswith("NN") and t.norm not in earlier_norms}

    meeting_counts: Counter = Counter()
    for u in meeting.utterances:
        meeting_counts.update(_content_counts(u))
    segment_counts: Counter = Counter()
    for u in segment.utterances(meeting):
        segment_counts.update(_content_counts(u))

    prev = meeting.utterances[utt.position - 1] if utt.position > 0 else None

    return FeatureVector(
        len_tokens=n_tokens,
        n_content=n_content,
        frac_content=n_content / n_tokens if n_tokens else 0.0,
        n_new_nouns=len(new_nouns),
        cos_meeting=_cosine(own_content, meeting_counts),
        has_proper_noun=any(t.pos.startswith("NNP") for t in utt.tokens),
        is_top_speaker_meeting=utt.speaker == _top_speaker(meeting.utterances),
        prev_content_words=sum(_content_counts(prev).values()) if prev else 0,
        is_top_speaker_segment=utt.speaker == _top_speaker(segment.utterances(meeting)),
        cos_segment=_cosine(own_content, segment_counts),
    )


def feature_matrix(meeting: Meeting,
                   segments: list[Segment]) -> tuple[np.ndarray, list[str]]:
    """Feature rows for every utterance, in meeting order, plus utterance ids."""
    by_position: dict[int, Segment] = {}
    for seg in segments:
        for pos in range(seg.start, seg.end):
            by_position[pos] = seg
    rows = []
    ids = []
    for utt in meeting.utterances:
        seg = by_position.get(utt.position)
        if seg is None:
            raise ValidationError(
                f"utterance {utt.id} not covered by any segment")
        rows.append(extract_features(utt, meeting, seg).to_array())
        ids.append(utt.id)
    return np.vstack(rows), ids
