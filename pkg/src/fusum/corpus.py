"""Transcript data model, interchange formats, and background relation statistics.

A meeting is an ordered list of utterances; each utterance carries its tokens
and a single-head dependency parse produced upstream. Everything here is
immutable so that later stages can share structures freely across threads.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError

# Sentinel governor index for the syntactic head of an utterance.
ROOT = -1

# Penn tag prefixes counted as content words: nouns, adjectives, verbs, adverbs.
CONTENT_POS_PREFIXES = ("NN", "JJ", "VB", "RB")

# Spoken-language fillers, matched on the normalized form.
DEFAULT_FILLERS = frozenset({"um", "uh", "ah", "hmm", "mm-hmm", "uh-huh"})


def is_content_pos(pos: str) -> bool:
    return pos.startswith(CONTENT_POS_PREFIXES)


def is_punct(surface: str, pos: str) -> bool:
    """True for tokens that carry no alphanumeric material (commas, periods...)."""
    return not any(ch.isalnum() for ch in surface)


@dataclass(frozen=True)
class Token:
    """One token of an utterance.

    norm is the lowercased surface and is the unit of identity for graph
    merging and frequency counting; is_content / is_filler are derived at
    construction time and never recomputed downstream.
    """

    index: int
    surface: str
    pos: str
    norm: str
    is_content: bool
    is_filler: bool

    @classmethod
    def make(cls, index: int, surface: str, pos: str,
             fillers: frozenset[str] = DEFAULT_FILLERS) -> "Token":
        norm = surface.lower()
        return cls(
            index=index,
            surface=surface,
            pos=pos,
            norm=norm,
            is_content=is_content_pos(pos),
            is_filler=norm in fillers,
        )


@dataclass(frozen=True)
class DependencyEdge:
    """Directed dependency: gov is a token index or ROOT, dep is a token index."""

    gov: int
    dep: int
    label: str


@dataclass(frozen=True)
class Utterance:
    id: str
    speaker: str
    position: int
    tokens: tuple[Token, ...]
    edges: tuple[DependencyEdge, ...]
    gold_in_summary: bool | None = None

    def head_of(self, index: int) -> DependencyEdge | None:
        for e in self.edges:
            if e.dep == index:
                return e
        return None

    def dependents_of(self, index: int) -> list[DependencyEdge]:
        return [e for e in self.edges if e.gov == index]

    @property
    def root_index(self) -> int:
        for e in self.edges:
            if e.gov == ROOT:
                return e.dep
        raise ValidationError(f"utterance {self.id}: no root edge")


@dataclass(frozen=True)
class Meeting:
    id: str
    utterances: tuple[Utterance, ...]
    gold_abstract: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Segment:
    """Half-open utterance span [start, end) within one meeting."""

    index: int
    start: int
    end: int

    def __len__(self) -> int:
        return self.end - self.start

    def utterances(self, meeting: Meeting) -> tuple[Utterance, ...]:
        return meeting.utterances[self.start:self.end]


def check_partition(segments: list[Segment], n_utterances: int) -> None:
    """Segments must cover [0, n) contiguously, in order, each non-empty."""
    if not segments:
        raise ValidationError("empty segmentation")
    expected = 0
    for i, seg in enumerate(segments):
        if seg.index != i or seg.start != expected or seg.end <= seg.start:
            raise ValidationError(f"segment {i} breaks the partition")
        expected = seg.end
    if expected != n_utterances:
        raise ValidationError("segments do not cover the meeting")


# ---------------------------------------------------------------------------
# Parsing and serialization
# ---------------------------------------------------------------------------

def _validate_utterance(utt: Utterance) -> None:
    n = len(utt.tokens)
    if n == 0:
        raise ValidationError(f"utterance {utt.id}: no tokens")
    seen_dep: set[int] = set()
    root_edges = 0
    for e in utt.edges:
        if not (0 <= e.dep < n):
            raise ValidationError(
                f"utterance {utt.id}: edge dependent index {e.dep} out of range")
        if e.gov != ROOT and not (0 <= e.gov < n):
            raise ValidationError(
                f"utterance {utt.id}: edge governor index {e.gov} out of range")
        if e.gov == e.dep:
            raise ValidationError(f"utterance {utt.id}: self-loop edge at {e.dep}")
        if e.dep in seen_dep:
            raise ValidationError(
                f"utterance {utt.id}: token {e.dep} has more than one head")
        seen_dep.add(e.dep)
        if e.gov == ROOT:
            root_edges += 1
    if len(seen_dep) != n:
        missing = sorted(set(range(n)) - seen_dep)
        raise ValidationError(
            f"utterance {utt.id}: tokens without a head: {missing}")
    if root_edges != 1:
        raise ValidationError(
            f"utterance {utt.id}: expected exactly one root edge, found {root_edges}")


def _validate_meeting(meeting: Meeting) -> None:
    seen_ids: set[str] = set()
    for i, utt in enumerate(meeting.utterances):
        if utt.id in seen_ids:
            raise ValidationError(f"duplicate utterance id {utt.id!r}")
        seen_ids.add(utt.id)
        if utt.position != i:
            raise ValidationError(f"utterance {utt.id}: position {utt.position} != {i}")
        _validate_utterance(utt)


def _utterance_from_dict(obj: dict, position: int,
                         fillers: frozenset[str]) -> Utterance:
    try:
        tokens = tuple(
            Token.make(i, t["surface"], t["pos"], fillers)
            for i, t in enumerate(obj["tokens"])
        )
        edges = tuple(
            DependencyEdge(int(e["gov"]), int(e["dep"]), str(e["label"]))
            for e in obj["edges"]
        )
        return Utterance(
            id=str(obj["id"]),
            speaker=str(obj.get("speaker", "")),
            position=position,
            tokens=tokens,
            edges=edges,
            gold_in_summary=obj.get("gold_in_summary"),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"utterance record {position}: missing or bad field ({exc})")


def meeting_from_dict(obj: dict, fillers: frozenset[str] = DEFAULT_FILLERS) -> Meeting:
    if not isinstance(obj, dict) or "utterances" not in obj:
        raise ParseError("transcript object must contain an 'utterances' list")
    utterances = tuple(
        _utterance_from_dict(u, i, fillers)
        for i, u in enumerate(obj["utterances"])
    )
    gold = obj.get("gold_abstract")
    meeting = Meeting(
        id=str(obj.get("id", "meeting")),
        utterances=utterances,
        gold_abstract=tuple(gold) if gold is not None else None,
    )
    _validate_meeting(meeting)
    return meeting


def meeting_to_dict(meeting: Meeting) -> dict:
    obj: dict = {
        "id": meeting.id,
        "utterances": [
            {
                "id": u.id,
                "speaker": u.speaker,
                "tokens": [{"surface": t.surface, "pos": t.pos} for t in u.tokens],
                "edges": [{"gov": e.gov, "dep": e.dep, "label": e.label}
                          for e in u.edges],
                **({"gold_in_summary": u.gold_in_summary}
                   if u.gold_in_summary is not None else {}),
            }
            for u in meeting.utterances
        ],
    }
    if meeting.gold_abstract is not None:
        obj["gold_abstract"] = list(meeting.gold_abstract)
    return obj


def parse_transcript(text: str, format: str = "json",
                     fillers: frozenset[str] = DEFAULT_FILLERS) -> Meeting:
    """Parse one meeting from a JSON or CoNLL-U style document."""
    if format == "json":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
        return meeting_from_dict(obj, fillers)
    if format == "conllu":
        return _parse_conllu(text, fillers)
    raise ValidationError(f"unknown transcript format {format!r}")


def load_meeting(path: str, format: str | None = None,
                 fillers: frozenset[str] = DEFAULT_FILLERS) -> Meeting:
    if format is None:
        format = "conllu" if str(path).endswith((".conllu", ".conll")) else "json"
    with open(path, "r", encoding="utf-8") as fh:
        return parse_transcript(fh.read(), format, fillers)


def save_meeting(meeting: Meeting, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meeting_to_dict(meeting), fh, indent=2, sort_keys=True)
        fh.write("\n")


# CoNLL-U variant: standard ten columns, one block per utterance. Utterance
# ids come from "# sent_id", speakers from "# speaker", gold extraction labels
# from "# gold_in_summary". The meeting id may be given once as "# newdoc id".

def _parse_conllu(text: str, fillers: frozenset[str]) -> Meeting:
    meeting_id = "meeting"
    gold_abstract: tuple[str, ...] | None = None
    utterances: list[Utterance] = []
    block: list[tuple[int, str]] = []
    comments: dict[str, str] = {}

    def flush(lineno: int) -> None:
        nonlocal block, comments
        if not block:
            comments = {}
            return
        tokens: list[Token] = []
        heads: list[tuple[int, int, str]] = []
        for ln, line in block:
            cols = line.split("\t")
            if len(cols) != 10:
                raise ParseError(f"line {ln}: expected 10 tab-separated columns")
            idx_str, form, _, upos, xpos, _, head_str, deprel = cols[:8]
            if "-" in idx_str or "." in idx_str:
                continue  # multiword/empty rows carry no parse structure
            try:
                idx = int(idx_str) - 1
                head = int(head_str) - 1
            except ValueError:
                raise ParseError(f"line {ln}: non-integer token or head id")
            pos = xpos if xpos not in ("", "_") else upos
            tokens.append(Token.make(idx, form, pos, fillers))
            heads.append((ROOT if head < 0 else head, idx, deprel))
        gold = comments.get("gold_in_summary")
        utt = Utterance(
            id=comments.get("sent_id", f"u{len(utterances)}"),
            speaker=comments.get("speaker", ""),
            position=len(utterances),
            tokens=tuple(tokens),
            edges=tuple(DependencyEdge(g, d, l) for g, d, l in heads),
            gold_in_summary=None if gold is None else gold.strip().lower() == "true",
        )
        utterances.append(utt)
        block = []
        comments = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            flush(lineno)
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                key = key.strip()
                value = value.strip()
                if key == "newdoc id":
                    meeting_id = value
                elif key == "gold_abstract":
                    gold_abstract = tuple(value.split())
                else:
                    comments[key] = value
            continue
        block.append((lineno, line))
    flush(-1)

    meeting = Meeting(meeting_id, tuple(utterances), gold_abstract)
    _validate_meeting(meeting)
    return meeting


def meeting_to_conllu(meeting: Meeting) -> str:
    lines: list[str] = [f"# newdoc id = {meeting.id}"]
    if meeting.gold_abstract is not None:
        lines.append(f"# gold_abstract = {' '.join(meeting.gold_abstract)}")
    for utt in meeting.utterances:
        lines.append(f"# sent_id = {utt.id}")
        lines.append(f"# speaker = {utt.speaker}")
        if utt.gold_in_summary is not None:
            lines.append(f"# gold_in_summary = {str(utt.gold_in_summary).lower()}")
        head = {e.dep: e for e in utt.edges}
        for t in utt.tokens:
            e = head[t.index]
            lines.append("\t".join([
                str(t.index + 1), t.surface, "_", t.pos, t.pos, "_",
                str(e.gov + 1), e.label, "_", "_",
            ]))
        lines.append("")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Background relation statistics
# ---------------------------------------------------------------------------

GovernorKey = tuple[str, str]  # (normalized form, POS tag)


@dataclass(frozen=True)
class RelationStats:
    """Label distributions per governor plus corpus word frequencies.

    label_probs maps (norm, pos) of a governor to {label: probability};
    probabilities for one governor sum to 1. word_freq counts every token
    occurrence in the background corpus and total_tokens is their sum.
    """

    label_probs: dict[GovernorKey, dict[str, float]]
    word_freq: dict[str, int]
    total_tokens: int
    floor_prob: float = 1e-3

    def label_probability(self, gov_norm: str, gov_pos: str, label: str) -> float:
        row = self.label_probs.get((gov_norm, gov_pos))
        if row is None:
            return self.floor_prob  # unseen governor: flat small prior
        return row.get(label, 0.0)

    def frequency(self, norm: str) -> int:
        # Unseen words get frequency 1 so the log ratio stays finite.
        return max(self.word_freq.get(norm, 0), 1)


def build_relation_stats(parsed_docs: list[Meeting],
                         floor_prob: float = 1e-3) -> RelationStats:
    """Count governor/label pairs and token frequencies over parsed documents."""
    if floor_prob <= 0:
        raise ValidationError("floor_prob must be positive")
    counts: dict[GovernorKey, Counter] = {}
    word_freq: Counter = Counter()
    total = 0
    n_edges = 0
    for doc in parsed_docs:
        for utt in doc.utterances:
            for t in utt.tokens:
                word_freq[t.norm] += 1
                total += 1
            for e in utt.edges:
                if e.gov == ROOT:
                    continue  # the root sentinel is not a word
                gov = utt.tokens[e.gov]
                counts.setdefault((gov.norm, gov.pos), Counter())[e.label] += 1
                n_edges += 1
    if n_edges == 0:
        raise ValidationError("background corpus contains no usable edges")
    label_probs = {
        key: {label: c / sum(row.values()) for label, c in sorted(row.items())}
        for key, row in counts.items()
    }
    return RelationStats(label_probs, dict(word_freq), total, floor_prob)


def informativeness(dep_norm: str, segment_tf: dict[str, int],
                    stats: RelationStats) -> float:
    """Segment-weighted corpus rarity of a word: tf * ln(total / corpus freq)."""
    f_s = segment_tf.get(dep_norm, 0)
    if f_s == 0:
        return 0.0
    total = max(stats.total_tokens, 1)
    return f_s * math.log(total / stats.frequency(dep_norm))


def term_frequencies(utterances: list[Utterance]) -> dict[str, int]:
    """Token-level norm counts over a list of utterances."""
    tf: Counter = Counter()
    for utt in utterances:
        for t in utt.tokens:
            tf[t.norm] += 1
    return dict(tf)


def save_stats(stats: RelationStats, path: str) -> None:
    obj = {
        "governors": {
            f"{norm}|{pos}": dict(sorted(row.items()))
            for (norm, pos), row in sorted(stats.label_probs.items())
        },
        "word_freq": dict(sorted(stats.word_freq.items())),
        "total_tokens": stats.total_tokens,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_stats(path: str, floor_prob: float = 1e-3) -> RelationStats:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"malformed stats JSON at line {exc.lineno}: {exc.msg}")
    try:
        label_probs: dict[GovernorKey, dict[str, float]] = {}
        for key, row in obj["governors"].items():
            norm, _, pos = key.rpartition("|")
            label_probs[(norm, pos)] = {l: float(p) for l, p in row.items()}
        return RelationStats(
            label_probs=label_probs,
            word_freq={w: int(c) for w, c in obj["word_freq"].items()},
            total_tokens=int(obj["total_tokens"]),
            floor_prob=floor_prob,
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"stats file missing required structure: {exc}")
