"""End-to-end summarization: segment, pick utterances, fuse, realize.

MeetingSummarizer wires the stages together behind a fit/summarize surface.
fit trains the utterance picker from labeled meetings; summarize runs the
whole chain on one meeting and returns one fused sentence per topic segment,
with a machine-readable trace of what happened in between.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .classifiers import make_classifier
from .corpus import (
    DEFAULT_FILLERS,
    Meeting,
    RelationStats,
    Segment,
    Utterance,
    build_relation_stats,
    term_frequencies,
)
from .errors import ConfigError, ValidationError
from .features import extract_features, feature_matrix
from .fusion import build_fusion_graph, resolve_pronouns, strip_fillers
from .ilp import build_instance, solve_exact
from .linearize import linearize, render
from .metrics import rouge_n, rouge_su4
from .sampling import rebalance
from .segmentation import BayesianSegmenter, LexicalCohesionSegmenter
from .wordgraph import best_path, build_word_graph

FUSION_ALGOS = ("ilp", "msc")
EXTRACTION_MODES = ("model", "gold", "all")


@dataclass(frozen=True)
class SegmentTrace:
    """What one segment contributed to the summary."""

    segment: Segment
    extraction: str  # which rung picked the utterances: model | gold | all
    utterance_ids: tuple[str, ...]
    used_fallback: bool  # no positive in the segment, kept one anyway
    sentence: str
    words: tuple[str, ...]
    objective: float | None = None
    optimal: bool | None = None
    path_cost: float | None = None
    below_requirements: bool = False  # msc path missed length/verb rules

    def to_json(self) -> dict:
        out = {
            "segment": {"index": self.segment.index,
                        "start": self.segment.start, "end": self.segment.end},
            "extraction": self.extraction,
            "utterance_ids": list(self.utterance_ids),
            "used_fallback": self.used_fallback,
            "sentence": self.sentence,
            "words": list(self.words),
        }
        if self.objective is not None:
            out["objective"] = self.objective
            out["optimal"] = self.optimal
        if self.path_cost is not None:
            out["path_cost"] = self.path_cost
            out["below_requirements"] = self.below_requirements
        return out


@dataclass(frozen=True)
class MeetingSummary:
    meeting_id: str
    sentences: tuple[str, ...]
    traces: tuple[SegmentTrace, ...] = field(repr=False)

    @property
    def text(self) -> str:
        return "\n".join(self.sentences) + "\n"

    def words(self) -> list[str]:
        return [w for t in self.traces for w in t.words]

    def to_json(self) -> dict:
        return {
            "meeting": self.meeting_id,
            "sentences": list(self.sentences),
            "segments": [t.to_json() for t in self.traces],
        }


class MeetingSummarizer(BaseEstimator):
    """Abstractive meeting summarizer, one fused sentence per topic segment.

    n_segments=0 lets the cohesion segmenter place boundaries on its own,
    which keeps short inputs in a single segment. Utterance selection falls
    through a ladder: a fitted model if present, otherwise gold labels if the
    meeting carries them, otherwise every utterance.

    stats supplies the background relation statistics; when None, fit()
    derives them from the training meetings and summarize() falls back to the
    small corpus bundled with the package.
    """

    def __init__(self, *, segmenter: str = "lcseg", n_segments: int = 0,
                 hiatus: int = 11, window: int = 15, alpha: float = 0.2,
                 classifier: str = "rf", sampling: str = "resample",
                 n_trees: int = 100, algo: str = "ilp", gamma_words: int = 20,
                 time_limit: float = 30.0, context_window: int = 2,
                 tf_scope: str = "extracted", resolve: bool = True,
                 fillers: frozenset[str] = DEFAULT_FILLERS,
                 stats: RelationStats | None = None, seed: int = 0):
        self.segmenter = segmenter
        self.n_segments = n_segments
        self.hiatus = hiatus
        self.window = window
        self.alpha = alpha
        self.classifier = classifier
        self.sampling = sampling
        self.n_trees = n_trees
        self.algo = algo
        self.gamma_words = gamma_words
        self.time_limit = time_limit
        self.context_window = context_window
        self.tf_scope = tf_scope
        self.resolve = resolve
        self.fillers = fillers
        self.stats = stats
        self.seed = seed

    # -- configuration -------------------------------------------------------

    def _make_segmenter(self):
        if self.segmenter == "lcseg":
            return LexicalCohesionSegmenter(
                n_segments=self.n_segments, hiatus=self.hiatus,
                window=self.window)
        if self.segmenter == "bayes":
            if self.n_segments < 1:
                raise ConfigError(
                    "the Bayesian segmenter needs an explicit n_segments >= 1")
            return BayesianSegmenter(n_segments=self.n_segments,
                                     alpha=self.alpha)
        raise ConfigError(f"unknown segmenter {self.segmenter!r}")

    def _check_config(self) -> None:
        if self.algo not in FUSION_ALGOS:
            raise ConfigError(f"unknown fusion algorithm {self.algo!r}")
        if self.tf_scope not in ("extracted", "segment"):
            raise ConfigError(f"unknown tf_scope {self.tf_scope!r}")

    def _resolve_stats(self) -> RelationStats:
        if self.stats is not None:
            return self.stats
        if getattr(self, "stats_", None) is not None:
            return self.stats_
        from . import data
        self.stats_ = build_relation_stats([data.load_background_corpus()])
        return self.stats_

    # -- training ------------------------------------------------------------

    def fit(self, meetings: list[Meeting], y=None) -> "MeetingSummarizer":
        """Train the utterance picker on meetings with gold labels."""
        self._check_config()
        meetings = list(meetings)
        if not meetings:
            raise ValidationError("fit needs at least one meeting")
        X, labels = self.training_matrix(meetings)
        Xr, yr, w = rebalance(X, labels, self.sampling, seed=self.seed)
        est = make_classifier(self.classifier, n_trees=self.n_trees,
                              seed=self.seed)
        self.model_ = est.fit(Xr, yr, sample_weight=w)
        if self.stats is None:
            self.stats_ = build_relation_stats(meetings)
        return self

    def training_matrix(self, meetings: list[Meeting]):
        """Feature rows and 0/1 labels for every utterance of every meeting."""
        rows = []
        labels = []
        for meeting in meetings:
            segments = self._make_segmenter().segment(meeting)
            X, ids = feature_matrix(meeting, segments)
            gold = {u.id: u.gold_in_summary for u in meeting.utterances}
            for row, uid in zip(X, ids):
                if gold[uid] is None:
                    raise ValidationError(
                        f"utterance {uid} in meeting {meeting.id} has no label")
                rows.append(row)
                labels.append(int(gold[uid]))
        return np.vstack(rows), np.array(labels, dtype=int)

    # -- selection ------------------------------------------------------------

    def _select(self, meeting: Meeting,
                segment: Segment) -> tuple[list[Utterance], str, bool]:
        """Pick the utterances one segment contributes to the summary."""
        utts = list(segment.utterances(meeting))
        if getattr(self, "model_", None) is not None:
            X, _ = self._segment_features(meeting, segment, utts)
            scores = self.model_.predict_proba(X)[:, 1]
            chosen = [u for u, s in zip(utts, scores) if s >= 0.5]
            if chosen:
                return chosen, "model", False
            top = int(np.argmax(scores))
            return [utts[top]], "model", True
        if all(u.gold_in_summary is not None for u in meeting.utterances):
            chosen = [u for u in utts if u.gold_in_summary]
            if chosen:
                return chosen, "gold", False
            return [utts[-1]], "gold", True
        return utts, "all", False

    def _segment_features(self, meeting: Meeting, segment: Segment,
                          utts: list[Utterance]):
        rows = [extract_features(u, meeting, segment).to_array() for u in utts]
        return np.vstack(rows), [u.id for u in utts]

    # -- summarization ---------------------------------------------------------

    def summarize(self, meeting: Meeting) -> MeetingSummary:
        """Run the full chain on one meeting."""
        self._check_config()
        stats = self._resolve_stats() if self.algo == "ilp" else None
        segments = self._make_segmenter().segment(meeting)
        traces = []
        for segment in segments:
            group, mode, fell_back = self._select(meeting, segment)
            if self.algo == "ilp":
                trace = self._fuse_ilp(meeting, segment, group, mode,
                                       fell_back, stats)
            else:
                trace = self._fuse_msc(segment, group, mode, fell_back)
            traces.append(trace)
        return MeetingSummary(
            meeting_id=meeting.id,
            sentences=tuple(t.sentence for t in traces),
            traces=tuple(traces),
        )

    def _fuse_ilp(self, meeting: Meeting, segment: Segment,
                  group: list[Utterance], mode: str, fell_back: bool,
                  stats: RelationStats) -> SegmentTrace:
        graph = build_fusion_graph(group, fillers=self.fillers,
                                   resolve=self.resolve,
                                   context_window=self.context_window)
        if self.tf_scope == "extracted":
            tf = term_frequencies(graph.sources)
        else:
            cleaned = []
            for u in resolve_pronouns(list(segment.utterances(meeting))):
                stripped = strip_fillers(u, self.fillers)
                if stripped is not None:
                    cleaned.append(stripped)
            tf = term_frequencies(cleaned)
        inst = build_instance(graph, stats, tf, gamma_words=self.gamma_words)
        solution = solve_exact(inst, time_limit=self.time_limit)
        order = linearize(graph, solution.edge_ids)
        words = tuple(graph.node(v).surface for v in order)
        return SegmentTrace(
            segment=segment, extraction=mode,
            utterance_ids=tuple(u.id for u in group),
            used_fallback=fell_back, sentence=render(list(words)),
            words=words, objective=solution.objective,
            optimal=solution.optimal,
        )

    def _fuse_msc(self, segment: Segment, group: list[Utterance], mode: str,
                  fell_back: bool) -> SegmentTrace:
        cleaned = []
        for u in group:
            stripped = strip_fillers(u, self.fillers)
            if stripped is not None:
                cleaned.append(stripped)
        if not cleaned:
            raise ValidationError(
                f"no utterance of segment {segment.index} survived cleanup")
        wg = build_word_graph(cleaned, context_window=self.context_window)
        result = best_path(wg)
        return SegmentTrace(
            segment=segment, extraction=mode,
            utterance_ids=tuple(u.id for u in group),
            used_fallback=fell_back, sentence=render(list(result.words)),
            words=result.words, path_cost=result.cost,
            below_requirements=result.fallback,
        )

    # -- sklearn-flavored conveniences -----------------------------------------

    def predict(self, meetings: list[Meeting]) -> list[str]:
        return [self.summarize(m).text for m in meetings]

    def evaluate(self, meetings: list[Meeting], *, limit: int = 300) -> dict:
        """Summarize and score against gold abstracts where present."""
        per_meeting: dict[str, dict[str, float]] = {}
        for meeting in meetings:
            if not meeting.gold_abstract:
                continue
            candidate = self.summarize(meeting).words()
            reference = list(meeting.gold_abstract)
            per_meeting[meeting.id] = {
                "rouge_1": rouge_n(candidate, reference, 1, limit=limit),
                "rouge_2": rouge_n(candidate, reference, 2, limit=limit),
                "rouge_su4": rouge_su4(candidate, reference, limit=limit),
            }
        if not per_meeting:
            raise ValidationError("no meeting carries a gold abstract")
        means = {
            key: sum(row[key] for row in per_meeting.values()) / len(per_meeting)
            for key in ("rouge_1", "rouge_2", "rouge_su4")
        }
        return {"limit": limit, "meetings": per_meeting, "means": means}
