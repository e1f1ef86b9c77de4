"""Abstractive meeting summarization by dependency-graph fusion.

The package turns parsed multi-party meeting transcripts into short abstract
summaries: it segments a meeting by topic, picks summary-worthy utterances
with a trained classifier, merges their dependency parses into one graph,
selects the best subtree with an exact 0/1 solver, and linearizes the result
into a sentence per topic. A word-graph shortest-path baseline, ROUGE scoring,
and small bundled demo data round it out.
"""

from .classifiers import (
    NaiveBayes,
    RandomForest,
    cross_validate,
    load_model,
    make_classifier,
    save_model,
)
from .corpus import (
    DEFAULT_FILLERS,
    ROOT,
    DependencyEdge,
    Meeting,
    RelationStats,
    Segment,
    Token,
    Utterance,
    build_relation_stats,
    informativeness,
    load_meeting,
    load_stats,
    parse_transcript,
    save_meeting,
    save_stats,
    term_frequencies,
)
from .errors import (
    ConfigError,
    FusumError,
    InfeasibleError,
    ParseError,
    SolverTimeout,
    ValidationError,
)
from .features import FEATURE_NAMES, extract_features, feature_matrix
from .fusion import (
    MergedEdge,
    MergedGraph,
    MergedNode,
    build_fusion_graph,
    merge_utterances,
    resolve_pronouns,
    strip_fillers,
)
from .ilp import (
    FusionInstance,
    FusionSolution,
    build_instance,
    edge_coefficient,
    export_lp,
    parse_lp,
    solve_exact,
)
from .linearize import linearize, realize, render
from .metrics import classifier_prf, rouge_n, rouge_su4
from .pipeline import MeetingSummarizer, MeetingSummary, SegmentTrace
from .sampling import SAMPLING_STRATEGIES, rebalance, smote_oversample
from .segmentation import BayesianSegmenter, LexicalCohesionSegmenter
from .wordgraph import CompressionResult, best_path, build_word_graph

__version__ = "0.1.0"

__all__ = [
    "BayesianSegmenter",
    "CompressionResult",
    "ConfigError",
    "DEFAULT_FILLERS",
    "DependencyEdge",
    "FEATURE_NAMES",
    "FusionInstance",
    "FusionSolution",
    "FusumError",
    "InfeasibleError",
    "LexicalCohesionSegmenter",
    "Meeting",
    "MeetingSummarizer",
    "MeetingSummary",
    "MergedEdge",
    "MergedGraph",
    "MergedNode",
    "NaiveBayes",
    "ParseError",
    "RandomForest",
    "RelationStats",
    "ROOT",
    "SAMPLING_STRATEGIES",
    "Segment",
    "SegmentTrace",
    "SolverTimeout",
    "Token",
    "Utterance",
    "ValidationError",
    "best_path",
    "build_fusion_graph",
    "build_instance",
    "build_relation_stats",
    "build_word_graph",
    "classifier_prf",
    "cross_validate",
    "edge_coefficient",
    "export_lp",
    "extract_features",
    "feature_matrix",
    "informativeness",
    "linearize",
    "load_meeting",
    "load_model",
    "load_stats",
    "make_classifier",
    "merge_utterances",
    "parse_lp",
    "parse_transcript",
    "realize",
    "rebalance",
    "render",
    "resolve_pronouns",
    "rouge_n",
    "rouge_su4",
    "save_meeting",
    "save_model",
    "save_stats",
    "smote_oversample",
    "solve_exact",
    "strip_fillers",
    "term_frequencies",
]
