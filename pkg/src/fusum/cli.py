"""Command line entry points: stats, segment, train, extract, fuse, summarize, eval.

Every subcommand reads optional defaults from a JSON config file given with
--config; explicit flags win over config values, which win over the built-in
defaults. Exit codes: 0 success, 2 bad configuration or usage, 3 bad or
inconsistent data, 4 solver timeout with no incumbent solution.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .classifiers import cross_validate, load_model, make_classifier, save_model
from .corpus import (
    build_relation_stats,
    load_meeting,
    load_stats,
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
from .features import feature_matrix
from .fusion import build_fusion_graph, strip_fillers
from .ilp import build_instance, export_lp, solve_exact
from .linearize import linearize, render
from .metrics import rouge_n, rouge_su4
from .pipeline import MeetingSummarizer
from .sampling import SAMPLING_STRATEGIES, rebalance
from .segmentation import BayesianSegmenter, LexicalCohesionSegmenter
from .wordgraph import best_path, build_word_graph

DEFAULTS = {
    "algo": "ilp",
    "segmenter": "lcseg",
    "k": 0,
    "hiatus": 11,
    "window": 15,
    "alpha": 0.2,
    "classifier": "rf",
    "sampling": "resample",
    "folds": 10,
    "n_trees": 100,
    "seed": 0,
    "gamma_words": 20,
    "time_limit": 30.0,
    "floor_prob": 1e-3,
    "limit": 300,
    "jobs": 1,
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config JSON at line {exc.lineno}: {exc.msg}")
    if not isinstance(obj, dict):
        raise ConfigError("config file must hold a JSON object")
    return obj


class _Options:
    """Flag value > config file value > built-in default."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self._args = args
        self._config = config

    def get(self, name: str, default=None):
        value = getattr(self._args, name, None)
        if value is not None:
            return value
        if name in self._config:
            return self._config[name]
        if default is not None:
            return default
        return DEFAULTS.get(name)

    def flag(self, name: str) -> bool:
        return bool(getattr(self._args, name, False) or self._config.get(name))


def _require_file(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


def _load_meeting_file(path: str):
    return load_meeting(_require_file(path, "meeting file"))


def _resolve_stats(opts: _Options):
    path = opts.get("stats")
    if path is None:
        from . import data

        return data.default_stats(float(opts.get("floor_prob")))
    _require_file(path, "stats file")
    return load_stats(path, floor_prob=float(opts.get("floor_prob")))


def _build_segmenter(opts: _Options):
    algo = opts.get("segmenter")
    k = int(opts.get("k"))
    if algo == "lcseg":
        return LexicalCohesionSegmenter(
            n_segments=k, hiatus=int(opts.get("hiatus")),
            window=int(opts.get("window")))
    if algo == "bayes":
        if k < 1:
            raise ConfigError("the Bayesian segmenter needs --k >= 1")
        return BayesianSegmenter(n_segments=k, alpha=float(opts.get("alpha")))
    raise ConfigError(f"unknown segmenter {algo!r}")


def _emit(payload, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- subcommands ---------------------------------------------------------------


def cmd_stats(opts: _Options) -> int:
    docs = [_load_meeting_file(p) for p in opts.get("corpus")]
    stats = build_relation_stats(docs, floor_prob=float(opts.get("floor_prob")))
    save_stats(stats, opts.get("out"))
    _emit({"governors": len(stats.label_probs),
           "tokens": stats.total_tokens,
           "stats": opts.get("out")}, None)
    return 0


def cmd_segment(opts: _Options) -> int:
    meeting = _load_meeting_file(opts.get("meeting"))
    segmenter = _build_segmenter(opts)
    segments = segmenter.segment(meeting)
    _emit([{"index": s.index, "start": s.start, "end": s.end} for s in segments],
          opts.get("out"))
    return 0


def cmd_train(opts: _Options) -> int:
    meetings = [_load_meeting_file(p) for p in opts.get("meetings")]
    sampling = opts.get("sampling")
    if sampling not in SAMPLING_STRATEGIES:
        raise ConfigError(f"unknown sampling strategy {sampling!r}")
    seed = int(opts.get("seed"))
    summarizer = MeetingSummarizer(
        segmenter=opts.get("segmenter"), n_segments=int(opts.get("k")),
        hiatus=int(opts.get("hiatus")), window=int(opts.get("window")),
        alpha=float(opts.get("alpha")))
    X, y = summarizer.training_matrix(meetings)
    estimator = make_classifier(opts.get("classifier"),
                                n_trees=int(opts.get("n_trees")), seed=seed)
    report = cross_validate(X, y, estimator, folds=int(opts.get("folds")),
                            sampling=sampling, seed=seed)
    Xr, yr, w = rebalance(X, y, sampling, seed=seed)
    model = make_classifier(opts.get("classifier"),
                            n_trees=int(opts.get("n_trees")), seed=seed)
    model.fit(Xr, yr, sample_weight=w)
    save_model(model, opts.get("out"))
    _emit({"model": opts.get("out"), "instances": int(len(y)),
           "positives": int(y.sum()), "cv": report}, None)
    return 0


def cmd_extract(opts: _Options) -> int:
    meeting = _load_meeting_file(opts.get("meeting"))
    model = load_model(_require_file(opts.get("model"), "model file"))
    segments = _build_segmenter(opts).segment(meeting)
    X, ids = feature_matrix(meeting, segments)
    predictions = model.predict(X)
    positive = [uid for uid, label in zip(ids, predictions) if label == 1]
    _emit({"meeting": meeting.id, "positive": positive}, opts.get("out"))
    return 0


def _fuse_trace_ilp(instance, solution, words, sentence) -> dict:
    retained = set(solution.edge_ids)
    edges = []
    for i, edge in enumerate(instance.graph.edges):
        edges.append({
            "id": i,
            "gov": edge.gov,
            "dep": edge.dep,
            "label": edge.label,
            "supports": list(edge.supports),
            "coefficient": instance.coefficients[i],
            "retained": i in retained,
        })
    return {
        "algo": "ilp",
        "gamma": instance.gamma,
        "objective": solution.objective,
        "optimal": solution.optimal,
        "nodes_explored": solution.n_nodes_explored,
        "edges": edges,
        "words": list(words),
        "sentence": sentence,
    }


def cmd_fuse(opts: _Options) -> int:
    meeting = _load_meeting_file(opts.get("meeting"))
    algo = opts.get("algo")
    utterances = list(meeting.utterances)
    if algo == "ilp":
        stats = _resolve_stats(opts)
        graph = build_fusion_graph(utterances)
        tf = term_frequencies(graph.sources)
        instance = build_instance(graph, stats, tf,
                                  gamma_words=int(opts.get("gamma_words")))
        lp_path = opts.get("export_lp")
        if lp_path:
            with open(lp_path, "w", encoding="utf-8") as fh:
                fh.write(export_lp(instance))
        solution = solve_exact(instance, time_limit=float(opts.get("time_limit")))
        order = linearize(graph, solution.edge_ids)
        words = [graph.node(v).surface for v in order]
        sentence = render(words)
        trace_path = opts.get("trace")
        if trace_path:
            _emit(_fuse_trace_ilp(instance, solution, words, sentence), trace_path)
        sys.stdout.write(sentence + "\n")
        return 0
    if algo == "msc":
        cleaned = [u for u in (strip_fillers(u) for u in utterances) if u is not None]
        if not cleaned:
            raise ValidationError("no utterance survived cleanup")
        graph = build_word_graph(cleaned)
        result = best_path(graph)
        sentence = render(list(result.words))
        trace_path = opts.get("trace")
        if trace_path:
            _emit({"algo": "msc", "cost": result.cost, "score": result.score,
                   "fallback": result.fallback, "words": list(result.words),
                   "sentence": sentence}, trace_path)
        sys.stdout.write(sentence + "\n")
        return 0
    raise ConfigError(f"unknown fusion algorithm {algo!r}")


def _make_summarizer(opts: _Options) -> MeetingSummarizer:
    summarizer = MeetingSummarizer(
        segmenter=opts.get("segmenter"), n_segments=int(opts.get("k")),
        hiatus=int(opts.get("hiatus")), window=int(opts.get("window")),
        alpha=float(opts.get("alpha")), algo=opts.get("algo"),
        gamma_words=int(opts.get("gamma_words")),
        time_limit=float(opts.get("time_limit")),
        seed=int(opts.get("seed")),
        stats=_resolve_stats(opts) if opts.get("algo", "ilp") != "msc" else None)
    model_path = opts.get("model")
    if model_path:
        summarizer.model_ = load_model(_require_file(model_path, "model file"))
    return summarizer


def cmd_summarize(opts: _Options) -> int:
    paths = opts.get("meetings")
    meetings = [_load_meeting_file(p) for p in paths]
    summarizer = _make_summarizer(opts)
    jobs = max(1, int(opts.get("jobs")))
    if jobs == 1:
        summaries = [summarizer.summarize(m) for m in meetings]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(summarizer.summarize, meetings))

    out_dir = opts.get("out_dir")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        for summary in summaries:
            base = os.path.join(out_dir, summary.meeting_id)
            with open(base + ".txt", "w", encoding="utf-8") as fh:
                fh.write(summary.text)
            if opts.flag("trace"):
                _emit(summary.to_json(), base + ".trace.json")
    else:
        for summary in summaries:
            if len(summaries) > 1:
                sys.stdout.write(f"# {summary.meeting_id}\n")
            sys.stdout.write(summary.text)

    report_path = opts.get("report")
    if report_path:
        limit = int(opts.get("limit"))
        scored = {}
        for meeting, summary in zip(meetings, summaries):
            if not meeting.gold_abstract:
                continue
            reference = list(meeting.gold_abstract)
            candidate = summary.words()
            scored[meeting.id] = {
                "rouge_1": rouge_n(candidate, reference, 1, limit=limit),
                "rouge_2": rouge_n(candidate, reference, 2, limit=limit),
                "rouge_su4": rouge_su4(candidate, reference, limit=limit),
            }
        if not scored:
            raise ValidationError("no meeting carries a gold abstract")
        means = {key: sum(r[key] for r in scored.values()) / len(scored)
                 for key in ("rouge_1", "rouge_2", "rouge_su4")}
        _emit({"limit": limit, "meetings": scored, "means": means}, report_path)
    return 0


def _summary_tokens(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    words: list[str] = []
    for line in text.splitlines():
        line = line.strip()
        if line.endswith("."):
            line = line[:-1]
        words.extend(line.split())
    return words


def cmd_eval(opts: _Options) -> int:
    summaries_dir = opts.get("summaries")
    if not os.path.isdir(summaries_dir):
        raise ConfigError(f"summaries directory not found: {summaries_dir}")
    limit = int(opts.get("limit"))
    report: dict[str, dict[str, float]] = {}
    for path in opts.get("meetings"):
        meeting = _load_meeting_file(path)
        if not meeting.gold_abstract:
            continue
        summary_path = os.path.join(summaries_dir, meeting.id + ".txt")
        if not os.path.exists(summary_path):
            raise ValidationError(
                f"no summary for meeting {meeting.id}: {summary_path}")
        candidate = _summary_tokens(summary_path)
        reference = list(meeting.gold_abstract)
        report[meeting.id] = {
            "rouge_1": rouge_n(candidate, reference, 1, limit=limit),
            "rouge_2": rouge_n(candidate, reference, 2, limit=limit),
            "rouge_su4": rouge_su4(candidate, reference, limit=limit),
        }
    if not report:
        raise ValidationError("no meeting carries a gold abstract")
    means = {key: sum(r[key] for r in report.values()) / len(report)
             for key in ("rouge_1", "rouge_2", "rouge_su4")}
    payload = {"limit": limit, "meetings": report, "means": means}
    csv_path = opts.get("csv")
    if csv_path:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["meeting", "rouge_1", "rouge_2", "rouge_su4"])
            for mid in sorted(report):
                row = report[mid]
                writer.writerow([mid, row["rouge_1"], row["rouge_2"],
                                 row["rouge_su4"]])
            writer.writerow(["mean", means["rouge_1"], means["rouge_2"],
                             means["rouge_su4"]])
    _emit(payload, opts.get("out"))
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusum",
        description="Abstractive meeting summarization by dependency-graph fusion.")
    parser.add_argument("--config", help="JSON file with default option values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="build relation statistics from parsed text")
    p.add_argument("corpus", nargs="+", help="parsed corpus files (JSON or CoNLL-U)")
    p.add_argument("--out", required=True, help="output stats JSON path")
    p.add_argument("--floor-prob", type=float, dest="floor_prob")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("segment", help="split a meeting into topic segments")
    p.add_argument("meeting")
    p.add_argument("--algo", choices=["lcseg", "bayes"], dest="segmenter")
    p.add_argument("--k", type=int, help="number of segments (0 = automatic)")
    p.add_argument("--hiatus", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("train", help="train the utterance classifier")
    p.add_argument("meetings", nargs="+", help="labeled meeting files")
    p.add_argument("--classifier", choices=["nb", "rf"])
    p.add_argument("--sampling", choices=list(SAMPLING_STRATEGIES))
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-trees", type=int, dest="n_trees")
    p.add_argument("--segmenter", choices=["lcseg", "bayes"])
    p.add_argument("--k", type=int)
    p.add_argument("--hiatus", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", required=True, help="output model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="apply a model, list positive utterances")
    p.add_argument("meeting")
    p.add_argument("--model", required=True)
    p.add_argument("--segmenter", choices=["lcseg", "bayes"])
    p.add_argument("--k", type=int)
    p.add_argument("--hiatus", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("fuse", help="fuse one meeting's utterances into a sentence")
    p.add_argument("meeting")
    p.add_argument("--algo", choices=["ilp", "msc"])
    p.add_argument("--gamma-words", type=int, dest="gamma_words")
    p.add_argument("--time-limit", type=float, dest="time_limit")
    p.add_argument("--stats", help="relation stats JSON (default: bundled corpus)")
    p.add_argument("--floor-prob", type=float, dest="floor_prob")
    p.add_argument("--export-lp", dest="export_lp", help="write LP model here")
    p.add_argument("--trace", help="write a JSON trace here")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("summarize", help="run the full pipeline on meetings")
    p.add_argument("meetings", nargs="+")
    p.add_argument("--algo", choices=["ilp", "msc"])
    p.add_argument("--segmenter", choices=["lcseg", "bayes"])
    p.add_argument("--k", type=int)
    p.add_argument("--hiatus", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--model", help="trained classifier JSON")
    p.add_argument("--stats", help="relation stats JSON (default: bundled corpus)")
    p.add_argument("--floor-prob", type=float, dest="floor_prob")
    p.add_argument("--gamma-words", type=int, dest="gamma_words")
    p.add_argument("--time-limit", type=float, dest="time_limit")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--trace", action="store_true",
                   help="write per-meeting trace JSON next to summaries")
    p.add_argument("--report", help="write a ROUGE report here (needs gold)")
    p.add_argument("--limit", type=int)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("eval", help="score summary files against gold abstracts")
    p.add_argument("meetings", nargs="+")
    p.add_argument("--summaries", required=True,
                   help="directory of <meeting-id>.txt files")
    p.add_argument("--limit", type=int)
    p.add_argument("--csv", help="also write a CSV table here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.func(_Options(args, config))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverTimeout as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ParseError, ValidationError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FusumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
