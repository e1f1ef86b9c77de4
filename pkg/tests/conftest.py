"""Shared builders for the test suite.

Provides compact constructors for utterances/meetings, seeded random
generators for parse trees and relation statistics, and SelectionOracle, an
independent exhaustive-enumeration checker for the subtree selection problem.
The oracle re-states the selection rules directly from their definitions so
the solver is never checked against its own bookkeeping.
"""

from __future__ import annotations

import dataclasses
from collections import Counter

import numpy as np

from fusum.corpus import (
    ROOT,
    DependencyEdge,
    Meeting,
    RelationStats,
    Token,
    Utterance,
    term_frequencies,
)
from fusum.fusion import END_ID, START_ID, merge_utterances
from fusum.ilp import build_instance


# -- compact constructors -----------------------------------------------------


def utt(uid, text, edges, *, position=0, speaker="a", gold=None):
    """Utterance from "surface/POS surface/POS ..." plus (gov, dep, label) triples."""
    tokens = tuple(
        Token.make(i, *part.rsplit("/", 1)) for i, part in enumerate(text.split())
    )
    return Utterance(
        id=uid,
        speaker=speaker,
        position=position,
        tokens=tokens,
        edges=tuple(DependencyEdge(g, d, l) for g, d, l in edges),
        gold_in_summary=gold,
    )


def flat_utt(uid, text, *, root=0, label="dep", position=0, speaker="a", gold=None):
    """Utterance whose parse is a star: every token hangs off one root token."""
    n = len(text.split())
    edges = [(ROOT, root, "root")]
    edges += [(root, i, label) for i in range(n) if i != root]
    return utt(uid, text, edges, position=position, speaker=speaker, gold=gold)


def meeting_of(*utterances, mid="m", gold_abstract=None):
    """Meeting with utterance positions renumbered to match their order."""
    fixed = tuple(
        dataclasses.replace(u, position=i) for i, u in enumerate(utterances)
    )
    return Meeting(mid, fixed, tuple(gold_abstract) if gold_abstract else None)


# -- random structures ---------------------------------------------------------

WORD_POOL = ("drive", "panel", "unit", "plan", "fast", "lift", "case", "mode")
POS_POOL = ("NN", "NNS", "VB", "VBD", "JJ", "RB", "DT", "IN", "PRP")
EDGE_LABELS = ("nsubj", "dobj", "det", "amod", "advmod", "aux", "cop", "nn",
               "prep_of", "conj_and")


def random_utterance(rng, uid, position, n_tokens, *, speaker=None):
    """Random utterance with a uniformly grown single-head dependency tree."""
    tokens = tuple(
        Token.make(i, WORD_POOL[rng.integers(len(WORD_POOL))],
                   POS_POOL[rng.integers(len(POS_POOL))])
        for i in range(n_tokens)
    )
    order = list(rng.permutation(n_tokens))
    edges = [DependencyEdge(ROOT, order[0], "root")]
    attached = [order[0]]
    for i in order[1:]:
        head = attached[rng.integers(len(attached))]
        edges.append(DependencyEdge(
            head, i, EDGE_LABELS[rng.integers(len(EDGE_LABELS))]))
        attached.append(i)
    return Utterance(
        id=uid,
        speaker=speaker if speaker is not None else f"s{rng.integers(3)}",
        position=position,
        tokens=tokens,
        edges=tuple(edges),
    )


def random_stats(rng, utterances):
    """Random label distributions over the governors appearing in utterances.

    Roughly a third of governors stay unseen so the floor probability path is
    exercised; rows are normalized so each sums to 1.
    """
    keys = sorted({(t.norm, t.pos) for u in utterances for t in u.tokens})
    label_probs = {}
    for key in keys:
        if rng.random() < 0.35:
            continue
        k = int(rng.integers(1, 5))
        idx = rng.choice(len(EDGE_LABELS), size=min(k, len(EDGE_LABELS)),
                         replace=False)
        w = rng.random(len(idx)) + 0.05
        label_probs[key] = {
            EDGE_LABELS[j]: float(x) for j, x in zip(idx, w / w.sum())
        }
    freq = {}
    for u in utterances:
        for t in u.tokens:
            freq.setdefault(t.norm, int(rng.integers(1, 25)))
    return RelationStats(
        label_probs=label_probs,
        word_freq=freq,
        total_tokens=sum(freq.values()),
        floor_prob=1e-3,
    )


def random_tf(rng, graph):
    """Segment term frequencies with some words dropped or inflated."""
    tf = dict(term_frequencies(graph.sources))
    for key in list(tf):
        r = rng.random()
        if r < 0.25:
            del tf[key]
        elif r < 0.5:
            tf[key] += int(rng.integers(1, 4))
    return tf


def random_instance(rng, *, max_edges=12, gamma_words=None):
    """Random compiled selection instance with at most max_edges edges."""
    while True:
        shape = [(1, 8), (2, 4), (3, 3)][rng.integers(3)]
        n_utts, max_tok = shape
        utts = [
            random_utterance(rng, f"u{i}", i, int(rng.integers(2, max_tok + 1)))
            for i in range(n_utts)
        ]
        graph = merge_utterances(utts)
        if len(graph.edges) <= max_edges:
            break
    gw = gamma_words if gamma_words is not None else int(rng.integers(1, 9))
    stats = random_stats(rng, utts)
    tf = random_tf(rng, graph)
    return build_instance(graph, stats, tf, gamma_words=gw)


# -- independent selection oracle ----------------------------------------------

COUPLED = ("aux", "cop", "det")


class SelectionOracle:
    """Exhaustive feasibility and optimality checks for one instance.

    Feasibility restates the selection rules from scratch: one entry and one
    exit edge, the size cap, at most one edge per unordered node pair, at most
    one head per word, governors selected before dependents, all-or-one
    coupling per (governor, aux/cop/det) group, and every selected edge
    reachable from the entry dummy.
    """

    def __init__(self, inst):
        edges = inst.graph.edges
        self.n = len(edges)
        self.gov = [e.gov for e in edges]
        self.dep = [e.dep for e in edges]
        self.coeff = list(inst.coefficients)
        self.gamma = inst.gamma
        self.start_mask = sum(1 << i for i, e in enumerate(edges)
                              if e.gov == START_ID)
        self.end_mask = sum(1 << i for i, e in enumerate(edges)
                            if e.dep == END_ID)
        groups: dict[tuple[int, str], list[int]] = {}
        for i, e in enumerate(edges):
            if e.label in COUPLED and e.gov != START_ID:
                groups.setdefault((e.gov, e.label), []).append(i)
        self.couple_groups = sorted(groups.items())

    def feasible(self, chosen) -> bool:
        chosen = set(chosen)
        gov, dep = self.gov, self.dep
        if sum(1 for i in chosen if gov[i] == START_ID) != 1:
            return False
        if sum(1 for i in chosen if dep[i] == END_ID) != 1:
            return False
        if len(chosen) > self.gamma:
            return False
        pairs = Counter()
        inc = Counter()
        for i in chosen:
            pairs[min(gov[i], dep[i]), max(gov[i], dep[i])] += 1
            inc[dep[i]] += 1
        if any(c > 1 for c in pairs.values()):
            return False
        if any(c > 1 for node, c in inc.items() if node != END_ID):
            return False
        for i in chosen:
            if gov[i] != START_ID and inc[gov[i]] == 0:
                return False
        for (g_node, _), ids in self.couple_groups:
            if sum(1 for i in ids if i in chosen) != inc[g_node]:
                return False
        adj: dict[int, list[tuple[int, int]]] = {}
        for i in chosen:
            adj.setdefault(gov[i], []).append((dep[i], i))
        seen = {START_ID}
        used = set()
        stack = [START_ID]
        while stack:
            v = stack.pop()
            for d, i in adj.get(v, []):
                used.add(i)
                if d not in seen:
                    seen.add(d)
                    stack.append(d)
        return len(used) == len(chosen)

    def best(self):
        """(best objective, one argmax edge set), or (None, None) if infeasible."""
        best = None
        best_set = None
        for mask in range(1 << self.n):
            if (mask & self.start_mask).bit_count() != 1:
                continue
            if (mask & self.end_mask).bit_count() != 1:
                continue
            if mask.bit_count() > self.gamma:
                continue
            chosen = [i for i in range(self.n) if mask >> i & 1]
            if not self.feasible(chosen):
                continue
            obj = sum(self.coeff[i] for i in chosen)
            if best is None or obj > best + 1e-12:
                best, best_set = obj, frozenset(chosen)
        return best, best_set
