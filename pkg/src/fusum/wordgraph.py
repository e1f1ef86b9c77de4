"""Adjacency word-graph compression baseline.

A cheap alternative to parse-based fusion: utterances are threaded through a
shared word graph (nodes keyed by normalized form and POS, edges by surface
adjacency), and the summary sentence is a cheap start-to-end path. Edge cost
is the inverse of how often the two words were seen adjacent, so wordings
shared by many utterances come out cheaper.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .corpus import Token, Utterance
from .errors import InfeasibleError, ValidationError
from .fusion import directed_context

START_ID = 0
END_ID = 1


@dataclass
class PathNode:
    id: int
    surface: str
    norm: str
    pos: str
    freq: int = 0
    occurrences: list[tuple[int, int]] = field(default_factory=list)

    @property
    def is_dummy(self) -> bool:
        return self.id in (START_ID, END_ID)


@dataclass
class WordGraph:
    nodes: list[PathNode]
    # (gov id, dep id) -> number of utterances passing through this adjacency
    counts: dict[tuple[int, int], int]

    def node(self, node_id: int) -> PathNode:
        return self.nodes[node_id]

    def successors(self, node_id: int) -> list[tuple[int, float]]:
        out = []
        for (gov, dep), count in self.counts.items():
            if gov == node_id:
                out.append((dep, 1.0 / count))
        return out


def build_word_graph(utterances: list[Utterance], *,
                     context_window: int = 2) -> WordGraph:
    """Thread each utterance's token sequence through the shared graph.

    Tokens expect fillers and punctuation already removed. Merging reuses the
    fusion rules: same (norm, POS) key, never two tokens of one utterance,
    ambiguity settled by directed context overlap with ties kept apart. The
    parse plays no role here; only adjacency matters.
    """
    if not utterances:
        raise ValidationError("cannot build a word graph from no utterances")
    nodes = [
        PathNode(START_ID, "<start>", "<start>", ""),
        PathNode(END_ID, "<end>", "<end>", ""),
    ]
    by_key: dict[tuple[str, str], list[int]] = {}
    counts: dict[tuple[int, int], int] = {}

    def bump(gov: int, dep: int) -> None:
        counts[(gov, dep)] = counts.get((gov, dep), 0) + 1

    for ordinal, utt in enumerate(utterances, start=1):
        if not utt.tokens:
            raise ValidationError(f"utterance {utt.id} has no tokens")
        prev = START_ID
        for tok in utt.tokens:
            nid = _map_token(tok, utt, ordinal, nodes, by_key, utterances,
                             context_window)
            nodes[nid].freq += 1
            nodes[nid].occurrences.append((ordinal, tok.index))
            bump(prev, nid)
            prev = nid
        bump(prev, END_ID)
    return WordGraph(nodes=nodes, counts=counts)


def _map_token(tok: Token, utt: Utterance, ordinal: int,
               nodes: list[PathNode], by_key: dict[tuple[str, str], list[int]],
               utterances: list[Utterance], window: int) -> int:
    cands = [
        cid for cid in by_key.get((tok.norm, tok.pos), [])
        if all(occ[0] != ordinal for occ in nodes[cid].occurrences)
    ]
    if len(cands) == 1:
        return cands[0]
    if len(cands) > 1:
        left, right = directed_context(utt.tokens, tok.index, window)
        scored = []
        for cid in cands:
            cl: set[str] = set()
            cr: set[str] = set()
            for occ_ord, occ_idx in nodes[cid].occurrences:
                l, r = directed_context(utterances[occ_ord - 1].tokens,
                                        occ_idx, window)
                cl |= l
                cr |= r
            scored.append((len(left & cl) + len(right & cr), cid))
        scored.sort(key=lambda s: (-s[0], s[1]))
        if scored[0][0] > 0 and (len(scored) == 1
                                 or scored[0][0] > scored[1][0]):
            return scored[0][1]
    node = PathNode(len(nodes), tok.surface, tok.norm, tok.pos)
    nodes.append(node)
    by_key.setdefault((tok.norm, tok.pos), []).append(node.id)
    return node.id


@dataclass(frozen=True)
class CompressionResult:
    node_ids: tuple[int, ...]
    words: tuple[str, ...]
    cost: float
    fallback: bool  # no walk met the length/verb requirements

    @property
    def score(self) -> float:
        return self.cost / max(len(self.words), 1)


def best_path(graph: WordGraph, *, k: int = 50, min_words: int = 8,
              max_pops: int = 200_000) -> CompressionResult:
    """Pick a sentence from the k cheapest start-to-end walks.

    Among those walks, the one minimizing cost per word wins, subject to
    having at least min_words words and at least one verb. If none qualifies
    the overall cheapest walk is returned with the fallback flag set.
    """
    if k < 1 or min_words < 1:
        raise ValidationError("k and min_words must be >= 1")
    succ: dict[int, list[tuple[int, float]]] = {}
    for (gov, dep), count in graph.counts.items():
        succ.setdefault(gov, []).append((dep, 1.0 / count))
    for outs in succ.values():
        outs.sort()

    walks: list[tuple[float, tuple[int, ...]]] = []
    counter = 0
    heap: list[tuple[float, int, tuple[int, ...]]] = [(0.0, counter, (START_ID,))]
    pops = 0
    while heap and len(walks) < k and pops < max_pops:
        cost, _, path = heapq.heappop(heap)
        pops += 1
        node = path[-1]
        if node == END_ID:
            walks.append((cost, path))
            continue
        for dep, w in succ.get(node, []):
            counter += 1
            heapq.heappush(heap, (cost + w, counter, path + (dep,)))
    if not walks:
        raise InfeasibleError("word graph has no start-to-end path")

    def wordish(path: tuple[int, ...]) -> list[PathNode]:
        return [graph.node(v) for v in path if not graph.node(v).is_dummy]

    qualified = []
    for cost, path in walks:
        nodes = wordish(path)
        if len(nodes) >= min_words and any(n.pos.startswith("VB") for n in nodes):
            qualified.append((cost / len(nodes), cost, path))
    if qualified:
        qualified.sort(key=lambda q: (q[0], q[1], q[2]))
        _, cost, path = qualified[0]
        fallback = False
    else:
        cost, path = walks[0]
        fallback = True
    nodes = wordish(path)
    return CompressionResult(
        node_ids=tuple(n.id for n in nodes),
        words=tuple(n.surface for n in nodes),
        cost=cost,
        fallback=fallback,
    )
