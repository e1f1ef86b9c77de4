"""Surface realization of a selected subtree.

The retained edges of a fusion solution form a tree hanging off the entry
dummy. Words are ordered bottom-up: the deepest governor whose children are
all finished folds itself and its child blocks into one block, blocks sort by
the anchor of their head word, and the block formed at the tree root is the
sentence.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable

from .errors import ValidationError
from .fusion import START_ID, MergedGraph


def _word_edges(graph: MergedGraph, edge_ids: Iterable[int]):
    """Retained edges minus the exit edge, as (gov, dep) pairs."""
    out = []
    for i in edge_ids:
        e = graph.edges[i]
        if not e.is_end:
            out.append((e.gov, e.dep))
    return out


def root_distances(graph: MergedGraph,
                   edge_ids: Iterable[int]) -> dict[int, int]:
    """Unit-weight distance from the entry dummy to every retained node."""
    pairs = _word_edges(graph, edge_ids)
    adj: dict[int, list[int]] = {}
    for gov, dep in pairs:
        adj.setdefault(gov, []).append(dep)
    dist = {START_ID: 0}
    queue = deque([START_ID])
    while queue:
        v = queue.popleft()
        for d in adj.get(v, []):
            if d not in dist:
                dist[d] = dist[v] + 1
                queue.append(d)
    for gov, dep in pairs:
        if gov not in dist or dep not in dist:
            raise ValidationError(
                "retained edges are not connected to the entry node")
    return dist


def linearize(graph: MergedGraph, edge_ids: Iterable[int]) -> list[int]:
    """Order the retained word nodes; returns node ids, dummies excluded.

    Processing always picks the not-yet-folded governor farthest from the
    entry node (ties broken toward the earlier anchor), so inner phrases are
    finished before the phrases containing them. Once a block is built its
    internal order never changes.
    """
    ids = list(edge_ids)
    pairs = _word_edges(graph, ids)
    if not pairs:
        raise ValidationError("selection retains no words")
    children: dict[int, list[int]] = {}
    seen_dep: set[int] = set()
    for gov, dep in pairs:
        if dep in seen_dep:
            raise ValidationError(f"node {dep} retains two heads")
        seen_dep.add(dep)
        children.setdefault(gov, []).append(dep)
    roots = children.get(START_ID, [])
    if len(roots) != 1:
        raise ValidationError("selection must retain exactly one entry edge")
    dist = root_distances(graph, ids)

    anchor = {v: graph.node(v).anchor for v in seen_dep}
    blocks: dict[int, list[int]] = {v: [v] for v in seen_dep}
    pending = {v for v in seen_dep if v in children}
    while pending:
        ready = [g for g in pending
                 if all(c not in pending for c in children[g])]
        g = min(ready, key=lambda v: (-dist[v], anchor[v]))
        items = [(anchor[c], blocks[c]) for c in children[g]]
        items.append((anchor[g], blocks[g]))
        items.sort(key=lambda t: t[0])
        blocks[g] = [node for _, block in items for node in block]
        pending.remove(g)
    return blocks[roots[0]]


def render(words: list[str]) -> str:
    """Detokenize: space-join, capitalize the first word, close with a period."""
    if not words:
        raise ValidationError("cannot render an empty word list")
    first = words[0][:1].upper() + words[0][1:]
    return " ".join([first] + list(words[1:])) + "."


def realize(graph: MergedGraph, edge_ids: Iterable[int]) -> str:
    """Full realization: order the retained words and detokenize."""
    order = linearize(graph, edge_ids)
    return render([graph.node(v).surface for v in order])
