"""Fusion graph construction: pronoun grounding, filler removal, node merging.

A group of related utterances is folded into one directed word graph. Tokens
that share a normalized form and POS tag may collapse into a single node, the
source parses contribute labeled edges between nodes, and two dummy nodes
bracket every source path so that downstream selection can pick one entry and
one exit point.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .corpus import (
    DEFAULT_FILLERS,
    ROOT,
    DependencyEdge,
    Token,
    Utterance,
    is_punct,
)
from .errors import ValidationError

# Third-person pronouns eligible for grounding, by grammatical number.
SINGULAR_PRONOUNS = frozenset({"it", "this", "that"})
PLURAL_PRONOUNS = frozenset({"they"})
PRONOUN_POS = frozenset({"PRP", "DT"})

# A pronoun is grounded only when it fills one of these grammatical roles.
RESOLVABLE_ROLES = frozenset({"nsubj", "nsubjpass", "dobj", "iobj", "pobj", "root"})

# Dependents copied along with an antecedent head.
NP_MODIFIER_LABELS = frozenset({"det", "amod", "nn"})

SINGULAR_NOUN_POS = frozenset({"NN", "NNP"})
PLURAL_NOUN_POS = frozenset({"NNS", "NNPS"})


def _incoming(utt: Utterance) -> dict[int, DependencyEdge]:
    return {e.dep: e for e in utt.edges}


def _last_np_head(utt: Utterance) -> Token | None:
    """Rightmost noun that is not itself a compound modifier."""
    inc = _incoming(utt)
    for t in reversed(utt.tokens):
        if t.pos.startswith("NN") and inc[t.index].label != "nn":
            return t
    return None


def _np_phrase(utt: Utterance, head: Token) -> list[tuple[Token, str | None]]:
    """The head plus its det/amod/nn dependents, in surface order.

    Each entry pairs the token with the label it hangs off the head by;
    the head itself carries None.
    """
    parts: list[tuple[Token, str | None]] = [(head, None)]
    for e in utt.dependents_of(head.index):
        if e.label in NP_MODIFIER_LABELS:
            parts.append((utt.tokens[e.dep], e.label))
    parts.sort(key=lambda p: p[0].index)
    return parts


def _find_pronoun(utt: Utterance) -> Token | None:
    inc = _incoming(utt)
    for t in utt.tokens:
        if (t.pos in PRONOUN_POS
                and t.norm in SINGULAR_PRONOUNS | PLURAL_PRONOUNS
                and inc[t.index].label in RESOLVABLE_ROLES):
            return t
    return None


def _number_agrees(pronoun: Token, head: Token) -> bool:
    if pronoun.norm in SINGULAR_PRONOUNS:
        return head.pos in SINGULAR_NOUN_POS
    return head.pos in PLURAL_NOUN_POS


def resolve_pronouns(utterances: list[Utterance]) -> list[Utterance]:
    """Ground one pronoun per utterance against the previous utterance.

    The first pronoun in subject/object/root position is replaced by the last
    noun-phrase head of the preceding (already resolved) utterance together
    with its determiner and modifiers, provided grammatical number agrees.
    Utterances with no qualifying pronoun or no agreeing antecedent pass
    through untouched.
    """
    resolved: list[Utterance] = []
    for utt in utterances:
        prev = resolved[-1] if resolved else None
        resolved.append(_resolve_one(utt, prev) if prev is not None else utt)
    return resolved


def _resolve_one(utt: Utterance, prev: Utterance) -> Utterance:
    pronoun = _find_pronoun(utt)
    if pronoun is None:
        return utt
    head = _last_np_head(prev)
    if head is None or not _number_agrees(pronoun, head):
        return utt

    phrase = _np_phrase(prev, head)
    p = pronoun.index
    shift = len(phrase) - 1

    def remap(i: int) -> int:
        if i == ROOT or i < p:
            return i
        if i == p:
            raise AssertionError("pronoun index must be handled explicitly")
        return i + shift

    new_tokens: list[Token] = []
    for t in utt.tokens[:p]:
        new_tokens.append(t)
    head_new = -1
    for offset, (src, _) in enumerate(phrase):
        idx = p + offset
        new_tokens.append(dataclasses.replace(src, index=idx))
        if src.index == head.index:
            head_new = idx
    for t in utt.tokens[p + 1:]:
        new_tokens.append(dataclasses.replace(t, index=t.index + shift))

    new_edges: list[DependencyEdge] = []
    for e in utt.edges:
        gov = head_new if e.gov == p else remap(e.gov)
        dep = head_new if e.dep == p else remap(e.dep)
        new_edges.append(DependencyEdge(gov, dep, e.label))
    for offset, (src, label) in enumerate(phrase):
        if label is not None:
            new_edges.append(DependencyEdge(head_new, p + offset, label))

    return dataclasses.replace(
        utt, tokens=tuple(new_tokens), edges=tuple(new_edges))


def strip_fillers(utt: Utterance,
                  fillers: frozenset[str] = DEFAULT_FILLERS) -> Utterance | None:
    """Drop filler words and punctuation, keeping the parse connected.

    Dependents of a removed token are re-attached to its nearest surviving
    ancestor with their original labels. When the utterance root itself goes,
    its first surviving dependent is promoted and any other orphaned tokens
    attach to the promoted root. Returns None if nothing survives.
    """
    inc = _incoming(utt)
    dropped = {
        t.index for t in utt.tokens
        if t.norm in fillers or is_punct(t.surface, t.pos)
    }
    kept = [t for t in utt.tokens if t.index not in dropped]
    if not kept:
        return None
    if not dropped:
        return utt

    def nearest_kept_ancestor(i: int) -> int:
        g = inc[i].gov
        while g != ROOT and g in dropped:
            g = inc[g].gov
        return g

    old_root = utt.root_index
    if old_root in dropped:
        orphans = [t.index for t in kept if nearest_kept_ancestor(t.index) == ROOT]
        direct = [i for i in orphans if inc[i].gov == old_root]
        new_root = min(direct) if direct else min(orphans)
    else:
        new_root = old_root

    mapping = {t.index: j for j, t in enumerate(kept)}
    new_tokens = tuple(dataclasses.replace(t, index=mapping[t.index]) for t in kept)
    new_edges = [DependencyEdge(ROOT, mapping[new_root], "root")]
    for t in kept:
        if t.index == new_root:
            continue
        anc = nearest_kept_ancestor(t.index)
        gov = mapping[new_root] if anc == ROOT else mapping[anc]
        new_edges.append(DependencyEdge(gov, mapping[t.index], inc[t.index].label))
    return dataclasses.replace(utt, tokens=new_tokens, edges=tuple(new_edges))


def directed_context(tokens: tuple[Token, ...], index: int,
                     window: int = 2) -> tuple[set[str], set[str]]:
    """Normalized forms within `window` tokens left and right of a position."""
    left = {tokens[j].norm for j in range(max(0, index - window), index)}
    right = {tokens[j].norm
             for j in range(index + 1, min(len(tokens), index + window + 1))}
    return left, right


START_ID = 0
END_ID = 1


@dataclass
class MergedNode:
    """One graph node; word nodes track every (source ordinal, token index)
    occurrence that collapsed into them."""

    id: int
    surface: str
    norm: str
    pos: str
    occurrences: list[tuple[int, int]] = field(default_factory=list)

    @property
    def is_dummy(self) -> bool:
        return self.id in (START_ID, END_ID)

    @property
    def anchor(self) -> tuple[int, int]:
        """Earliest occurrence, used to order words at realization time."""
        return min(self.occurrences)


@dataclass
class MergedEdge:
    gov: int
    dep: int
    label: str
    supports: list[int] = field(default_factory=list)

    @property
    def is_start(self) -> bool:
        return self.gov == START_ID

    @property
    def is_end(self) -> bool:
        return self.dep == END_ID

    @property
    def max_support(self) -> int:
        return max(self.supports)


@dataclass
class MergedGraph:
    """Fusion graph over a group of utterances.

    sources holds the cleaned utterances in merge order; ordinals in node
    occurrences and edge supports are 1-based positions into that list.
    """

    nodes: list[MergedNode]
    edges: list[MergedEdge]
    sources: list[Utterance]

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    def node(self, node_id: int) -> MergedNode:
        return self.nodes[node_id]

    def word_nodes(self) -> list[MergedNode]:
        return [n for n in self.nodes if not n.is_dummy]

    def edges_from(self, node_id: int) -> list[MergedEdge]:
        return [e for e in self.edges if e.gov == node_id]

    def edges_to(self, node_id: int) -> list[MergedEdge]:
        return [e for e in self.edges if e.dep == node_id]


def _node_context(node: MergedNode, sources: list[Utterance],
                  window: int) -> tuple[set[str], set[str]]:
    left: set[str] = set()
    right: set[str] = set()
    for ordinal, tok_idx in node.occurrences:
        l, r = directed_context(sources[ordinal - 1].tokens, tok_idx, window)
        left |= l
        right |= r
    return left, right


def merge_utterances(utterances: list[Utterance], *,
                     context_window: int = 2) -> MergedGraph:
    """Merge cleaned utterances into one graph.

    Content words sharing (normalized form, POS) collapse into one node; an
    ambiguous word (several merge candidates) goes to the candidate whose
    surrounding words overlap its own context most, counted separately on each
    side, and stays a fresh node on a tie. Two occurrences from the same
    utterance never share a node, and non-content words never merge. Parallel
    edges with identical endpoints and label pool their source ordinals.
    """
    if not utterances:
        raise ValidationError("cannot merge an empty utterance group")
    nodes = [
        MergedNode(START_ID, "<start>", "<start>", ""),
        MergedNode(END_ID, "<end>", "<end>", ""),
    ]
    by_key: dict[tuple[str, str], list[int]] = {}
    edge_index: dict[tuple[int, int, str], MergedEdge] = {}
    edges: list[MergedEdge] = []
    sources = list(utterances)

    def new_node(tok: Token) -> int:
        node = MergedNode(len(nodes), tok.surface, tok.norm, tok.pos)
        nodes.append(node)
        if tok.is_content:
            by_key.setdefault((tok.norm, tok.pos), []).append(node.id)
        return node.id

    def add_edge(gov: int, dep: int, label: str, ordinal: int) -> None:
        key = (gov, dep, label)
        edge = edge_index.get(key)
        if edge is None:
            edge = MergedEdge(gov, dep, label)
            edge_index[key] = edge
            edges.append(edge)
        if ordinal not in edge.supports:
            edge.supports.append(ordinal)

    for ordinal, utt in enumerate(sources, start=1):
        if not utt.tokens:
            raise ValidationError(f"utterance {utt.id} has no tokens")
        mapping: dict[int, int] = {}
        for tok in utt.tokens:
            nid = None
            if tok.is_content:
                cands = [
                    cid for cid in by_key.get((tok.norm, tok.pos), [])
                    if all(occ[0] != ordinal for occ in nodes[cid].occurrences)
                ]
                if len(cands) == 1:
                    nid = cands[0]
                elif len(cands) > 1:
                    left, right = directed_context(utt.tokens, tok.index,
                                                   context_window)
                    scored = []
                    for cid in cands:
                        cl, cr = _node_context(nodes[cid], sources, context_window)
                        scored.append((len(left & cl) + len(right & cr), cid))
                    scored.sort(key=lambda s: (-s[0], s[1]))
                    best, runner_up = scored[0][0], (scored[1][0]
                                                     if len(scored) > 1 else -1)
                    if best > 0 and best > runner_up:
                        nid = scored[0][1]
            if nid is None:
                nid = new_node(tok)
            nodes[nid].occurrences.append((ordinal, tok.index))
            mapping[tok.index] = nid
        for e in utt.edges:
            gov = START_ID if e.gov == ROOT else mapping[e.gov]
            add_edge(gov, mapping[e.dep], e.label, ordinal)
        add_edge(mapping[utt.tokens[-1].index], END_ID, "end", ordinal)

    return MergedGraph(nodes=nodes, edges=edges, sources=sources)


def build_fusion_graph(utterances: list[Utterance], *,
                       fillers: frozenset[str] = DEFAULT_FILLERS,
                       resolve: bool = True,
                       context_window: int = 2) -> MergedGraph:
    """Full preprocessing chain: ground pronouns, strip fillers, merge."""
    utts = resolve_pronouns(list(utterances)) if resolve else list(utterances)
    cleaned = []
    for u in utts:
        stripped = strip_fillers(u, fillers)
        if stripped is not None:
            cleaned.append(stripped)
    if not cleaned:
        raise ValidationError("no utterance survived filler removal")
    return merge_utterances(cleaned, context_window=context_window)


def graph_to_json(graph: MergedGraph) -> dict:
    return {
        "n_sources": graph.n_sources,
        "nodes": [
            {
                "id": n.id,
                "surface": n.surface,
                "norm": n.norm,
                "pos": n.pos,
                "occurrences": [list(o) for o in n.occurrences],
            }
            for n in graph.nodes
        ],
        "edges": [
            {
                "gov": e.gov,
                "dep": e.dep,
                "label": e.label,
                "supports": list(e.supports),
            }
            for e in graph.edges
        ],
    }


def graph_to_dot(graph: MergedGraph) -> str:
    """Graphviz rendering of the fusion graph, for eyeballing merges."""
    lines = ["digraph fusion {", "  rankdir=LR;"]
    for n in graph.nodes:
        shape = "diamond" if n.is_dummy else "box"
        label = n.surface if n.is_dummy else f"{n.surface}/{n.pos}"
        if len(n.occurrences) > 1:
            label += f" x{len(n.occurrences)}"
        lines.append(f'  n{n.id} [shape={shape}, label="{label}"];')
    for e in graph.edges:
        lines.append(
            f'  n{e.gov} -> n{e.dep} [label="{e.label} ({len(e.supports)})"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
