"""Subtree selection over a fusion graph as 0/1 optimization.

Every graph edge gets a binary variable; the objective rewards edges whose
label is typical for their governor, whose dependent is informative in the
segment, and which come from late utterances in the group. The constraint
system keeps the selection a single tree: one entry edge, one exit edge, a
size cap, no parallel or antiparallel duplicates, one head per word, heads
selected before their dependents, connectivity, and all-or-nothing coupling
for auxiliary/copula/determiner satellites.

The solver is an exact depth-first branch and bound. Instances also export to
the LP file format so third-party solvers can cross-check results.
"""

from __future__ import annotations

import math
import re
import time
from dataclasses import dataclass, field

from .corpus import RelationStats, informativeness
from .errors import InfeasibleError, SolverTimeout, ValidationError
from .fusion import END_ID, START_ID, MergedEdge, MergedGraph

# Labels whose edges must be kept exactly when their governor is kept.
COUPLED_LABELS = frozenset({"aux", "cop", "det"})

# Strict-improvement tolerance; ties keep the earlier incumbent.
EPS = 1e-12


def edge_coefficient(edge: MergedEdge, graph: MergedGraph, stats: RelationStats,
                     segment_tf: dict[str, int]) -> float:
    """Objective weight of one edge; entry and exit edges are free."""
    if edge.is_start or edge.is_end:
        return 0.0
    gov = graph.node(edge.gov)
    dep = graph.node(edge.dep)
    p_label = stats.label_probability(gov.norm, gov.pos, edge.label)
    info = informativeness(dep.norm, segment_tf, stats)
    return p_label * info * (edge.max_support / graph.n_sources)


@dataclass
class FusionInstance:
    """A compiled optimization problem over one fusion graph."""

    graph: MergedGraph
    coefficients: list[float]
    gamma: int
    start_ids: list[int]
    end_ids: list[int]
    # unordered node pair -> edge ids in either direction (only pairs with >= 2)
    pair_groups: list[list[int]]
    # node id -> ids of edges pointing at it (word nodes and the exit dummy)
    incoming_ids: dict[int, list[int]]
    # (governor node, coupled label) -> member edge ids
    coupled_groups: list[tuple[int, str, list[int]]]
    order: list[int] = field(default_factory=list)

    @property
    def n_edges(self) -> int:
        return len(self.graph.edges)


def build_instance(graph: MergedGraph, stats: RelationStats,
                   segment_tf: dict[str, int], *,
                   gamma_words: int = 20) -> FusionInstance:
    """Score the edges and compile the constraint groups."""
    if gamma_words < 1:
        raise ValidationError("gamma_words must be >= 1")
    edges = graph.edges
    coeffs = [edge_coefficient(e, graph, stats, segment_tf) for e in edges]

    start_ids = [i for i, e in enumerate(edges) if e.is_start]
    end_ids = [i for i, e in enumerate(edges) if e.is_end]
    if not start_ids or not end_ids:
        raise ValidationError("fusion graph lacks entry or exit edges")

    pairs: dict[tuple[int, int], list[int]] = {}
    for i, e in enumerate(edges):
        key = (min(e.gov, e.dep), max(e.gov, e.dep))
        pairs.setdefault(key, []).append(i)
    pair_groups = [ids for ids in pairs.values() if len(ids) > 1]

    incoming: dict[int, list[int]] = {}
    for i, e in enumerate(edges):
        incoming.setdefault(e.dep, []).append(i)

    coupled: dict[tuple[int, str], list[int]] = {}
    for i, e in enumerate(edges):
        if e.label in COUPLED_LABELS and e.gov != START_ID:
            coupled.setdefault((e.gov, e.label), []).append(i)
    coupled_groups = [(gov, label, ids)
                      for (gov, label), ids in sorted(coupled.items())]

    word_ids = [i for i in range(len(edges))
                if i not in set(start_ids) and i not in set(end_ids)]
    positive = sorted((i for i in word_ids if coeffs[i] > 0),
                      key=lambda i: (-coeffs[i], i))
    rest = [i for i in word_ids if coeffs[i] <= 0]
    order = list(start_ids) + list(end_ids) + positive + rest

    return FusionInstance(
        graph=graph,
        coefficients=coeffs,
        gamma=gamma_words + 2,
        start_ids=start_ids,
        end_ids=end_ids,
        pair_groups=pair_groups,
        incoming_ids=incoming,
        coupled_groups=coupled_groups,
        order=order,
    )


@dataclass(frozen=True)
class FusionSolution:
    edge_ids: tuple[int, ...]
    objective: float
    optimal: bool
    n_nodes_explored: int

    def retained_edges(self, graph: MergedGraph) -> list[MergedEdge]:
        return [graph.edges[i] for i in self.edge_ids]


class _Search:
    """Mutable branch-and-bound state; one instance per solve call."""

    def __init__(self, inst: FusionInstance, deadline: float | None):
        self.inst = inst
        self.deadline = deadline
        edges = inst.graph.edges
        n = len(edges)
        self.n = n
        self.gov = [e.gov for e in edges]
        self.dep = [e.dep for e in edges]
        self.is_start = [e.is_start for e in edges]
        self.is_end = [e.is_end for e in edges]
        self.coeff = inst.coefficients

        self.pair_of = [-1] * n
        for gi, ids in enumerate(inst.pair_groups):
            for i in ids:
                self.pair_of[i] = gi
        self.pair_ones = [0] * len(inst.pair_groups)

        self.coupled_of = [-1] * n
        for gi, (_, _, ids) in enumerate(inst.coupled_groups):
            for i in ids:
                self.coupled_of[i] = gi
        self.coupled_ones = [0] * len(inst.coupled_groups)
        self.coupled_zeros = [0] * len(inst.coupled_groups)
        self.coupled_size = [len(ids) for _, _, ids in inst.coupled_groups]
        self.coupled_by_gov: dict[int, list[int]] = {}
        for gi, (gov, _, _) in enumerate(inst.coupled_groups):
            self.coupled_by_gov.setdefault(gov, []).append(gi)

        self.in_ids = inst.incoming_ids
        self.in_ones: dict[int, int] = {v: 0 for v in self.in_ids}
        self.in_zeros: dict[int, int] = {v: 0 for v in self.in_ids}
        self.out_ids: dict[int, list[int]] = {}
        for i, e in enumerate(edges):
            self.out_ids.setdefault(e.gov, []).append(i)

        self.assign = [-1] * n
        self.ones_total = 0
        self.objective = 0.0
        self.start_ones = 0
        self.start_zeros = 0
        self.end_ones = 0
        self.end_zeros = 0
        self.n_start = len(inst.start_ids)
        self.n_end = len(inst.end_ids)

        # suffix sums of positive coefficients along the static order
        self.pos_suffix = [0.0] * (n + 1)
        for k in range(n - 1, -1, -1):
            c = self.coeff[inst.order[k]]
            self.pos_suffix[k] = self.pos_suffix[k + 1] + (c if c > 0 else 0.0)

        self.best_obj = -math.inf
        self.best_assign: list[int] | None = None
        self.explored = 0
        self.timed_out = False

    # -- incremental assignment ------------------------------------------

    def try_set(self, e: int, v: int) -> bool:
        """Apply one assignment if no constraint is certainly violated."""
        if v == 1 and not self._feasible_one(e):
            return False
        if v == 0 and not self._feasible_zero(e):
            return False
        self.assign[e] = v
        d, g = self.dep[e], self.gov[e]
        if v == 1:
            self.ones_total += 1
            self.objective += self.coeff[e]
            if self.pair_of[e] >= 0:
                self.pair_ones[self.pair_of[e]] += 1
            if self.coupled_of[e] >= 0:
                self.coupled_ones[self.coupled_of[e]] += 1
            if self.is_start[e]:
                self.start_ones += 1
            if self.is_end[e]:
                self.end_ones += 1
            self.in_ones[d] += 1
        else:
            if self.coupled_of[e] >= 0:
                self.coupled_zeros[self.coupled_of[e]] += 1
            if self.is_start[e]:
                self.start_zeros += 1
            if self.is_end[e]:
                self.end_zeros += 1
            self.in_zeros[d] += 1
        return True

    def unset(self, e: int) -> None:
        v = self.assign[e]
        self.assign[e] = -1
        d = self.dep[e]
        if v == 1:
            self.ones_total -= 1
            self.objective -= self.coeff[e]
            if self.pair_of[e] >= 0:
                self.pair_ones[self.pair_of[e]] -= 1
            if self.coupled_of[e] >= 0:
                self.coupled_ones[self.coupled_of[e]] -= 1
            if self.is_start[e]:
                self.start_ones -= 1
            if self.is_end[e]:
                self.end_ones -= 1
            self.in_ones[d] -= 1
        else:
            if self.coupled_of[e] >= 0:
                self.coupled_zeros[self.coupled_of[e]] -= 1
            if self.is_start[e]:
                self.start_zeros -= 1
            if self.is_end[e]:
                self.end_zeros -= 1
            self.in_zeros[d] -= 1

    def _feasible_one(self, e: int) -> bool:
        if self.ones_total + 1 > self.inst.gamma:
            return False
        pg = self.pair_of[e]
        if pg >= 0 and self.pair_ones[pg] >= 1:
            return False
        cg = self.coupled_of[e]
        if cg >= 0 and self.coupled_ones[cg] >= 1:
            return False
        d = self.dep[e]
        if self.in_ones[d] >= 1:
            return False
        if self.is_start[e] and self.start_ones >= 1:
            return False
        if self.is_end[e] and self.end_ones >= 1:
            return False
        g = self.gov[e]
        if g != START_ID:
            ids = self.in_ids.get(g, [])
            if ids and self.in_zeros[g] == len(ids):
                return False  # governor can no longer be selected
            if not ids:
                return False  # governor has no incoming edge at all
        # selecting an edge into d makes d selected: coupled groups on d
        # must still be satisfiable
        if d != END_ID:
            for gi in self.coupled_by_gov.get(d, []):
                if self.coupled_zeros[gi] == self.coupled_size[gi]:
                    return False
        return True

    def _feasible_zero(self, e: int) -> bool:
        if self.is_start[e] and self.start_ones == 0 \
                and self.start_zeros + 1 == self.n_start:
            return False
        if self.is_end[e] and self.end_ones == 0 \
                and self.end_zeros + 1 == self.n_end:
            return False
        cg = self.coupled_of[e]
        if cg >= 0 and self.coupled_ones[cg] == 0 \
                and self.coupled_zeros[cg] + 1 == self.coupled_size[cg]:
            gov = self.inst.coupled_groups[cg][0]
            if self.in_ones.get(gov, 0) >= 1:
                return False  # group forced empty but governor is selected
        d = self.dep[e]
        if d != END_ID:
            ids = self.in_ids[d]
            if self.in_ones[d] == 0 and self.in_zeros[d] + 1 == len(ids):
                # d just became unselectable: nothing may hang off it
                for out in self.out_ids.get(d, []):
                    if self.assign[out] == 1:
                        return False
        return True

    # -- leaf validation ---------------------------------------------------

    def leaf_feasible(self) -> bool:
        if self.start_ones != 1 or self.end_ones != 1:
            return False
        if self.ones_total > self.inst.gamma:
            return False
        for e in range(self.n):
            if self.assign[e] == 1 and self.gov[e] != START_ID:
                if self.in_ones.get(self.gov[e], 0) < 1:
                    return False
        for gi, (gov, _, _) in enumerate(self.inst.coupled_groups):
            if self.coupled_ones[gi] != self.in_ones.get(gov, 0):
                return False
        return self._connected()

    def _connected(self) -> bool:
        retained = [e for e in range(self.n) if self.assign[e] == 1]
        adj: dict[int, list[tuple[int, int]]] = {}
        for e in retained:
            adj.setdefault(self.gov[e], []).append((self.dep[e], e))
        seen_nodes = {START_ID}
        seen_edges: set[int] = set()
        stack = [START_ID]
        while stack:
            v = stack.pop()
            for d, e in adj.get(v, []):
                seen_edges.add(e)
                if d not in seen_nodes:
                    seen_nodes.add(d)
                    stack.append(d)
        return len(seen_edges) == len(retained)

    # -- search ------------------------------------------------------------

    def run(self) -> None:
        self._dfs(0)

    def _dfs(self, k: int) -> None:
        if self.timed_out:
            return
        self.explored += 1
        if self.deadline is not None and self.explored % 256 == 0 \
                and time.monotonic() > self.deadline:
            self.timed_out = True
            return
        if self.objective + self.pos_suffix[k] <= self.best_obj + EPS:
            return
        if k == self.n:
            if self.leaf_feasible() and self.objective > self.best_obj + EPS:
                self.best_obj = self.objective
                self.best_assign = list(self.assign)
            return
        e = self.inst.order[k]
        branches = (1, 0) if self.coeff[e] > 0 else (0, 1)
        for v in branches:
            if self.try_set(e, v):
                self._dfs(k + 1)
                self.unset(e)
            if self.timed_out:
                return


def solve_exact(inst: FusionInstance, *,
                time_limit: float | None = None) -> FusionSolution:
    """Exhaustive branch and bound.

    Returns the first solution attaining the optimum (later ties never
    replace it). With a time limit, the best incumbent is returned flagged
    non-optimal; running out of time with no incumbent raises SolverTimeout,
    and exhausting the space with no feasible point raises InfeasibleError.
    """
    deadline = None if time_limit is None else time.monotonic() + time_limit
    search = _Search(inst, deadline)
    search.run()
    if search.best_assign is None:
        if search.timed_out:
            raise SolverTimeout(
                "time limit hit before any feasible incumbent")
        raise InfeasibleError("no selection satisfies the constraints")
    ids = tuple(i for i in range(search.n) if search.best_assign[i] == 1)
    return FusionSolution(
        edge_ids=ids,
        objective=search.best_obj,
        optimal=not search.timed_out,
        n_nodes_explored=search.explored,
    )


# -- LP interchange ---------------------------------------------------------


def _var_name(prefix: str, edge: MergedEdge) -> str:
    label = re.sub(r"[^A-Za-z0-9_]", "_", edge.label)
    return f"{prefix}_{edge.gov}_{edge.dep}_{label}"


def _terms(items: list[tuple[float, str]]) -> str:
    parts: list[str] = []
    for coef, name in items:
        if not parts:
            parts.append(f"{coef!r} {name}" if coef >= 0 else f"- {-coef!r} {name}")
        elif coef >= 0:
            parts.append(f"+ {coef!r} {name}")
        else:
            parts.append(f"- {-coef!r} {name}")
    return " ".join(parts)


def export_lp(inst: FusionInstance) -> str:
    """Serialize the instance in LP file format.

    Connectivity is expressed with a single-commodity flow: the entry dummy
    emits one unit per selected edge and every selected word node consumes
    one, with capacities tied to the selection variables.
    """
    g = inst.graph
    edges = g.edges
    xname = [_var_name("x", e) for e in edges]
    flow_ids = [i for i, e in enumerate(edges) if not e.is_end]
    fname = {i: _var_name("f", edges[i]) for i in flow_ids}

    out: list[str] = []
    out.append(f"\\ fusion selection: {len(g.nodes)} nodes, {len(edges)} edges")
    out.append("Maximize")
    obj = _terms([(inst.coefficients[i], xname[i]) for i in range(len(edges))])
    out.append(f" obj: {obj}")
    out.append("Subject To")

    rows: list[tuple[str, list[tuple[float, str]], str, float]] = []
    rows.append(("c1_start", [(1.0, xname[i]) for i in inst.start_ids], "=", 1.0))
    rows.append(("c1_end", [(1.0, xname[i]) for i in inst.end_ids], "=", 1.0))
    rows.append(("c2_cap", [(1.0, xname[i]) for i in range(len(edges))],
                 "<=", float(inst.gamma)))
    for ids in inst.pair_groups:
        a, b = edges[ids[0]].gov, edges[ids[0]].dep
        lo, hi = min(a, b), max(a, b)
        rows.append((f"c3_pair_{lo}_{hi}",
                     [(1.0, xname[i]) for i in ids], "<=", 1.0))
    for node, ids in sorted(inst.incoming_ids.items()):
        if node == END_ID:
            continue  # covered by c1_end
        rows.append((f"c4_in_{node}", [(1.0, xname[i]) for i in ids], "<=", 1.0))
    for i, e in enumerate(edges):
        if e.gov == START_ID:
            continue
        terms = [(1.0, xname[i])]
        terms += [(-1.0, xname[j]) for j in inst.incoming_ids[e.gov]]
        rows.append((f"c5_head_{i}", terms, "<=", 0.0))
    for gov, label, ids in inst.coupled_groups:
        terms = [(1.0, xname[i]) for i in ids]
        terms += [(-1.0, xname[j]) for j in inst.incoming_ids[gov]]
        rows.append((f"c6_couple_{gov}_{label}", terms, "=", 0.0))
    # flow source: emission matches the number of selected non-exit edges
    src_terms = [(1.0, fname[i]) for i in flow_ids if edges[i].is_start]
    src_terms += [(-1.0, xname[i]) for i in flow_ids]
    rows.append(("c7_flow_src", src_terms, "=", 0.0))
    for node in sorted(inst.incoming_ids):
        if node == END_ID:
            continue
        terms = [(1.0, fname[i]) for i in flow_ids if edges[i].dep == node]
        terms += [(-1.0, fname[i]) for i in flow_ids if edges[i].gov == node]
        terms += [(-1.0, xname[i]) for i in flow_ids if edges[i].dep == node]
        rows.append((f"c7_flow_{node}", terms, "=", 0.0))
    for i in flow_ids:
        rows.append((f"c7_cap_{i}",
                     [(1.0, fname[i]), (-float(inst.gamma), xname[i])], "<=", 0.0))

    for name, terms, sense, rhs in rows:
        out.append(f" {name}: {_terms(terms)} {sense} {rhs!r}")

    out.append("Bounds")
    for i in flow_ids:
        out.append(f" 0 <= {fname[i]} <= {float(inst.gamma)!r}")
    out.append("Binaries")
    for name in xname:
        out.append(f" {name}")
    out.append("Generals")
    for i in flow_ids:
        out.append(f" {fname[i]}")
    out.append("End")
    return "\n".join(out) + "\n"


@dataclass
class LpModel:
    """Parsed LP file: a sparse objective and constraint rows."""

    sense: str  # "max" or "min"
    objective: dict[str, float]
    constraints: list[tuple[str, dict[str, float], str, float]]
    bounds: dict[str, tuple[float, float]]
    binaries: set[str]
    generals: set[str]

    def variables(self) -> list[str]:
        names: set[str] = set(self.objective)
        for _, row, _, _ in self.constraints:
            names.update(row)
        names.update(self.bounds)
        names.update(self.binaries)
        names.update(self.generals)
        return sorted(names)


_SECTION = re.compile(
    r"^(maximize|minimize|subject to|st|s\.t\.|bounds|binaries|binary|"
    r"generals|general|end)$", re.IGNORECASE)


# variable names, numeric literals (with optional exponent), or lone signs
_TOKEN = re.compile(
    r"[A-Za-z_][A-Za-z0-9_]*"
    r"|\d+(?:\.\d*)?(?:[eE][+-]?\d+)?"
    r"|\.\d+(?:[eE][+-]?\d+)?"
    r"|[+-]")


def _parse_terms(expr: str) -> dict[str, float]:
    terms: dict[str, float] = {}
    sign = 1.0
    coef: float | None = None
    for tok in _TOKEN.findall(expr):
        if tok in ("+", "-"):
            if coef is not None:
                raise ValidationError(
                    f"coefficient without variable in LP expression: {expr!r}")
            if tok == "-":
                sign = -sign
        elif tok[0].isalpha() or tok[0] == "_":
            terms[tok] = terms.get(tok, 0.0) + sign * (
                1.0 if coef is None else coef)
            sign, coef = 1.0, None
        else:
            if coef is not None:
                raise ValidationError(
                    f"two adjacent coefficients in LP expression: {expr!r}")
            coef = float(tok)
    if coef is not None:
        raise ValidationError(
            f"coefficient without variable in LP expression: {expr!r}")
    return terms


def parse_lp(text: str) -> LpModel:
    """Minimal LP format reader covering what export_lp emits."""
    sense = "max"
    objective: dict[str, float] = {}
    constraints: list[tuple[str, dict[str, float], str, float]] = []
    bounds: dict[str, tuple[float, float]] = {}
    binaries: set[str] = set()
    generals: set[str] = set()

    section = None
    pending = ""
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        if _SECTION.match(line):
            word = line.lower()
            if word in ("maximize", "minimize"):
                section = "objective"
                sense = "max" if word == "maximize" else "min"
            elif word in ("subject to", "st", "s.t."):
                section = "constraints"
            elif word == "bounds":
                section = "bounds"
            elif word in ("binaries", "binary"):
                section = "binaries"
            elif word in ("generals", "general"):
                section = "generals"
            else:
                section = "end"
            pending = ""
            continue
        if section == "objective":
            pending += " " + line
            if ":" in pending:
                _, expr = pending.split(":", 1)
            else:
                expr = pending
            objective = _parse_terms(expr)
        elif section == "constraints":
            if ":" not in line:
                raise ValidationError(f"constraint row without a name: {line!r}")
            name, body = line.split(":", 1)
            m = re.search(r"(<=|>=|=)\s*([-+0-9.eE]+)\s*$", body)
            if m is None:
                raise ValidationError(f"constraint row without relation: {line!r}")
            terms = _parse_terms(body[:m.start()])
            constraints.append((name.strip(), terms, m.group(1), float(m.group(2))))
        elif section == "bounds":
            m = re.match(
                r"^([-+0-9.eE]+)\s*<=\s*(\S+)\s*<=\s*([-+0-9.eE]+)$", line)
            if m is None:
                raise ValidationError(f"unsupported bounds row: {line!r}")
            bounds[m.group(2)] = (float(m.group(1)), float(m.group(3)))
        elif section == "binaries":
            binaries.update(line.split())
        elif section == "generals":
            generals.update(line.split())
    return LpModel(sense=sense, objective=objective, constraints=constraints,
                   bounds=bounds, binaries=binaries, generals=generals)
