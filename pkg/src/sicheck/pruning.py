"""Constraint pruning against the currently known part of the induced graph.

Each outer iteration rebuilds, from the known edges only, the pair-level
induced graph K = A ∪ (A ∘ B), where A holds session-order, writer-reader,
and resolved write-order edges and B holds resolved read-overwrite edges.
A constraint branch is impossible when adding one of its edges would close a
cycle in K; the constraint is then dropped and the surviving branch's edges
become known. Branch tests within one iteration all use the iteration-start
reachability, so newly promoted edges take effect in the next iteration.

If both branches of some constraint are impossible the history is violating
and the outcome carries a witness cycle for each dead branch.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .errors import BudgetExceededError
from .graphs import bfs_path, iter_bits, reach_masks
from .polygraph import EITHER, OR, RW, SO, WR, WW, Constraint, Edge, Polygraph
from .witness import KNOWN_ORIGIN, Origin, WitnessCycle

_LABEL_RANK = {SO: 0, WR: 1, WW: 2, RW: 3}


class KnownIndex:
    """Pair-level bitmask view of a polygraph's known edges."""

    def __init__(self, graph: Polygraph):
        self.graph = graph
        self.vertices = graph.vertices
        self.vindex = {v: i for i, v in enumerate(self.vertices)}
        n = len(self.vertices)
        self.n = n
        self.a_adj = [0] * n
        self.b_adj = [0] * n
        self.a_pred = [0] * n
        # One representative labeled edge per pair, lowest (rank, key) first.
        self.a_label: dict[tuple[int, int], Edge] = {}
        self.b_label: dict[tuple[int, int], Edge] = {}
        for edge in graph.known_edges:
            src, dst, label, key = edge
            i, j = self.vindex[src], self.vindex[dst]
            pair = (i, j)
            if label == RW:
                self.b_adj[i] |= 1 << j
                if pair not in self.b_label or self._ranked(edge) < self._ranked(self.b_label[pair]):
                    self.b_label[pair] = edge
            else:
                self.a_adj[i] |= 1 << j
                self.a_pred[j] |= 1 << i
                if pair not in self.a_label or self._ranked(edge) < self._ranked(self.a_label[pair]):
                    self.a_label[pair] = edge
        self.k_adj = self._compose()
        self.reach = reach_masks(n, self.k_adj)

    @staticmethod
    def _ranked(edge: Edge) -> tuple[int, str]:
        return (_LABEL_RANK[edge[2]], edge[3] or "")

    def _compose(self) -> list[int]:
        k_adj = list(self.a_adj)
        for u in range(self.n):
            row = self.a_adj[u]
            if not row:
                continue
            acc = k_adj[u]
            for m in iter_bits(row):
                acc |= self.b_adj[m]
            k_adj[u] = acc
        return k_adj

    def decompose(self, u: int, v: int) -> list[Edge]:
        """Underlying labeled dependencies of a K edge (direct or composed)."""
        direct = self.a_label.get((u, v))
        if direct is not None:
            return [direct]
        for m in iter_bits(self.a_adj[u]):
            if (self.b_adj[m] >> v) & 1:
                return [self.a_label[(u, m)], self.b_label[(m, v)]]
        raise AssertionError(f"({u},{v}) is not an edge of the known induced graph")

    def path_deps(self, src: int, dst: int) -> list[Edge]:
        path = bfs_path(self.k_adj, src, dst)
        if path is None:
            raise AssertionError(f"no path {src}->{dst} in the known induced graph")
        deps: list[Edge] = []
        for a, b in zip(path, path[1:]):
            deps.extend(self.decompose(a, b))
        return deps


def ww_branch_blocked(src: int, dst: int, reach: list[int]) -> bool:
    """Would the write-order edge src->dst close a cycle in K?"""
    return bool((reach[dst] >> src) & 1)


def rw_branch_blocked(src: int, dst: int, a_pred: list[int], reach: list[int]) -> bool:
    """Would the read-overwrite edge src->dst compose into a K cycle?

    The candidate edge composes with every known A-edge p->src into a K edge
    p->dst, so a cycle arises when dst already reaches some predecessor p, or
    when a predecessor is dst itself (the composition is then a self-loop).
    """
    for p in iter_bits(a_pred[src]):
        if p == dst or (reach[dst] >> p) & 1:
            return True
    return False


@dataclass(slots=True)
class BlockedEdge:
    edge: Edge
    predecessor: int | None  # A-predecessor index for the RW case, else None


@dataclass(slots=True)
class ImmediateViolation:
    constraint: Constraint
    either_cycle: WitnessCycle
    or_cycle: WitnessCycle

    @property
    def cycle(self) -> WitnessCycle:
        """The shorter branch cycle, handed to the explainer."""
        if len(self.either_cycle.deps) <= len(self.or_cycle.deps):
            return self.either_cycle
        return self.or_cycle


@dataclass(slots=True)
class PruneOutcome:
    graph: Polygraph
    resolved_count: int = 0
    iterations: int = 0
    verdict: str = "ok"  # "ok" | "immediate-violation"
    violation: ImmediateViolation | None = None
    resolved_per_iteration: list[int] = field(default_factory=list)


def _branch_blocked(
    index: KnownIndex, graph: Polygraph, cons: Constraint, branch: str
) -> BlockedEdge | None:
    """First impossible edge of the branch, in WW-then-readers order."""
    for edge in cons.edges(graph, branch):
        src, dst = index.vindex[edge[0]], index.vindex[edge[1]]
        if edge[2] == WW:
            if ww_branch_blocked(src, dst, index.reach):
                return BlockedEdge(edge, None)
        else:
            for p in iter_bits(index.a_pred[src]):
                if p == dst or (index.reach[dst] >> p) & 1:
                    return BlockedEdge(edge, p)
    return None


def _blocked_cycle(index: KnownIndex, graph: Polygraph, cons: Constraint, branch: str,
                   blocked: BlockedEdge) -> WitnessCycle:
    """Reconstruct the K cycle witnessing that a branch edge is impossible."""
    edge = blocked.edge
    src, dst = index.vindex[edge[0]], index.vindex[edge[1]]
    branch_dep = (edge, ("branch", cons.id, branch))
    deps: list[tuple[Edge, Origin]] = []
    if edge[2] == WW:
        deps.append(branch_dep)
        for known in index.path_deps(dst, src):
            deps.append((known, _origin(graph, known)))
    else:
        p = blocked.predecessor
        assert p is not None
        pred_edge = index.a_label[(p, src)]
        deps.append((pred_edge, _origin(graph, pred_edge)))
        deps.append(branch_dep)
        if p != dst:
            for known in index.path_deps(dst, p):
                deps.append((known, _origin(graph, known)))
    return WitnessCycle(deps).canonical()


def _origin(graph: Polygraph, edge: Edge) -> Origin:
    resolved = graph.resolved_origin.get(edge)
    if resolved is not None:
        return ("resolved", resolved[0], resolved[1])
    return KNOWN_ORIGIN


def prune_constraints(
    graph: Polygraph,
    max_iterations: int | None = None,
    budget_ms: int | None = None,
) -> PruneOutcome:
    """Iterate branch elimination to a fixpoint; mutates the given polygraph."""
    outcome = PruneOutcome(graph=graph)
    deadline = None if budget_ms is None else time.monotonic() + budget_ms / 1000.0
    prev_reach: list[int] | None = None
    prev_pred: list[int] | None = None

    while max_iterations is None or outcome.iterations < max_iterations:
        index = KnownIndex(graph)
        changed_vertex = [True] * index.n
        if prev_reach is not None:
            for v in range(index.n):
                changed_vertex[v] = (
                    index.reach[v] != prev_reach[v] or index.a_pred[v] != prev_pred[v]
                )
        resolved_here = 0
        for cid in sorted(graph.constraints):
            if deadline is not None and time.monotonic() > deadline:
                raise BudgetExceededError("pruning budget exhausted")
            cons = graph.constraints[cid]
            if prev_reach is not None and not _inputs_changed(index, graph, cons, changed_vertex):
                continue
            either_blocked = _branch_blocked(index, graph, cons, EITHER)
            or_blocked = _branch_blocked(index, graph, cons, OR)
            if either_blocked is None and or_blocked is None:
                continue
            if either_blocked is not None and or_blocked is not None:
                outcome.verdict = "immediate-violation"
                outcome.violation = ImmediateViolation(
                    constraint=cons,
                    either_cycle=_blocked_cycle(index, graph, cons, EITHER, either_blocked),
                    or_cycle=_blocked_cycle(index, graph, cons, OR, or_blocked),
                )
                outcome.resolved_count += resolved_here
                outcome.resolved_per_iteration.append(resolved_here)
                outcome.iterations += 1
                return outcome
            survivor = OR if either_blocked is not None else EITHER
            del graph.constraints[cid]
            for edge in cons.edges(graph, survivor):
                graph.known_edges.append(edge)
                graph.resolved_origin[edge] = (cid, survivor)
            resolved_here += 1
        outcome.resolved_count += resolved_here
        outcome.resolved_per_iteration.append(resolved_here)
        outcome.iterations += 1
        if resolved_here == 0:
            break
        prev_reach, prev_pred = index.reach, index.a_pred
    return outcome


def _inputs_changed(
    index: KnownIndex, graph: Polygraph, cons: Constraint, changed_vertex: list[bool]
) -> bool:
    """True when any reachability or predecessor row a branch test reads changed."""
    fi, si = index.vindex[cons.first], index.vindex[cons.second]
    if changed_vertex[fi] or changed_vertex[si]:
        return True
    for writer in (cons.first, cons.second):
        for reader in graph.readers.get((cons.key, writer), ()):
            if changed_vertex[index.vindex[reader]]:
                return True
    return False
