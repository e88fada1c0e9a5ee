"""Acyclicity-aware search over constraint branches.

Each open constraint is one binary decision: take its either branch or its
or branch. Assigned branch edges feed an incrementally maintained induced
graph (direct non-RW edges plus non-RW∘RW compositions, at pair granularity)
whose topological order is repaired on every insertion; a failed repair is a
conflict, analyzed into the set of contributing decisions for backjumping.
The search is exhaustive: unsat is only reported once every branch
combination is covered by recorded conflicts, never on budget exhaustion,
which raises instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter

from .encoding import Encoding
from .errors import BudgetExceededError
from .graphs import find_cycle, iter_bits, tarjan_scc
from .polygraph import EITHER, OR, RW, ConstraintKey, Edge, Polygraph
from .pruning import KnownIndex
from .witness import KNOWN_ORIGIN, Origin, WitnessCycle


@dataclass(slots=True)
class SolveResult:
    status: str  # "sat" | "unsat"
    assignment: dict[ConstraintKey, str] | None = None
    cycle: WitnessCycle | None = None
    decisions: int = 0
    conflicts: int = 0


class _Conflict(Exception):
    def __init__(self, cycle: WitnessCycle, culprit_decisions: set[ConstraintKey]):
        self.cycle = cycle
        self.culprits = culprit_decisions


@dataclass(slots=True)
class _Frame:
    cid: ConstraintKey
    branches_left: list[str]
    branch: str | None = None
    trail_mark: int = 0
    conflict_union: set[ConstraintKey] = field(default_factory=set)


class Solver:
    def __init__(
        self,
        graph: Polygraph,
        encoding: Encoding,
        budget_ms: int | None = None,
        max_decisions: int | None = None,
    ):
        self.graph = graph
        self.enc = encoding
        self.n = encoding.n
        self.known = KnownIndex(graph)
        self.deadline = None if budget_ms is None else time.monotonic() + budget_ms / 1000.0
        self.max_decisions = max_decisions
        self.decisions = 0
        self.conflicts = 0

        # Known pair presence is permanent; dynamic presence is counted so that
        # overlapping contributions undo cleanly.
        self.known_a_rows = list(self.known.a_adj)
        self.known_b_rows = list(self.known.b_adj)
        self.dyn_a_count: dict[tuple[int, int], int] = {}
        self.dyn_b_count: dict[tuple[int, int], int] = {}
        self.dyn_ind_count: dict[tuple[int, int], int] = {}
        self.dyn_a_rows = [0] * self.n
        self.dyn_b_rows = [0] * self.n
        self.dyn_a_pred = [0] * self.n
        # Labeled provenance of dynamic pairs (first writer wins per pair).
        self.dyn_a_edges: dict[tuple[int, int], list[tuple[Edge, ConstraintKey, str]]] = {}
        self.dyn_b_edges: dict[tuple[int, int], list[tuple[Edge, ConstraintKey, str]]] = {}

        # Induced graph rows (known ∪ dynamic) and its reverse, plus a
        # maintained topological order.
        self.ind_rows = [0] * self.n
        self.ind_rev = [0] * self.n
        self.known_ind_rows = [0] * self.n
        self.ord = list(range(self.n))
        # Trail of undoable actions: ("a"|"b", pair) count bumps and
        # ("ind", pair) insertions.
        self.trail: list[tuple[str, tuple[int, int]]] = []
        self.first_conflict_cycle: WitnessCycle | None = None

    # ----- presence helpers -------------------------------------------------

    def _a_present_row(self, i: int) -> int:
        return self.known_a_rows[i] | self.dyn_a_rows[i]

    def _b_present_row(self, i: int) -> int:
        return self.known_b_rows[i] | self.dyn_b_rows[i]

    def _a_pred_row(self, j: int) -> int:
        return self.known.a_pred[j] | self.dyn_a_pred[j]

    # ----- initial known graph ---------------------------------------------

    def check_known_acyclic(self) -> WitnessCycle | None:
        """Seed the induced graph from known edges; report a cycle if one exists."""
        for i in range(self.n):
            row = self.known_a_rows[i]
            for m in iter_bits(self.known_a_rows[i]):
                row |= self.known_b_rows[m]
            self.known_ind_rows[i] = row
            self.ind_rows[i] = row
            for j in iter_bits(row):
                self.ind_rev[j] |= 1 << i
        sccs = tarjan_scc(self.n, self.ind_rows)
        cyclic = [
            comp
            for comp in sccs
            if len(comp) > 1 or (self.ind_rows[comp[0]] >> comp[0]) & 1
        ]
        if cyclic:
            comp = min(cyclic, key=lambda c: c[0])
            mask = 0
            for v in comp:
                mask |= 1 << v
            restricted = [self.ind_rows[v] & mask if v in comp else 0 for v in range(self.n)]
            vcycle = find_cycle(self.n, restricted)
            assert vcycle is not None
            return self._cycle_from_vertices(vcycle)
        order = len(sccs) - 1
        for comp in sccs:
            self.ord[comp[0]] = order
            order -= 1
        return None

    # ----- decomposition and provenance -------------------------------------

    def _pair_dep(self, i: int, j: int, layer: str) -> tuple[Edge, Origin]:
        """A labeled edge currently supporting pair (i, j) in the given layer."""
        known_bit = (
            (self.known_a_rows[i] if layer == "a" else self.known_b_rows[i]) >> j
        ) & 1
        if known_bit:
            label_map = self.known.a_label if layer == "a" else self.known.b_label
            edge = label_map[(i, j)]
            return edge, self._known_origin(edge)
        stack = (self.dyn_a_edges if layer == "a" else self.dyn_b_edges)[(i, j)]
        edge, cid, branch = stack[0]
        return edge, ("branch", cid, branch)

    def _known_origin(self, edge: Edge) -> Origin:
        resolved = self.graph.resolved_origin.get(edge)
        if resolved is not None:
            return ("resolved", resolved[0], resolved[1])
        return KNOWN_ORIGIN

    def _decompose_pair(self, i: int, j: int) -> list[tuple[Edge, Origin]]:
        """Underlying labeled deps of a present induced pair (i, j)."""
        if (self._a_present_row(i) >> j) & 1:
            return [self._pair_dep(i, j, "a")]
        for m in iter_bits(self._a_present_row(i)):
            if (self._b_present_row(m) >> j) & 1:
                return [self._pair_dep(i, m, "a"), self._pair_dep(m, j, "b")]
        raise AssertionError(f"induced pair ({i},{j}) has no support")

    def _cycle_from_vertices(self, vcycle: list[int]) -> WitnessCycle:
        deps: list[tuple[Edge, Origin]] = []
        for k, u in enumerate(vcycle):
            v = vcycle[(k + 1) % len(vcycle)]
            deps.extend(self._decompose_pair(u, v))
        return WitnessCycle(deps).canonical()

    # ----- incremental induced-graph maintenance ----------------------------

    def _insert_induced(self, i: int, j: int) -> None:
        """Make pair (i, j) present in the induced graph, repairing the order."""
        if (self.known_ind_rows[i] >> j) & 1:
            return
        count = self.dyn_ind_count.get((i, j), 0)
        self.dyn_ind_count[(i, j)] = count + 1
        self.trail.append(("ind", (i, j)))
        if count > 0 or (self.ind_rows[i] >> j) & 1:
            return
        self.ind_rows[i] |= 1 << j
        self.ind_rev[j] |= 1 << i
        self._pk_check(i, j)

    def _pk_check(self, u: int, v: int) -> None:
        if u == v:
            raise _Conflict(*self._analyze([u]))
        if self.ord[u] < self.ord[v]:
            return
        # Forward search from v bounded by ord[u]; reaching u closes a cycle.
        bound = self.ord[u]
        parent = {v: -1}
        stack = [v]
        forward = [v]
        while stack:
            x = stack.pop()
            for w in iter_bits(self.ind_rows[x]):
                if w in parent or self.ord[w] > bound:
                    continue
                parent[w] = x
                if w == u:
                    path = [w]
                    while x != -1:
                        path.append(x)
                        x = parent[x]
                    path.reverse()  # v .. u
                    raise _Conflict(*self._analyze([u] + path[:-1]))
                forward.append(w)
                stack.append(w)
        # No cycle: shift the affected region to restore topological order.
        low = self.ord[v]
        back = [u]
        seen = {u}
        bstack = [u]
        while bstack:
            x = bstack.pop()
            for w in iter_bits(self.ind_rev[x]):
                if w in seen or self.ord[w] < low:
                    continue
                seen.add(w)
                back.append(w)
                bstack.append(w)
        nodes = sorted(back, key=lambda x: self.ord[x]) + sorted(forward, key=lambda x: self.ord[x])
        slots = sorted(self.ord[x] for x in nodes)
        for node, slot in zip(nodes, slots):
            self.ord[node] = slot

    def _analyze(self, vcycle: list[int]) -> tuple[WitnessCycle, set[ConstraintKey]]:
        cycle = self._cycle_from_vertices(vcycle)
        culprits = {origin[1] for _, origin in cycle.deps if origin[0] == "branch"}
        if self.first_conflict_cycle is None:
            self.first_conflict_cycle = cycle
        return cycle, culprits

    def _add_edge(self, edge: Edge, cid: ConstraintKey, branch: str) -> None:
        i, j = self.enc.pair_of(edge)
        pair = (i, j)
        if edge[2] == RW:
            count = self.dyn_b_count.get(pair, 0)
            self.dyn_b_count[pair] = count + 1
            self.dyn_b_edges.setdefault(pair, []).append((edge, cid, branch))
            self.trail.append(("b", pair))
            if count == 0 and not (self.known_b_rows[i] >> j) & 1:
                self.dyn_b_rows[i] |= 1 << j
                # New compositions: every present A-predecessor of i now reaches j.
                for p in iter_bits(self._a_pred_row(i)):
                    self._insert_induced(p, j)
        else:
            count = self.dyn_a_count.get(pair, 0)
            self.dyn_a_count[pair] = count + 1
            self.dyn_a_edges.setdefault(pair, []).append((edge, cid, branch))
            self.trail.append(("a", pair))
            if count == 0 and not (self.known_a_rows[i] >> j) & 1:
                self.dyn_a_rows[i] |= 1 << j
                self.dyn_a_pred[j] |= 1 << i
                self._insert_induced(i, j)
                for w in iter_bits(self._b_present_row(j)):
                    self._insert_induced(i, w)

    def _undo_to(self, mark: int) -> None:
        while len(self.trail) > mark:
            kind, pair = self.trail.pop()
            i, j = pair
            if kind == "ind":
                left = self.dyn_ind_count[pair] - 1
                if left:
                    self.dyn_ind_count[pair] = left
                else:
                    del self.dyn_ind_count[pair]
                    if not (self.known_ind_rows[i] >> j) & 1:
                        self.ind_rows[i] &= ~(1 << j)
                        self.ind_rev[j] &= ~(1 << i)
            elif kind == "a":
                left = self.dyn_a_count[pair] - 1
                self.dyn_a_edges[pair].pop()
                if left:
                    self.dyn_a_count[pair] = left
                else:
                    del self.dyn_a_count[pair]
                    del self.dyn_a_edges[pair]
                    self.dyn_a_rows[i] &= ~(1 << j)
                    self.dyn_a_pred[j] &= ~(1 << i)
            else:
                left = self.dyn_b_count[pair] - 1
                self.dyn_b_edges[pair].pop()
                if left:
                    self.dyn_b_count[pair] = left
                else:
                    del self.dyn_b_count[pair]
                    del self.dyn_b_edges[pair]
                    self.dyn_b_rows[i] &= ~(1 << j)

    # ----- search -----------------------------------------------------------

    def _check_budget(self) -> None:
        if self.max_decisions is not None and self.decisions > self.max_decisions:
            raise BudgetExceededError(f"decision budget {self.max_decisions} exhausted")
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise BudgetExceededError("solve time budget exhausted")

    def _preferred_branches(self, ec) -> list[str]:
        """Try the branch whose write-order edge follows the current order."""
        first_i = self.enc.vindex[ec.constraint.first]
        second_i = self.enc.vindex[ec.constraint.second]
        if self.ord[first_i] < self.ord[second_i]:
            return [EITHER, OR]
        return [OR, EITHER]

    def _try_branch(self, frame: _Frame, ec) -> bool:
        """Assign a branch; on conflict, undo and record its culprits."""
        branch = frame.branches_left.pop(0)
        frame.branch = branch
        frame.trail_mark = len(self.trail)
        self.decisions += 1
        self._check_budget()
        edges = ec.either_edges if branch == EITHER else ec.or_edges
        try:
            for edge in edges:
                self._add_edge(edge, ec.constraint.id, branch)
        except _Conflict as conflict:
            self.conflicts += 1
            self._undo_to(frame.trail_mark)
            frame.branch = None
            frame.conflict_union |= conflict.culprits - {frame.cid}
            return False
        return True

    def solve(self) -> SolveResult:
        known_cycle = self.check_known_acyclic()
        if known_cycle is not None:
            return SolveResult("unsat", cycle=known_cycle, decisions=0, conflicts=0)

        order = {ec.constraint.id: k for k, ec in enumerate(self.enc.constraints)}
        frames: list[_Frame] = []
        next_idx = 0
        while True:
            if next_idx == len(self.enc.constraints):
                assignment = {f.cid: f.branch for f in frames}
                return SolveResult(
                    "sat",
                    assignment=assignment,
                    decisions=self.decisions,
                    conflicts=self.conflicts,
                )
            ec = self.enc.constraints[next_idx]
            frame = _Frame(cid=ec.constraint.id, branches_left=self._preferred_branches(ec))
            frames.append(frame)
            while True:
                if frame.branches_left and self._try_branch(frame, ec):
                    next_idx += 1
                    break
                if frame.branches_left:
                    continue
                # Both branches failed: backjump to the deepest responsible frame.
                culprits = frame.conflict_union
                frames.pop()
                if not culprits:
                    assert self.first_conflict_cycle is not None
                    return SolveResult(
                        "unsat",
                        cycle=self.first_conflict_cycle,
                        decisions=self.decisions,
                        conflicts=self.conflicts,
                    )
                target = max(culprits, key=lambda cid: order[cid])
                while frames and frames[-1].cid != target:
                    victim = frames.pop()
                    if victim.branch is not None:
                        self._undo_to(victim.trail_mark)
                if not frames:
                    return SolveResult(
                        "unsat",
                        cycle=self.first_conflict_cycle,
                        decisions=self.decisions,
                        conflicts=self.conflicts,
                    )
                frame = frames[-1]
                self._undo_to(frame.trail_mark)
                frame.branch = None
                frame.conflict_union |= culprits - {frame.cid}
                ec = self.enc.constraints[order[frame.cid]]
                next_idx = order[frame.cid]


def solve(
    graph: Polygraph,
    encoding: Encoding,
    budget_ms: int | None = None,
    max_decisions: int | None = None,
) -> SolveResult:
    """Decide whether some branch resolution yields an acyclic induced graph."""
    return Solver(graph, encoding, budget_ms=budget_ms, max_decisions=max_decisions).solve()


def verify_witness(result: SolveResult, graph: Polygraph) -> bool:
    """Independent certificate check for either outcome.

    A sat witness must re-derive to an acyclic induced graph; an unsat cycle
    must be closed, undesired, and justified edge by edge by its claimed
    provenance without drawing on both branches of any constraint.
    """
    if result.status == "sat":
        if result.assignment is None:
            return False
        edges = list(graph.known_edges)
        for cid, branch in result.assignment.items():
            cons = graph.constraints.get(cid)
            if cons is None or branch not in (EITHER, OR):
                return False
            edges.extend(cons.edges(graph, branch))
        non_rw = {(e[0], e[1]) for e in edges if e[2] != RW}
        rw_succ: dict = {}
        for e in edges:
            if e[2] == RW:
                rw_succ.setdefault(e[0], set()).add(e[1])
        induced: dict = {}
        for src, dst in non_rw:
            induced.setdefault(src, set()).add(dst)
            for nxt in rw_succ.get(dst, ()):
                induced.setdefault(src, set()).add(nxt)
        for src, dsts in induced.items():
            if src in dsts:
                return False
        try:
            tuple(TopologicalSorter(induced).static_order())
        except CycleError:
            return False
        return True

    cycle = result.cycle
    if cycle is None or not cycle.deps or not cycle.closed():
        return False
    if cycle.has_adjacent_rw():
        return False
    known = set(graph.known_edges)
    used_branches: dict[ConstraintKey, set[str]] = {}
    for edge, origin in cycle.deps:
        if origin[0] == "known":
            if edge not in known:
                return False
        elif origin[0] == "resolved":
            if edge not in known or graph.resolved_origin.get(edge) != (origin[1], origin[2]):
                return False
        elif origin[0] == "branch":
            cons = graph.constraints.get(origin[1])
            if cons is None or edge not in cons.edges(graph, origin[2]):
                return False
            used_branches.setdefault(origin[1], set()).add(origin[2])
        else:
            return False
    return all(len(branches) == 1 for branches in used_branches.values())
