"""Turn a raw witness cycle into an understandable minimal counterexample.

Stages, each kept as a snapshot:

  original      the dependencies of the witness cycle itself;
  participants  the cycle extended to a minimal complete cycle cluster plus,
                for every read-overwrite edge, the supporting writer with its
                write-order and writer-reader context (missing transactions
                appear here);
  recovered     uncertainty resolved: whenever one branch of a constraint
                would close an undesired cycle with already-certain
                dependencies, that branch's dependencies are dropped and the
                opposite branch's become certain, to a fixpoint;
  final         all still-uncertain dependencies removed.

A cycle cluster is a set of undesired cycles linked through opposite branches
of shared constraints; it is complete when every constraint it touches
contributes edges from both branches or from neither. The search extends the
witness cycle with the fewest possible dependencies, so within budget the
returned cluster is a smallest complete one containing the cycle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

from .errors import BudgetExceededError, MissingSupportError
from .histories import INIT_TXN, TxnId, txn_label
from .polygraph import EITHER, OR, RW, SO, WR, WW, ConstraintKey, Edge, Polygraph
from .witness import KNOWN_ORIGIN, Origin, WitnessCycle

CERTAIN = "certain"
UNCERTAIN = "uncertain"

STAGES = ("original", "participants", "recovered", "final")

# Exhaustiveness caps for cycle enumeration on large graphs; when a search
# hits one of them the minimality flag is withdrawn but the result stands.
DEFAULT_MAX_CYCLE_LEN = 10
DEFAULT_MAX_CYCLES_PER_DEP = 128


@dataclass(slots=True)
class TaggedDependency:
    edge: Edge
    origin: Origin  # ("known",) or ("branch", constraint id, branch)
    tag: str = UNCERTAIN
    support: bool = False  # True for read-overwrite context added afterwards

    def copy(self) -> "TaggedDependency":
        return replace(self)


Scenario = dict[Edge, TaggedDependency]


@dataclass(slots=True)
class CycleCluster:
    cycles: list[tuple[Edge, ...]]
    complete: bool

    def dependencies(self) -> set[Edge]:
        return {e for cycle in self.cycles for e in cycle}

    def dependency_count(self) -> int:
        return len(self.dependencies())


@dataclass(slots=True)
class Counterexample:
    classification: str
    minimal: bool
    cluster: CycleCluster
    cycle: WitnessCycle
    stages: dict[str, list[TaggedDependency]]
    recovered_txns: tuple[TxnId, ...]

    def stage_edges(self, stage: str) -> set[Edge]:
        return {dep.edge for dep in self.stages[stage]}


class EdgeUniverse:
    """Every labeled edge the original polygraph can realize, with ownership."""

    def __init__(self, graph: Polygraph):
        self.graph = graph
        self.owner: dict[Edge, tuple[ConstraintKey, str]] = {}
        succ: dict[TxnId, list[Edge]] = {}
        known: set[Edge] = set()
        for edge in graph.known_edges:
            if edge in known:
                continue
            known.add(edge)
            succ.setdefault(edge[0], []).append(edge)
        for cid in sorted(graph.constraints):
            cons = graph.constraints[cid]
            for branch in (EITHER, OR):
                for edge in cons.edges(graph, branch):
                    if edge in self.owner or edge in known:
                        continue
                    self.owner[edge] = (cid, branch)
                    succ.setdefault(edge[0], []).append(edge)
        self.known = known
        self.succ = {src: sorted(edges) for src, edges in succ.items()}
        self.cap_hit = False

    def origin_of(self, edge: Edge) -> Origin:
        owner = self.owner.get(edge)
        if owner is not None:
            return ("branch", owner[0], owner[1])
        return KNOWN_ORIGIN

    def cycles_through(
        self,
        edge: Edge,
        max_len: int,
        max_count: int,
    ) -> list[tuple[Edge, ...]]:
        """Undesired simple cycles starting with `edge`, shortest first."""
        cycles: list[tuple[Edge, ...]] = []
        target = edge[0]
        # Iterative DFS over simple paths edge.dst -> target.
        stack: list[tuple[TxnId, tuple[Edge, ...], frozenset[TxnId]]] = [
            (edge[1], (edge,), frozenset((edge[0], edge[1])))
        ]
        while stack:
            vertex, path, visited = stack.pop()
            if len(cycles) >= max_count:
                self.cap_hit = True
                break
            for nxt in reversed(self.succ.get(vertex, ())):
                dst = nxt[1]
                if dst == target:
                    cycle = path + (nxt,)
                    if not _has_adjacent_rw(cycle):
                        cycles.append(cycle)
                    continue
                if dst in visited:
                    continue
                if len(path) + 1 >= max_len:
                    self.cap_hit = True
                    continue
                stack.append((dst, path + (nxt,), visited | {dst}))
        cycles.sort(key=lambda c: (len(c), c))
        return cycles


def _has_adjacent_rw(cycle: tuple[Edge, ...]) -> bool:
    n = len(cycle)
    if n < 2:
        return False
    return any(cycle[i][2] == RW and cycle[(i + 1) % n][2] == RW for i in range(n))


def _branch_coverage(universe: EdgeUniverse, deps: set[Edge]) -> dict[ConstraintKey, set[str]]:
    cover: dict[ConstraintKey, set[str]] = {}
    for edge in deps:
        owner = universe.owner.get(edge)
        if owner is not None:
            cover.setdefault(owner[0], set()).add(owner[1])
    return cover


def _first_gap(universe: EdgeUniverse, deps: set[Edge]) -> tuple[ConstraintKey, str] | None:
    cover = _branch_coverage(universe, deps)
    for cid in sorted(cover):
        branches = cover[cid]
        if len(branches) == 1:
            present = next(iter(branches))
            return cid, (OR if present == EITHER else EITHER)
    return None


def find_cluster(
    universe: EdgeUniverse,
    cycle_edges: tuple[Edge, ...],
    deadline: float | None = None,
    max_len: int = DEFAULT_MAX_CYCLE_LEN,
    max_cycles_per_dep: int = DEFAULT_MAX_CYCLES_PER_DEP,
) -> tuple[CycleCluster, bool]:
    """Smallest complete cycle cluster containing the given cycle.

    Branch-and-bound: repeatedly pick the first constraint covered on one
    side only and try every undesired cycle through each missing-branch
    dependency, keeping the completion that adds the fewest dependencies.
    Returns (cluster, exhaustive); exhaustive is False when an enumeration
    cap was hit. Raises BudgetExceededError when out of time with no
    complete cluster found; if some complete cluster was found by then, the
    best one so far is returned instead.
    """
    universe.cap_hit = False
    graph = universe.graph
    best: list[tuple[Edge, ...]] | None = None
    best_count: int | None = None
    seen: set[frozenset[Edge]] = set()
    out_of_time = False

    def search(cycles: list[tuple[Edge, ...]], deps: frozenset[Edge]) -> None:
        nonlocal best, best_count, out_of_time
        if out_of_time:
            return
        if deadline is not None and time.monotonic() > deadline:
            out_of_time = True
            return
        if best_count is not None and len(deps) >= best_count:
            return
        gap = _first_gap(universe, deps)
        if gap is None:
            best, best_count = list(cycles), len(deps)
            return
        cid, missing = gap
        cons = graph.constraints[cid]
        for dep in cons.edges(graph, missing):
            for cyc in universe.cycles_through(dep, max_len, max_cycles_per_dep):
                new = deps | set(cyc)
                key = frozenset(new)
                if key in seen:
                    continue
                seen.add(key)
                cycles.append(cyc)
                search(cycles, frozenset(new))
                cycles.pop()

    search([cycle_edges], frozenset(cycle_edges))
    if best is None:
        if out_of_time:
            raise BudgetExceededError("cluster search budget exhausted")
        # No completion exists within the caps; fall back to the bare cycle.
        return CycleCluster([cycle_edges], complete=False), False
    exhaustive = not (universe.cap_hit or out_of_time)
    return CycleCluster(best, complete=True), exhaustive


def restore_rw_context(scenario: Scenario, graph: Polygraph) -> Scenario:
    """Add, for each read-overwrite edge, its supporting writer's edges.

    An edge reader -RW(k)-> overwriter exists because some writer w gave the
    reader its value of k and w precedes the overwriter in the version order;
    the w -WW(k)-> overwriter and w -WR(k)-> reader dependencies (and w
    itself) are brought in when missing.
    """
    for edge in sorted(e for e in scenario if e[2] == RW):
        reader, overwriter, _, key = edge
        writer = graph.read_from.get((key, reader))
        if writer is None:
            raise MissingSupportError(
                f"{txn_label(reader)} has no read of {key!r} to support an RW edge"
            )
        ww: Edge = (writer, overwriter, WW, key)
        wr: Edge = (writer, reader, WR, key)
        for support in (ww, wr):
            if support not in scenario:
                origin = _origin_in(graph, support)
                tag = CERTAIN if origin[0] == "known" else UNCERTAIN
                scenario[support] = TaggedDependency(support, origin, tag, support=True)
    return scenario


def _origin_in(graph: Polygraph, edge: Edge) -> Origin:
    located = graph.constraint_for_edge(edge)
    if located is not None:
        return ("branch", located[0], located[1])
    return KNOWN_ORIGIN


def _certain_cycle_exists(edge: Edge, scenario: Scenario, max_len: int = 12) -> bool:
    """Does `edge` close an undesired cycle whose other deps are all certain?"""
    succ: dict[TxnId, list[Edge]] = {}
    for e, dep in scenario.items():
        if dep.tag == CERTAIN:
            succ.setdefault(e[0], []).append(e)
    for edges in succ.values():
        edges.sort()
    target = edge[0]
    stack: list[tuple[TxnId, tuple[Edge, ...], frozenset[TxnId]]] = [
        (edge[1], (edge,), frozenset((edge[0], edge[1])))
    ]
    while stack:
        vertex, path, visited = stack.pop()
        for nxt in succ.get(vertex, ()):
            dst = nxt[1]
            if dst == target:
                if not _has_adjacent_rw(path + (nxt,)):
                    return True
                continue
            if dst in visited or len(path) + 1 >= max_len:
                continue
            stack.append((dst, path + (nxt,), visited | {dst}))
    return False


def resolve_uncertain(scenario: Scenario, graph: Polygraph) -> Scenario:
    """Eliminate impossible branches and certify their opposites, to a fixpoint.

    When an uncertain dependency would close an undesired cycle together with
    certain dependencies alone, its branch cannot hold: the branch's
    dependencies leave the scenario and the opposite branch's become certain.
    """
    changed = True
    while changed:
        changed = False
        for edge in sorted(scenario):
            dep = scenario[edge]
            if dep.tag != UNCERTAIN or dep.origin[0] != "branch":
                continue
            if not _certain_cycle_exists(edge, scenario):
                continue
            cid, dead_branch = dep.origin[1], dep.origin[2]
            for other_edge in sorted(scenario):
                other = scenario[other_edge]
                if other.origin[0] == "branch" and other.origin[1] == cid:
                    if other.origin[2] == dead_branch:
                        del scenario[other_edge]
                    else:
                        other.tag = CERTAIN
            changed = True
            break
    return scenario


def finalize(scenario: Scenario) -> Scenario:
    """Drop every remaining uncertain dependency."""
    return {e: d for e, d in scenario.items() if d.tag == CERTAIN}


def classify(cycle: WitnessCycle, participant_edges: set[Edge], graph: Polygraph) -> str:
    """Deterministic anomaly label; the verdict never depends on it.

    Lost update: some pair is ordered by a write-order edge yet the later
    writer's read is overwritten by the earlier one, both having read the
    same predecessor's value of the key. Long fork: the witness cycle has
    two non-adjacent read-overwrite edges. Causality violation: the witness
    cycle needs a session-order edge.
    """
    for edge in sorted(participant_edges):
        x, y, label, key = edge
        if label != WW or x == INIT_TXN:
            continue
        if (y, x, RW, key) in participant_edges:
            source_x = graph.read_from.get((key, x))
            source_y = graph.read_from.get((key, y))
            if source_x is not None and source_x == source_y:
                return "lost-update"
    if cycle.rw_count() >= 2 and cycle.has_nonadjacent_rw_pair():
        return "long-fork"
    if any(e[2] == SO for e in cycle.edges()):
        return "causality-violation"
    return "unclassified"


def interpret(
    history,  # History; unused today, kept for symmetry with the pipeline
    graph: Polygraph,
    cycle: WitnessCycle,
    budget_ms: int | None = None,
    max_len: int | None = None,
    max_cycles_per_dep: int = DEFAULT_MAX_CYCLES_PER_DEP,
) -> Counterexample:
    """Build the four-stage counterexample for a violation cycle.

    `graph` must be the original (unpruned) polygraph; origins recorded by
    the solver against the pruned graph are re-derived here.
    """
    universe = EdgeUniverse(graph)
    if max_len is None:
        max_len = max(DEFAULT_MAX_CYCLE_LEN, min(len(graph.vertices), 16))
    deadline = None if budget_ms is None else time.monotonic() + budget_ms / 1000.0

    cycle_edges = tuple(cycle.edges())
    original = {
        e: TaggedDependency(e, universe.origin_of(e)) for e in cycle_edges
    }
    for dep in original.values():
        dep.tag = CERTAIN if dep.origin[0] == "known" else UNCERTAIN

    minimal = True
    try:
        cluster, exhaustive = find_cluster(
            universe, cycle_edges, deadline, max_len, max_cycles_per_dep
        )
        minimal = cluster.complete and exhaustive
    except BudgetExceededError:
        cluster = CycleCluster([cycle_edges], complete=False)
        minimal = False

    scenario: Scenario = {}
    for cyc in cluster.cycles:
        for e in cyc:
            if e not in scenario:
                origin = universe.origin_of(e)
                scenario[e] = TaggedDependency(
                    e, origin, CERTAIN if origin[0] == "known" else UNCERTAIN
                )
    restore_rw_context(scenario, graph)
    participants = _snapshot(scenario)
    participant_edges = set(scenario)

    resolve_uncertain(scenario, graph)
    recovered = _snapshot(scenario)

    final_scenario = finalize(scenario)
    final = _snapshot(final_scenario)

    cycle_txns = {t for e in cycle_edges for t in (e[0], e[1])}
    participant_txns = {t for e in participant_edges for t in (e[0], e[1])}
    recovered_txns = tuple(sorted(participant_txns - cycle_txns))

    return Counterexample(
        classification=classify(cycle, participant_edges, graph),
        minimal=minimal,
        cluster=cluster,
        cycle=cycle,
        stages={
            "original": _snapshot(original),
            "participants": participants,
            "recovered": recovered,
            "final": final,
        },
        recovered_txns=recovered_txns,
    )


def _snapshot(scenario: Scenario) -> list[TaggedDependency]:
    return [scenario[e].copy() for e in sorted(scenario)]


def render_dot(ce: Counterexample, stage: str = "final") -> str:
    """Deterministic Graphviz text for one stage of the counterexample."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    deps = ce.stages[stage]
    recovered = set(ce.recovered_txns)
    nodes = sorted({t for dep in deps for t in (dep.edge[0], dep.edge[1])})
    lines = ["digraph counterexample {"]
    for node in nodes:
        attrs = ['shape=box']
        if node in recovered:
            attrs.append("color=green")
        lines.append(f'  "{txn_label(node)}" [{", ".join(attrs)}];')
    for dep in deps:
        src, dst, label, key = dep.edge
        text = label if key is None else f"{label}({key})"
        style = "solid" if dep.tag == CERTAIN else "dashed"
        lines.append(
            f'  "{txn_label(src)}" -> "{txn_label(dst)}" [label="{text}", style={style}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
