"""Dependency polygraph construction: known edges plus write-order constraints.

The known graph holds session-order and writer-to-reader edges between
committed transactions (plus the virtual initial writer). Every unordered
pair of writers of a key contributes one constraint with two branches: the
"either" branch orders the pair one way and carries the read-overwrite edges
that ordering forces, the "or" branch is symmetric. Exactly one branch of
each constraint must hold in any explanation of the history.

The virtual initial writer is first in every version order by construction,
so its constraints are resolved immediately into known edges instead of being
generated and pruned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .errors import SicheckError
from .histories import INIT_TXN, History, TxnId, effective_reads_writes, txn_label

SO = "SO"
WR = "WR"
WW = "WW"
RW = "RW"

EITHER = "either"
OR = "or"

# (src, dst, label, key); key is None for SO edges.
Edge = tuple[TxnId, TxnId, str, str | None]

# Identifies a constraint: (key, first writer, second writer), first < second.
ConstraintKey = tuple[str, TxnId, TxnId]


@dataclass(frozen=True, slots=True)
class Constraint:
    """Unordered writer pair on one key; branches are derived on demand.

    The either branch orders first before second; readers of the earlier
    writer's value must then precede the later writer (RW edges). Branch edge
    lists are not materialized because reader sets are shared across all
    constraints of the same writer.
    """

    key: str
    first: TxnId
    second: TxnId

    @property
    def id(self) -> ConstraintKey:
        return (self.key, self.first, self.second)

    def edges(self, graph: "Polygraph", branch: str) -> list[Edge]:
        if branch == EITHER:
            src, dst = self.first, self.second
        elif branch == OR:
            src, dst = self.second, self.first
        else:
            raise ValueError(f"unknown branch {branch!r}")
        out: list[Edge] = [(src, dst, WW, self.key)]
        for reader in graph.readers.get((self.key, src), ()):
            if reader != dst:
                out.append((reader, dst, RW, self.key))
        return out

    def opposite(self, branch: str) -> str:
        return OR if branch == EITHER else EITHER


@dataclass(slots=True)
class Polygraph:
    """Known labeled graph over committed transactions plus open constraints."""

    vertices: tuple[TxnId, ...] = ()
    known_edges: list[Edge] = field(default_factory=list)
    constraints: dict[ConstraintKey, Constraint] = field(default_factory=dict)
    # Committed effective readers of each writer's final value, per key.
    readers: dict[tuple[str, TxnId], tuple[TxnId, ...]] = field(default_factory=dict)
    # Reverse of readers: (key, reader) -> writer whose value the reader saw.
    read_from: dict[tuple[str, TxnId], TxnId] = field(default_factory=dict)
    # Committed effective writers per key, sorted.
    writers: dict[str, tuple[TxnId, ...]] = field(default_factory=dict)
    # Edges promoted from pruned constraints: edge -> (constraint id, surviving branch).
    resolved_origin: dict[Edge, tuple[ConstraintKey, str]] = field(default_factory=dict)

    def clone(self) -> "Polygraph":
        return Polygraph(
            vertices=self.vertices,
            known_edges=list(self.known_edges),
            constraints=dict(self.constraints),
            readers=self.readers,
            read_from=self.read_from,
            writers=self.writers,
            resolved_origin=dict(self.resolved_origin),
        )

    def constraint_for_edge(self, edge: Edge) -> tuple[ConstraintKey, str] | None:
        """Locate the constraint branch that owns a WW or RW edge, if any.

        Edges promoted to known by the initial-writer resolution have no
        owning constraint and return None.
        """
        src, dst, label, key = edge
        if label in (SO, WR) or key is None:
            return None
        if label == WW:
            pair = tuple(sorted((src, dst)))
        else:  # RW: reader src read key from some writer w; the pair is (w, dst)
            writer = self.reader_source(src, key)
            if writer is None or writer == INIT_TXN:
                return None
            pair = tuple(sorted((writer, dst)))
        cid: ConstraintKey = (key, pair[0], pair[1])
        cons = self.constraints.get(cid)
        if cons is None:
            return None
        for branch in (EITHER, OR):
            if edge in cons.edges(self, branch):
                return (cid, branch)
        return None

    def reader_source(self, reader: TxnId, key: str) -> TxnId | None:
        """The writer whose value `reader` effectively read on `key`."""
        return self.read_from.get((key, reader))

    def edge_count(self) -> int:
        return len(self.known_edges)


def create_known_graph(history: History) -> Polygraph:
    """Build vertices, session-order edges, and writer-to-reader edges.

    The history must have passed the completeness gate: every committed read
    of a nonzero value then maps to exactly one committed writer whose final
    write on that key produced the value.
    """
    graph = Polygraph()
    committed = sorted(t.id for t in history.committed())
    graph.vertices = (INIT_TXN, *committed)

    effective: dict[TxnId, tuple[dict[str, int], dict[str, int]]] = {}
    for txn in history.committed():
        effective[txn.id] = effective_reads_writes(txn)

    value_writer: dict[tuple[str, int], TxnId] = {}
    writers_by_key: dict[str, list[TxnId]] = {}
    for tid in committed:
        _, writes = effective[tid]
        for key, value in writes.items():
            value_writer[(key, value)] = tid
            writers_by_key.setdefault(key, []).append(tid)
    graph.writers = {k: tuple(sorted(v)) for k, v in sorted(writers_by_key.items())}

    readers: dict[tuple[str, TxnId], list[TxnId]] = {}
    for session in history.sessions:
        prev: TxnId | None = None
        for txn in session:
            if not txn.committed:
                continue
            if prev is not None:
                graph.known_edges.append((prev, txn.id, SO, None))
            prev = txn.id

    for tid in committed:
        reads, _ = effective[tid]
        for key in sorted(reads):
            value = reads[key]
            if value == 0:
                writer = INIT_TXN
            else:
                writer = value_writer.get((key, value))
                if writer is None:
                    raise SicheckError(
                        f"{txn_label(tid)} reads unmatched value {value} on {key!r}; "
                        "run the completeness gate first"
                    )
            graph.known_edges.append((writer, tid, WR, key))
            readers.setdefault((key, writer), []).append(tid)
            graph.read_from[(key, tid)] = writer

    graph.readers = {k: tuple(sorted(v)) for k, v in sorted(readers.items())}
    return graph


def generate_constraints(history: History, graph: Polygraph) -> Polygraph:
    """Add one constraint per unordered pair of distinct writers of each key.

    Constraints involving the virtual initial writer are resolved on the spot:
    it precedes every real writer, so the corresponding write-order and
    read-overwrite edges go straight into the known graph.
    """
    for key, writers in graph.writers.items():
        init_readers = graph.readers.get((key, INIT_TXN), ())
        for writer in writers:
            edge: Edge = (INIT_TXN, writer, WW, key)
            graph.known_edges.append(edge)
            for reader in init_readers:
                if reader != writer:
                    graph.known_edges.append((reader, writer, RW, key))
        for i, first in enumerate(writers):
            for second in writers[i + 1 :]:
                cons = Constraint(key, first, second)
                graph.constraints[cons.id] = cons
    return graph


def build_polygraph(history: History) -> Polygraph:
    return generate_constraints(history, create_known_graph(history))


def constraint_count(graph: Polygraph) -> tuple[int, int]:
    """(number of constraints, total edges across all constraint branches)."""
    unknown = 0
    for cons in graph.constraints.values():
        for writer, other in ((cons.first, cons.second), (cons.second, cons.first)):
            unknown += 1  # the WW edge
            for reader in graph.readers.get((cons.key, writer), ()):
                if reader != other:
                    unknown += 1
    return len(graph.constraints), unknown


def iter_constraints(graph: Polygraph) -> Iterator[Constraint]:
    """Constraints in deterministic (key, writer pair) order."""
    for cid in sorted(graph.constraints):
        yield graph.constraints[cid]
