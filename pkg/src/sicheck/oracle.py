"""Brute-force snapshot isolation decision by version-order enumeration.

Ground truth for differential testing: try every per-key total order over the
committed writers (the virtual initial writer always first), derive the
read-overwrite edges each order forces, and accept the history as soon as one
combination yields an acyclic composed graph. Deliberately dumb and
independent of the production pipeline; only feasible at small scale.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter

from .errors import LimitExceededError
from .histories import (
    INIT_TXN,
    CompletenessReport,
    History,
    TxnId,
    completeness_gate,
    effective_reads_writes,
)


@dataclass(frozen=True, slots=True)
class OracleLimits:
    max_txns: int = 10
    max_writers_per_key: int = 5


@dataclass(slots=True)
class OracleVerdict:
    satisfiable: bool
    gate: CompletenessReport
    # First per-key version orders (excluding the initial writer) that worked.
    witness_orders: dict[str, tuple[TxnId, ...]] | None = None


def induced_graph(deps: list[tuple[TxnId, TxnId, str, str | None]]) -> set[tuple[TxnId, TxnId, str]]:
    """(SO ∪ WR ∪ WW) plus its composition with RW, with composed labels.

    Self-loops from composition are kept; they count as cycles.
    """
    non_rw = [d for d in deps if d[2] != "RW"]
    rw = [d for d in deps if d[2] == "RW"]
    out = {(src, dst, label) for src, dst, label, _ in non_rw}
    rw_by_src: dict[TxnId, list[tuple[TxnId, str]]] = {}
    for src, dst, label, _ in rw:
        rw_by_src.setdefault(src, []).append((dst, label))
    for src, dst, label, _ in non_rw:
        for nxt, rw_label in rw_by_src.get(dst, ()):
            out.add((src, nxt, f"{label}∘{rw_label}"))
    return out


def _acyclic(edges: set[tuple[TxnId, TxnId, str]]) -> bool:
    graph: dict[TxnId, set[TxnId]] = {}
    for src, dst, _ in edges:
        if src == dst:
            return False
        graph.setdefault(dst, set()).add(src)
    try:
        tuple(TopologicalSorter(graph).static_order())
    except CycleError:
        return False
    return True


def oracle_check(history: History, limits: OracleLimits | None = None) -> OracleVerdict:
    """Decide SI by exhaustive version-order enumeration."""
    limits = limits or OracleLimits()
    gate = completeness_gate(history)
    if not gate.ok():
        return OracleVerdict(False, gate)

    committed = sorted(t.id for t in history.committed())
    if len(committed) > limits.max_txns:
        raise LimitExceededError(f"{len(committed)} transactions exceed limit {limits.max_txns}")

    effective = {t.id: effective_reads_writes(t) for t in history.committed()}
    value_writer: dict[tuple[str, int], TxnId] = {}
    writers: dict[str, list[TxnId]] = {}
    for tid in committed:
        for key, value in effective[tid][1].items():
            value_writer[(key, value)] = tid
            writers.setdefault(key, []).append(tid)
    for key, ws in writers.items():
        if len(ws) > limits.max_writers_per_key:
            raise LimitExceededError(
                f"{len(ws)} writers of {key!r} exceed limit {limits.max_writers_per_key}"
            )

    base: list[tuple[TxnId, TxnId, str, str | None]] = []
    for session in history.sessions:
        prev = None
        for txn in session:
            if not txn.committed:
                continue
            if prev is not None:
                base.append((prev, txn.id, "SO", None))
            prev = txn.id

    # (key, reader, source-writer) triples; a valid writer-reader relation must
    # exist at all, which fails when a read can only come from the reader itself.
    reads: list[tuple[str, TxnId, TxnId]] = []
    for tid in committed:
        for key, value in sorted(effective[tid][0].items()):
            writer = INIT_TXN if value == 0 else value_writer[(key, value)]
            if writer == tid:
                return OracleVerdict(False, gate)
            base.append((writer, tid, "WR", key))
            reads.append((key, tid, writer))

    keys = sorted(writers)
    perm_iters = [
        [tuple(p) for p in itertools.permutations(sorted(writers[k]))] for k in keys
    ]
    for combo in itertools.product(*perm_iters):
        order_pos = {}
        deps = list(base)
        for key, perm in zip(keys, combo):
            pos = {w: i for i, w in enumerate(perm)}
            order_pos[key] = pos
            for a_idx, a in enumerate(perm):
                for b in perm[a_idx + 1:]:
                    deps.append((a, b, "WW", key))
        for key, reader, writer in reads:
            pos = order_pos.get(key)
            if pos is None:
                continue
            if writer == INIT_TXN:
                later = [w for w in pos]  # initial writer precedes every writer
            else:
                later = [w for w, i in pos.items() if i > pos[writer]]
            for overwriter in later:
                if overwriter != reader:
                    deps.append((reader, overwriter, "RW", key))
        if _acyclic(induced_graph(deps)):
            return OracleVerdict(True, gate, witness_orders=dict(zip(keys, combo)))
    return OracleVerdict(False, gate)
