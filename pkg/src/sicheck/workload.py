"""Workload generation against a deterministic in-memory MVCC store.

The store implements strong-session snapshot isolation: every transaction
reads from the committed snapshot taken at its begin, sees its own pending
writes, and commits only if no key in its write set gained a version after
that snapshot (first committer wins). A seeded logical-time scheduler
interleaves sessions one operation per step, so a (params, seed) pair maps
to one byte-identical history. Aborted transactions are kept in the history
with the operations they executed.

Anomaly injectors splice small handcrafted transaction groups, on fresh keys
with fresh values, onto the ends of the lowest-index sessions; the spliced
group cannot interact with the host history except through session order, so
the checker's verdict and classification are determined by the template.
"""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass, field

from .errors import UnsupportedShapeError
from .histories import ABORTED, COMMITTED, History, Operation, Transaction

PROFILES = ("general", "read-heavy", "medium", "write-heavy", "rmw")
DISTRIBUTIONS = ("uniform", "zipfian", "hotspot")
ANOMALIES = ("lost-update", "long-fork", "causality-violation", "aborted-read", "intermediate-read")

_PROFILE_READ_PCT = {"read-heavy": 95, "medium": 50, "write-heavy": 30}

ZIPF_EXPONENT = 1.0
HOTSPOT_OP_FRACTION = 0.8  # fraction of operations on the hot keys
HOTSPOT_KEY_FRACTION = 0.2  # fraction of keys that are hot
LONG_TXN_FACTOR = 10  # long transactions are 10x the configured size


@dataclass(frozen=True, slots=True)
class WorkloadParams:
    sessions: int = 20
    txns_per_session: int = 100
    ops_per_txn: int = 15
    read_pct: int = 50
    keys: int = 10_000
    dist: str = "zipfian"
    profile: str = "general"
    seed: int = 0
    long_txn_pct: int = 0

    def effective_read_pct(self) -> int:
        return _PROFILE_READ_PCT.get(self.profile, self.read_pct)

    def validate(self) -> None:
        if self.sessions < 1 or self.txns_per_session < 0 or self.ops_per_txn < 1:
            raise ValueError("sessions, txns and ops must be positive")
        if not 0 <= self.read_pct <= 100 or not 0 <= self.long_txn_pct <= 100:
            raise ValueError("percentages must be within 0..100")
        if self.keys < 1:
            raise ValueError("need at least one key")
        if self.dist not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.dist!r}")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")


class MockStore:
    """Multi-version map with first-committer-wins commit validation."""

    def __init__(self) -> None:
        self.versions: dict[str, list[tuple[int, int]]] = {}
        self.commit_counter = 0

    def begin(self) -> int:
        """Snapshot stamp: the transaction sees every commit up to it."""
        return self.commit_counter

    def read(self, key: str, snapshot: int, pending: dict[str, int]) -> int:
        if key in pending:
            return pending[key]
        chain = self.versions.get(key)
        if not chain:
            return 0
        idx = bisect.bisect_right(chain, (snapshot, float("inf"))) - 1
        if idx < 0:
            return 0
        return chain[idx][1]

    def try_commit(self, snapshot: int, writes: dict[str, int]) -> bool:
        for key in writes:
            chain = self.versions.get(key)
            if chain and chain[-1][0] > snapshot:
                return False
        self.commit_counter += 1
        stamp = self.commit_counter
        for key in sorted(writes):
            self.versions.setdefault(key, []).append((stamp, writes[key]))
        return True


class _KeyPicker:
    def __init__(self, params: WorkloadParams, rng: random.Random):
        self.params = params
        self.rng = rng
        if params.dist == "zipfian":
            weights = [1.0 / (rank**ZIPF_EXPONENT) for rank in range(1, params.keys + 1)]
            total = 0.0
            self.cumulative = []
            for w in weights:
                total += w
                self.cumulative.append(total)
            self.total = total
        elif params.dist == "hotspot":
            self.hot = max(1, int(params.keys * HOTSPOT_KEY_FRACTION))

    def pick(self) -> str:
        params = self.params
        if params.dist == "uniform":
            idx = self.rng.randrange(params.keys)
        elif params.dist == "zipfian":
            idx = bisect.bisect_left(self.cumulative, self.rng.random() * self.total)
            idx = min(idx, params.keys - 1)
        else:
            if self.rng.random() < HOTSPOT_OP_FRACTION:
                idx = self.rng.randrange(self.hot)
            else:
                idx = self.hot + self.rng.randrange(max(1, params.keys - self.hot))
                idx = min(idx, params.keys - 1)
        return f"k{idx}"


@dataclass(slots=True)
class _SessionState:
    sid: int
    remaining_txns: int
    value_counter: int = 0
    plan: list[tuple[str, str]] = field(default_factory=list)  # (kind, key)
    step: int = 0
    snapshot: int = 0
    ops: list[Operation] = field(default_factory=list)
    pending: dict[str, int] = field(default_factory=dict)
    done: list[Transaction] = field(default_factory=list)

    def next_value(self) -> int:
        self.value_counter += 1
        return (self.sid << 32) | self.value_counter


def generate(params: WorkloadParams) -> History:
    """Deterministic history for (params, seed); all writes unique-valued."""
    params.validate()
    rng = random.Random(params.seed)
    picker = _KeyPicker(params, rng)
    store = MockStore()
    read_pct = params.effective_read_pct()

    sessions = [_SessionState(sid=s, remaining_txns=params.txns_per_session)
                for s in range(params.sessions)]

    def plan_txn(state: _SessionState) -> None:
        size = params.ops_per_txn
        if params.long_txn_pct and rng.randrange(100) < params.long_txn_pct:
            size = params.ops_per_txn * LONG_TXN_FACTOR
        plan: list[tuple[str, str]] = []
        if params.profile == "rmw":
            for _ in range(max(1, size // 2)):
                key = picker.pick()
                plan.append(("r", key))
                plan.append(("w", key))
        else:
            for _ in range(size):
                kind = "r" if rng.randrange(100) < read_pct else "w"
                plan.append((kind, picker.pick()))
        state.plan = plan
        state.step = 0
        state.snapshot = store.begin()
        state.ops = []
        state.pending = {}

    while True:
        active = [s for s in sessions if s.remaining_txns > 0]
        if not active:
            break
        state = active[rng.randrange(len(active))]
        if not state.plan:
            plan_txn(state)
        kind, key = state.plan[state.step]
        if kind == "r":
            value = store.read(key, state.snapshot, state.pending)
            state.ops.append(Operation("r", key, value))
        else:
            value = state.next_value()
            state.pending[key] = value
            state.ops.append(Operation("w", key, value))
        state.step += 1
        if state.step == len(state.plan):
            if state.pending and not store.try_commit(state.snapshot, state.pending):
                status = ABORTED
            else:
                status = COMMITTED
            index = len(state.done)
            state.done.append(Transaction((state.sid, index), status, tuple(state.ops)))
            state.plan = []
            state.remaining_txns -= 1

    return History.build([(s.sid, s.done) for s in sessions])


def abort_rate(history: History) -> float:
    total = history.txn_count()
    if total == 0:
        return 0.0
    aborted = sum(1 for t in history.transactions() if not t.committed)
    return aborted / total


# ---------------------------------------------------------------------------
# Anomaly injection
# ---------------------------------------------------------------------------


def _fresh_values(history: History, seed: int, count: int) -> list[int]:
    top = 1 << 40
    for txn in history.transactions():
        for op in txn.ops:
            if op.kind == "w":
                top = max(top, abs(op.value))
    base = top + 1 + (seed % 1000) * 64
    return [base + i for i in range(count)]


def _session_slots(history: History, needed: int) -> list[int]:
    if len(history.sessions) < needed:
        raise UnsupportedShapeError(
            f"template needs {needed} sessions, history has {len(history.sessions)}"
        )
    return list(range(needed))


def inject(history: History, kind: str, seed: int = 0) -> History:
    """Splice an anomaly template into the history; output fails the checker.

    Templates use fresh keys and fresh values and are appended at the tails
    of the lowest-index sessions, so only session-order edges connect them to
    the host and no cycle can route through host transactions.
    """
    if kind not in ANOMALIES:
        raise ValueError(f"unknown anomaly kind {kind!r}")
    key_a, key_b = f"inj{seed % 97}a", f"inj{seed % 97}b"

    if kind == "lost-update":
        v1, v2, v3 = _fresh_values(history, seed, 3)
        slots = _session_slots(history, 3)
        spec = [
            (slots[0], COMMITTED, [("w", key_a, v1)]),
            (slots[1], COMMITTED, [("r", key_a, v1), ("w", key_a, v2)]),
            (slots[2], COMMITTED, [("r", key_a, v1), ("w", key_a, v3)]),
        ]
    elif kind == "long-fork":
        v1, v2, v3, v4, v5 = _fresh_values(history, seed, 5)
        slots = _session_slots(history, 5)
        spec = [
            (slots[0], COMMITTED, [("w", key_a, v1), ("w", key_b, v2)]),
            (slots[1], COMMITTED, [("w", key_a, v3)]),
            (slots[2], COMMITTED, [("w", key_b, v4)]),
            (slots[3], COMMITTED, [("r", key_a, v3), ("r", key_b, v2)]),
            (slots[4], COMMITTED, [("r", key_b, v4), ("r", key_a, v1)]),
            (slots[0], COMMITTED, [("w", key_a, v5)]),
        ]
    elif kind == "causality-violation":
        v1, v2 = _fresh_values(history, seed, 2)
        slots = _session_slots(history, 2)
        spec = [
            (slots[0], COMMITTED, [("w", key_a, v1)]),
            (slots[0], COMMITTED, [("w", key_b, v2)]),
            (slots[1], COMMITTED, [("r", key_b, v2), ("r", key_a, 0)]),
        ]
    elif kind == "aborted-read":
        (v1,) = _fresh_values(history, seed, 1)
        slots = _session_slots(history, 2)
        spec = [
            (slots[0], ABORTED, [("w", key_a, v1)]),
            (slots[1], COMMITTED, [("r", key_a, v1)]),
        ]
    else:  # intermediate-read
        v1, v2 = _fresh_values(history, seed, 2)
        slots = _session_slots(history, 2)
        spec = [
            (slots[0], COMMITTED, [("w", key_a, v1), ("w", key_a, v2)]),
            (slots[1], COMMITTED, [("r", key_a, v1)]),
        ]

    sessions = [list(s) for s in history.sessions]
    for slot, status, ops in spec:
        sid = history.session_ids[slot]
        index = sessions[slot][-1].id[1] + 1 if sessions[slot] else 0
        sessions[slot].append(
            Transaction((sid, index), status, tuple(Operation(k, key, v) for k, key, v in ops))
        )
    return History.build(list(zip(history.session_ids, sessions)))
