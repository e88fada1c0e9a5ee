"""Shared builders and canonical fixture histories."""

from __future__ import annotations

import pytest

from sicheck.histories import ABORTED, COMMITTED, History, Operation, Transaction


def mk_history(sessions: list[list[tuple[str, list[tuple[str, str, int]]]]]) -> History:
    """Build a history from [[(status, [(kind, key, value), ...]), ...], ...]."""
    out = []
    for sid, txns in enumerate(sessions):
        session = []
        for index, (status, ops) in enumerate(txns):
            session.append(
                Transaction(
                    (sid, index),
                    status,
                    tuple(Operation(kind, key, value) for kind, key, value in ops),
                )
            )
        out.append((sid, session))
    return History.build(out)


def committed(ops: list[tuple[str, str, int]]) -> tuple[str, list[tuple[str, str, int]]]:
    return (COMMITTED, ops)


def aborted(ops: list[tuple[str, str, int]]) -> tuple[str, list[tuple[str, str, int]]]:
    return (ABORTED, ops)


@pytest.fixture
def long_fork() -> History:
    """The canonical six-transaction long-fork history.

    T0 writes x and y; T1 and T2 concurrently overwrite x and y; T3 sees
    T1's x but T0's y while T4 sees T2's y but T0's x; T5 follows T0 in the
    same session and overwrites x.
    """
    return mk_history(
        [
            [committed([("w", "x", 1), ("w", "y", 2)]), committed([("w", "x", 5)])],
            [committed([("w", "x", 3)])],
            [committed([("w", "y", 4)])],
            [committed([("r", "x", 3), ("r", "y", 2)])],
            [committed([("r", "y", 4), ("r", "x", 1)])],
        ]
    )


# Transaction ids of the long-fork fixture, paper-style names.
T0, T5 = (0, 0), (0, 1)
T1, T2, T3, T4 = (1, 0), (2, 0), (3, 0), (4, 0)


@pytest.fixture
def lost_update() -> History:
    """Three sessions: one write, two concurrent read-modify-writes of it."""
    return mk_history(
        [
            [committed([("w", "k", 1)])],
            [committed([("r", "k", 1), ("w", "k", 2)])],
            [committed([("r", "k", 1), ("w", "k", 3)])],
        ]
    )


@pytest.fixture
def causality_violation() -> History:
    """T1 then T2 in one session; T3 sees T2's write but not T1's."""
    return mk_history(
        [
            [committed([("w", "x", 1)]), committed([("w", "y", 2)])],
            [committed([("r", "y", 2), ("r", "x", 0)])],
        ]
    )
