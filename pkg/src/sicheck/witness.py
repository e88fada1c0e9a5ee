"""Dependency-cycle witnesses shared by the pruner, solver, and explainer."""

from __future__ import annotations

from dataclasses import dataclass

from .histories import txn_label
from .polygraph import RW, ConstraintKey, Edge

# Where a dependency edge comes from:
#   ("known",)                    original session-order / writer-reader edge,
#                                 or an initial-writer axiom edge
#   ("resolved", cid, branch)     promoted to known when pruning killed the
#                                 opposite branch of constraint cid
#   ("branch", cid, branch)       taken from a still-open constraint branch
Origin = tuple


KNOWN_ORIGIN: Origin = ("known",)


@dataclass(slots=True)
class WitnessCycle:
    """A closed sequence of labeled dependencies demonstrating a violation."""

    deps: list[tuple[Edge, Origin]]

    def edges(self) -> list[Edge]:
        return [d[0] for d in self.deps]

    def closed(self) -> bool:
        if not self.deps:
            return False
        edges = self.edges()
        return all(edges[i][1] == edges[(i + 1) % len(edges)][0] for i in range(len(edges)))

    def rw_count(self) -> int:
        return sum(1 for e in self.edges() if e[2] == RW)

    def has_adjacent_rw(self) -> bool:
        """Two RW dependencies in cyclically consecutive positions."""
        edges = self.edges()
        if len(edges) < 2:
            return False
        return any(
            edges[i][2] == RW and edges[(i + 1) % len(edges)][2] == RW
            for i in range(len(edges))
        )

    def has_nonadjacent_rw_pair(self) -> bool:
        edges = self.edges()
        positions = [i for i, e in enumerate(edges) if e[2] == RW]
        n = len(edges)
        for ai in range(len(positions)):
            for bi in range(ai + 1, len(positions)):
                a, b = positions[ai], positions[bi]
                if (b - a) % n != 1 and (a - b) % n != 1:
                    return True
        return False

    def branch_uses(self) -> dict[ConstraintKey, set[str]]:
        """Which branches of which constraints the cycle draws edges from."""
        uses: dict[ConstraintKey, set[str]] = {}
        for _, origin in self.deps:
            if origin[0] in ("branch", "resolved"):
                uses.setdefault(origin[1], set()).add(origin[2])
        return uses

    def canonical(self) -> "WitnessCycle":
        """Rotate so the lexicographically smallest dependency leads."""
        if not self.deps:
            return self
        start = min(range(len(self.deps)), key=lambda i: self.deps[i][0])
        return WitnessCycle(self.deps[start:] + self.deps[:start])

    def label(self) -> str:
        parts = []
        for (src, dst, label, key), _ in self.deps:
            tag = label if key is None else f"{label}({key})"
            parts.append(f"{txn_label(src)} -{tag}->")
        parts.append(txn_label(self.deps[0][0][0]))
        return " ".join(parts)
