"""Brute-force simulation preorder, used as the correctness reference.

Deliberately naive: start from the label-equality relation and delete
pairs that fail the step-matching condition until nothing changes. The
fixpoint is the largest simulation. Intended for small structures only
(test harnesses cap it at 64 states).
"""

from __future__ import annotations

from .kripke import KripkeStructure


class StateRelation:
    """Explicit boolean relation over state pairs of one structure."""

    __slots__ = ("n", "matrix")

    def __init__(self, n: int, matrix: list[bytearray] | None = None):
        self.n = n
        if matrix is None:
            matrix = [bytearray(n) for _ in range(n)]
        if len(matrix) != n or any(len(row) != n for row in matrix):
            raise ValueError("matrix dimensions must equal n x n")
        self.matrix = matrix

    def contains(self, s: int, t: int) -> bool:
        return bool(self.matrix[s][t])

    def pairs(self):
        for s in range(self.n):
            row = self.matrix[s]
            for t in range(self.n):
                if row[t]:
                    yield (s, t)

    def is_reflexive(self) -> bool:
        return all(self.matrix[s][s] for s in range(self.n))

    def is_transitive(self) -> bool:
        for s in range(self.n):
            for t in range(self.n):
                if not self.matrix[s][t]:
                    continue
                row_t = self.matrix[t]
                row_s = self.matrix[s]
                for u in range(self.n):
                    if row_t[u] and not row_s[u]:
                        return False
        return True

    def is_preorder(self) -> bool:
        return self.is_reflexive() and self.is_transitive()

    def __eq__(self, other):
        if not isinstance(other, StateRelation):
            return NotImplemented
        return self.n == other.n and self.matrix == other.matrix

    def __repr__(self):
        return f"StateRelation(n={self.n}, pairs={sum(map(sum, self.matrix))})"


def brute_force_simulation(ks: KripkeStructure) -> StateRelation:
    """Largest simulation on ``ks`` by fixpoint iteration.

    Starts from all label-equal pairs and repeatedly deletes every (s, t)
    where some move of s cannot be matched by t; stops when a full sweep
    deletes nothing. The result is a preorder.
    """
    n = ks.num_states
    rel = StateRelation(n)
    for s in range(n):
        row = rel.matrix[s]
        for t in range(n):
            if ks.labels[s] == ks.labels[t]:
                row[t] = 1

    changed = True
    while changed:
        changed = False
        for s in range(n):
            row = rel.matrix[s]
            for t in range(n):
                if not row[t]:
                    continue
                ok = True
                for s2 in ks.succ[s]:
                    row2 = rel.matrix[s2]
                    if not any(row2[t2] for t2 in ks.succ[t]):
                        ok = False
                        break
                if not ok:
                    row[t] = 0
                    changed = True
    return rel


def simulation_partition(rel: StateRelation):
    """Equivalence classes of mutual relatedness plus the block order.

    Returns ``(blocks, leq)``: blocks ordered by smallest member, and
    ``leq[i][j]`` true iff representatives of block i relate into block j.
    Raises ``ValueError`` if ``rel`` is not a preorder.
    """
    if not rel.is_preorder():
        raise ValueError("relation is not a preorder")
    n = rel.n
    assigned = [-1] * n
    blocks: list[list[int]] = []
    for s in range(n):
        if assigned[s] >= 0:
            continue
        members = [
            t
            for t in range(s, n)
            if assigned[t] < 0 and rel.matrix[s][t] and rel.matrix[t][s]
        ]
        idx = len(blocks)
        for t in members:
            assigned[t] = idx
        blocks.append(members)
    # blocks already come out ordered by smallest member (scan order)
    k = len(blocks)
    leq = [[False] * k for _ in range(k)]
    for i in range(k):
        for j in range(k):
            leq[i][j] = bool(rel.matrix[blocks[i][0]][blocks[j][0]])
    return blocks, leq
