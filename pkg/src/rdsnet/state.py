"""Mutable candidate-subgraph state for the edge add/remove chain.

A state bundles the symmetric adjacency, pendant counts u, susceptible
counts s, and the number of feasible add/remove proposals.  The counts are
maintained incrementally across accepted moves; ``recount_feasible`` and
``verify`` recompute everything from scratch and are used as oracles and
for periodic spot checks during long chain runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .graphs import CompatibilityError, ObservedData, check_compatibility, pendant_counts
from .likelihood import apply_add, apply_remove, susceptible_counts


@dataclass(frozen=True)
class Move:
    kind: Literal["add", "remove"]
    i: int
    j: int


class SubgraphState:
    """Single-writer mutable state; safe for concurrent readers between moves."""

    def __init__(self, observed: ObservedData, adj: np.ndarray):
        violations = check_compatibility(adj, observed.graph, observed.degrees)
        if violations:
            raise CompatibilityError(violations)
        self.observed = observed
        self.adj = np.ascontiguousarray(adj, dtype=np.uint8)
        self.u = pendant_counts(self.adj, observed.degrees)
        self.s = susceptible_counts(self.adj, observed.coupon_matrix, self.u)
        self.recruit_mask = observed.graph.edge_matrix
        self._n_recruit_edges = len(observed.graph.edges)
        self.pos_u, self.both_pos_edges, self.n_edges = self._census()

    @classmethod
    def initial(cls, observed: ObservedData) -> "SubgraphState":
        """Minimal compatible state: the undirected recruitment forest."""
        return cls(observed, observed.graph.undirected_closure())

    @classmethod
    def from_extra_edges(cls, observed: ObservedData, extra) -> "SubgraphState":
        adj = observed.graph.undirected_closure()
        for i, j in extra:
            adj[i, j] = adj[j, i] = 1
        return cls(observed, adj)

    # -- feasible-move counts ------------------------------------------------

    @property
    def n(self) -> int:
        return self.observed.n

    @property
    def add_count(self) -> int:
        p = self.pos_u
        return p * (p - 1) // 2 - self.both_pos_edges

    @property
    def remove_count(self) -> int:
        return self.n_edges - self._n_recruit_edges

    def _census(self) -> tuple[int, int, int]:
        pos = int(np.count_nonzero(self.u > 0))
        ii, jj = np.nonzero(np.triu(self.adj, 1))
        both = int(np.sum((self.u[ii] > 0) & (self.u[jj] > 0)))
        return pos, both, len(ii)

    def recount_feasible(self) -> tuple[int, int]:
        """Brute-force double loop over vertex pairs; the counting oracle."""
        add = rem = 0
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if self.adj[i, j]:
                    if not self.recruit_mask[i, j]:
                        rem += 1
                elif self.u[i] >= 1 and self.u[j] >= 1:
                    add += 1
        return add, rem

    # -- moves ----------------------------------------------------------------

    def is_feasible(self, move: Move) -> bool:
        i, j = move.i, move.j
        if not 0 <= i < j < self.n:
            return False
        if move.kind == "add":
            return not self.adj[i, j] and self.u[i] >= 1 and self.u[j] >= 1
        return bool(self.adj[i, j]) and not self.recruit_mask[i, j]

    def counts_after(self, move: Move) -> tuple[int, int]:
        """Feasible (add, remove) counts of the state the move would produce."""
        d_pos, d_both, d_edges = self._count_deltas(move)
        p = self.pos_u + d_pos
        return p * (p - 1) // 2 - (self.both_pos_edges + d_both), (
            self.n_edges + d_edges - self._n_recruit_edges
        )

    def _count_deltas(self, move: Move) -> tuple[int, int, int]:
        i, j, u, adj = move.i, move.j, self.u, self.adj
        ui, uj = int(u[i]), int(u[j])
        d_pos = d_both = 0
        if move.kind == "add":
            # endpoints dropping to zero pendant ends leave the addable pool
            if ui == 1:
                d_pos -= 1
                d_both -= int(np.sum((adj[i] == 1) & (u > 0)))
            if uj == 1:
                d_pos -= 1
                d_both -= int(np.sum((adj[j] == 1) & (u > 0)))
            if ui >= 2 and uj >= 2:
                d_both += 1
            return d_pos, d_both, 1
        if ui > 0 and uj > 0:
            d_both -= 1  # the removed edge itself
        if ui == 0:
            d_pos += 1
            mask = (adj[i] == 1) & (u > 0)
            mask[j] = False
            d_both += int(np.sum(mask))
        if uj == 0:
            d_pos += 1
            mask = (adj[j] == 1) & (u > 0)
            mask[i] = False
            d_both += int(np.sum(mask))
        return d_pos, d_both, -1

    def apply_move(self, move: Move) -> None:
        if not self.is_feasible(move):
            raise ValueError(f"infeasible move {move}")
        d_pos, d_both, d_edges = self._count_deltas(move)
        i, j = move.i, move.j
        if move.kind == "add":
            apply_add(self.s, i, j, self.observed.coupon_matrix)
            self.adj[i, j] = self.adj[j, i] = 1
            self.u[i] -= 1
            self.u[j] -= 1
        else:
            apply_remove(self.s, i, j, self.observed.coupon_matrix)
            self.adj[i, j] = self.adj[j, i] = 0
            self.u[i] += 1
            self.u[j] += 1
        self.pos_u += d_pos
        self.both_pos_edges += d_both
        self.n_edges += d_edges

    # -- inspection ------------------------------------------------------------

    def extra_edges(self) -> np.ndarray:
        """Non-recruitment edges as an array of (i, j) pairs, i < j."""
        ii, jj = np.nonzero(np.triu(self.adj & ~self.recruit_mask, 1))
        return np.column_stack([ii, jj]).astype(np.int64)

    def edge_list(self) -> np.ndarray:
        ii, jj = np.nonzero(np.triu(self.adj, 1))
        return np.column_stack([ii, jj]).astype(np.int64)

    def copy(self) -> "SubgraphState":
        return SubgraphState(self.observed, self.adj.copy())

    def verify(self) -> None:
        """Recompute u, s, and the proposal counts from scratch; raise on drift."""
        obs = self.observed
        violations = check_compatibility(self.adj, obs.graph, obs.degrees)
        if violations:
            raise CompatibilityError(violations)
        u_ref = pendant_counts(self.adj, obs.degrees)
        if not np.array_equal(u_ref, self.u):
            raise AssertionError("pendant counts drifted from recomputation")
        s_ref = susceptible_counts(self.adj, obs.coupon_matrix, u_ref)
        if not np.array_equal(s_ref, self.s):
            raise AssertionError("susceptible counts drifted from recomputation")
        add_ref, rem_ref = self.recount_feasible()
        if (add_ref, rem_ref) != (self.add_count, self.remove_count):
            raise AssertionError(
                f"feasible counts drifted: kept ({self.add_count}, {self.remove_count}), "
                f"recounted ({add_ref}, {rem_ref})"
            )
