"""Observed-data model for respondent-driven sampling (RDS) recruitment.

An RDS study observes, for each of n subjects in recruitment order:
who recruited whom (a directed forest), a reported network degree, an
interview time, and the number of coupons handed out.  From these we
derive the coupon matrix C, whose entry C[i, j] says whether subject i
still held at least one coupon just before the j-th recruitment event.
Candidate reconstructions of the subjects' social subgraph are symmetric
adjacency matrices constrained by the recruitment forest and the reported
degrees ("compatibility").
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np


class CompatibilityError(ValueError):
    """Raised when an adjacency matrix cannot represent the sampled subgraph."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class InfeasibleCouponsError(ValueError):
    """A subject made more recruitments than the coupons it was issued."""

    def __init__(self, vertex: int, issued: int, recruits: int):
        self.vertex = vertex
        self.issued = issued
        self.recruits = recruits
        super().__init__(
            f"vertex {vertex} was issued {issued} coupons but recruited "
            f"{recruits} subjects"
        )


@dataclass(frozen=True)
class Violation:
    """One failed compatibility condition.

    condition 1: vertex set mismatch, 2: missing recruitment edge,
    3: within-sample edges exceed a reported degree.
    """

    condition: int
    vertex: Optional[int] = None
    edge: Optional[tuple[int, int]] = None

    def __str__(self) -> str:
        where = f"edge {self.edge}" if self.edge is not None else f"vertex {self.vertex}"
        return f"condition {self.condition} violated at {where}"


@dataclass(frozen=True)
class RecruitmentGraph:
    """Directed who-recruited-whom forest over n subjects in time order.

    Vertices are dense indices 0..n-1 ordered by recruitment time.  Every
    edge (i, j) has i < j; seeds have no in-edge, everyone else exactly one.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    seeds: frozenset[int]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one subject")
        object.__setattr__(self, "edges", tuple((int(a), int(b)) for a, b in self.edges))
        object.__setattr__(self, "seeds", frozenset(int(v) for v in self.seeds))
        in_deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range")
            if i >= j:
                raise ValueError(f"recruiter must precede recruit, got edge ({i}, {j})")
            in_deg[j] += 1
        for v in self.seeds:
            if not 0 <= v < self.n:
                raise ValueError(f"seed {v} out of range")
            if in_deg[v] != 0:
                raise ValueError(f"seed {v} has an incoming recruitment edge")
        non_seeds = [v for v in range(self.n) if v not in self.seeds]
        for v in non_seeds:
            if in_deg[v] != 1:
                raise ValueError(f"non-seed vertex {v} has {in_deg[v]} recruiters")
        if len(self.edges) != self.n - len(self.seeds):
            raise ValueError("edge count does not match non-seed count")

    @cached_property
    def recruiter(self) -> np.ndarray:
        """recruiter[j] = index of j's recruiter, -1 for seeds."""
        rec = np.full(self.n, -1, dtype=np.int64)
        for i, j in self.edges:
            rec[j] = i
        return rec

    @cached_property
    def recruits(self) -> tuple[tuple[int, ...], ...]:
        """recruits[i] = event indices recruited by i, in event order."""
        out: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            out[i].append(j)
        return tuple(tuple(sorted(r)) for r in out)

    @cached_property
    def seed_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[list(self.seeds)] = True
        return mask

    def out_degree(self, i: int) -> int:
        return len(self.recruits[i])

    def min_degrees(self) -> np.ndarray:
        """Undirected degree of each vertex within the recruitment forest."""
        d = np.fromiter((len(r) for r in self.recruits), dtype=np.int64, count=self.n)
        d += (~self.seed_mask).astype(np.int64)
        return d

    def undirected_closure(self) -> np.ndarray:
        """Symmetric adjacency of the recruitment edges (the minimal compatible state)."""
        adj = np.zeros((self.n, self.n), dtype=np.uint8)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = 1
        return adj

    @cached_property
    def edge_matrix(self) -> np.ndarray:
        return self.undirected_closure()


@dataclass(frozen=True)
class CouponMatrix:
    """Binary n x n matrix of coupon holdings just before each event.

    entries[i, j] = 1 iff subject i holds >= 1 coupon just before event j,
    counting the coupon spent on event j itself (left-limit semantics).
    Rows are contiguous blocks of ones starting right after the holder's
    own recruitment: coupons arrive once and never come back.
    """

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.uint8)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("coupon matrix must be square")
        n = m.shape[0]
        if np.any(m[np.tril_indices(n)] != 0):
            raise ValueError("a subject cannot hold coupons at or before its own entry")
        for i in range(n):
            ones = np.flatnonzero(m[i])
            if ones.size and not (ones[0] == i + 1 and np.all(np.diff(ones) == 1)):
                raise ValueError(f"coupon row {i} is not a contiguous block from entry")
        object.__setattr__(self, "entries", m)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def window_hi(self) -> np.ndarray:
        """Last event index at which each subject still holds a coupon.

        window_hi[i] == i encodes an empty window (never held a coupon);
        row i is all ones on events i+1 .. window_hi[i].
        """
        hi = np.arange(self.n, dtype=np.int64)
        for i in range(self.n):
            ones = np.flatnonzero(self.entries[i])
            if ones.size:
                hi[i] = ones[-1]
        return hi


def build_coupon_matrix(g: RecruitmentGraph, coupons_issued: Sequence[int]) -> CouponMatrix:
    """Coupon matrix implied by the recruitment forest and coupon endowments.

    Subject i starts with coupons_issued[i] coupons at its own event and
    spends one per recruit, in event order.  The coupon spent on event j is
    still counted just before j.

    Raises InfeasibleCouponsError if a subject recruited more people than
    it had coupons (real data with photocopied coupons triggers this; the
    ingestion layer repairs it before calling here).
    """
    coupons = np.asarray(coupons_issued, dtype=np.int64)
    if coupons.shape != (g.n,):
        raise ValueError("coupons_issued must have one entry per subject")
    if np.any(coupons < 0):
        raise ValueError("coupon counts must be nonnegative")
    m = np.zeros((g.n, g.n), dtype=np.uint8)
    for i in range(g.n):
        made = g.recruits[i]
        if len(made) > coupons[i]:
            raise InfeasibleCouponsError(i, int(coupons[i]), len(made))
        if coupons[i] == 0:
            continue
        # holds a coupon before event j iff fewer than coupons[i] recruits precede j
        hi = made[coupons[i] - 1] if len(made) == coupons[i] else g.n - 1
        m[i, i + 1 : hi + 1] = 1
    return CouponMatrix(m)


def check_compatibility(adj: np.ndarray, g: RecruitmentGraph, degrees: Sequence[int]) -> list[Violation]:
    """List every failed compatibility condition (empty list = compatible).

    A candidate subgraph must live on exactly the sampled vertices, contain
    every recruitment edge undirected, and give no vertex more within-sample
    edges than its reported degree.
    """
    a = np.asarray(adj)
    d = np.asarray(degrees, dtype=np.int64)
    if a.ndim != 2 or a.shape != (g.n, g.n):
        raise ValueError(f"adjacency must be {g.n} x {g.n}, got {a.shape}")
    if d.shape != (g.n,):
        raise ValueError("degree vector has wrong length")
    if np.any(a != a.T) or np.any(np.diag(a) != 0):
        raise ValueError("adjacency must be symmetric with a zero diagonal")
    out: list[Violation] = []
    for i, j in g.edges:
        if not a[i, j]:
            out.append(Violation(condition=2, edge=(i, j)))
    row = a.sum(axis=1)
    for v in np.flatnonzero(row > d):
        out.append(Violation(condition=3, vertex=int(v)))
    return out


def pendant_counts(adj: np.ndarray, degrees: Sequence[int]) -> np.ndarray:
    """Edge ends per vertex left dangling toward unsampled contacts.

    u[i] = degrees[i] - (within-sample edges of i); degree is conserved, so
    every entry must be nonnegative.
    """
    a = np.asarray(adj, dtype=np.int64)
    d = np.asarray(degrees, dtype=np.int64)
    u = d - a.sum(axis=1)
    bad = np.flatnonzero(u < 0)
    if bad.size:
        raise CompatibilityError([Violation(condition=3, vertex=int(v)) for v in bad])
    return u


@dataclass(frozen=True)
class ObservedData:
    """Everything an RDS study records: forest, degrees, times, coupons.

    Use :meth:`assemble` rather than the constructor; it validates the
    inputs and derives the coupon matrix, which is a deterministic function
    of the forest and the coupon endowments.
    """

    graph: RecruitmentGraph
    degrees: np.ndarray
    times: np.ndarray
    coupons_issued: np.ndarray
    coupon_matrix: CouponMatrix = field(repr=False)

    @classmethod
    def assemble(
        cls,
        graph: RecruitmentGraph,
        degrees: Sequence[int],
        times: Sequence[float],
        coupons_issued: Sequence[int],
    ) -> "ObservedData":
        d = np.asarray(degrees, dtype=np.int64)
        t = np.asarray(times, dtype=np.float64)
        c = np.asarray(coupons_issued, dtype=np.int64)
        n = graph.n
        for name, arr in (("degrees", d), ("times", t), ("coupons_issued", c)):
            if arr.shape != (n,):
                raise ValueError(f"{name} must have length {n}")
        if np.any(np.diff(t) <= 0):
            raise ValueError(
                "interview times must be strictly increasing; jitter tied "
                "timestamps during ingestion first"
            )
        if np.any(d < 1):
            raise ValueError("reported degrees must be positive")
        min_d = graph.min_degrees()
        low = np.flatnonzero(d < min_d)
        if low.size:
            raise ValueError(
                f"reported degree below recruitment-forest degree at vertices "
                f"{low.tolist()}; apply the degree-floor repair first"
            )
        cm = build_coupon_matrix(graph, c)
        return cls(graph=graph, degrees=d, times=t, coupons_issued=c, coupon_matrix=cm)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def seeds(self) -> frozenset[int]:
        return self.graph.seeds

    @property
    def seed_mask(self) -> np.ndarray:
        return self.graph.seed_mask

    @property
    def n_seeds(self) -> int:
        return len(self.graph.seeds)

    @cached_property
    def waits(self) -> np.ndarray:
        """Inter-event waiting times; the first event waits zero by convention."""
        w = np.diff(self.times, prepend=self.times[0])
        return w
