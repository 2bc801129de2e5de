"""Synthetic population graphs and simulation of RDS recruitment.

Recruitment is a continuous-time race on the hidden population graph:
every edge joining a coupon-holding participant to an unrecruited
neighbour carries an independent waiting-time clock, the minimum fires,
and recruitment is competitive (the new recruit immediately leaves every
other recruiter's pool).  Three waiting-time laws are supported:

* ``exponential`` -- memoryless per-edge clocks at rate ``rate``; simulated
  with the total-rate shortcut (draw the event time at the summed rate and
  the winning edge uniformly).
* ``gamma`` -- per-edge Gamma(shape, mean 1/rate) clocks drawn when the
  edge first becomes active and cancelled when either endpoint becomes
  ineligible; not memoryless, so each edge keeps its scheduled firing time.
* ``turn-taking`` -- a comparison model with no clock: a recruiter is drawn
  uniformly, then one of its unrecruited neighbours uniformly, with unit
  spacing between events.
"""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .graphs import ObservedData, RecruitmentGraph

_VARIANTS = ("exponential", "gamma", "turn-taking")

# stagger between simultaneous entries, in units of the mean edge wait;
# keeps interview times strictly increasing with negligible censoring mass
_ENTRY_STAGGER = 1e-9


@dataclass
class PopulationGraph:
    """Simple undirected graph over vertices 0..N-1 with optional string labels."""

    neighbors: list[set[int]]
    labels: Optional[list[str]] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.neighbors)

    @property
    def edge_count(self) -> int:
        return sum(len(nb) for nb in self.neighbors) // 2

    def degree(self, v: int) -> int:
        return len(self.neighbors[v])

    def degrees(self) -> np.ndarray:
        return np.fromiter((len(nb) for nb in self.neighbors), dtype=np.int64)

    def has_edge(self, a: int, b: int) -> bool:
        return b in self.neighbors[a]

    @classmethod
    def from_edges(cls, n: int, edges, labels=None, meta=None) -> "PopulationGraph":
        nb: list[set[int]] = [set() for _ in range(n)]
        for a, b in edges:
            if a == b:
                continue
            nb[a].add(b)
            nb[b].add(a)
        return cls(neighbors=nb, labels=labels, meta=dict(meta or {}))


def generate_er_graph(n: int, p: float, rng: np.random.Generator) -> PopulationGraph:
    """Erdos-Renyi G(n, p): each unordered pair is an edge independently."""
    if n < 1:
        raise ValueError("need at least one vertex")
    if not 0.0 <= p <= 1.0:
        raise ValueError("edge probability must lie in [0, 1]")
    n_pairs = n * (n - 1) // 2
    if n_pairs <= 1 << 22:
        codes = np.flatnonzero(rng.random(n_pairs) < p)
    else:
        # same law: Binomial count, then a uniform subset of pair codes
        m = int(rng.binomial(n_pairs, p))
        chosen: set[int] = set()
        while len(chosen) < m:
            draw = rng.integers(0, n_pairs, size=m - len(chosen))
            chosen.update(int(x) for x in draw)
        codes = np.fromiter(chosen, dtype=np.int64)
    edges = [_decode_pair(int(k), n) for k in codes]
    return PopulationGraph.from_edges(
        n, edges, meta={"model": "erdos-renyi", "n": n, "p": p}
    )


def _decode_pair(code: int, n: int) -> tuple[int, int]:
    """Invert the row-major upper-triangle enumeration of vertex pairs."""
    i = int(n - 2 - np.floor((np.sqrt(8.0 * (n * (n - 1) // 2 - 1 - code) + 1) - 1) / 2))
    offset = i * (n - 1) - i * (i + 1) // 2
    j = code - offset + i + 1
    return i, int(j)


def load_population_graph(path) -> PopulationGraph:
    """Read an undirected edge list: two IDs per line, '#' starts a comment.

    Duplicate edges are merged, self-loops dropped (counted in ``meta``).
    """
    labels: dict[str, int] = {}
    edges: set[tuple[int, int]] = set()
    self_loops = 0
    duplicates = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two vertex IDs, got {raw!r}")
            a, b = parts
            if a == b:
                self_loops += 1
                continue
            ia = labels.setdefault(a, len(labels))
            ib = labels.setdefault(b, len(labels))
            key = (min(ia, ib), max(ia, ib))
            if key in edges:
                duplicates += 1
            edges.add(key)
    if not labels:
        warnings.warn(f"{path}: empty edge list, returning an empty graph")
    names = [None] * len(labels)
    for name, idx in labels.items():
        names[idx] = name
    if self_loops:
        warnings.warn(f"{path}: dropped {self_loops} self-loop(s)")
    return PopulationGraph.from_edges(
        len(labels),
        edges,
        labels=names,
        meta={"source": str(path), "self_loops_dropped": self_loops, "duplicate_lines": duplicates},
    )


@dataclass(frozen=True)
class RecruitmentModel:
    """Waiting-time law for the simulator.

    ``rate`` is events per unit time per susceptible edge.  ``shape`` only
    applies to the gamma variant; its mean is pinned to 1/rate so that
    shape=1 recovers the exponential model.
    """

    variant: str = "exponential"
    rate: float = 1.0
    shape: float = 1.0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"variant must be one of {_VARIANTS}")
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.shape <= 0:
            raise ValueError("shape must be positive")


@dataclass
class SimulationResult:
    """Hidden truth plus the observables a study would actually record."""

    observed: Optional[ObservedData]
    adjacency: np.ndarray  # true sampled subgraph, recruitment order
    population_vertices: np.ndarray  # population IDs in recruitment order
    events: list[tuple[float, int, int]]  # (time, recruiter sample idx or -1, recruit sample idx)
    model: RecruitmentModel
    truncated: bool = False

    @property
    def rate(self) -> float:
        return self.model.rate

    @property
    def n(self) -> int:
        return len(self.population_vertices)


class _Roster:
    """Bookkeeping shared by all recruitment variants."""

    def __init__(self, graph: PopulationGraph, coupons_per_subject: int):
        self.graph = graph
        self.coupons_per_subject = int(coupons_per_subject)
        self.order: list[int] = []  # population ids in entry order
        self.index: dict[int, int] = {}  # population id -> sample index
        self.coupons: dict[int, int] = {}
        self.recruiter_idx: list[int] = []
        self.times: list[float] = []

    def enter(self, v: int, time: float, recruiter: int) -> None:
        self.index[v] = len(self.order)
        self.order.append(v)
        self.coupons[v] = self.coupons_per_subject
        self.recruiter_idx.append(recruiter)
        if self.times and time <= self.times[-1]:
            time = np.nextafter(self.times[-1], np.inf)
        self.times.append(time)

    def unrecruited_neighbors(self, v: int) -> list[int]:
        return sorted(u for u in self.graph.neighbors[v] if u not in self.index)

    def susceptible_pairs(self) -> list[tuple[int, int]]:
        pairs = []
        for v in self.order:
            if self.coupons[v] > 0:
                pairs.extend((v, x) for x in self.unrecruited_neighbors(v))
        return pairs

    def draw_seed(self, rng: np.random.Generator, rule: str) -> Optional[int]:
        pool = np.array(
            [v for v in range(self.graph.n_vertices) if v not in self.index and self.graph.degree(v) > 0],
            dtype=np.int64,
        )
        if pool.size == 0:
            return None
        if rule == "degree":
            w = np.array([self.graph.degree(int(v)) for v in pool], dtype=np.float64)
            return int(rng.choice(pool, p=w / w.sum()))
        if rule != "uniform":
            raise ValueError(f"unknown seed rule {rule!r}")
        return int(rng.choice(pool))


def _initial_seeds(
    roster: _Roster,
    seeds: Union[int, Sequence[int]],
    rng: np.random.Generator,
    seed_rule: str,
    stagger: float,
) -> None:
    if isinstance(seeds, (int, np.integer)):
        wanted = int(seeds)
        chosen: list[int] = []
        for _ in range(wanted):
            v = roster.draw_seed(rng, seed_rule)
            if v is None:
                raise ValueError("not enough connected vertices to draw seeds from")
            chosen.append(v)
            roster.enter(v, len(roster.order) * stagger, -1)
    else:
        for v in seeds:
            v = int(v)
            if v in roster.index:
                raise ValueError(f"duplicate seed {v}")
            if roster.graph.degree(v) == 0:
                raise ValueError(f"seed {v} has no contacts in the population graph")
            roster.enter(v, len(roster.order) * stagger, -1)
    if not roster.order:
        raise ValueError("need at least one seed")


def _finish(
    roster: _Roster,
    graph: PopulationGraph,
    model: RecruitmentModel,
    truncated: bool,
    build_observed: bool,
) -> SimulationResult:
    n = len(roster.order)
    adjacency = np.zeros((n, n), dtype=np.uint8)
    for a in range(n):
        va = roster.order[a]
        for b in range(a + 1, n):
            if roster.order[b] in graph.neighbors[va]:
                adjacency[a, b] = adjacency[b, a] = 1
    events = [
        (roster.times[k], roster.recruiter_idx[k], k)
        for k in range(n)
    ]
    observed = None
    if build_observed:
        edges = tuple(
            (roster.recruiter_idx[k], k) for k in range(n) if roster.recruiter_idx[k] >= 0
        )
        seeds = frozenset(k for k in range(n) if roster.recruiter_idx[k] < 0)
        g = RecruitmentGraph(n=n, edges=edges, seeds=seeds)
        degrees = np.array([graph.degree(v) for v in roster.order], dtype=np.int64)
        coupons = np.full(n, roster.coupons_per_subject, dtype=np.int64)
        observed = ObservedData.assemble(g, degrees, np.array(roster.times), coupons)
    return SimulationResult(
        observed=observed,
        adjacency=adjacency,
        population_vertices=np.array(roster.order, dtype=np.int64),
        events=events,
        model=model,
        truncated=truncated,
    )


def simulate_rds(
    graph: PopulationGraph,
    n: int,
    seeds: Union[int, Sequence[int]],
    coupons_per_subject: int,
    model: RecruitmentModel,
    rng: np.random.Generator,
    *,
    stall: str = "reseed",
    seed_rule: str = "uniform",
    build_observed: bool = True,
    _method: str = "total-rate",
) -> SimulationResult:
    """Simulate one RDS study of target size n on a known population graph.

    When no susceptible edge remains before n is reached, ``stall`` decides
    whether to draw a fresh seed ("reseed") or stop with a truncated sample
    ("stop").
    """
    if n > graph.n_vertices:
        raise ValueError("target sample size exceeds the population size")
    if stall not in ("reseed", "stop"):
        raise ValueError("stall must be 'reseed' or 'stop'")
    if model.variant == "turn-taking":
        return simulate_turn_taking(
            graph, n, seeds, coupons_per_subject, rng,
            stall=stall, seed_rule=seed_rule, build_observed=build_observed,
        )
    roster = _Roster(graph, coupons_per_subject)
    stagger = _ENTRY_STAGGER / model.rate
    _initial_seeds(roster, seeds, rng, seed_rule, stagger)
    truncated = False
    if model.variant == "gamma":
        truncated = _run_gamma(roster, n, model, rng, stall, seed_rule, stagger)
    else:
        truncated = _run_exponential(roster, n, model, rng, stall, seed_rule, stagger, _method)
    return _finish(roster, graph, model, truncated, build_observed)


def _run_exponential(roster, n, model, rng, stall, seed_rule, stagger, method) -> bool:
    t = roster.times[-1]
    while len(roster.order) < n:
        pairs = roster.susceptible_pairs()
        if not pairs:
            if stall == "stop":
                return True
            v = roster.draw_seed(rng, seed_rule)
            if v is None:
                return True
            t += stagger
            roster.enter(v, t, -1)
            t = roster.times[-1]
            continue
        if method == "total-rate":
            t += rng.exponential(1.0 / (model.rate * len(pairs)))
            recruiter, recruit = pairs[rng.integers(len(pairs))]
        elif method == "edge-race":
            # reference implementation: give every edge its own clock
            waits = rng.exponential(1.0 / model.rate, size=len(pairs))
            win = int(np.argmin(waits))
            t += float(waits[win])
            recruiter, recruit = pairs[win]
        else:
            raise ValueError(f"unknown method {method!r}")
        roster.coupons[recruiter] -= 1
        roster.enter(recruit, t, roster.index[recruiter])
        t = roster.times[-1]
    return False


def _run_gamma(roster, n, model, rng, stall, seed_rule, stagger) -> bool:
    scale = 1.0 / (model.shape * model.rate)  # mean wait 1/rate
    heap: list[tuple[float, int, int, int]] = []  # (fire time, tiebreak, recruiter, recruit)
    counter = 0

    def activate(v: int, now: float) -> None:
        nonlocal counter
        if roster.coupons[v] <= 0:
            return
        for x in roster.unrecruited_neighbors(v):
            heapq.heappush(heap, (now + rng.gamma(model.shape, scale), counter, v, x))
            counter += 1

    for v in list(roster.order):
        activate(v, roster.times[roster.index[v]])
    while len(roster.order) < n:
        fired = None
        while heap:
            when, _, recruiter, recruit = heapq.heappop(heap)
            if roster.coupons.get(recruiter, 0) > 0 and recruit not in roster.index:
                fired = (when, recruiter, recruit)
                break
        if fired is None:
            if stall == "stop":
                return True
            v = roster.draw_seed(rng, seed_rule)
            if v is None:
                return True
            t = roster.times[-1] + stagger
            roster.enter(v, t, -1)
            activate(v, roster.times[-1])
            continue
        when, recruiter, recruit = fired
        roster.coupons[recruiter] -= 1
        roster.enter(recruit, when, roster.index[recruiter])
        activate(recruit, roster.times[-1])
    return False


def simulate_turn_taking(
    graph: PopulationGraph,
    n: int,
    seeds: Union[int, Sequence[int]],
    coupons_per_subject: int,
    rng: np.random.Generator,
    *,
    stall: str = "reseed",
    seed_rule: str = "uniform",
    build_observed: bool = True,
) -> SimulationResult:
    """Turn-taking comparison model: uniform recruiter, then uniform recruit.

    There is no waiting-time mechanism, so events are spaced one time unit
    apart purely to fill the observed-data fields.
    """
    if n > graph.n_vertices:
        raise ValueError("target sample size exceeds the population size")
    model = RecruitmentModel(variant="turn-taking", rate=1.0)
    roster = _Roster(graph, coupons_per_subject)
    _initial_seeds(roster, seeds, rng, seed_rule, stagger=1.0)
    truncated = False
    while len(roster.order) < n:
        recruiters = [
            v for v in roster.order
            if roster.coupons[v] > 0 and roster.unrecruited_neighbors(v)
        ]
        if not recruiters:
            if stall == "stop":
                truncated = True
                break
            v = roster.draw_seed(rng, seed_rule)
            if v is None:
                truncated = True
                break
            roster.enter(v, roster.times[-1] + 1.0, -1)
            continue
        recruiter = recruiters[rng.integers(len(recruiters))]
        pool = roster.unrecruited_neighbors(recruiter)
        recruit = pool[rng.integers(len(pool))]
        roster.coupons[recruiter] -= 1
        roster.enter(recruit, roster.times[-1] + 1.0, roster.index[recruiter])
    return _finish(roster, graph, model, truncated, build_observed)
