"""Posterior sampling and MAP search for the hidden subgraph and rate.

The target is the joint posterior over (subgraph, rate) given the observed
recruitment data: the waiting-time likelihood times a uniform prior over
compatible subgraphs times a Gamma prior on the rate.  Graph moves are
single edge additions/removals proposed uniformly over all feasible pairs;
rate moves use an independence proposal built from the normal
approximation around the conditional maximum-likelihood estimate.  MAP
estimation anneals the same graph kernel while pinning the rate at its
conditional posterior mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._kernel import recount_feasible, run_block, seed_kernel_rng
from .graphs import ObservedData
from .likelihood import (
    StateCorruptionError,
    TimingCache,
    lambda_mle,
    log_ratio_add,
    log_ratio_remove,
    susceptible_counts,
)
from .state import Move, SubgraphState


@dataclass(frozen=True)
class PriorSpec:
    """Gamma prior on the recruitment rate, density proportional to
    lam^(shape-1) * exp(-rate * lam)."""

    shape: float
    rate: float

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError("prior shape and rate must be positive")

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def sd(self) -> float:
        return math.sqrt(self.shape) / self.rate

    @classmethod
    def from_mean_sd(cls, mean: float, sd: float) -> "PriorSpec":
        if mean <= 0 or sd <= 0:
            raise ValueError("prior mean and sd must be positive")
        return cls(shape=(mean / sd) ** 2, rate=mean / sd**2)

    def log_density(self, lam: float) -> float:
        """Unnormalised log density; -inf outside the support."""
        if lam <= 0:
            return float("-inf")
        return (self.shape - 1.0) * math.log(lam) - self.rate * lam


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric temperature ladder gamma_i = max(floor, gamma0 * decay^i)."""

    gamma0: float = 1.0
    decay: float = 0.999
    floor: float = 1e-3

    def __post_init__(self):
        if self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must lie strictly between 0 and 1")
        if self.floor <= 0:
            raise ValueError("temperature floor must be positive")

    def gamma(self, sweep: int) -> float:
        return max(self.floor, self.gamma0 * self.decay**sweep)


@dataclass(frozen=True)
class ChainConfig:
    """Knobs for one chain run.

    A sweep is ``proposals_per_sweep`` graph proposals (default: one per
    vertex pair) followed by at most one rate update.  The trace is
    recorded every ``thin`` sweeps; posterior summaries (mean adjacency,
    samples, mean rate) use sweeps after ``burn_in``.
    """

    sweeps: int = 500
    burn_in: int = 100
    thin: int = 1
    proposals_per_sweep: Optional[int] = None
    lambda_every: int = 1  # 0 disables rate updates entirely
    anneal: AnnealSchedule = field(default_factory=AnnealSchedule)
    seed: int = 0
    mode: str = "posterior"
    lambda0: Optional[float] = None
    record_edges: bool = False
    record_moves: bool = False
    spot_check_every: int = 50  # sweeps between full consistency recomputations; 0 = off
    max_tries_factor: int = 100  # proposal rejection cap is this times n^2

    def __post_init__(self):
        if self.sweeps < 0 or self.burn_in < 0:
            raise ValueError("sweep counts cannot be negative")
        if self.thin < 1:
            raise ValueError("thinning interval must be at least 1")
        if self.lambda_every < 0:
            raise ValueError("lambda_every must be nonnegative")
        if self.mode not in ("posterior", "map"):
            raise ValueError("mode must be 'posterior' or 'map'")
        if self.proposals_per_sweep is not None and self.proposals_per_sweep < 1:
            raise ValueError("proposals_per_sweep must be positive")
        if self.max_tries_factor < 1:
            raise ValueError("max_tries_factor must be positive")

    def n_props(self, n: int) -> int:
        return self.proposals_per_sweep or n * (n - 1) // 2


@dataclass
class MoveLog:
    """Per-proposal record of a chain run (for kernel validation)."""

    i: np.ndarray
    j: np.ndarray
    is_add: np.ndarray
    accepted: np.ndarray


@dataclass
class ChainTrace:
    sweep: np.ndarray
    edge_count: np.ndarray
    lam: np.ndarray
    log_posterior: np.ndarray
    accept_rate: np.ndarray
    moves: Optional[MoveLog] = None


@dataclass
class PosteriorResult:
    trace: ChainTrace
    mean_adjacency: np.ndarray
    lambda_mean: float
    samples: list
    state: SubgraphState
    lam: float
    config: ChainConfig


@dataclass
class MapResult:
    adjacency: np.ndarray
    lam: float           # rate attached to the best state (conditional posterior mode)
    lam_mle: float       # plain maximum-likelihood rate at the best graph
    log_posterior: float
    trace: ChainTrace
    config: ChainConfig


# --------------------------------------------------------------------------
# single-move operations (Python surface; the compiled kernel mirrors these)
# --------------------------------------------------------------------------


def enumerate_feasible_moves(state: SubgraphState) -> list[Move]:
    out = []
    for i in range(state.n):
        for j in range(i + 1, state.n):
            if state.adj[i, j]:
                if not state.recruit_mask[i, j]:
                    out.append(Move("remove", i, j))
            elif state.u[i] >= 1 and state.u[j] >= 1:
                out.append(Move("add", i, j))
    return out


def propose_move(
    state: SubgraphState, rng: np.random.Generator, max_tries: Optional[int] = None
) -> Optional[Move]:
    """Draw a move uniformly over the feasible add/remove set, or None if empty.

    Uses the pick-a-pair-and-retry loop; after ``max_tries`` rejections
    (default 100 n^2) it falls back to enumerating the feasible set, which
    guarantees termination near saturation.
    """
    n = state.n
    if state.add_count + state.remove_count == 0:
        return None
    cap = max_tries if max_tries is not None else 100 * n * n
    for _ in range(cap):
        a = int(rng.integers(n))
        b = int(rng.integers(n))
        if a == b:
            continue
        i, j = (a, b) if a < b else (b, a)
        if not state.adj[i, j]:
            if state.u[i] >= 1 and state.u[j] >= 1:
                return Move("add", i, j)
        elif not state.recruit_mask[i, j]:
            return Move("remove", i, j)
    moves = enumerate_feasible_moves(state)
    return moves[int(rng.integers(len(moves)))]


def acceptance_probability(log_alpha: float) -> float:
    return math.exp(min(log_alpha, 0.0))


def mh_step_graph(
    state: SubgraphState,
    lam: float,
    timing: TimingCache,
    rng: np.random.Generator,
    inv_gamma: float = 1.0,
) -> bool:
    """One Metropolis-Hastings edge move; mutates ``state`` on acceptance."""
    move = propose_move(state, rng)
    if move is None:
        return False
    if move.kind == "add":
        llr = log_ratio_add(state, move.i, move.j, lam, timing)
    else:
        llr = log_ratio_remove(state, move.i, move.j, lam, timing)
    new_add, new_rem = state.counts_after(move)
    if new_add + new_rem <= 0:
        return False
    log_alpha = inv_gamma * llr + math.log(state.add_count + state.remove_count) - math.log(
        new_add + new_rem
    )
    if log_alpha >= 0.0 or math.log(rng.random()) < log_alpha:
        state.apply_move(move)
        return True
    return False


def _lambda_mh(
    sw: float,
    n_non: int,
    lam: float,
    prior: Optional[PriorSpec],
    rng: np.random.Generator,
) -> tuple[float, bool]:
    """Independence MH step from the normal approximation around the MLE."""
    lam_hat = n_non / sw
    sigma = lam_hat / math.sqrt(n_non)
    prop = float(rng.normal(lam_hat, sigma))
    if prop <= 0.0:
        return lam, False  # outside the support
    d_log_lik = n_non * (math.log(prop) - math.log(lam)) - (prop - lam) * sw
    d_log_prior = 0.0
    if prior is not None:
        d_log_prior = prior.log_density(prop) - prior.log_density(lam)
    d_log_proposal = ((prop - lam_hat) ** 2 - (lam - lam_hat) ** 2) / (2.0 * sigma**2)
    log_alpha = d_log_lik + d_log_prior + d_log_proposal
    if log_alpha >= 0.0 or math.log(rng.random()) < log_alpha:
        return prop, True
    return lam, False


def mh_step_lambda(
    state: SubgraphState,
    lam: float,
    prior: Optional[PriorSpec],
    rng: np.random.Generator,
) -> tuple[float, bool]:
    """Metropolis-Hastings update of the rate given the current subgraph."""
    sw = float(state.s @ state.observed.waits)
    n_non = state.n - state.observed.n_seeds
    return _lambda_mh(sw, n_non, lam, prior, rng)


def _lambda_conditional_mode(
    sw: float, n_non: int, prior: Optional[PriorSpec]
) -> float:
    """Mode of the conditional posterior of the rate; the MLE under a flat prior."""
    if prior is None:
        return n_non / sw
    return max((n_non + prior.shape - 1.0) / (sw + prior.rate), 1e-12)


# --------------------------------------------------------------------------
# chain driver
# --------------------------------------------------------------------------


class _CompiledChain:
    """Owns the flat arrays shared with the compiled kernel."""

    def __init__(self, observed: ObservedData, state: SubgraphState, kernel_seed: int):
        self.observed = observed
        self.state = state
        timing = TimingCache.from_observed(observed)
        self.is_seed = observed.seed_mask.astype(np.uint8)
        self.win_hi = observed.coupon_matrix.window_hi.astype(np.int64)
        self.t = observed.times.astype(np.float64)
        self.t_star = timing.t_star.astype(np.float64)
        self.w = observed.waits.astype(np.float64)
        self.n_non = state.n - observed.n_seeds
        self.counts = np.array(
            [state.pos_u, state.both_pos_edges, state.n_edges, len(observed.graph.edges)],
            dtype=np.int64,
        )
        self.running = np.array(
            [self._exact_sum_log_s(), float(state.s @ self.w)], dtype=np.float64
        )
        seed_kernel_rng(np.uint32(kernel_seed))

    def _exact_sum_log_s(self) -> float:
        s_non = self.state.s[~self.observed.seed_mask]
        return float(np.sum(np.log(s_non.astype(np.float64))))

    def lam_terms(self, lam: float, prior: Optional[PriorSpec]) -> float:
        terms = self.n_non * math.log(lam)
        if prior is not None:
            terms += prior.log_density(lam)
        return terms

    def log_posterior(self, lam: float, prior: Optional[PriorSpec]) -> float:
        return self.lam_terms(lam, prior) + self.running[0] - lam * self.running[1]

    @property
    def s_dot_w(self) -> float:
        return float(self.running[1])

    def run_block(
        self,
        lam: float,
        inv_gamma: float,
        n_props: int,
        max_tries: int,
        lam_terms: float,
        track_best: bool,
        best_val: np.ndarray,
        best_adj: np.ndarray,
        record: bool = False,
        logs: Optional[tuple] = None,
    ) -> tuple[int, int]:
        st = self.state
        if logs is None:
            logs = (
                np.empty(0, dtype=np.int32),
                np.empty(0, dtype=np.int32),
                np.empty(0, dtype=np.uint8),
                np.empty(0, dtype=np.uint8),
            )
        return run_block(
            st.adj,
            st.recruit_mask,
            self.is_seed,
            st.u,
            st.s,
            self.win_hi,
            self.t,
            self.t_star,
            float(lam),
            float(inv_gamma),
            np.int64(n_props),
            np.int64(max_tries),
            self.counts,
            self.running,
            float(lam_terms),
            np.uint8(track_best),
            best_val,
            best_adj,
            np.uint8(record),
            *logs,
        )

    def sync_state_counts(self) -> None:
        self.state.pos_u = int(self.counts[0])
        self.state.both_pos_edges = int(self.counts[1])
        self.state.n_edges = int(self.counts[2])

    def spot_check(self) -> None:
        """Full recomputation of incremental quantities; raises on drift."""
        self.sync_state_counts()
        self.state.verify()
        exact_sum = self._exact_sum_log_s()
        exact_sw = float(self.state.s @ self.w)
        for kept, exact, name in (
            (self.running[0], exact_sum, "sum log s"),
            (self.running[1], exact_sw, "s.w"),
        ):
            if abs(kept - exact) > 1e-6 * max(1.0, abs(exact)):
                raise StateCorruptionError(
                    f"running {name} drifted: kept {kept!r}, exact {exact!r}"
                )
        self.running[0] = exact_sum
        self.running[1] = exact_sw


def _initial_lambda(chain: _CompiledChain, config: ChainConfig) -> float:
    if config.lambda0 is not None:
        if config.lambda0 <= 0:
            raise ValueError("lambda0 must be positive")
        return config.lambda0
    lam_hat, _ = lambda_mle(
        chain.state.s, chain.w, chain.state.n, chain.observed.seed_mask
    )
    return lam_hat


def run_posterior(
    observed: ObservedData,
    prior: Optional[PriorSpec],
    config: ChainConfig,
) -> PosteriorResult:
    """Metropolis-within-Gibbs sampling of (subgraph, rate).

    Starts from the undirected recruitment forest with the rate at its MLE
    there, alternates graph sweeps with one rate update, and returns the
    trace plus posterior summaries over the post-burn-in sweeps.
    """
    rng, kernel_seed = _derive_streams(config.seed)
    state = SubgraphState.initial(observed)
    chain = _CompiledChain(observed, state, kernel_seed)
    lam = _initial_lambda(chain, config)
    n = observed.n
    n_props = config.n_props(n)
    max_tries = config.max_tries_factor * n * n
    dummy_val = np.zeros(1, dtype=np.float64)
    dummy_adj = np.zeros((1, 1), dtype=np.uint8)

    trace_rows = []
    move_logs = [] if config.record_moves else None
    mean_acc = np.zeros((n, n), dtype=np.float64)
    mean_count = 0
    lam_sum = 0.0
    samples: list = []

    trace_rows.append((0, state.n_edges, lam, chain.log_posterior(lam, prior), 0.0))
    for sweep in range(1, config.sweeps + 1):
        logs = None
        if config.record_moves:
            logs = (
                np.full(n_props, -1, dtype=np.int32),
                np.full(n_props, -1, dtype=np.int32),
                np.zeros(n_props, dtype=np.uint8),
                np.zeros(n_props, dtype=np.uint8),
            )
        accepted, _ = chain.run_block(
            lam, 1.0, n_props, max_tries, 0.0, False, dummy_val, dummy_adj,
            record=config.record_moves, logs=logs,
        )
        if config.record_moves:
            move_logs.append(logs)
        if config.lambda_every and sweep % config.lambda_every == 0:
            lam, _ = _lambda_mh(chain.s_dot_w, chain.n_non, lam, prior, rng)
        if config.spot_check_every and sweep % config.spot_check_every == 0:
            chain.spot_check()
        if sweep > config.burn_in:
            mean_acc += state.adj
            mean_count += 1
            lam_sum += lam
            if config.record_edges and (sweep - config.burn_in) % config.thin == 0:
                samples.append(state.edge_list())
        if sweep % config.thin == 0:
            trace_rows.append(
                (sweep, int(chain.counts[2]), lam,
                 chain.log_posterior(lam, prior), accepted / n_props)
            )
    chain.spot_check()
    trace = _build_trace(trace_rows, move_logs)
    mean_adj = mean_acc / mean_count if mean_count else state.adj.astype(np.float64)
    lam_mean = lam_sum / mean_count if mean_count else lam
    return PosteriorResult(
        trace=trace,
        mean_adjacency=mean_adj,
        lambda_mean=lam_mean,
        samples=samples,
        state=state,
        lam=lam,
        config=config,
    )


def run_map(
    observed: ObservedData,
    prior: Optional[PriorSpec],
    config: ChainConfig,
) -> MapResult:
    """Simulated-annealing search for the joint posterior mode.

    The graph kernel is annealed on a geometric temperature ladder; after
    every sweep the rate is pinned at its conditional posterior mode.  The
    best (graph, rate) pair ever visited is returned.
    """
    rng, kernel_seed = _derive_streams(config.seed)
    state = SubgraphState.initial(observed)
    chain = _CompiledChain(observed, state, kernel_seed)
    lam = _initial_lambda(chain, config)
    n = observed.n
    n_props = config.n_props(n)
    max_tries = config.max_tries_factor * n * n

    best_val = np.array([chain.log_posterior(lam, prior)], dtype=np.float64)
    best_adj = state.adj.copy()
    best_lam = lam
    trace_rows = [(0, state.n_edges, lam, float(best_val[0]), 0.0)]
    for sweep in range(1, config.sweeps + 1):
        gamma = config.anneal.gamma(sweep - 1)
        accepted, improved = chain.run_block(
            lam,
            1.0 / gamma,
            n_props,
            max_tries,
            chain.lam_terms(lam, prior),
            True,
            best_val,
            best_adj,
        )
        if improved:
            best_lam = lam
        if config.lambda_every and sweep % config.lambda_every == 0:
            lam = _lambda_conditional_mode(chain.s_dot_w, chain.n_non, prior)
            cur = chain.log_posterior(lam, prior)
            if cur > best_val[0]:
                best_val[0] = cur
                best_adj[:, :] = state.adj
                best_lam = lam
        if config.spot_check_every and sweep % config.spot_check_every == 0:
            chain.spot_check()
        if sweep % config.thin == 0:
            trace_rows.append(
                (sweep, int(chain.counts[2]), lam,
                 chain.log_posterior(lam, prior), accepted / n_props)
            )
    chain.spot_check()
    lam_mle_best = _mle_at(observed, best_adj)
    return MapResult(
        adjacency=best_adj,
        lam=best_lam,
        lam_mle=lam_mle_best,
        log_posterior=float(best_val[0]),
        trace=_build_trace(trace_rows, None),
        config=config,
    )


def _mle_at(observed: ObservedData, adj: np.ndarray) -> float:
    from .graphs import pendant_counts

    u = pendant_counts(adj, observed.degrees)
    s = susceptible_counts(adj, observed.coupon_matrix, u)
    lam_hat, _ = lambda_mle(s, observed.waits, observed.n, observed.seed_mask)
    return lam_hat


def _build_trace(rows, move_logs) -> ChainTrace:
    arr = np.array(rows, dtype=np.float64)
    moves = None
    if move_logs:
        moves = MoveLog(
            i=np.concatenate([l[0] for l in move_logs]),
            j=np.concatenate([l[1] for l in move_logs]),
            is_add=np.concatenate([l[2] for l in move_logs]),
            accepted=np.concatenate([l[3] for l in move_logs]),
        )
    return ChainTrace(
        sweep=arr[:, 0].astype(np.int64),
        edge_count=arr[:, 1].astype(np.int64),
        lam=arr[:, 2],
        log_posterior=arr[:, 3],
        accept_rate=arr[:, 4],
        moves=moves,
    )


def _derive_streams(seed: int) -> tuple[np.random.Generator, int]:
    ss = np.random.SeedSequence(seed)
    py_ss, kernel_ss = ss.spawn(2)
    kernel_seed = int(kernel_ss.generate_state(1, dtype=np.uint32)[0])
    return np.random.default_rng(py_ss), kernel_seed


# --------------------------------------------------------------------------
# empirical prior bounds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PriorBounds:
    """Data-driven bracket for the rate with a matching Gamma prior family."""

    lam_lo: float
    lam_hi: float

    @property
    def lam_mean(self) -> float:
        return 0.5 * (self.lam_lo + self.lam_hi)

    def gamma_prior(self, eta: float) -> PriorSpec:
        """Gamma prior with the bracket midpoint as its mean and shape ``eta``."""
        return PriorSpec(shape=eta, rate=eta / self.lam_mean)


def empirical_prior_bounds(observed: ObservedData) -> PriorBounds:
    """Bracket the rate MLE using degree-based susceptible-edge bounds.

    The susceptible-edge count before event k is at most the cumulative
    free degree sum_{i<k} (d_i - [i not seed]) and at least the cumulative
    pending-recruitment count sum_{i<k} (n_i - [i not seed]), which bound
    the MLE from below and above respectively.
    """
    d = observed.degrees.astype(np.float64)
    w = observed.waits
    non_seed = (~observed.seed_mask).astype(np.float64)
    n_rec = np.fromiter(
        (len(r) for r in observed.graph.recruits), dtype=np.float64, count=observed.n
    )
    n_non = observed.n - observed.n_seeds
    if n_non <= 0:
        raise ValueError("need at least one non-seed recruitment")
    denom_lo = _bound_denominator(d - non_seed, w)
    denom_hi = _bound_denominator(n_rec - non_seed, w)
    if denom_lo <= 0 or denom_hi <= 0:
        raise ValueError("no elapsed susceptible-edge time; bounds undefined")
    return PriorBounds(lam_lo=n_non / denom_lo, lam_hi=n_non / denom_hi)


def _bound_denominator(per_vertex: np.ndarray, w: np.ndarray) -> float:
    prefix = np.concatenate(([0.0], np.cumsum(per_vertex)[:-1]))  # sums over i < k
    return float(np.sum(w * prefix))
