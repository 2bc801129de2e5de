"""Recruitment time-series likelihood and its O(changed-entries) updates.

For a candidate subgraph with adjacency A, pendant counts u, and coupon
matrix C, the number of susceptible edges just before each event is

    s = colsum(lower_triangle(A @ C)) + C' u

and the log likelihood of the waiting times w at rate lam is

    sum_{k not seed} log(lam * s_k)  -  lam * (s . w).

Seeds contribute only the censoring term through s . w.  Toggling one edge
{i, j} shifts s only on the events where i or j still held coupons, which
makes likelihood ratios cheap: a product over those entries times
exp(+/- lam * delta) with a closed-form time delta.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .graphs import CouponMatrix, ObservedData

if TYPE_CHECKING:  # pragma: no cover
    from .state import SubgraphState


def susceptible_counts(adj: np.ndarray, coupons: CouponMatrix, u: np.ndarray) -> np.ndarray:
    """Susceptible-edge count just before each recruitment event.

    Direct matrix-formula evaluation, O(n^2)..O(n^3); used to initialise
    chain state and as the reference the incremental updates are checked
    against.
    """
    a = np.asarray(adj, dtype=np.int64)
    c = coupons.entries.astype(np.int64)
    n = a.shape[0]
    if a.shape != (n, n) or c.shape != (n, n):
        raise ValueError("adjacency and coupon matrix must agree in size")
    uu = np.asarray(u, dtype=np.int64)
    if uu.shape != (n,) or np.any(uu < 0):
        raise ValueError("pendant counts must be a nonnegative length-n vector")
    ac = a @ c
    within = np.tril(ac).sum(axis=0)  # sum over rows i >= j of (A C)[i, j]
    pendant = c.T @ uu
    return within + pendant


def log_likelihood(w: np.ndarray, s: np.ndarray, lam: float, seeds) -> float:
    """Log likelihood of the waiting-time series for one candidate subgraph.

    Returns -inf when a non-seed event has no susceptible edge, which marks
    the state as incompatible with the recruitment having happened at all.
    """
    if lam <= 0:
        raise ValueError("rate must be positive")
    w = np.asarray(w, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    mask = _seed_mask(len(s), seeds)
    s_non = s[~mask]
    if np.any(s_non <= 0):
        return float("-inf")
    return float(np.sum(np.log(lam * s_non)) - lam * float(s @ w))


def lambda_mle(s: np.ndarray, w: np.ndarray, n: int, seeds) -> tuple[float, float]:
    """Closed-form rate estimate (n - #seeds) / (s . w) and its asymptotic variance."""
    mask = _seed_mask(n, seeds)
    n_non = int(n - mask.sum())
    if n_non <= 0:
        raise ValueError("need at least one non-seed recruitment to estimate the rate")
    sw = float(np.asarray(s, dtype=np.float64) @ np.asarray(w, dtype=np.float64))
    if sw <= 0:
        raise ValueError("total susceptible-edge time is zero; rate undefined")
    lam_hat = n_non / sw
    return lam_hat, lam_hat**2 / n_non


@dataclass(frozen=True)
class TimingCache:
    """Per-vertex coupon windows in event-index and clock-time form.

    t_star[i] is the earlier of the time vertex i spent its last coupon and
    the end of the study; window_hi[i] is the corresponding event index
    (== i when the vertex never held a coupon).
    """

    t: np.ndarray
    t_star: np.ndarray
    window_hi: np.ndarray

    @classmethod
    def from_coupons(cls, coupons: CouponMatrix, times: Sequence[float]) -> "TimingCache":
        t = np.asarray(times, dtype=np.float64)
        hi = coupons.window_hi
        return cls(t=t, t_star=t[hi], window_hi=hi)

    @classmethod
    def from_observed(cls, observed: ObservedData) -> "TimingCache":
        return cls.from_coupons(observed.coupon_matrix, observed.times)


def delta_time(i: int, j: int, timing: TimingCache) -> float:
    """Change in total susceptible-edge time when toggling edge {i, j}, i < j.

    Equals the coupon-weighted wait sums of both endpoints restricted to
    events after j; always nonnegative.
    """
    if not i < j:
        raise ValueError(f"need i < j in recruitment order, got ({i}, {j})")
    ts_i = timing.t_star[i]
    return float(ts_i - min(timing.t[j], ts_i) + timing.t_star[j] - timing.t[j])


class StateCorruptionError(RuntimeError):
    """Incremental susceptible counts went out of range; chain state is invalid."""


def apply_add(s: np.ndarray, i: int, j: int, coupons: CouponMatrix) -> np.ndarray:
    """Update s in place for the addition of edge {i, j}, i < j.

    Only events where i (beyond j) or j still held coupons change; each such
    entry drops by the number of endpoints holding a coupon there.
    """
    return _shift(s, i, j, coupons, -1)


def apply_remove(s: np.ndarray, i: int, j: int, coupons: CouponMatrix) -> np.ndarray:
    """Inverse of :func:`apply_add`: update s in place for edge removal."""
    return _shift(s, i, j, coupons, +1)


def _shift(s: np.ndarray, i: int, j: int, coupons: CouponMatrix, sign: int) -> np.ndarray:
    if not i < j:
        raise ValueError(f"need i < j, got ({i}, {j})")
    hi = coupons.window_hi
    s[j + 1 : hi[i] + 1] += sign
    s[j + 1 : hi[j] + 1] += sign
    touched = s[j + 1 : max(hi[i], hi[j]) + 1]
    if touched.size and touched.min() < 0:
        raise StateCorruptionError(
            f"susceptible count went negative after toggling edge ({i}, {j})"
        )
    return s


def log_ratio_add(state: "SubgraphState", i: int, j: int, lam: float, timing: TimingCache) -> float:
    """Log likelihood ratio for adding edge {i, j} to the current state.

    Iterates only over the events whose susceptible count changes.
    """
    return _log_ratio(state.s, state.observed.seed_mask, i, j, lam, timing, -1)


def log_ratio_remove(state: "SubgraphState", i: int, j: int, lam: float, timing: TimingCache) -> float:
    """Log likelihood ratio for removing edge {i, j} from the current state."""
    return _log_ratio(state.s, state.observed.seed_mask, i, j, lam, timing, +1)


def _log_ratio(
    s: np.ndarray,
    seed_mask: np.ndarray,
    i: int,
    j: int,
    lam: float,
    timing: TimingCache,
    sign: int,
) -> float:
    if not i < j:
        raise ValueError(f"need i < j, got ({i}, {j})")
    hi_i = int(timing.window_hi[i])
    hi_j = int(timing.window_hi[j])
    total = 0.0
    for k in range(j + 1, max(hi_i, hi_j) + 1):
        delta = (k <= hi_i) + (k <= hi_j)
        if delta == 0:
            continue
        new_s = s[k] + sign * delta
        floor = 0 if seed_mask[k] else 1
        if new_s < floor:
            raise StateCorruptionError(
                f"toggling edge ({i}, {j}) drives s[{k}] to {new_s}; move infeasible"
            )
        if not seed_mask[k]:
            total += np.log(new_s) - np.log(s[k])
    return float(total + sign * (-lam) * delta_time(i, j, timing))


def _seed_mask(n: int, seeds) -> np.ndarray:
    if isinstance(seeds, np.ndarray) and seeds.dtype == bool:
        if seeds.shape != (n,):
            raise ValueError("seed mask has wrong length")
        return seeds
    mask = np.zeros(n, dtype=bool)
    mask[list(seeds)] = True
    return mask
