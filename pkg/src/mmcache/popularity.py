"""Zipf request model and the MPC / DAC cache policies.

Contents are 1-indexed by popularity rank throughout (content 1 is the most
popular), matching how cache sets are usually written down.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from math import comb
from functools import lru_cache

import numpy as np

EXACT_PARTITION_MAX = 24  # largest 2K solved by exhaustive search


@dataclass(frozen=True)
class PopularityModel:
    xi: float
    L: int
    pmf: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)

    def sample(self, rng: np.random.Generator, size=None):
        """Draw 1-based content indices."""
        u = rng.random(size)
        idx = np.searchsorted(self.cdf, u, side="right") + 1
        return np.minimum(idx, self.L)


@dataclass(frozen=True)
class CacheAssignment:
    kind: str  # "MPC" or "DAC"
    cache_a: tuple
    cache_b: tuple
    h_a: float
    h_b: float
    e_a: float
    e_b: float

    @property
    def imbalance(self) -> float:
        return abs(self.h_a - self.h_b)


def zipf_pmf(xi: float, L: int) -> PopularityModel:
    if L < 1 or int(L) != L:
        raise ValueError(f"library size must be a positive integer, got {L!r}")
    if not xi >= 0:
        raise ValueError(f"Zipf exponent must be >= 0, got {xi!r}")
    weights = np.arange(1, L + 1, dtype=float) ** (-xi)
    pmf = weights / weights.sum()
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    pmf.setflags(write=False)
    cdf.setflags(write=False)
    return PopularityModel(float(xi), int(L), pmf, cdf)


def _check_cache(cache, pm: PopularityModel) -> np.ndarray:
    idx = np.asarray(sorted(cache), dtype=int)
    if idx.size and (idx[0] < 1 or idx[-1] > pm.L):
        raise ValueError(f"cache indices must lie in [1, {pm.L}]")
    if np.unique(idx).size != idx.size:
        raise ValueError("cache contains duplicate contents")
    return idx


def hit_probability(cache, pm: PopularityModel) -> float:
    idx = _check_cache(cache, pm)
    if idx.size == 0:
        return 0.0
    return float(pm.pmf[idx - 1].sum())


def h_mpc(K: int, pm: PopularityModel) -> float:
    if K > pm.L:
        raise ValueError("cache larger than library")
    return float(pm.pmf[:K].sum())


def h_dac(K: int, pm: PopularityModel) -> float:
    """Balanced-partition approximation: half the mass of the top 2K contents."""
    if 2 * K > pm.L:
        raise ValueError(f"2K = {2 * K} exceeds library size {pm.L}")
    return 0.5 * float(pm.pmf[: 2 * K].sum())


def mpc_assignment(K: int, pm: PopularityModel) -> CacheAssignment:
    h = h_mpc(K, pm)
    return CacheAssignment("MPC", tuple(range(1, K + 1)), (), h, 0.0, 0.0, 0.0)


# partitions ---------------------------------------------------------------

def _greedy_balance(q: np.ndarray, K: int):
    a, b = [], []
    sa = sb = 0.0
    for i in range(2 * K):
        if len(b) == K or (len(a) < K and sa <= sb):
            a.append(i)
            sa += q[i]
        else:
            b.append(i)
            sb += q[i]
    return a, b


@lru_cache(maxsize=16)
def _combinations(n: int, k: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(n), k)), dtype=np.int64)


def _subset_sums(q: np.ndarray, members: list, k: int):
    combos = _combinations(len(members), k)
    vals = q[np.asarray(members)][combos].sum(axis=1)
    order = np.argsort(vals, kind="stable")
    return vals[order], combos[order]


def _swap_refine(q: np.ndarray, a: list, b: list, max_swap: int = 3, budget: int = 20_000,
                 max_passes: int = 200):
    """Best-improvement k-for-k exchange between the two groups.

    Each pass looks for the exchange of k <= max_swap contents that shrinks
    |mass(a) - mass(b)| the most, trying k = 1 first. The k-subset sums are
    sorted so the best partner for every subset of ``a`` is a binary search.
    ``budget`` caps C(K, k) so large caches only use small exchanges, and
    the search stops after ``max_passes`` exchanges or once the imbalance is
    at rounding level.
    """
    a, b = list(a), list(b)
    K = len(a)
    floor = 4 * np.finfo(float).eps * float(q[a].sum() + q[b].sum())
    for _ in range(max_passes):
        diff = q[a].sum() - q[b].sum()
        best, move = abs(diff), None
        if best <= floor:
            break
        for k in range(1, max_swap + 1):
            if k > K or comb(K, k) > budget:
                break
            sa, ca = _subset_sums(q, a, k)
            sb, cb = _subset_sums(q, b, k)
            # swapping moves 2*(sa - sb) across: want sb close to sa - diff/2
            target = sa - 0.5 * diff
            pos = np.clip(np.searchsorted(sb, target), 0, len(sb) - 1)
            cand = np.stack([np.maximum(pos - 1, 0), pos], axis=1)
            new = np.abs(diff - 2.0 * (sa[:, None] - sb[cand]))
            i, j = np.unravel_index(np.argmin(new), new.shape)
            if new[i, j] < best * (1 - 1e-12):
                best, move = new[i, j], (ca[i], cb[cand[i, j]])
                break
        if move is None:
            break
        ia, ib = move
        for x, y in zip(ia, ib):
            a[x], b[y] = b[y], a[x]
    return a, b


def heuristic_partition(q: np.ndarray, K: int):
    """Greedy descending assignment followed by exchange refinement.

    Returns 0-based index lists (a, b), each of size K.
    """
    a, b = _greedy_balance(q, K)
    return _swap_refine(q, a, b)


def _half_subsets(values: np.ndarray):
    """All subsets of a small vector: (mask, size, sum) arrays."""
    n = len(values)
    masks = np.arange(1 << n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)) & 1
    return masks, bits.sum(axis=1), bits @ values


def exact_partition(q: np.ndarray, K: int):
    """Exhaustive minimum-imbalance split of the top 2K contents.

    Meet-in-the-middle over the two halves of {0..2K-1}; exact for any 2K
    but the subset tables grow as 2^K, so callers keep 2K small.
    """
    n = 2 * K
    vals = np.asarray(q[:n], dtype=float)
    total = vals.sum()
    h1 = n // 2
    m1, c1, s1 = _half_subsets(vals[:h1])
    m2, c2, s2 = _half_subsets(vals[h1:])
    best = (np.inf, None, None)
    for j in range(0, min(K, h1) + 1):
        need = K - j
        if need < 0 or need > n - h1:
            continue
        left = np.flatnonzero(c1 == j)
        right = np.flatnonzero(c2 == need)
        order = right[np.argsort(s2[right], kind="stable")]
        rs = s2[order]
        target = 0.5 * total - s1[left]
        pos = np.searchsorted(rs, target)
        for off in (-1, 0):
            p = np.clip(pos + off, 0, len(rs) - 1)
            gap = np.abs(2.0 * (s1[left] + rs[p]) - total)
            i = int(np.argmin(gap))
            if gap[i] < best[0]:
                best = (gap[i], m1[left[i]], m2[order[p[i]]])
    _, mask1, mask2 = best
    chosen = [i for i in range(h1) if mask1 >> i & 1] + [h1 + i for i in range(n - h1) if mask2 >> i & 1]
    rest = [i for i in range(n) if i not in set(chosen)]
    return chosen, rest


def _assignment(q: np.ndarray, a, b) -> CacheAssignment:
    ha, hb = float(q[list(a)].sum()), float(q[list(b)].sum())
    if hb > ha:
        a, b, ha, hb = b, a, hb, ha
    ca = tuple(sorted(i + 1 for i in a))
    cb = tuple(sorted(i + 1 for i in b))
    return CacheAssignment("DAC", ca, cb, ha, hb, e_a=hb, e_b=ha)


def dac_partition(K: int, pm: PopularityModel) -> CacheAssignment:
    """Split the 2K most popular contents into two groups of K.

    Small instances (2K <= 24) are solved exactly; the heuristic result is
    kept whenever it already attains the optimum, so ties follow greedy
    order. Group A is the heavier group.
    """
    if 2 * K > pm.L:
        raise ValueError(f"2K = {2 * K} exceeds library size {pm.L}")
    if K < 1:
        raise ValueError("cache size must be >= 1")
    q = np.asarray(pm.pmf)
    a, b = heuristic_partition(q, K)
    if 2 * K <= EXACT_PARTITION_MAX:
        gap = abs(q[a].sum() - q[b].sum())
        ea, eb = exact_partition(q, K)
        best = abs(q[ea].sum() - q[eb].sum())
        if gap > best + 1e-15 * q[: 2 * K].sum():
            a, b = ea, eb
    return _assignment(q, a, b)


def exchange_probabilities(cache_a, cache_b, pm: PopularityModel):
    """(e_A, e_B): mass of the peer's cache not held locally."""
    A, B = set(cache_a), set(cache_b)
    return hit_probability(B - A, pm), hit_probability(A - B, pm)


def verify_partition_pareto(K: int, pm: PopularityModel, tol: float = 1e-12) -> bool:
    """Brute-force check that no cache pair beats a top-2K partition on both
    exchange probabilities at once."""
    L = pm.L
    n_caches = comb(L, K)
    if n_caches ** 2 > 10 ** 6:
        raise ValueError(f"instance too large for enumeration: C({L},{K})^2 = {n_caches ** 2}")
    q = np.asarray(pm.pmf)
    caches = np.zeros((n_caches, L), dtype=bool)
    for r, c in enumerate(itertools.combinations(range(L), K)):
        caches[r, list(c)] = True
    # e_A(A', B') = q(B' \ A'), for every ordered pair
    only_b = caches[None, :, :] & ~caches[:, None, :]
    e_a = only_b.astype(float) @ q          # [i, j]: A' = caches[i], B' = caches[j]
    e_b = e_a.T
    for c in itertools.combinations(range(2 * K), K):
        a = np.zeros(2 * K, dtype=bool)
        a[list(c)] = True
        h_a, h_b = q[: 2 * K][a].sum(), q[: 2 * K][~a].sum()
        if np.any((e_a > h_b + tol) & (e_b > h_a + tol)):
            return False
    return True


# offloading ---------------------------------------------------------------

def h_ratio(K: int, xi: float, L: int | None = None) -> float:
    """h_dac / h_mpc; the library size cancels, so ``L`` is ignored."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if not xi >= 0:
        raise ValueError("xi must be >= 0")
    w = np.arange(1, 2 * K + 1, dtype=float) ** (-xi)
    return 0.5 * math.fsum(w) / math.fsum(w[:K])


def h_ratio_limit(xi: float) -> float:
    return max(2.0 ** (-xi), 0.5)


def offloading_factor(policy: str, delta: float, K: int, pm: PopularityModel) -> float:
    policy = policy.upper()
    if policy == "MPC":
        return h_mpc(K, pm)
    if policy in ("DAC", "HD-DAC", "FD-DAC"):
        return (1.0 + delta) * h_dac(K, pm)
    raise ValueError(f"unknown policy {policy!r}")


def offloading_gain(delta: float, K: int, xi: float) -> float:
    return (1.0 + delta) * h_ratio(K, xi)


def min_delta_for_gain(K: int, xi: float, L: int | None = None):
    """Smallest pairing fraction with DAC offloading >= MPC, or None if > 1."""
    d = 1.0 / h_ratio(K, xi) - 1.0
    if d > 1.0:
        return None
    return min(max(d, 0.0), 1.0)


def xi_threshold(delta: float, K: int, lo: float = 0.0, hi: float = 4.0, tol: float = 1e-4):
    """Popularity exponent where the offloading gain crosses 1 for fixed delta.

    Bisection on [lo, hi]; the gain is decreasing in xi. Returns ``hi`` if
    the gain never drops below 1 and ``lo`` if it starts below 1.
    """
    g = lambda x: offloading_gain(delta, K, x) - 1.0
    if g(lo) <= 0:
        return lo
    if g(hi) > 0:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
