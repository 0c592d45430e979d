"""Combinatorial user-pairing solvers.

Users are indexed ``0 .. n-1``.  A :class:`PairingSet` partitions them into
unordered pairs; when pairs are mapped to subcarriers, pair ``m`` of
``pairs`` sits on subcarrier ``subcarriers[m]``.

Tie-breaking is deterministic everywhere: stable sorts, lowest index first.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Sequence

import networkx as nx
import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ArgumentError, EnumerationLimitError
from .rates import first_bound_contribution, second_bound_contribution

MAX_BRUTE_FORCE_USERS = 12

BOUNDS = {
    "first": first_bound_contribution,
    "second": second_bound_contribution,
}


@dataclass(frozen=True)
class PairingSet:
    pairs: tuple
    subcarriers: tuple | None = None

    def __post_init__(self):
        pairs = tuple(tuple(sorted((int(a), int(b)))) for a, b in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        users = [u for p in pairs for u in p]
        if len(set(users)) != len(users) or any(a == b for a, b in pairs):
            raise ArgumentError(f"pairs are not disjoint: {pairs}")
        if sorted(users) != list(range(len(users))):
            raise ArgumentError(f"pairs do not cover users 0..{len(users) - 1}: {pairs}")
        if self.subcarriers is not None:
            sc = tuple(int(s) for s in self.subcarriers)
            if sorted(sc) != list(range(len(pairs))):
                raise ArgumentError(f"subcarrier map is not a bijection onto 0..{len(pairs) - 1}: {sc}")
            object.__setattr__(self, "subcarriers", sc)

    @property
    def num_users(self) -> int:
        return 2 * len(self.pairs)

    def partition(self) -> frozenset:
        """The pairing as a set of 2-sets, ignoring order and subcarriers."""
        return frozenset(frozenset(p) for p in self.pairs)

    def by_subcarrier(self) -> list:
        """Pairs listed in subcarrier order (pair order when unmapped)."""
        if self.subcarriers is None:
            return list(self.pairs)
        out = [None] * len(self.pairs)
        for pair, m in zip(self.pairs, self.subcarriers):
            out[m] = pair
        return out

    def partner(self) -> np.ndarray:
        mate = np.empty(self.num_users, dtype=int)
        for a, b in self.pairs:
            mate[a], mate[b] = b, a
        return mate


def _require_even(n: int) -> None:
    if n <= 0 or n % 2:
        raise ArgumentError(f"need a positive even number of users, got {n}")


# --------------------------------------------------------------------------
# Linear assignment


def forbidden_sentinel(cost: np.ndarray, allowed: np.ndarray) -> float:
    """Finite stand-in for forbidden cells: ``n*(max-min) + 1`` above the max."""
    vals = cost[allowed]
    if vals.size == 0:
        return 1.0
    hi, lo = float(vals.max()), float(vals.min())
    return hi + cost.shape[0] * (hi - lo) + 1.0


def hungarian_min_assignment(cost) -> tuple[np.ndarray, float]:
    """Minimum-cost perfect assignment of an ``n x n`` matrix.

    Returns ``(perm, total)`` with row ``i`` assigned to column ``perm[i]``.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ArgumentError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ArgumentError("cost entries must be finite; encode forbidden cells with forbidden_sentinel")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=int)
    perm[rows] = cols
    return perm, math.fsum(cost[rows, cols])


# --------------------------------------------------------------------------
# Frequency-selective SAMS


def _check_sams(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != 2 * g.shape[1]:
        raise ArgumentError(f"expected a 2M x M matrix, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ArgumentError("matrix entries must be finite")
    return g


def bound_objective(g, pairing: PairingSet) -> float:
    """``sum_m g[a_m, m] + g[b_m, m]`` for a subcarrier-mapped pairing."""
    g = np.asarray(g, dtype=float)
    return math.fsum(g[a, m] + g[b, m] for (a, b), m in zip(pairing.pairs, pairing.subcarriers))


def assign_pairs_by_contribution(g) -> PairingSet:
    """Exact maximiser of ``sum_m g[a_m, m] + g[b_m, m]``.

    Every subcarrier is duplicated into a virtual twin, giving a ``2M x 2M``
    assignment of users to (sub)carrier slots whose two slots per subcarrier
    then form a pair.
    """
    g = _check_sams(g)
    M = g.shape[1]
    z = g.max() - g
    perm, _ = hungarian_min_assignment(np.hstack([z, z]))
    slots: list[list[int]] = [[] for _ in range(M)]
    for user in range(2 * M):
        slots[perm[user] % M].append(user)
    return PairingSet(tuple(tuple(s) for s in slots), tuple(range(M)))


def sams_pair_by_bound(gains, bound: str = "first") -> PairingSet:
    """Pairing and subcarrier map maximising one of the two decoupled rate bounds.

    ``gains[i, m]`` is the received gain ``gamma_i |h_im|^2`` of user ``i`` on
    subcarrier ``m``; ``bound`` is ``"first"`` (TDMA lower bound) or
    ``"second"`` (interference-free upper bound).
    """
    try:
        contribution = BOUNDS[bound]
    except KeyError:
        raise ArgumentError(f"bound must be 'first' or 'second', got {bound!r}") from None
    return assign_pairs_by_contribution(contribution(_check_sams(gains)))


def greedy_two_best(g) -> PairingSet:
    """Subcarrier by subcarrier, take the two best users not yet assigned."""
    g = _check_sams(g)
    M = g.shape[1]
    free = np.ones(2 * M, dtype=bool)
    pairs = []
    for m in range(M):
        col = np.where(free, g[:, m], -np.inf)
        order = np.argsort(-col, kind="stable")[:2]
        free[order] = False
        pairs.append(tuple(int(u) for u in order))
    return PairingSet(tuple(pairs), tuple(range(M)))


def two_best_upper_bound(gains) -> float:
    """``sum_m log2(1 + top1_m + top2_m)`` letting users serve several subcarriers."""
    gains = np.asarray(gains, dtype=float)
    if gains.ndim != 2 or gains.shape[0] < 2:
        raise ArgumentError(f"expected a users x subcarriers matrix with >= 2 users, got {gains.shape}")
    if np.any(gains < 0):
        raise ArgumentError("gains must be non-negative")
    top2 = np.sort(gains, axis=0)[-2:, :]
    return math.fsum(np.log2(1 + top2[0] + top2[1]))


def sams_total_rate(gains, pairing: PairingSet) -> float:
    """True one-step-SIC total rate of a subcarrier-mapped pairing."""
    gains = np.asarray(gains, dtype=float)
    return math.fsum(
        math.log2(1 + gains[a, m] + gains[b, m]) for (a, b), m in zip(pairing.pairs, pairing.subcarriers)
    )


# --------------------------------------------------------------------------
# Frequency-flat SAMS


def flat_sorted_pairing(values) -> PairingSet:
    """Strongest with weakest, second strongest with second weakest, and so on.

    Pair ``i`` (rank ``i`` with rank ``2M-1-i``) is put on subcarrier ``i``.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    _require_even(values.size)
    if np.any(values < 0):
        raise ArgumentError("gains must be non-negative")
    order = np.argsort(-values, kind="stable")
    n = values.size
    pairs = tuple((int(order[i]), int(order[n - 1 - i])) for i in range(n // 2))
    return PairingSet(pairs, tuple(range(n // 2)))


def flat_total_rate(values, pairing: PairingSet) -> float:
    values = np.asarray(values, dtype=float)
    return math.fsum(math.log2(1 + values[a] + values[b]) for a, b in pairing.pairs)


def flat_pair_rates(values, pairing: PairingSet) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.array([math.log2(1 + values[a] + values[b]) for a, b in pairing.pairs])


# --------------------------------------------------------------------------
# Multi-antenna base station


def _check_symmetric(cost) -> np.ndarray:
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ArgumentError(f"cost matrix must be square, got shape {cost.shape}")
    _require_even(cost.shape[0])
    off = ~np.eye(cost.shape[0], dtype=bool)
    if not np.all(np.isfinite(cost[off])):
        raise ArgumentError("off-diagonal costs must be finite")
    if not np.allclose(cost[off], cost.T[off], rtol=0, atol=1e-9):
        raise ArgumentError("cost matrix must be symmetric")
    return cost


def matching_weight(cost, pairing: PairingSet) -> float:
    cost = np.asarray(cost, dtype=float)
    return math.fsum(cost[a, b] for a, b in pairing.pairs)


def mbass_optimal_pairing(cost) -> PairingSet:
    """Maximum-weight perfect matching on the complete graph of users.

    ``cost[i, j]`` is the rate of pair ``{i, j}``; the diagonal is ignored.
    Solved exactly with Edmonds' blossom algorithm (networkx).
    """
    cost = _check_symmetric(cost)
    K = cost.shape[0]
    # Shift to strictly positive weights; all perfect matchings have K/2 edges
    # so the shift preserves the argmax.
    off = ~np.eye(K, dtype=bool)
    shift = 1.0 - float(cost[off].min())
    graph = nx.Graph()
    graph.add_nodes_from(range(K))
    for i in range(K):
        for j in range(i + 1, K):
            graph.add_edge(i, j, weight=float(cost[i, j]) + shift)
    mate = nx.max_weight_matching(graph, maxcardinality=True)
    pairs = sorted(tuple(sorted(e)) for e in mate)
    if len(pairs) != K // 2:
        raise ArgumentError("matching is not perfect")
    return PairingSet(tuple(pairs))


def hungarian_symmetric_pairing(cost) -> PairingSet:
    """Assignment on the symmetric matrix, repaired into a pairing.

    Mutual assignments ``i -> j, j -> i`` are kept; users left on longer
    cycles are paired greedily by descending weight.  Heuristic only; kept
    for comparison with :func:`mbass_optimal_pairing`.
    """
    cost = _check_symmetric(cost)
    K = cost.shape[0]
    allowed = ~np.eye(K, dtype=bool)
    z = cost.max() - cost
    z[~allowed] = forbidden_sentinel(z, allowed)
    perm, _ = hungarian_min_assignment(z)
    pairs = []
    used = np.zeros(K, dtype=bool)
    for i in range(K):
        j = perm[i]
        if not used[i] and perm[j] == i and j != i:
            pairs.append((i, int(j)))
            used[i] = used[j] = True
    left = [i for i in range(K) if not used[i]]
    candidates = sorted(
        ((cost[i, j], i, j) for i, j in itertools.combinations(left, 2)), key=lambda t: (-t[0], t[1], t[2])
    )
    for _, i, j in candidates:
        if not used[i] and not used[j]:
            pairs.append((i, j))
            used[i] = used[j] = True
    return PairingSet(tuple(sorted(pairs)))


# --------------------------------------------------------------------------
# Random pairing


def random_pairing(num_users: int, rng) -> PairingSet:
    """Uniformly random perfect partition; pairs ordered by smallest member."""
    from .channel import make_rng

    _require_even(num_users)
    perm = make_rng(rng).permutation(num_users)
    pairs = sorted(tuple(sorted((int(perm[2 * i]), int(perm[2 * i + 1])))) for i in range(num_users // 2))
    return PairingSet(tuple(pairs), tuple(range(num_users // 2)))


# --------------------------------------------------------------------------
# Exhaustive oracles


def iter_partitions(users: Sequence[int]) -> Iterator[list]:
    """All perfect partitions into pairs; the smallest unpaired user anchors each pair."""
    users = list(users)
    if not users:
        yield []
        return
    first, rest = users[0], users[1:]
    for k, partner in enumerate(rest):
        remaining = rest[:k] + rest[k + 1 :]
        for tail in iter_partitions(remaining):
            yield [(first, partner)] + tail


def count_partitions(num_users: int) -> int:
    """(2M)! / (2^M M!)"""
    M = num_users // 2
    return math.factorial(num_users) // (2**M * math.factorial(M))


@dataclass(frozen=True)
class BruteForceResult:
    pairing: PairingSet
    value: float
    candidates: int


def brute_force_pairing(
    rate_oracle: Callable,
    num_users: int,
    num_subcarriers: int | None = None,
    objective: str = "sum",
) -> BruteForceResult:
    """Exhaustive search over all pairings.

    With ``num_subcarriers`` given, ``rate_oracle(pair, m)`` is queried and
    every assignment of pairs to subcarriers is enumerated as well
    ((2M)!/2^M candidates); otherwise ``rate_oracle(pair)`` and the
    (2M)!/(2^M M!) partitions are enumerated.

    ``objective="maxmin"`` maximises the smallest pair rate; ties on that
    value are broken by the next-smallest pair rate, and so on.
    """
    _require_even(num_users)
    if num_users > MAX_BRUTE_FORCE_USERS:
        raise EnumerationLimitError(f"refusing to enumerate {num_users} > {MAX_BRUTE_FORCE_USERS} users")
    if objective not in ("sum", "maxmin"):
        raise ArgumentError(f"objective must be 'sum' or 'maxmin', got {objective!r}")
    M = num_users // 2
    if num_subcarriers is not None and num_subcarriers != M:
        raise ArgumentError(f"{num_users} users need {M} subcarriers, got {num_subcarriers}")

    cache: dict = {}

    def rate(pair, m=None):
        key = (pair, m)
        if key not in cache:
            cache[key] = float(rate_oracle(pair) if m is None else rate_oracle(pair, m))
        return cache[key]

    best_key = None
    best = None
    count = 0
    for partition in iter_partitions(range(num_users)):
        assignments = itertools.permutations(range(M)) if num_subcarriers is not None else [None]
        for sc in assignments:
            count += 1
            if sc is None:
                values = [rate(p) for p in partition]
            else:
                values = [rate(p, m) for p, m in zip(partition, sc)]
            key = (math.fsum(values),) if objective == "sum" else tuple(sorted(values))
            if best_key is None or key > best_key:
                best_key, best = key, (partition, sc)
    partition, sc = best
    return BruteForceResult(PairingSet(tuple(partition), sc), best_key[0], count)


# --------------------------------------------------------------------------
# Cost matrices on disk (debugging aid): first line ``n,m``, then rows.


def write_cost_matrix(cost, path) -> None:
    c = np.atleast_2d(np.asarray(cost, dtype=float))
    lines = [f"{c.shape[0]},{c.shape[1]}"]
    lines += [",".join(format(x, ".17g") for x in row) for row in c]
    Path(path).write_text("\n".join(lines) + "\n")


def read_cost_matrix(path) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ArgumentError(f"{path}: empty cost matrix file")
    try:
        n, m = (int(v) for v in lines[0].split(","))
        c = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    except ValueError as exc:
        raise ArgumentError(f"{path}: malformed cost matrix ({exc})") from exc
    if c.shape != (n, m):
        raise ArgumentError(f"{path}: header says {n}x{m}, found {c.shape}")
    return c
