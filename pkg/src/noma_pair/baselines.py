"""Orthogonal (TDMA) power requirements and Jain's fairness index.

Power is accounted as a time average: a user active a fraction ``zeta`` of
the time at slot power ``P`` costs ``zeta * P``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError, InfeasibleError, NumericalError

POWER_ACCOUNTING = "average"

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_ZETA_EDGE = 1e-9


@dataclass(frozen=True)
class TdmaAllocation:
    fractions: tuple
    slot_powers: tuple
    total_power: float

    def rates(self, gains) -> tuple:
        """Rates delivered by this allocation over channels ``gains``."""
        return tuple(
            z * math.log2(1 + q * p) if z > 0 else 0.0 for z, q, p in zip(self.fractions, gains, self.slot_powers)
        )


def _slot_power(rate: float, gain: float, zeta: float) -> float:
    if rate == 0:
        return 0.0
    if gain <= 0:
        raise InfeasibleError(f"rate {rate} over a zero gain is infeasible")
    exponent = rate * math.log(2.0) / zeta
    if exponent > 700:
        return math.inf
    return math.expm1(exponent) / gain


def tdma_required_power(target_rates: Sequence[float], gains: Sequence[float], fractions: Sequence[float]) -> TdmaAllocation:
    """Powers for users sharing one subcarrier in time to reach ``target_rates``.

    ``gains`` are ``d_k |h_k|^2 / noise``; user ``k`` transmits during a
    fraction ``fractions[k]`` at slot power ``(2^(R_k/zeta_k) - 1) / q_k``.
    """
    rates = [float(r) for r in target_rates]
    q = [float(g) for g in gains]
    z = [float(f) for f in fractions]
    if not (len(rates) == len(q) == len(z)) or not rates:
        raise ArgumentError("rates, gains and fractions must have the same nonzero length")
    if any(r < 0 for r in rates):
        raise ArgumentError("rates must be non-negative")
    if any(g < 0 for g in q):
        raise ArgumentError("gains must be non-negative")
    if any(f <= 0 for f in z) or abs(math.fsum(z) - 1.0) > 1e-9:
        raise ArgumentError(f"fractions must be positive and sum to 1, got {z}")
    powers = [_slot_power(r, g, f) for r, g, f in zip(rates, q, z)]
    total = math.fsum(f * p for f, p in zip(z, powers))
    return TdmaAllocation(tuple(z), tuple(powers), total)


def tdma_pair_power(rates, gains, zeta: float) -> float:
    """Average power of a two-user TDMA split with user 0 active a fraction ``zeta``."""
    p0 = _slot_power(rates[0], gains[0], zeta)
    p1 = _slot_power(rates[1], gains[1], 1.0 - zeta)
    return zeta * p0 + (1.0 - zeta) * p1


def golden_section_minimize(fun, lo: float, hi: float, xtol: float = 1e-9, max_iter: int = 200) -> float:
    """Minimiser of a unimodal ``fun`` on ``[lo, hi]``."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if b - a < xtol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    else:
        raise NumericalError("golden-section search did not converge", achieved_tolerance=b - a)
    candidates = [(fun(x), x) for x in (a, 0.5 * (a + b), b)]
    return min(candidates)[1]


def tdma_optimize_fractions(target_rates: Sequence[float], gains: Sequence[float]) -> TdmaAllocation:
    """Two-user TDMA split minimising average power.

    ``zeta P0(zeta) + (1-zeta) P1(1-zeta)`` is convex in ``zeta`` (a sum of
    perspectives of ``2^R - 1``), so golden-section search is exact up to
    ``|d zeta| < 1e-9``.  Single-user cases end at ``zeta = 1e-9`` or
    ``1 - 1e-9``.
    """
    if len(target_rates) != 2 or len(gains) != 2:
        raise ArgumentError("exactly two users are supported")
    r0, r1 = (float(r) for r in target_rates)
    q0, q1 = (float(g) for g in gains)
    if r0 < 0 or r1 < 0:
        raise ArgumentError("rates must be non-negative")
    for r, q in ((r0, q0), (r1, q1)):
        if r > 0 and q <= 0:
            raise InfeasibleError(f"rate {r} over a zero gain is infeasible")
    lo, hi = _ZETA_EDGE, 1.0 - _ZETA_EDGE
    if r0 == 0 and r1 == 0:
        zeta = 0.5
    elif r1 == 0:
        zeta = hi
    elif r0 == 0:
        zeta = lo
    else:
        zeta = golden_section_minimize(lambda x: tdma_pair_power((r0, r1), (q0, q1), x), lo, hi)
    return tdma_required_power((r0, r1), (q0, q1), (zeta, 1.0 - zeta))


def jain_index(rates) -> float:
    """``(sum R)^2 / (n sum R^2)``, between ``1/n`` and 1."""
    r = np.asarray(rates, dtype=float).reshape(-1)
    if r.size == 0:
        raise ArgumentError("rates must be nonempty")
    if np.any(r < 0):
        raise ArgumentError("rates must be non-negative")
    sq = math.fsum(r * r)
    if sq == 0:
        raise ArgumentError("fairness is undefined when every rate is zero")
    return math.fsum(r) ** 2 / (r.size * sq)
