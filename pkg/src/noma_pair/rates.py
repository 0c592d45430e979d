"""Achievable rates under one-step SIC.

Scalar links (one antenna at both ends) reduce to functions of the received
gains ``g = gamma * |h|**2``.  For a multi-antenna base station the best
two-user detector of a pair attains ``log2(1+l1) + log2(1+l2)``, where ``l1``
and ``l2`` are the nonzero eigenvalues of the pair's signal covariance whitened
by the interference-plus-noise covariance of all other users.  That value is
computed from a 2x2 matrix, so the detector itself is never formed.

Logarithms of rates are base 2 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ArgumentError, DegenerateChannelError, NumericalError

_EIG_CLAMP = 1e-12


def _check_gains(*gains):
    for g in gains:
        if np.any(np.asarray(g) < 0):
            raise ArgumentError(f"gains must be non-negative, got {g}")


def sic_pair_sum_rate(ga, gb):
    """Sum rate ``log2(1 + ga + gb)`` of a pair decoded with one-step SIC."""
    _check_gains(ga, gb)
    return np.log2(1.0 + np.asarray(ga, dtype=float) + np.asarray(gb, dtype=float))[()]


def sic_individual_rates(g_strong: float, g_weak: float) -> tuple[float, float]:
    """Per-user rates when the stronger user is decoded first.

    The strong user sees the weak one as noise; the weak user is then decoded
    interference free.
    """
    _check_gains(g_strong, g_weak)
    if g_strong < g_weak:
        raise ArgumentError(f"g_strong={g_strong} must be >= g_weak={g_weak}")
    r_weak = math.log2(1.0 + g_weak)
    r_strong = math.log2(1.0 + g_strong + g_weak) - r_weak
    return r_strong, r_weak


def sic_rates_for_pair(ga: float, gb: float) -> tuple[float, float]:
    """Rates of users ``a`` and ``b`` (in that order) with stronger-first decoding.

    Ties go to ``a`` as the stronger user.
    """
    if ga >= gb:
        return sic_individual_rates(ga, gb)
    rb, ra = sic_individual_rates(gb, ga)
    return ra, rb


def rate_bounds(ga, gb):
    """(lower, upper) bounds on the pair sum rate.

    The lower bound is the equal-time TDMA rate, the upper one the rate
    without mutual interference.
    """
    _check_gains(ga, gb)
    ga = np.asarray(ga, dtype=float)
    gb = np.asarray(gb, dtype=float)
    lower = 0.5 * np.log2(1 + 2 * ga) + 0.5 * np.log2(1 + 2 * gb)
    upper = np.log2(1 + ga) + np.log2(1 + gb)
    return lower[()], upper[()]


def first_bound_contribution(g):
    """Per-user term of the lower (TDMA) bound: ``0.5*log2(1+2g)``."""
    return 0.5 * np.log2(1 + 2 * np.asarray(g, dtype=float))


def second_bound_contribution(g):
    """Per-user term of the upper (interference-free) bound: ``log2(1+g)``."""
    return np.log2(1 + np.asarray(g, dtype=float))


# --------------------------------------------------------------------------
# Multi-antenna base station


@dataclass(frozen=True)
class MimoSystem:
    """Uplink ``y = H x + n`` with independent users.

    ``powers`` is the diagonal of the input covariance.
    """

    H: np.ndarray
    powers: np.ndarray
    noise_variance: float = 1.0

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=complex))
        p = np.asarray(self.powers, dtype=float).reshape(-1)
        if p.shape[0] != H.shape[1]:
            raise ArgumentError(f"{p.shape[0]} powers for {H.shape[1]} users")
        if np.any(p <= 0) or not np.all(np.isfinite(p)):
            raise ArgumentError("user powers must be finite and > 0")
        if not (self.noise_variance > 0):
            raise ArgumentError("noise_variance must be > 0")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "powers", p)

    @property
    def num_antennas(self) -> int:
        return self.H.shape[0]

    @property
    def num_users(self) -> int:
        return self.H.shape[1]

    def covariance(self, users=None) -> np.ndarray:
        """``sum_k P_k h_k h_k^H + noise I`` over ``users`` (all by default)."""
        if users is None:
            users = np.arange(self.num_users)
        Hs = self.H[:, users] * np.sqrt(self.powers[users])
        return Hs @ Hs.conj().T + self.noise_variance * np.eye(self.num_antennas)

    def joint_detection_rate(self) -> float:
        """Sum capacity ``log2 det(I + H Phi H^H / noise)`` with full interference cancellation."""
        sign, logdet = np.linalg.slogdet(self.covariance() / self.noise_variance)
        return float(logdet / math.log(2))


@dataclass(frozen=True)
class PairEigenvalues:
    lam1: float
    lam2: float
    pair: tuple

    @property
    def rate(self) -> float:
        return math.log2(1 + self.lam1) + math.log2(1 + self.lam2)


def hermitian_2x2_eigenvalues(a, b, d):
    """Eigenvalues (larger, smaller) of ``[[a, b], [conj(b), d]]`` for real a, d.

    Works elementwise on arrays.
    """
    a = np.asarray(a, dtype=float)
    d = np.asarray(d, dtype=float)
    half_tr = 0.5 * (a + d)
    disc = np.sqrt(0.25 * (a - d) ** 2 + np.abs(b) ** 2)
    return half_tr + disc, half_tr - disc


def _clamp_nonneg(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < -_EIG_CLAMP * np.maximum(1.0, np.abs(x).max(initial=0.0))):
        raise NumericalError(f"negative eigenvalue {x.min()} of a positive semidefinite matrix")
    return np.maximum(x, 0.0)


def _check_pair(pair, num_users):
    a, b = (int(i) for i in pair)
    if a == b:
        raise ArgumentError(f"pair needs two distinct users, got {pair}")
    for i in (a, b):
        if not 0 <= i < num_users:
            raise ArgumentError(f"user {i} out of range [0, {num_users})")
    return a, b


def pair_rate_mimo(sys: MimoSystem, pair) -> tuple[float, PairEigenvalues]:
    """Best one-step-SIC rate of ``pair`` with all other users as interference.

    Evaluates ``Phi_m^1/2 H_m^H (H_rest Phi_rest H_rest^H + noise I)^-1 H_m Phi_m^1/2``
    directly; its two eigenvalues equal the nonzero ones of the whitened
    pair covariance.
    """
    a, b = _check_pair(pair, sys.num_users)
    rest = np.array([k for k in range(sys.num_users) if k not in (a, b)], dtype=int)
    B = sys.covariance(rest)
    U = sys.H[:, [a, b]] * np.sqrt(sys.powers[[a, b]])
    C = U.conj().T @ np.linalg.solve(B, U)
    l1, l2 = hermitian_2x2_eigenvalues(C[0, 0].real, C[0, 1], C[1, 1].real)
    l1, l2 = _clamp_nonneg([l1, l2])
    ev = PairEigenvalues(float(l1), float(l2), (a, b))
    return ev.rate, ev


def pair_eigenvalues_from_downdate(S_inv: np.ndarray, H_m: np.ndarray, powers_m, pair=(0, 1)) -> PairEigenvalues:
    """Pair eigenvalues from the inverse of the full covariance ``S = H Phi H^H + noise I``.

    With ``U = H_m Phi_m^1/2`` and ``C = U^H S^-1 U`` the Woodbury identity
    gives ``U^H (S - U U^H)^-1 U = C (I - C)^-1``, whose eigenvalues are
    ``mu / (1 - mu)`` for the eigenvalues ``mu`` of ``C``.
    """
    U = np.asarray(H_m, dtype=complex) * np.sqrt(np.asarray(powers_m, dtype=float))
    C = U.conj().T @ S_inv @ U
    mu1, mu2 = hermitian_2x2_eigenvalues(C[0, 0].real, C[0, 1], C[1, 1].real)
    l1, l2 = _downdate_map(np.array([mu1, mu2]))
    return PairEigenvalues(float(l1), float(l2), tuple(pair))


def _downdate_map(mu: np.ndarray) -> np.ndarray:
    mu = _clamp_nonneg(mu)
    gap = 1.0 - mu
    if np.any(gap <= 1e-13):
        raise NumericalError(
            "I - C is singular to working precision; pair eigenvalue diverges",
            achieved_tolerance=float(gap.min()),
        )
    return mu / gap


def all_pair_eigenvalues(sys: MimoSystem) -> tuple[np.ndarray, np.ndarray]:
    """``(lam1, lam2)`` as K x K symmetric arrays for every pair (diagonal is 0).

    One K x K Gram matrix ``Q = U^H S^-1 U`` with ``U = H Phi^1/2`` serves all
    pairs: the 2x2 matrix ``C`` of pair (a, b) is ``Q[[a,b]][:, [a,b]]``.
    """
    U = sys.H * np.sqrt(sys.powers)
    S = U @ U.conj().T + sys.noise_variance * np.eye(sys.num_antennas)
    Q = U.conj().T @ np.linalg.solve(S, U)
    diag = Q.diagonal().real
    mu1, mu2 = hermitian_2x2_eigenvalues(diag[:, None], Q, diag[None, :])
    K = sys.num_users
    off = ~np.eye(K, dtype=bool)
    lam1 = np.zeros((K, K))
    lam2 = np.zeros((K, K))
    mapped = _downdate_map(np.stack([mu1[off], mu2[off]]))
    lam1[off], lam2[off] = mapped
    return lam1, lam2


def mimo_pair_cost_matrix(sys: MimoSystem) -> np.ndarray:
    """K x K symmetric matrix of pair rates; the diagonal is left at 0."""
    lam1, lam2 = all_pair_eigenvalues(sys)
    cost = np.log2(1 + lam1) + np.log2(1 + lam2)
    return 0.5 * (cost + cost.T)


# --------------------------------------------------------------------------
# Multi-antenna users


@dataclass(frozen=True)
class BeamformedSystem:
    H_eff: np.ndarray
    beams: tuple


def top_eigenvector(G: np.ndarray) -> np.ndarray:
    """Unit top eigenvector of ``G^H G``, first nonzero entry real positive."""
    G = np.atleast_2d(np.asarray(G, dtype=complex))
    if not np.any(G):
        raise DegenerateChannelError("channel matrix is identically zero")
    w, V = np.linalg.eigh(G.conj().T @ G)
    v = V[:, np.argmax(w)]
    mag = np.abs(v)
    first = int(np.argmax(mag > 1e-12 * mag.max()))
    v = v * (np.conj(v[first]) / mag[first])
    v = v / np.linalg.norm(v)
    v[first] = v[first].real
    return v


def beamform_reduce(G_list: Iterable[np.ndarray]) -> BeamformedSystem:
    """Each user beams along its strongest right singular direction.

    Returns the effective single-stream channel ``[G_1 b_1, ..., G_K b_K]``.
    """
    beams = []
    cols = []
    for k, G in enumerate(G_list):
        G = np.atleast_2d(np.asarray(G, dtype=complex))
        try:
            b = top_eigenvector(G)
        except DegenerateChannelError as exc:
            raise DegenerateChannelError(f"user {k}: {exc}") from None
        beams.append(b)
        cols.append(G @ b)
    if not cols:
        raise ArgumentError("no users")
    return BeamformedSystem(np.stack(cols, axis=1), tuple(beams))


# --------------------------------------------------------------------------


def total_rate(pairing, per_pair_rates: Mapping) -> float:
    """Sum of the rates of every pair of ``pairing``.

    ``per_pair_rates`` maps unordered pairs (any order of the two indices) to
    rates.
    """
    lookup = {frozenset(map(int, k)): v for k, v in per_pair_rates.items()}
    pairs = pairing.pairs if hasattr(pairing, "pairs") else pairing
    values = []
    for pair in pairs:
        key = frozenset(map(int, pair))
        if key not in lookup:
            raise ArgumentError(f"no rate for pair {tuple(pair)}")
        values.append(lookup[key])
    return math.fsum(values)


def whitened_pair_gram(Q: np.ndarray, pair) -> np.ndarray:
    """Pair matrix ``U^H B^-1 U`` recovered from the full Gram ``Q = U^H S^-1 U``.

    ``B`` excludes the pair from ``S``; see :func:`pair_eigenvalues_from_downdate`.
    """
    a, b = pair
    C = Q[np.ix_([a, b], [a, b])]
    return C @ np.linalg.inv(np.eye(2) - C)


def full_gram(sys: MimoSystem) -> np.ndarray:
    """``Q = U^H S^-1 U`` with ``U = H Phi^1/2`` and ``S`` the full covariance."""
    U = sys.H * np.sqrt(sys.powers)
    S = U @ U.conj().T + sys.noise_variance * np.eye(sys.num_antennas)
    return U.conj().T @ np.linalg.solve(S, U)


def mimo_sic_user_rates(C_hat: np.ndarray) -> tuple[float, float]:
    """Per-user rates of a pair with whitened Gram ``C_hat``.

    The user with the larger whitened gain is decoded first (ties: the first
    one); the other is then decoded interference free, so the two rates add
    up to ``log2 det(I + C_hat)``.
    """
    c0, c1 = float(C_hat[0, 0].real), float(C_hat[1, 1].real)
    sign, logdet = np.linalg.slogdet(np.eye(2) + C_hat)
    pair_rate = float(logdet.real) / math.log(2)
    if c0 >= c1:
        r1 = math.log2(1 + c1)
        return pair_rate - r1, r1
    r0 = math.log2(1 + c0)
    return r0, pair_rate - r0
