"""Large-system limits and closed-form benchmarks.

The flat-fading results need the law of ``t = gamma |h|^2`` with
``h ~ CN(0, 1)`` and ``gamma`` drawn from an SNR distribution:
``F(z) = 1 - E[exp(-z / gamma)]``.  Three SNR laws are supported: a point
mass (perfect power control), an empirical sample, and the law induced by
equal transmit power on the disc.

Inner logarithms in the subcarrier-scaling expressions are natural; rate
logarithms are base 2 (``INNER_LOG``, ``RATE_LOG``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .channel import PowerMode, ScenarioConfig, mean_inverse_path_loss, mean_path_loss
from .errors import ArgumentError, NumericalError

INNER_LOG = math.log
RATE_LOG = math.log2

_LN2 = math.log(2.0)
_QUANTILE_TOL = 1e-12


# --------------------------------------------------------------------------
# SNR laws


class SnrDistribution:
    """Law of the receive SNR; subclasses give survival and density of ``gamma|h|^2``."""

    kind = "abstract"
    c1: float
    c2: float

    def sf(self, z):
        """``1 - F(z) = E[exp(-z / gamma)]``."""
        raise NotImplementedError

    def cdf(self, z):
        raise NotImplementedError

    def pdf(self, z):
        """``g(z) = E[exp(-z / gamma) / gamma]``."""
        raise NotImplementedError

    def mean_snr(self) -> float:
        raise NotImplementedError

    def sample_snr(self, rng, size) -> np.ndarray:
        raise NotImplementedError

    def scaled(self, factor: float) -> "SnrDistribution":
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(SnrDistribution):
    gamma: float
    kind = "PointMass"

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ArgumentError(f"gamma must be finite and > 0, got {self.gamma}")

    @property
    def c1(self):
        return self.gamma

    @property
    def c2(self):
        return self.gamma

    def sf(self, z):
        return np.exp(-np.asarray(z, dtype=float) / self.gamma)

    def cdf(self, z):
        return -np.expm1(-np.asarray(z, dtype=float) / self.gamma)

    def pdf(self, z):
        return np.exp(-np.asarray(z, dtype=float) / self.gamma) / self.gamma

    def mean_snr(self):
        return self.gamma

    def sample_snr(self, rng, size):
        return np.full(size, self.gamma)

    def scaled(self, factor):
        return PointMass(self.gamma * factor)


@dataclass(frozen=True, eq=False)
class Empirical(SnrDistribution):
    samples: np.ndarray
    kind = "Empirical"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).reshape(-1)
        if s.size == 0 or np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise ArgumentError("empirical SNR samples must be a nonempty set of finite positive values")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def c1(self):
        return float(self.samples.min())

    @property
    def c2(self):
        return float(self.samples.max())

    def _grid(self, z):
        z = np.asarray(z, dtype=float)
        return z[..., None] / self.samples

    def sf(self, z):
        return np.exp(-self._grid(z)).mean(axis=-1)

    def cdf(self, z):
        return (-np.expm1(-self._grid(z))).mean(axis=-1)

    def pdf(self, z):
        return (np.exp(-self._grid(z)) / self.samples).mean(axis=-1)

    def mean_snr(self):
        return float(self.samples.mean())

    def sample_snr(self, rng, size):
        return rng.choice(self.samples, size=size)

    def scaled(self, factor):
        return Empirical(self.samples * factor)


def _phi(x):
    """``(1 - exp(-x)) / x`` with its limit 1 at 0."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = x > 0
    out[nz] = -np.expm1(-x[nz]) / x[nz]
    return out


def _one_minus_phi(x):
    """``1 - (1 - exp(-x)) / x`` accurate for small x."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    small = x < 1e-3
    xs = x[small]
    out[small] = xs / 2 - xs**2 / 6 + xs**3 / 24 - xs**4 / 120
    xl = x[~small]
    out[~small] = (xl + np.expm1(-xl)) / xl
    return out


@dataclass(frozen=True)
class DiscEP(SnrDistribution):
    """SNR of an equal-power user uniform on a disc: ``P / (noise (r0^2 + r^2))``.

    In ``y = noise (r0^2 + r^2) / P`` (the inverse SNR) the law is uniform on
    ``[a, b]``, which makes ``F`` and its density closed-form.
    """

    disc_radius: float
    r0: float
    power: float
    noise_variance: float = 1.0
    kind = "DiscEP"

    def __post_init__(self):
        for name in ("disc_radius", "r0", "power", "noise_variance"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ArgumentError(f"{name} must be finite and > 0, got {v}")

    @property
    def _ab(self):
        k = self.noise_variance / self.power
        return k * self.r0**2, k * (self.r0**2 + self.disc_radius**2)

    @property
    def c1(self):
        return 1.0 / self._ab[1]

    @property
    def c2(self):
        return 1.0 / self._ab[0]

    def snr_at_radius(self, r):
        return self.power / (self.noise_variance * (self.r0**2 + np.square(r)))

    def sf(self, z):
        a, b = self._ab
        z = np.asarray(z, dtype=float)
        return np.exp(-z * a) * _phi(z * (b - a))

    def cdf(self, z):
        a, b = self._ab
        z = np.asarray(z, dtype=float)
        return -np.expm1(-z * a) * _phi(z * (b - a)) + _one_minus_phi(z * (b - a))

    def pdf(self, z):
        # (1/(b-a)) * int_a^b y exp(-z y) dy
        a, b = self._ab
        z = np.atleast_1d(np.asarray(z, dtype=float))
        out = np.empty_like(z)
        small = z * b < 0.5
        zs = z[small]
        acc = np.zeros_like(zs)
        term = np.ones_like(zs)
        for n in range(40):
            acc += term * (b ** (n + 2) - a ** (n + 2)) / (n + 2)
            term = term * (-zs) / (n + 1)
        out[small] = acc
        zl = z[~small]
        out[~small] = np.exp(-zl * a) * (a / zl + 1 / zl**2) - np.exp(-zl * b) * (b / zl + 1 / zl**2)
        out /= b - a
        return out if out.size > 1 else out.reshape(())[()]

    def mean_snr(self):
        a, b = self._ab
        return math.log(b / a) / (b - a)

    def sample_snr(self, rng, size):
        r = self.disc_radius * np.sqrt(rng.random(size))
        return self.snr_at_radius(r)

    def scaled(self, factor):
        return DiscEP(self.disc_radius, self.r0, self.power * factor, self.noise_variance)


def snr_distribution(config: ScenarioConfig) -> SnrDistribution:
    """Receive-SNR law of a scenario family (PPC gives a point mass)."""
    P = config.mean_power
    if config.power_mode is PowerMode.EP:
        return DiscEP(config.disc_radius, config.r0, P, config.noise_variance)
    c = P / mean_inverse_path_loss(config.disc_radius, config.r0)
    return PointMass(c / config.noise_variance)


def ppc_snr(target_avg_snr: float, disc_radius: float = 100.0, r0: float = 1.0) -> float:
    """Common receive SNR of PPC users at a given ``target_avg_snr``."""
    return target_avg_snr / (mean_path_loss(disc_radius, r0) * mean_inverse_path_loss(disc_radius, r0))


# --------------------------------------------------------------------------
# F and its inverse


def cdf_F(dist: SnrDistribution, z):
    """``P[gamma |h|^2 <= z]``."""
    if np.any(np.asarray(z) < 0):
        raise ArgumentError(f"z must be >= 0, got {z}")
    return dist.cdf(z)[()]


def _bisect(fun, target, increasing: bool) -> float:
    """Solve the monotone ``fun(z) = target`` on ``z >= 0``."""
    sign = 1.0 if increasing else -1.0
    g = lambda z: sign * (fun(z) - target)
    lo, hi = 0.0, 1.0
    while g(hi) < 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise NumericalError("quantile bracket could not be found")
    if g(lo) >= 0:
        return lo
    return optimize.brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def quantile_F(dist: SnrDistribution, t: float) -> float:
    """Inverse of :func:`cdf_F` for ``0 <= t < 1``."""
    if not 0 <= t < 1:
        raise ArgumentError(f"t must lie in [0, 1), got {t}")
    if t == 0:
        return 0.0
    if isinstance(dist, PointMass):
        return -dist.gamma * math.log1p(-t)
    if t <= 0.5:
        return _bisect(lambda z: float(dist.cdf(z)), t, increasing=True)
    return _bisect(lambda z: float(dist.sf(z)), 1.0 - t, increasing=False)


def upper_quantile(dist: SnrDistribution, p: float) -> float:
    """``F^{-1}(1 - p)`` computed from the survival function, exact for tiny ``p``."""
    if not 0 < p <= 1:
        raise ArgumentError(f"p must lie in (0, 1], got {p}")
    if isinstance(dist, PointMass):
        return -dist.gamma * math.log(p)
    if p >= 0.5:
        return quantile_F(dist, 1.0 - p)
    return _bisect(lambda z: float(dist.sf(z)), p, increasing=False)


# --------------------------------------------------------------------------
# Frequency-flat large-system limits


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abserr: float


def _quad(fun, a, b, epsrel, what):
    value, abserr, *info = integrate.quad(fun, a, b, epsabs=0.0, epsrel=epsrel * 1e-2, limit=400, full_output=1)
    if len(info) >= 2 and abserr > epsrel * abs(value) and abserr > 1e-14:
        raise NumericalError(f"{what}: quadrature did not converge ({info[1]})", achieved_tolerance=abserr)
    if abserr > epsrel * max(abs(value), 1e-300) and abserr > 1e-14:
        raise NumericalError(f"{what}: achieved error {abserr:.3g} above tolerance", achieved_tolerance=abserr)
    return value, abserr


def _sorted_pair_integrand(dist, t):
    return 0.5 * math.log2(1.0 + quantile_F(dist, t / 2) + upper_quantile(dist, t / 2))


def flat_optimal_avg_rate(dist: SnrDistribution, full_output: bool = False, epsrel: float = 1e-6):
    """Per-user rate of strongest-with-weakest pairing as the number of users grows.

    ``int_0^1 0.5 log2(1 + F^-1(t/2) + F^-1(1 - t/2)) dt``.  The integrand has
    a logarithmic singularity at ``t = 0``; ``(0, t0]`` is mapped to
    ``u = -ln t`` and cut at ``u_max`` with the omitted mass bounded.
    """
    t0 = 1e-2
    head, err_head = _quad(lambda t: _sorted_pair_integrand(dist, t), t0, 1.0, epsrel, "sorted pairing integral")
    u0 = -math.log(t0)
    u_max = 60.0
    while True:
        eps = math.exp(-u_max)
        # integrand is increasing towards 0, and grows like log log(1/t)
        tail_bound = 2.0 * eps * _sorted_pair_integrand(dist, eps)
        if tail_bound < 1e-9 * head or u_max > 700:
            break
        u_max += 60.0
    tail, err_tail = _quad(
        lambda u: math.exp(-u) * _sorted_pair_integrand(dist, math.exp(-u)), u0, u_max, epsrel, "sorted pairing tail"
    )
    value = head + tail
    err = err_head + err_tail + tail_bound
    return QuadratureResult(value, err) if full_output else value


def flat_random_avg_rate(dist: SnrDistribution, full_output: bool = False, epsrel: float = 1e-5):
    """Per-user rate of random pairing: ``E[0.5 log2(1 + t1 + t2)]`` with iid t1, t2.

    The inner expectation is ``ln(1+a) + int_0^inf S(x) / (1 + a + x) dx``;
    both integrals are truncated where ``S < 1e-10``.
    """
    x_max = upper_quantile(dist, 1e-10)
    breaks = sorted({upper_quantile(dist, p) for p in (0.5, 0.1, 1e-2, 1e-4, 1e-6)})
    edges = [0.0] + [b for b in breaks if 0 < b < x_max] + [x_max]

    def piecewise(fun):
        total = 0.0
        err = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            v, e = _quad(fun, lo, hi, epsrel, "random pairing integral")
            total += v
            err += e
        return total, err

    def inner(a):
        v, _ = piecewise(lambda x: float(dist.sf(x)) / (1.0 + a + x))
        return math.log1p(a) + v

    outer, err = piecewise(lambda t: float(dist.pdf(t)) * inner(t))
    value = 0.5 * outer / _LN2
    err = 0.5 * err / _LN2 + value * 1e-10
    return QuadratureResult(value, err) if full_output else value


# --------------------------------------------------------------------------
# Frequency-selective scaling


def theorem1_normalizers(M: int, c: float) -> tuple[float, float]:
    """``(M log2 ln M, M log2(1 + 2 c ln M))``."""
    if M < 2:
        raise ArgumentError(f"M must be >= 2, got {M}")
    if not c > 0:
        raise ArgumentError(f"c must be > 0, got {c}")
    return M * RATE_LOG(INNER_LOG(M)), M * RATE_LOG(1 + 2 * c * INNER_LOG(M))


def stirling_ratio(M: int, c: float) -> float:
    """``sum_{m<=M} log2(1 + 2c ln m) / (M log2(1 + 2c ln M))``; tends to 1."""
    if M < 2:
        raise ArgumentError(f"M must be >= 2, got {M}")
    if not c > 0:
        raise ArgumentError(f"c must be > 0, got {c}")
    m = np.arange(1, M + 1, dtype=float)
    num = math.fsum(np.log2(1 + 2 * c * np.log(m)))
    return num / (M * RATE_LOG(1 + 2 * c * INNER_LOG(M)))


# --------------------------------------------------------------------------
# Multi-antenna base station, large-system limit


@dataclass(frozen=True)
class AsymptoticParams:
    alpha: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "gamma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ArgumentError(f"{name} must be finite and > 0, got {v}")


def mbass_limit_eigenvalue(p: AsymptoticParams) -> float:
    """Deterministic limit of both pair eigenvalues for load ``alpha = K/N``."""
    a, g = p.alpha, p.gamma
    return math.sqrt((1 - a) ** 2 * g * g / 4 + (1 + a) * g / 2 + 0.25) - 0.5 + (1 - a) * g / 2


def stieltjes_G(w: float, alpha: float) -> float:
    """Limit of ``h^H (H H^H - w I)^-1 h`` for ``w < 0`` (real branch only)."""
    if not w < 0:
        raise ArgumentError(f"only w < 0 is supported, got {w}")
    if not alpha > 0:
        raise ArgumentError(f"alpha must be > 0, got {alpha}")
    a = alpha
    return math.sqrt((1 - a) ** 2 / (4 * w * w) - (1 + a) / (2 * w) + 0.25) - 0.5 - (1 - a) / (2 * w)


def mbass_limit_rate_per_user(p: AsymptoticParams) -> float:
    """``(2 / alpha) log2(1 + lambda)`` with ``lambda`` from :func:`mbass_limit_eigenvalue`."""
    return (2.0 / p.alpha) * math.log2(1.0 + mbass_limit_eigenvalue(p))


def ergodic_capacity_per_user(mean_snr: float) -> float:
    """``0.5 log2(1 + 2 mean_snr)``: full interference cancellation, two users per subcarrier."""
    if not mean_snr > 0:
        raise ArgumentError(f"mean SNR must be > 0, got {mean_snr}")
    return 0.5 * math.log2(1 + 2 * mean_snr)
