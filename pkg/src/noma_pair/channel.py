"""Cell geometry, path loss, power control and small-scale fading.

Users are dropped uniformly over a disc of radius ``disc_radius`` around the
base station and see the path loss ``1 / (r0**2 + r**2)``.  Transmit powers
follow either perfect power control (PPC, equal received power) or equal
transmit power (EP).  Both modes are normalised to the same average transmit
power so that ``target_avg_snr = mean_path_loss * mean_power / noise``.

All randomness flows through :func:`make_rng`, which wraps numpy's PCG64 bit
generator seeded by a :class:`numpy.random.SeedSequence`.  Per-trial streams
are derived with ``spawn_key`` so that trials are independent and can run in
any order.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ArgumentError, ConfigurationError

RNG_ALGORITHM = "numpy.PCG64 seeded via SeedSequence(seed, spawn_key)"


class PowerMode(str, enum.Enum):
    PPC = "PPC"
    EP = "EP"


class ChannelShape(str, enum.Enum):
    SAMS = "SAMS"
    MBASS_SAU = "MBASS_SAU"
    MBASS_MAU = "MBASS_MAU"


def make_rng(seed=None, *spawn_key: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed``, optionally on a derived substream.

    A :class:`numpy.random.Generator` passed as ``seed`` is returned unchanged.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.PCG64(ss))


def path_loss(radius, r0: float = 1.0):
    return 1.0 / (r0 * r0 + np.square(radius))


def mean_path_loss(disc_radius: float, r0: float) -> float:
    """E[d] for a user uniform on the disc."""
    return math.log((r0 * r0 + disc_radius * disc_radius) / (r0 * r0)) / (disc_radius * disc_radius)


def mean_inverse_path_loss(disc_radius: float, r0: float) -> float:
    """E[1/d] for a user uniform on the disc."""
    return r0 * r0 + disc_radius * disc_radius / 2.0


@dataclass(frozen=True)
class ScenarioConfig:
    num_users: int
    target_avg_snr: float
    power_mode: PowerMode = PowerMode.EP
    disc_radius: float = 100.0
    r0: float = 1.0
    noise_variance: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "power_mode", _coerce_power_mode(self.power_mode))
        if isinstance(self.num_users, bool) or int(self.num_users) != self.num_users:
            raise ConfigurationError("num_users must be an integer", field="num_users")
        object.__setattr__(self, "num_users", int(self.num_users))
        if self.num_users <= 0 or self.num_users % 2:
            raise ConfigurationError(
                f"num_users must be a positive even integer, got {self.num_users}", field="num_users"
            )
        for name in ("disc_radius", "r0", "target_avg_snr", "noise_variance"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be finite and > 0, got {value}", field=name)
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ConfigurationError("rng_seed must fit in 64 bits", field="rng_seed")

    @property
    def mean_power(self) -> float:
        """Average transmit power P̄ that realises ``target_avg_snr``."""
        return self.target_avg_snr * self.noise_variance / mean_path_loss(self.disc_radius, self.r0)

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "ScenarioConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            name = sorted(unknown)[0]
            raise ConfigurationError(f"unknown scenario key {name!r}", field=name)
        kwargs = {}
        for key, raw in values.items():
            try:
                if key in ("num_users", "rng_seed"):
                    kwargs[key] = int(raw)
                elif key == "power_mode":
                    kwargs[key] = _coerce_power_mode(raw)
                else:
                    kwargs[key] = float(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(f"bad value for {key}: {raw!r}", field=key) from exc
        for required in ("num_users", "target_avg_snr"):
            if required not in kwargs:
                raise ConfigurationError(f"missing required key {required!r}", field=required)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        from .config import read_key_value_file

        return cls.from_mapping(read_key_value_file(path))


def _coerce_power_mode(value) -> PowerMode:
    if isinstance(value, PowerMode):
        return value
    try:
        return PowerMode(str(value).strip().upper())
    except ValueError:
        raise ConfigurationError(f"power_mode must be PPC or EP, got {value!r}", field="power_mode") from None


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CellScenario:
    radii: np.ndarray
    path_loss: np.ndarray
    tx_power: np.ndarray
    noise_variance: float
    config: ScenarioConfig

    @property
    def num_users(self) -> int:
        return self.radii.shape[0]

    @property
    def snr(self) -> np.ndarray:
        """Receive SNR ``P_k d_k / noise`` of every user."""
        return self.tx_power * self.path_loss / self.noise_variance

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["user", "r", "d", "P", "gamma"])
            for k, (r, d, p, g) in enumerate(zip(self.radii, self.path_loss, self.tx_power, self.snr)):
                writer.writerow([k, repr(float(r)), repr(float(d)), repr(float(p)), repr(float(g))])


def sample_radii(num_users: int, disc_radius: float, rng) -> np.ndarray:
    """Radii of users uniform over the disc area (inverse-CDF of 2r/R²)."""
    rng = make_rng(rng)
    return disc_radius * np.sqrt(rng.random(num_users))


def transmit_powers(path_losses: np.ndarray, config: ScenarioConfig) -> np.ndarray:
    mean_power = config.mean_power
    if config.power_mode is PowerMode.EP:
        return np.full(path_losses.shape, mean_power)
    # P_k d_k = c with E[P] = c E[1/d] = mean_power
    c = mean_power / mean_inverse_path_loss(config.disc_radius, config.r0)
    return c / path_losses


def build_scenario(config: ScenarioConfig, radii: Sequence[float]) -> CellScenario:
    """Scenario for users at the given radii under ``config``'s power control."""
    radii = np.asarray(radii, dtype=float)
    if radii.shape != (config.num_users,):
        raise ConfigurationError(
            f"expected {config.num_users} radii, got shape {radii.shape}", field="num_users"
        )
    if np.any(radii < 0) or np.any(radii > config.disc_radius):
        raise ConfigurationError("radii must lie in [0, disc_radius]", field="disc_radius")
    d = path_loss(radii, config.r0)
    return CellScenario(
        radii=_frozen(radii),
        path_loss=_frozen(d),
        tx_power=_frozen(transmit_powers(d, config)),
        noise_variance=config.noise_variance,
        config=config,
    )


def sample_scenario(config: ScenarioConfig, rng=None) -> CellScenario:
    """Drop ``config.num_users`` users on the disc.

    ``rng`` defaults to a generator seeded by ``config.rng_seed``.
    """
    if rng is None:
        rng = make_rng(config.rng_seed)
    return build_scenario(config, sample_radii(config.num_users, config.disc_radius, rng))


def receive_snr(scenario: CellScenario, user_index: int) -> float:
    if not 0 <= user_index < scenario.num_users:
        raise ArgumentError(f"user index {user_index} out of range [0, {scenario.num_users})")
    return float(scenario.tx_power[user_index] * scenario.path_loss[user_index] / scenario.noise_variance)


@dataclass(frozen=True)
class ChannelRealization:
    """Small-scale fading coefficients.

    ``coefficients`` is a ``users x subcarriers`` array for SAMS, an ``N x K``
    array for MBASS_SAU and a ``K x N x L`` array (one ``N x L`` matrix per
    user) for MBASS_MAU.
    """

    shape: ChannelShape
    coefficients: np.ndarray
    entry_variance: float = 1.0
    dims: tuple = field(default=())

    def per_user(self) -> list:
        if self.shape is not ChannelShape.MBASS_MAU:
            raise ArgumentError("per_user() only applies to MBASS_MAU realizations")
        return [self.coefficients[k] for k in range(self.coefficients.shape[0])]


_NDIMS = {ChannelShape.SAMS: 2, ChannelShape.MBASS_SAU: 2, ChannelShape.MBASS_MAU: 3}


def complex_gaussian(rng, size, variance: float = 1.0) -> np.ndarray:
    """Zero-mean circular complex Gaussian entries with E|x|² = ``variance``."""
    rng = make_rng(rng)
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def sample_fading(shape, dims: Sequence[int], entry_variance: float = 1.0, rng_seed=None) -> ChannelRealization:
    """Draw iid CN(0, entry_variance) coefficients.

    ``dims`` is ``(users, subcarriers)`` for SAMS, ``(N, K)`` for MBASS_SAU and
    ``(K, N, L)`` for MBASS_MAU.
    """
    shape = ChannelShape(shape)
    dims = tuple(int(n) for n in dims)
    if len(dims) != _NDIMS[shape]:
        raise ConfigurationError(f"{shape.value} needs {_NDIMS[shape]} dimensions, got {dims}", field="dims")
    if any(n < 1 for n in dims):
        raise ConfigurationError(f"all dimensions must be >= 1, got {dims}", field="dims")
    if not (math.isfinite(entry_variance) and entry_variance > 0):
        raise ConfigurationError("entry_variance must be > 0", field="entry_variance")
    coeffs = complex_gaussian(make_rng(rng_seed), dims, entry_variance)
    return ChannelRealization(shape, _frozen(coeffs), float(entry_variance), dims)
