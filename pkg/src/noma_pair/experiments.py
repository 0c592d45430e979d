"""Seeded Monte Carlo experiments over cell scenarios.

Every trial draws user radii and fading once from its own substream
``make_rng(rng_seed, sweep_index, trial_index)``.  All power modes and all
pairing methods of that trial then see the same realization, so differences
between methods are never RNG artifacts.  Trials are independent and may run
on a thread pool; results are reassembled in trial order before aggregation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from . import __version__
from .asymptotics import (
    AsymptoticParams,
    ergodic_capacity_per_user,
    flat_optimal_avg_rate,
    flat_random_avg_rate,
    mbass_limit_eigenvalue,
    ppc_snr,
    snr_distribution,
    theorem1_normalizers,
)
from .baselines import POWER_ACCOUNTING, jain_index, tdma_optimize_fractions, tdma_required_power
from .channel import (
    RNG_ALGORITHM,
    PowerMode,
    ScenarioConfig,
    build_scenario,
    complex_gaussian,
    make_rng,
    sample_radii,
)
from .config import parse_list, parse_range, read_key_value_file
from .errors import ConfigurationError, NomaPairError
from .pairing import (
    MAX_BRUTE_FORCE_USERS,
    PairingSet,
    brute_force_pairing,
    flat_sorted_pairing,
    greedy_two_best,
    hungarian_symmetric_pairing,
    mbass_optimal_pairing,
    random_pairing,
    sams_pair_by_bound,
    two_best_upper_bound,
)
from .rates import (
    MimoSystem,
    beamform_reduce,
    full_gram,
    mimo_pair_cost_matrix,
    mimo_sic_user_rates,
    sic_rates_for_pair,
    whitened_pair_gram,
)
from .report import ResultTable, Row, summarize


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


EXPERIMENTS = {
    # name: (allowed sweep variables, methods, default methods, primary metric)
    "sams_selective": (
        ("snr_db", "M"),
        ("first_bound", "second_bound", "random", "greedy", "upper_bound", "brute_force"),
        ("first_bound", "second_bound", "random"),
        "total_rate",
    ),
    "sams_flat": (
        ("snr_db", "M"),
        ("sorted", "random", "brute_force", "analytic_optimal", "analytic_random", "ergodic_capacity"),
        ("sorted", "random", "analytic_optimal", "analytic_random", "ergodic_capacity"),
        "rate_per_user",
    ),
    "mbass_sau": (
        ("snr_db", "N"),
        ("optimal", "random", "hungarian_symmetric", "joint_detection", "large_system_limit"),
        ("optimal", "random", "large_system_limit"),
        "rate_per_user",
    ),
    "mbass_mau": (
        ("snr_db", "N"),
        ("optimal", "random", "hungarian_symmetric", "joint_detection"),
        ("optimal", "random"),
        "rate_per_user",
    ),
    "fairness": (
        ("snr_db", "M"),
        ("first_bound", "second_bound", "random", "greedy"),
        ("first_bound", "random"),
        "jain",
    ),
    "tdma_power": (
        ("snr_db", "M"),
        ("tdma_equal", "tdma_optimal"),
        ("tdma_equal", "tdma_optimal"),
        "normalized_power_db",
    ),
    "asymptotic_tables": (
        ("snr_db",),
        ("analytic_optimal", "analytic_random", "ergodic_capacity"),
        ("analytic_optimal", "analytic_random", "ergodic_capacity"),
        "rate_per_user",
    ),
}

ANALYTIC_METHODS = {"analytic_optimal", "analytic_random", "ergodic_capacity", "large_system_limit"}


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    sweep_variable: str
    sweep: tuple
    snr_db: float = 10.0
    M: int = 10
    N: int = 4
    K: int | None = None
    alpha: float = 2.0
    L: int | None = None
    fading: str = "selective"
    power_modes: tuple = ("EP", "PPC")
    methods: tuple = ()
    trials: int = 1000
    rng_seed: int = 0
    disc_radius: float = 100.0
    r0: float = 1.0
    noise_variance: float = 1.0
    output: str | None = None
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sweep", tuple(float(v) for v in self.sweep))
        object.__setattr__(self, "power_modes", tuple(PowerMode(str(m).upper()).value for m in self.power_modes))
        if self.experiment in EXPERIMENTS and not self.methods:
            object.__setattr__(self, "methods", EXPERIMENTS[self.experiment][2])
        object.__setattr__(self, "methods", tuple(self.methods))

    @property
    def primary_metric(self) -> str:
        return EXPERIMENTS[self.experiment][3]

    def point(self, value: float) -> dict:
        """Resolved parameters at one sweep value."""
        p = {"snr_db": self.snr_db, "M": self.M, "N": self.N, "K": self.K, "L": self.L}
        if self.sweep_variable == "snr_db":
            p["snr_db"] = value
        else:
            p[self.sweep_variable] = int(round(value))
        if self.experiment in ("mbass_sau", "mbass_mau"):
            N = p["N"]
            if self.experiment == "mbass_mau":
                p["K"] = 2 * N
                if p["L"] is None:
                    p["L"] = (N - 1) // 2
            elif p["K"] is None or self.sweep_variable == "N":
                p["K"] = int(round(self.alpha * N))
        return p

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}", field="experiment")
        sweeps, methods, _, _ = EXPERIMENTS[self.experiment]
        if self.sweep_variable not in sweeps:
            raise ConfigurationError(
                f"{self.experiment} sweeps over {sweeps}, not {self.sweep_variable!r}", field="sweep_variable"
            )
        if not self.sweep:
            raise ConfigurationError("sweep range is empty", field="sweep")
        if any(b <= a for a, b in zip(self.sweep, self.sweep[1:])):
            raise ConfigurationError("sweep values must be strictly increasing", field="sweep")
        if self.sweep_variable != "snr_db" and any(v != int(v) for v in self.sweep):
            raise ConfigurationError(f"{self.sweep_variable} sweep needs integer values", field="sweep")
        bad = [m for m in self.methods if m not in methods]
        if bad:
            raise ConfigurationError(f"methods {bad} not available for {self.experiment}", field="methods")
        if not self.power_modes:
            raise ConfigurationError("no power modes", field="power_modes")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1", field="trials")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1", field="threads")
        if self.fading not in ("selective", "flat"):
            raise ConfigurationError("fading must be 'selective' or 'flat'", field="fading")
        for name in ("disc_radius", "r0", "noise_variance", "alpha"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0", field=name)
        for value in self.sweep:
            self._validate_point(self.point(value))

    def _validate_point(self, p: dict) -> None:
        exp = self.experiment
        if exp in ("sams_selective", "sams_flat", "fairness", "tdma_power"):
            if p["M"] < 1:
                raise ConfigurationError(f"M must be >= 1, got {p['M']}", field="M")
            if "brute_force" in self.methods and 2 * p["M"] > MAX_BRUTE_FORCE_USERS:
                raise ConfigurationError(
                    f"brute_force needs 2M <= {MAX_BRUTE_FORCE_USERS}, got M={p['M']}", field="methods"
                )
        if exp == "mbass_sau":
            N, K = p["N"], p["K"]
            if N < 1 or K % 2 or not N <= K <= 2 * N:
                raise ConfigurationError(f"mbass_sau needs even K with N <= K <= 2N, got N={N}, K={K}", field="K")
        if exp == "mbass_mau":
            N, L = p["N"], p["L"]
            if N < 1 or L is None or L < 1:
                raise ConfigurationError(f"mbass_mau needs N, L >= 1, got N={N}, L={L}", field="L")
            if self.L is None and N != 2 * L + 1:
                raise ConfigurationError(f"N = 2L + 1 requires odd N >= 3, got N={N}", field="N")

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        kwargs: dict = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigurationError(f"unknown experiment key {key!r}", field=key)
            try:
                if key == "sweep":
                    kwargs[key] = tuple(parse_range(raw))
                elif key in ("power_modes", "methods"):
                    kwargs[key] = tuple(parse_list(raw))
                elif key in ("M", "N", "K", "L", "trials", "rng_seed", "threads"):
                    kwargs[key] = None if str(raw).lower() in ("", "none", "auto") else int(raw)
                elif key in ("snr_db", "alpha", "disc_radius", "r0", "noise_variance"):
                    kwargs[key] = float(raw)
                else:
                    kwargs[key] = str(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(f"bad value for {key}: {raw!r}", field=key) from exc
        for required in ("experiment", "sweep_variable", "sweep"):
            if required not in kwargs:
                raise ConfigurationError(f"missing required key {required!r}", field=required)
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise ConfigurationError(str(exc), field="power_modes") from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        return cls.from_mapping(read_key_value_file(path))


# --------------------------------------------------------------------------
# Per-trial records


@dataclass(frozen=True)
class TrialRecord:
    method: str
    power_mode: str
    pairing: PairingSet
    pair_rates: tuple
    user_rates: np.ndarray

    @property
    def total(self) -> float:
        return math.fsum(self.pair_rates)

    @property
    def jain(self) -> float:
        return jain_index(self.user_rates)


@dataclass
class TrialResult:
    records: list = field(default_factory=list)
    # (method, power_mode, metric) -> value
    metrics: dict = field(default_factory=dict)

    def add(self, method, mode, metric, value):
        self.metrics[(method, mode, metric)] = float(value)


def _scenario_config(spec: ExperimentSpec, mode: str, snr_db: float, num_users: int) -> ScenarioConfig:
    return ScenarioConfig(
        num_users=num_users,
        target_avg_snr=db_to_linear(snr_db),
        power_mode=mode,
        disc_radius=spec.disc_radius,
        r0=spec.r0,
        noise_variance=spec.noise_variance,
        rng_seed=spec.rng_seed,
    )


def _sams_record(method, mode, gains, pairing: PairingSet) -> TrialRecord:
    """Pair and per-user rates with stronger-first decoding; gains are users x subcarriers."""
    n = gains.shape[0]
    user_rates = np.zeros(n)
    pair_rates = []
    subcarriers = pairing.subcarriers or tuple(range(len(pairing.pairs)))
    for (a, b), m in zip(pairing.pairs, subcarriers):
        col = m if gains.shape[1] > 1 else 0
        ra, rb = sic_rates_for_pair(gains[a, col], gains[b, col])
        user_rates[a], user_rates[b] = ra, rb
        pair_rates.append(math.log2(1 + gains[a, col] + gains[b, col]))
    return TrialRecord(method, mode, pairing, tuple(pair_rates), user_rates)


def _sams_selective_pairings(methods, gains, rand: PairingSet) -> dict:
    out = {}
    for method in methods:
        if method == "first_bound":
            out[method] = sams_pair_by_bound(gains, "first")
        elif method == "second_bound":
            out[method] = sams_pair_by_bound(gains, "second")
        elif method == "random":
            out[method] = rand
        elif method == "greedy":
            out[method] = greedy_two_best(gains)
        elif method == "brute_force":
            n, M = gains.shape
            res = brute_force_pairing(lambda p, m: math.log2(1 + gains[p[0], m] + gains[p[1], m]), n, M)
            out[method] = res.pairing
    return out


def _trial_sams(spec: ExperimentSpec, p: dict, rng) -> TrialResult:
    M = p["M"]
    n = 2 * M
    flat = spec.experiment == "sams_flat" or (spec.experiment == "tdma_power" and spec.fading == "flat")
    radii = sample_radii(n, spec.disc_radius, rng)
    h2 = np.abs(complex_gaussian(rng, (n, 1 if flat else M))) ** 2
    rand = random_pairing(n, rng)
    result = TrialResult()
    snr = db_to_linear(p["snr_db"])
    for mode in spec.power_modes:
        scen = build_scenario(_scenario_config(spec, mode, p["snr_db"], n), radii)
        gains = scen.snr[:, None] * h2
        if spec.experiment == "tdma_power":
            _tdma_metrics(result, mode, scen, h2, gains, flat)
            continue
        if flat:
            values = gains[:, 0]
            pairings = {}
            for method in spec.methods:
                if method == "sorted":
                    pairings[method] = flat_sorted_pairing(values)
                elif method == "random":
                    pairings[method] = rand
                elif method == "brute_force":
                    pairings[method] = brute_force_pairing(
                        lambda q: math.log2(1 + values[q[0]] + values[q[1]]), n
                    ).pairing
        else:
            pairings = _sams_selective_pairings(spec.methods, gains, rand)
        for method, pairing in pairings.items():
            rec = _sams_record(method, mode, gains, pairing)
            result.records.append(rec)
            if spec.experiment == "fairness":
                result.add(method, mode, "jain", rec.jain)
            elif flat:
                result.add(method, mode, "rate_per_user", rec.total / n)
            else:
                _selective_metrics(result, method, mode, rec.total, M, snr)
        if "upper_bound" in spec.methods and not flat:
            _selective_metrics(result, "upper_bound", mode, two_best_upper_bound(gains), M, snr)
    return result


def _selective_metrics(result, method, mode, total, M, snr):
    result.add(method, mode, "total_rate", total)
    if M >= 2:
        result.add(method, mode, "normalized_rate", total / theorem1_normalizers(M, snr)[1])
    if M >= 3:
        result.add(method, mode, "loglog_normalized_rate", total / theorem1_normalizers(M, snr)[0])


def _tdma_metrics(result: TrialResult, mode, scen, h2, gains, flat):
    """TDMA power needed for the NOMA rates, normalised by the NOMA power."""
    pairing = flat_sorted_pairing(gains[:, 0]) if flat else sams_pair_by_bound(gains, "first")
    q = scen.path_loss[:, None] * h2 / scen.noise_variance
    noma_power = 0.0
    equal = 0.0
    optimal = 0.0
    for (a, b), m in zip(pairing.pairs, pairing.subcarriers):
        col = 0 if flat else m
        rates = sic_rates_for_pair(gains[a, col], gains[b, col])
        qs = (q[a, col], q[b, col])
        noma_power += scen.tx_power[a] + scen.tx_power[b]
        equal += tdma_required_power(rates, qs, (0.5, 0.5)).total_power
        optimal += tdma_optimize_fractions(rates, qs).total_power
    for method, value in (("tdma_equal", equal), ("tdma_optimal", optimal)):
        ratio = value / noma_power
        result.add(method, mode, "normalized_power", ratio)
        result.add(method, mode, "normalized_power_db", 10 * math.log10(ratio))


def _mimo_record(method, mode, sys: MimoSystem, Q, cost, pairing: PairingSet) -> TrialRecord:
    user_rates = np.zeros(sys.num_users)
    pair_rates = []
    for a, b in pairing.pairs:
        ra, rb = mimo_sic_user_rates(whitened_pair_gram(Q, (a, b)))
        user_rates[a], user_rates[b] = ra, rb
        pair_rates.append(float(cost[a, b]))
    return TrialRecord(method, mode, pairing, tuple(pair_rates), user_rates)


def _trial_mbass(spec: ExperimentSpec, p: dict, rng) -> TrialResult:
    N, K = p["N"], p["K"]
    radii = sample_radii(K, spec.disc_radius, rng)
    if spec.experiment == "mbass_mau":
        G = complex_gaussian(rng, (K, N, p["L"]), 1.0 / N)
        fading = beamform_reduce(G).H_eff
    else:
        fading = complex_gaussian(rng, (N, K), 1.0 / N)
    rand = random_pairing(K, rng)
    result = TrialResult()
    for mode in spec.power_modes:
        scen = build_scenario(_scenario_config(spec, mode, p["snr_db"], K), radii)
        sys = MimoSystem(fading * np.sqrt(scen.path_loss), scen.tx_power, scen.noise_variance)
        cost = mimo_pair_cost_matrix(sys)
        Q = full_gram(sys)
        for method in spec.methods:
            if method == "optimal":
                pairing = mbass_optimal_pairing(cost)
            elif method == "random":
                pairing = rand
            elif method == "hungarian_symmetric":
                pairing = hungarian_symmetric_pairing(cost)
            elif method == "joint_detection":
                result.add(method, mode, "rate_per_user", sys.joint_detection_rate() / K)
                continue
            else:
                continue
            rec = _mimo_record(method, mode, sys, Q, cost, pairing)
            result.records.append(rec)
            result.add(method, mode, "rate_per_user", rec.total / K)
    return result


TRIALS: dict[str, Callable] = {
    "sams_selective": _trial_sams,
    "sams_flat": _trial_sams,
    "fairness": _trial_sams,
    "tdma_power": _trial_sams,
    "mbass_sau": _trial_mbass,
    "mbass_mau": _trial_mbass,
}


# --------------------------------------------------------------------------
# Analytic rows


@lru_cache(maxsize=256)
def _flat_analytics(mode: str, snr_db: float, disc_radius: float, r0: float, noise_variance: float) -> dict:
    cfg = ScenarioConfig(2, db_to_linear(snr_db), mode, disc_radius, r0, noise_variance)
    dist = snr_distribution(cfg)
    return {
        "analytic_optimal": flat_optimal_avg_rate(dist),
        "analytic_random": flat_random_avg_rate(dist),
        "ergodic_capacity": ergodic_capacity_per_user(dist.mean_snr()),
    }


def _analytic_rows(spec: ExperimentSpec, value: float, p: dict) -> list:
    rows = []
    wanted = [m for m in spec.methods if m in ANALYTIC_METHODS]
    for mode in spec.power_modes:
        for method in wanted:
            if method == "large_system_limit":
                if mode != PowerMode.PPC.value:
                    continue
                gamma = ppc_snr(db_to_linear(p["snr_db"]), spec.disc_radius, spec.r0)
                lam = mbass_limit_eigenvalue(AsymptoticParams(p["K"] / p["N"], gamma))
                v = math.log2(1 + lam)
            else:
                v = _flat_analytics(mode, p["snr_db"], spec.disc_radius, spec.r0, spec.noise_variance)[method]
            rows.append(Row(value, method, mode, spec.primary_metric, v, 0.0, 0))
    return rows


# --------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    table: ResultTable
    trials: dict = field(default_factory=dict)  # sweep value -> list[TrialResult]


def spec_metadata(spec: ExperimentSpec) -> dict:
    meta = {
        "experiment": spec.experiment,
        "version": __version__,
        "rng_seed": spec.rng_seed,
        "rng_algorithm": RNG_ALGORITHM,
        "power_accounting": POWER_ACCOUNTING,
        "primary_metric": spec.primary_metric,
    }
    for key, value in asdict(spec).items():
        if key in ("experiment", "rng_seed", "output", "threads"):
            continue
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        meta[key] = value
    return meta


def _metric_order(metrics: dict) -> list:
    seen = []
    for key in metrics:
        if key not in seen:
            seen.append(key)
    return seen


def run_experiment(spec: ExperimentSpec, keep_trials: bool = False) -> ExperimentResult:
    """Run every sweep point of ``spec`` and aggregate into a result table."""
    spec.validate()
    table = ResultTable(metadata=spec_metadata(spec), primary_metric=spec.primary_metric)
    result = ExperimentResult(table)
    trial_fn = TRIALS.get(spec.experiment)
    simulated = [m for m in spec.methods if m not in ANALYTIC_METHODS]
    for index, value in enumerate(spec.sweep):
        p = spec.point(value)
        if trial_fn is not None and simulated:

            def one(t, index=index, p=p):
                return trial_fn(spec, p, make_rng(spec.rng_seed, index, t))

            if spec.threads > 1:
                with ThreadPoolExecutor(max_workers=spec.threads) as pool:
                    trials = list(pool.map(one, range(spec.trials)))
            else:
                trials = [one(t) for t in range(spec.trials)]
            keys = _metric_order(trials[0].metrics)
            for method, mode, metric in keys:
                mean, se, n = summarize(tr.metrics[(method, mode, metric)] for tr in trials)
                table.rows.append(Row(value, method, mode, metric, mean, se, n))
            if keep_trials:
                result.trials[value] = trials
        table.rows.extend(_analytic_rows(spec, value, p))
    if spec.output:
        from .report import emit_table

        emit_table(table, spec.output)
    return result


__all__ = [
    "ExperimentSpec",
    "ExperimentResult",
    "TrialRecord",
    "TrialResult",
    "run_experiment",
    "db_to_linear",
    "EXPERIMENTS",
    "NomaPairError",
]
