"""Named experiment presets (fig1 to fig8) and closed-form tables."""

from __future__ import annotations

import math

from .asymptotics import AsymptoticParams, mbass_limit_eigenvalue, mbass_limit_rate_per_user, ppc_snr
from .config import parse_list, parse_range
from .errors import ConfigurationError
from .experiments import ExperimentSpec, db_to_linear, run_experiment
from .report import ResultTable, Row

DEFAULT_TRIALS = 1000

PRESETS = {
    "fig1": dict(
        experiment="sams_selective", sweep_variable="snr_db", sweep=tuple(range(0, 51, 5)), M=10,
        methods=("first_bound", "second_bound", "random"),
    ),
    "fig2": dict(
        experiment="sams_selective", sweep_variable="M", sweep=(10, 50, 100, 200, 400, 600, 800, 1000), snr_db=5.0,
        methods=("first_bound", "random"),
    ),
    "fig3": dict(experiment="tdma_power", sweep_variable="snr_db", sweep=tuple(range(0, 21, 2)), M=10, fading="selective"),
    "fig4": dict(
        experiment="fairness", sweep_variable="M", sweep=(1, 5, 10, 15, 20, 25, 30, 35, 40), snr_db=10.0,
        methods=("first_bound", "random"),
    ),
    "fig5": dict(
        experiment="sams_flat", sweep_variable="M", sweep=(1, 2, 5, 10, 20, 50, 100, 200), snr_db=15.0,
        power_modes=("EP",),
    ),
    "fig6": dict(experiment="tdma_power", sweep_variable="snr_db", sweep=tuple(range(0, 21, 2)), M=10, fading="flat"),
    "fig7": dict(
        experiment="mbass_sau", sweep_variable="N", sweep=(2, 4, 8, 16, 32, 64), snr_db=15.0, alpha=2.0,
        methods=("optimal", "random", "large_system_limit"),
    ),
    "fig8": dict(
        experiment="mbass_mau", sweep_variable="N", sweep=(3, 5, 7, 9, 11, 15, 21), snr_db=10.0,
        methods=("optimal", "random", "joint_detection"),
    ),
}


def preset_spec(name: str, overrides: dict | None = None) -> ExperimentSpec:
    """Build the named preset, applying string ``overrides`` (``key -> value``)."""
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}", field="preset")
    kwargs = dict(PRESETS[name], trials=DEFAULT_TRIALS)
    if overrides:
        parsed = ExperimentSpec.from_mapping(
            {"experiment": kwargs["experiment"], "sweep_variable": kwargs["sweep_variable"], "sweep": "0", **overrides}
        )
        for key in overrides:
            kwargs[key] = getattr(parsed, key)
    spec = ExperimentSpec(**kwargs)
    spec.validate()
    return spec


# --------------------------------------------------------------------------
# Closed-form tables


def flat_limit_table(snr_db=tuple(range(0, 31, 2)), power_modes=("EP", "PPC")) -> ResultTable:
    """Large-M per-user rates of sorted and random pairing versus target SNR."""
    spec = ExperimentSpec(
        experiment="asymptotic_tables", sweep_variable="snr_db", sweep=tuple(snr_db), power_modes=tuple(power_modes)
    )
    return run_experiment(spec).table


def mbass_limit_table(snr_db=tuple(range(0, 31, 2)), alphas=(1.0, 1.5, 2.0)) -> ResultTable:
    """Pair eigenvalue limit and per-user rate for PPC at several loads.

    ``gamma`` is the PPC receive SNR of the default disc at each target SNR.
    """
    table = ResultTable(
        metadata={"table": "mbass_limit", "alphas": ",".join(str(a) for a in alphas)}, primary_metric="rate_per_user"
    )
    for s in snr_db:
        gamma = ppc_snr(db_to_linear(s))
        for a in alphas:
            p = AsymptoticParams(float(a), gamma)
            lam = mbass_limit_eigenvalue(p)
            name = f"alpha={a:g}"
            table.rows.append(Row(float(s), name, "PPC", "rate_per_user", math.log2(1 + lam), 0.0, 0))
            table.rows.append(Row(float(s), name, "PPC", "eigenvalue", lam, 0.0, 0))
            table.rows.append(Row(float(s), name, "PPC", "closed_form_rate", mbass_limit_rate_per_user(p), 0.0, 0))
    return table


ANALYTIC_TABLES = {"flat_limits": flat_limit_table, "mbass_limit": mbass_limit_table}


def analytic_table(name: str, overrides: dict | None = None) -> ResultTable:
    if name not in ANALYTIC_TABLES:
        raise ConfigurationError(f"unknown table {name!r}; choose from {sorted(ANALYTIC_TABLES)}", field="table")
    kwargs = {}
    for key, value in (overrides or {}).items():
        if key == "snr_db" or key == "sweep":
            kwargs["snr_db"] = tuple(parse_range(value))
        elif key == "alphas" and name == "mbass_limit":
            kwargs["alphas"] = tuple(float(v) for v in parse_list(value))
        elif key == "power_modes" and name == "flat_limits":
            kwargs["power_modes"] = tuple(parse_list(value))
        else:
            raise ConfigurationError(f"unknown override {key!r} for table {name}", field=key)
    return ANALYTIC_TABLES[name](**kwargs)
