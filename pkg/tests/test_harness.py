import math
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from noma_pair import cli
from noma_pair.asymptotics import AsymptoticParams, flat_optimal_avg_rate, mbass_limit_eigenvalue, snr_distribution
from noma_pair.channel import RNG_ALGORITHM, ScenarioConfig
from noma_pair.errors import ConfigurationError, NumericalError, OutputError
from noma_pair.experiments import ExperimentSpec, db_to_linear, run_experiment
from noma_pair.presets import PRESETS, analytic_table, preset_spec, mbass_limit_table
from noma_pair.report import HEADER, ResultTable, Row, emit_table, parse_table, read_table, render_table


def small(experiment, sweep_variable, sweep, **kw):
    kw.setdefault("trials", 20)
    return ExperimentSpec(experiment, sweep_variable, tuple(sweep), **kw)


def records_by(trial, method, mode):
    return [r for r in trial.records if r.method == method and r.power_mode == mode]


# --------------------------------------------------------------------------
# trial semantics


def test_flat_sorted_equals_brute_force_per_trial():
    spec = small("sams_flat", "M", [4], methods=("sorted", "brute_force"), trials=50)
    res = run_experiment(spec, keep_trials=True)
    for tr in res.trials[4.0]:
        for mode in spec.power_modes:
            s = tr.metrics[("sorted", mode, "rate_per_user")]
            b = tr.metrics[("brute_force", mode, "rate_per_user")]
            assert s == pytest.approx(b, rel=1e-12)


def test_selective_brute_force_dominates():
    spec = small("sams_selective", "M", [3], methods=("first_bound", "greedy", "brute_force", "upper_bound"), trials=30)
    res = run_experiment(spec, keep_trials=True)
    for tr in res.trials[3.0]:
        for mode in spec.power_modes:
            v = {m: tr.metrics[(m, mode, "total_rate")] for m in spec.methods}
            assert v["upper_bound"] >= v["brute_force"] - 1e-12
            assert v["brute_force"] >= v["first_bound"] - 1e-12
            assert v["brute_force"] >= v["greedy"] - 1e-12


def test_mbass_optimal_beats_random():
    spec = small("mbass_sau", "N", [4], snr_db=15.0, methods=("optimal", "random"), trials=200)
    table = run_experiment(spec).table
    for mode in spec.power_modes:
        assert table.value(4.0, "optimal", mode).mean > table.value(4.0, "random", mode).mean


def test_rate_report_invariants():
    for spec in (
        small("sams_selective", "snr_db", [10], methods=("first_bound", "random")),
        small("sams_flat", "M", [5], methods=("sorted", "random")),
        small("mbass_sau", "N", [4], methods=("optimal", "random", "hungarian_symmetric")),
        small("mbass_mau", "N", [5], methods=("optimal", "random")),
    ):
        res = run_experiment(spec, keep_trials=True)
        for trials in res.trials.values():
            for tr in trials:
                assert tr.records
                for rec in tr.records:
                    assert rec.total == pytest.approx(math.fsum(rec.pair_rates), abs=1e-12)
                    assert math.fsum(rec.user_rates) == pytest.approx(rec.total, abs=1e-12)
                    assert np.all(rec.user_rates >= 0)
                    assert 0 < rec.jain <= 1


def test_paired_realizations():
    spec = small("sams_selective", "snr_db", [5], methods=("first_bound", "random"), trials=10)
    res = run_experiment(spec, keep_trials=True)
    for tr in res.trials[5.0]:
        # one random draw per trial, shared by every power mode
        (ep,), (ppc,) = records_by(tr, "random", "EP"), records_by(tr, "random", "PPC")
        assert ep.pairing == ppc.pairing
    # adding methods never changes what the others see
    alone = run_experiment(replace(spec, methods=("first_bound",))).table
    both = run_experiment(spec).table
    for mode in spec.power_modes:
        assert alone.value(5.0, "first_bound", mode).mean == both.value(5.0, "first_bound", mode).mean


def test_selective_normalised_columns():
    spec = small("sams_selective", "M", [10], methods=("first_bound",), power_modes=("EP",))
    table = run_experiment(spec).table
    from noma_pair.asymptotics import theorem1_normalizers

    raw = table.value(10.0, "first_bound", "EP", "total_rate").mean
    norm = table.value(10.0, "first_bound", "EP", "normalized_rate").mean
    loglog = table.value(10.0, "first_bound", "EP", "loglog_normalized_rate").mean
    first, second = theorem1_normalizers(10, db_to_linear(10.0))
    assert norm == pytest.approx(raw / second, rel=1e-12)
    assert loglog == pytest.approx(raw / first, rel=1e-12)


def test_tdma_metrics():
    for fading in ("selective", "flat"):
        spec = small("tdma_power", "snr_db", [0, 10], fading=fading, trials=30)
        res = run_experiment(spec, keep_trials=True)
        for s, trials in res.trials.items():
            for tr in trials:
                for mode in spec.power_modes:
                    eq = tr.metrics[("tdma_equal", mode, "normalized_power")]
                    opt = tr.metrics[("tdma_optimal", mode, "normalized_power")]
                    assert opt <= eq * (1 + 1e-12)
                    assert tr.metrics[("tdma_optimal", mode, "normalized_power_db")] == pytest.approx(10 * math.log10(opt))
                    # equal powers: TDMA never wins; PPC lets TDMA re-split power, so only the mean is >= 1
                    if mode == "EP":
                        assert opt >= 1 - 1e-9
            for mode in spec.power_modes:
                assert res.table.value(s, "tdma_optimal", mode, "normalized_power").mean > 1


def test_analytic_rows():
    spec = small("sams_flat", "snr_db", [15], methods=("analytic_optimal", "ergodic_capacity"), power_modes=("PPC",))
    table = run_experiment(spec).table
    dist = snr_distribution(ScenarioConfig(2, db_to_linear(15.0), "PPC"))
    row = table.value(15.0, "analytic_optimal", "PPC")
    assert row.mean == pytest.approx(flat_optimal_avg_rate(dist), rel=1e-12) and row.trials == 0
    assert len(table.rows) == 2


def test_mbass_limit_table_rows():
    table = mbass_limit_table(snr_db=(10.0,), alphas=(2.0,))
    lam = table.value(10.0, "alpha=2", "PPC", "eigenvalue").mean
    rate = table.value(10.0, "alpha=2", "PPC", "rate_per_user").mean
    assert rate == pytest.approx(math.log2(1 + lam), rel=1e-15)
    assert table.value(10.0, "alpha=2", "PPC", "closed_form_rate").mean == pytest.approx(rate, rel=1e-12)


def test_mbass_limit_row_is_ppc_only():
    spec = small("mbass_sau", "N", [4], methods=("large_system_limit",))
    table = run_experiment(spec).table
    assert [r.power_mode for r in table.rows] == ["PPC"]
    from noma_pair.asymptotics import ppc_snr

    lam = mbass_limit_eigenvalue(AsymptoticParams(2.0, ppc_snr(db_to_linear(10.0))))
    assert table.rows[0].mean == pytest.approx(math.log2(1 + lam))


# --------------------------------------------------------------------------
# reproducibility and aggregation


def test_determinism(tmp_path):
    spec = small("sams_selective", "snr_db", [0, 10], methods=("first_bound", "random"), rng_seed=7)
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    run_experiment(replace(spec, output=str(a)))
    run_experiment(replace(spec, output=str(b)))
    run_experiment(replace(spec, output=str(c), threads=3))
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    d = tmp_path / "d.csv"
    run_experiment(replace(spec, output=str(d), rng_seed=8))
    assert a.read_bytes() != d.read_bytes()


def test_stderr_shrinks_with_trials():
    base = small("sams_selective", "snr_db", [10], methods=("first_bound",), power_modes=("EP",))
    se100 = run_experiment(replace(base, trials=100)).table.value(10.0, "first_bound", "EP").stderr
    se400 = run_experiment(replace(base, trials=400)).table.value(10.0, "first_bound", "EP").stderr
    assert 1.6 <= se100 / se400 <= 2.4


def test_metadata():
    table = run_experiment(small("sams_flat", "M", [2], trials=2, methods=("sorted",), rng_seed=3)).table
    md = table.metadata
    assert md["rng_seed"] == 3 and md["rng_algorithm"] == RNG_ALGORITHM
    assert md["power_accounting"] == "average" and "version" in md
    text = render_table(table)
    assert "# power_accounting=average" in text and "# rng_seed=3" in text


# --------------------------------------------------------------------------
# csv


def test_emit_empty_table(tmp_path):
    path = tmp_path / "empty.csv"
    emit_table(ResultTable(metadata={"experiment": "none"}), path)
    assert path.read_text().splitlines() == ["# experiment=none", ",".join(HEADER)]


def test_emit_cardinality_and_round_trip(tmp_path):
    spec = small("sams_flat", "M", [1, 2, 3], methods=("sorted", "random"), power_modes=("EP",))
    table = run_experiment(spec).table
    path = tmp_path / "t.csv"
    emit_table(table, path)
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    assert lines[0] == ",".join(HEADER)
    assert len(lines) == 1 + 6
    back = read_table(path)
    assert back.primary_metric == "rate_per_user"
    assert [(r.sweep, r.method, r.power_mode, r.metric, r.mean, r.stderr, r.trials) for r in back.rows] == [
        (r.sweep, r.method, r.power_mode, r.metric, r.mean, r.stderr, r.trials) for r in table.rows
    ]


def test_secondary_metrics_labelled():
    t = ResultTable([Row(1.0, "m", "EP", "aux", 0.1, 0.0, 1), Row(1.0, "m", "EP", "main", 1 / 3, 0.0, 1)], {}, "main")
    text = render_table(t)
    assert "m/aux" in text
    back = parse_table(text, "main")
    assert back.rows[0].metric == "aux" and back.rows[1].metric == "main" and back.rows[1].mean == 1 / 3


def test_emit_unwritable(tmp_path):
    with pytest.raises(OutputError):
        emit_table(ResultTable(), tmp_path / "missing" / "x.csv")


# --------------------------------------------------------------------------
# validation


@pytest.mark.parametrize(
    "kwargs, field",
    [
        (dict(experiment="nope", sweep_variable="M", sweep=(1,)), "experiment"),
        (dict(experiment="sams_flat", sweep_variable="N", sweep=(1,)), "sweep_variable"),
        (dict(experiment="sams_flat", sweep_variable="M", sweep=()), "sweep"),
        (dict(experiment="sams_flat", sweep_variable="M", sweep=(2, 1)), "sweep"),
        (dict(experiment="sams_flat", sweep_variable="M", sweep=(1.5,)), "sweep"),
        (dict(experiment="sams_flat", sweep_variable="M", sweep=(1,), methods=("optimal",)), "methods"),
        (dict(experiment="sams_flat", sweep_variable="M", sweep=(10,), methods=("brute_force",)), "methods"),
        (dict(experiment="sams_flat", sweep_variable="M", sweep=(1,), trials=0), "trials"),
        (dict(experiment="sams_flat", sweep_variable="M", sweep=(0,)), "M"),
        (dict(experiment="mbass_sau", sweep_variable="N", sweep=(4,), alpha=3.0), "K"),
        (dict(experiment="mbass_sau", sweep_variable="snr_db", sweep=(0,), N=4, K=7), "K"),
        (dict(experiment="mbass_mau", sweep_variable="N", sweep=(4,)), "N"),
        (dict(experiment="mbass_mau", sweep_variable="N", sweep=(1,)), "L"),
        (dict(experiment="tdma_power", sweep_variable="M", sweep=(1,), fading="slow"), "fading"),
    ],
)
def test_spec_validation(kwargs, field):
    with pytest.raises(ConfigurationError) as info:
        run_experiment(ExperimentSpec(**kwargs))
    assert info.value.field == field


def test_presets_validate():
    for name in PRESETS:
        spec = preset_spec(name)
        spec.validate()
        assert spec.trials == 1000
    assert preset_spec("fig7").point(8.0)["K"] == 16
    assert preset_spec("fig8").point(9.0) == {"snr_db": 10.0, "M": 10, "N": 9, "K": 18, "L": 4}
    with pytest.raises(ConfigurationError):
        preset_spec("fig9")
    assert preset_spec("fig1", {"trials": "5", "snr_db": "3"}).trials == 5


def test_spec_from_file(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("experiment = sams_flat\nsweep_variable = M\nsweep = 1:3:1\nmethods = sorted, random\ntrials = 4\n")
    spec = ExperimentSpec.from_file(p)
    assert spec.sweep == (1.0, 2.0, 3.0) and spec.methods == ("sorted", "random") and spec.trials == 4
    p.write_text("experiment = sams_flat\nsweep_variable = M\nsweep = 1\ntrials = many\n")
    with pytest.raises(ConfigurationError) as info:
        ExperimentSpec.from_file(p)
    assert info.value.field == "trials"


# --------------------------------------------------------------------------
# command line


def test_cli_run(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("experiment = sams_flat\nsweep_variable = M\nsweep = 1,2\nmethods = sorted\npower_modes = EP\n")
    out = tmp_path / "out.csv"
    assert cli.main(["run", str(cfg), "--out", str(out), "--trials", "3", "--seed", "5"]) == 0
    table = read_table(out)
    assert len(table.rows) == 2 and table.rows[0].trials == 3 and table.metadata["rng_seed"] == "5"
    assert cli.main(["run", str(cfg), "--trials", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[-3] == ",".join(HEADER) and len(lines[-2].split(",")) == len(HEADER)


def test_cli_stdout(capsys):
    assert cli.main(["preset", "fig5", "sweep=1", "methods=sorted", "--trials", "2"]) == 0
    text = capsys.readouterr().out
    assert ",".join(HEADER) in text and "# experiment=sams_flat" in text


def test_cli_analytic(capsys):
    assert cli.main(["analytic", "mbass_limit", "snr_db=0,10", "alphas=2"]) == 0
    assert "alpha=2" in capsys.readouterr().out
    assert analytic_table("flat_limits", {"snr_db": "10", "power_modes": "PPC"}).rows


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    assert cli.main(["preset", "fig8", "sweep=4"]) == 2
    assert cli.main(["preset", "fig1", "bogus=1"]) == 2
    assert cli.main(["preset", "fig1", "notakeyvalue"]) == 2
    assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 4
    assert cli.main(["preset", "fig5", "sweep=1", "--trials", "1", "--out", str(tmp_path / "no" / "x.csv")]) == 4
    assert cli.main(["analytic", "flat_limits", "alphas=1"]) == 2

    def boom(spec):
        raise NumericalError("did not converge", achieved_tolerance=1e-3)

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert cli.main(["preset", "fig5", "sweep=1", "--trials", "1"]) == 3
    assert "numerical error" in capsys.readouterr().err


def test_console_script(tmp_path):
    out = tmp_path / "o.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "noma_pair.cli", "preset", "fig3", "sweep=0", "--trials", "2", "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert read_table(out).metadata["power_accounting"] == "average"
