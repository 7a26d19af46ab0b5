import json
import math
import subprocess
import sys

import numpy as np
import pytest

from glauber1d.harness import (
    ConfigError,
    ExperimentConfig,
    largest_reliable_decade,
    loglog_wls,
    read_csv,
    run_autocorr,
    run_bounds,
    run_ids,
    run_kmc,
    run_report,
    write_csv,
)

BASE = {"model": {"family": "exponential", "rate": 5.0}}


def make_config(**overrides) -> ExperimentConfig:
    raw = dict(BASE)
    raw.update(overrides)
    return ExperimentConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# Configuration

def test_config_defaults():
    cfg = make_config()
    assert cfg.r == 500 and cfg.samples == 100 and cfg.seed == 0 and cfg.threads == 1
    assert cfg.legendre_c == 0.5
    lams = cfg.lambda_values()
    assert lams.size == 13
    assert lams[0] == pytest.approx(-0.03) and lams[-1] == pytest.approx(-0.3)
    times = cfg.time_values()
    assert times[0] == pytest.approx(0.1) and times[-1] == pytest.approx(1e4)


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**BASE, "tpyo": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**BASE, "lambda_grid": {"abs_min": 0.1, "mint": 2}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**BASE, "kmc": {"sites": 64}})  # even window


def test_config_rejects_bad_model():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": {"family": "exponential"}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({})


def test_config_explicit_time_values():
    cfg = make_config(time_grid={"values": [0.0, 1.0, 2.5]})
    assert np.array_equal(cfg.time_values(), [0.0, 1.0, 2.5])
    with pytest.raises(ConfigError):
        make_config(time_grid={"values": [1.0, 0.5]})


def test_config_overrides():
    cfg = make_config(seed=3, threads=2)
    out = cfg.with_overrides(seed=9, threads=4)
    assert out.seed == 9 and out.threads == 4
    assert cfg.seed == 3 and cfg.threads == 2  # original untouched


def test_config_averaged_regime_gate():
    make_config().require_averaged_regime()
    slow = make_config(model={"family": "exponential", "rate": 4.0})
    with pytest.raises(ConfigError):
        slow.require_averaged_regime()
    # bounded couplings always have the moment
    make_config(model={"family": "uniform", "gamma_max": 0.5}).require_averaged_regime()


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({**BASE, "r": 12, "samples": 4}))
    cfg = ExperimentConfig.from_file(path)
    assert cfg.r == 12 and cfg.samples == 4
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(bad)


# ---------------------------------------------------------------------------
# CSV plumbing

def test_csv_round_trip_with_meta(tmp_path):
    path = tmp_path / "table.csv"
    meta = {"config": {"r": 3}, "note": "hello world"}
    write_csv(path, ("a", "b"), [(1.0, 2.0), (0.1, math.nan)], meta)
    header, rows, back = read_csv(path)
    assert header == ["a", "b"]
    assert rows[0] == [1.0, 2.0]
    assert rows[1][0] == 0.1 and math.isnan(rows[1][1])
    assert back["config"] == {"r": 3}
    assert back["note"] == "hello world"


def test_csv_cells_survive_at_full_precision(tmp_path):
    path = tmp_path / "prec.csv"
    value = 1.0 / 3.0
    write_csv(path, ("x",), [(value,)], {})
    _, rows, _ = read_csv(path)
    assert rows[0][0] == value


# ---------------------------------------------------------------------------
# Fits

def test_wls_recovers_exact_power_law():
    x = np.geomspace(1.0, 100.0, 12)
    y = 3.0 * x**-2.0
    se = np.full_like(x, 1e-9)
    fit = loglog_wls(x, y, se)
    assert fit.slope == pytest.approx(-2.0, abs=1e-8)
    assert math.exp(fit.intercept) == pytest.approx(3.0, rel=1e-8)
    assert not fit.poor_fit


def test_wls_flags_exponential_as_poor_power_law():
    t = np.geomspace(1.0, 10.0, 10)
    y = np.exp(-t)
    fit = loglog_wls(t, y, np.full_like(t, 1e-12))
    assert fit is not None
    assert fit.poor_fit


def test_wls_drops_noise_floor_points():
    x = np.geomspace(1.0, 100.0, 8)
    y = 2.0 * x**-1.0
    se = np.full_like(x, 1e-9)
    se[-3:] = y[-3:]  # drowned in noise: y < 3 se
    fit = loglog_wls(x, y, se)
    assert fit.n_used == 5


def test_wls_needs_three_points():
    assert loglog_wls([1.0, 2.0], [1.0, 0.5], [1e-9, 1e-9]) is None


def test_wls_window_and_transform():
    x = np.geomspace(10.0, 1e4, 14)
    alpha = 1.5
    y = np.exp(-0.25 * np.log(x) ** alpha)
    fit = loglog_wls(
        x, y, np.full_like(x, 1e-10), window=(50.0, 5e3),
        x_transform=lambda xs: np.log(xs) ** alpha,
    )
    assert fit.slope == pytest.approx(-0.25, abs=1e-6)
    assert fit.window[0] >= 50.0 and fit.window[1] <= 5e3


def test_largest_reliable_decade():
    t = np.geomspace(0.1, 1000.0, 20)
    v = np.exp(-0.001 * t)
    se = np.full_like(t, 1e-6)
    se[t > 100.0] = 1.0  # unresolved tail
    window = largest_reliable_decade(t, v, se)
    assert window is not None
    lo, hi = window
    assert hi <= 100.0 * 1.0001 and lo == pytest.approx(hi / 10.0)


# ---------------------------------------------------------------------------
# Runs

def test_run_ids_writes_curve(tmp_path):
    cfg = make_config(
        r=25,
        samples=6,
        lambda_grid={"abs_min": 0.05, "abs_max": 0.5, "points": 4},
    )
    out = tmp_path / "ids.csv"
    curve = run_ids(cfg, out)
    header, rows, meta = read_csv(out)
    assert header == ["lambda", "n_hat", "stderr", "r", "samples"]
    assert len(rows) == 4
    assert meta["command"] == "ids"
    assert meta["config"]["r"] == 25
    assert np.all(curve.n_hat >= 0.0)


def test_run_autocorr_writes_series_and_dump(tmp_path):
    cfg = make_config(r=10, samples=5, time_grid={"values": [0.0, 0.5, 1.0]})
    out = tmp_path / "s.csv"
    dump = tmp_path / "s.jsonl"
    series = run_autocorr(cfg, out, dump_path=dump)
    header, rows, meta = read_csv(out)
    assert header == ["t", "s_hat", "stderr", "mean_deficit"]
    assert len(rows) == 3
    assert meta["command"] == "autocorr"
    records = [json.loads(line) for line in dump.read_text().splitlines()]
    assert len(records) == 5
    stacked = np.array([rec["values"] for rec in records])
    assert stacked.mean(axis=0) == pytest.approx(series.values, rel=1e-12)


def test_run_autocorr_refuses_heavy_tails(tmp_path):
    cfg = make_config(model={"family": "exponential", "rate": 3.0}, r=5, samples=2)
    with pytest.raises(ConfigError):
        run_autocorr(cfg, tmp_path / "s.csv")


def test_run_kmc_includes_spectral_column(tmp_path):
    cfg = make_config(
        kmc={"sites": 9, "trajectories": 800, "chunk": 200},
        time_grid={"values": [0.5, 1.0]},
    )
    out = tmp_path / "kmc.csv"
    stats = run_kmc(cfg, out)
    header, rows, meta = read_csv(out)
    assert header == ["t", "kmc_estimate", "stderr", "n_traj", "spectral"]
    # the grid is prepended with t = 0, where the trajectory column is exactly 1
    # and the spectral twin is 1 up to eigendecomposition rounding
    assert rows[0][0] == 0.0 and rows[0][1] == 1.0
    assert rows[0][4] == pytest.approx(1.0, abs=1e-12)
    assert stats.n_traj == 800


def test_run_bounds_drops_zero_time(tmp_path):
    cfg = make_config(time_grid={"values": [0.0, 100.0, 1000.0]})
    out = tmp_path / "bounds.csv"
    table = run_bounds(cfg, out)
    assert table.times.size == 2
    header, _, _ = read_csv(out)
    assert header[0] == "t" and header[-1] == "C2"


def test_run_report_full_pipeline(tmp_path):
    """ids + autocorr inputs produce slope sections with theory bands."""
    cfg = make_config(
        r=60,
        samples=40,
        lambda_grid={"abs_min": 0.1, "abs_max": 0.6, "points": 6},
        time_grid={"values": [0.0, 0.3, 1.0, 3.0, 10.0, 30.0]},
    )
    ids_path = tmp_path / "ids.csv"
    s_path = tmp_path / "s.csv"
    run_ids(cfg, ids_path)
    run_autocorr(cfg, s_path)
    rcfg = make_config(
        report_inputs={"ids_csv": str(ids_path), "autocorr_csv": str(s_path)}
    )
    report_path = tmp_path / "report.json"
    report = run_report(rcfg, report_path)
    assert report["ids"]["theory_band"] == [1.25, 5.0]
    assert report["autocorr"]["theory_band"] == [-10.0, -0.625]
    on_disk = json.loads(report_path.read_text())
    assert on_disk["ids"]["points_total"] == 6
    assert "mean_deficit" in on_disk["autocorr"]


def test_run_report_flags_exponential_decay_as_poor(tmp_path):
    """A pure e^{-t} series is not a power law; the fit must say so."""
    from glauber1d.autocorr import CorrelationSeries

    t = np.geomspace(1.0, 10.0, 12)
    series = CorrelationSeries(
        times=t,
        values=np.exp(-t),
        stderr=np.full(t.size, 1e-9),
        r=5,
        samples=2,
        mean_deficit=0.0,
        meta={"r": 5, "samples": 2},
    )
    s_path = tmp_path / "decay.csv"
    series.to_csv(s_path)
    cfg = make_config(
        report_inputs={"autocorr_csv": str(s_path)},
        fit={"t_min": 1.0, "t_max": 10.0},
    )
    report = run_report(cfg, tmp_path / "report.json")
    assert report["autocorr"]["poor_fit"] is True
    assert report["autocorr"]["fit_ok"] is False


def test_run_report_requires_inputs(tmp_path):
    with pytest.raises(ConfigError):
        run_report(make_config(), tmp_path / "report.json")
    with pytest.raises(ConfigError):
        run_report(
            make_config(report_inputs={"ids_csv": str(tmp_path / "nowhere.csv")}),
            tmp_path / "report.json",
        )


# ---------------------------------------------------------------------------
# CLI

def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "glauber1d", *args],
        capture_output=True,
        text=True,
        timeout=600,
    )


def test_cli_ids_smoke(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(
        json.dumps(
            {
                **BASE,
                "r": 15,
                "samples": 4,
                "lambda_grid": {"abs_min": 0.1, "abs_max": 0.4, "points": 3},
            }
        )
    )
    out = tmp_path / "ids.csv"
    proc = run_cli("ids", "--config", str(cfg_path), "--out", str(out), "--quiet")
    assert proc.returncode == 0, proc.stderr
    header, rows, _ = read_csv(out)
    assert header[0] == "lambda" and len(rows) == 3


def test_cli_seed_override_changes_output(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(
        json.dumps(
            {
                **BASE,
                "r": 15,
                "samples": 4,
                "lambda_grid": {"abs_min": 0.1, "abs_max": 0.4, "points": 3},
            }
        )
    )
    out1, out2, out3 = (tmp_path / f"ids{i}.csv" for i in (1, 2, 3))
    assert run_cli("ids", "--config", str(cfg_path), "--out", str(out1), "--quiet").returncode == 0
    assert run_cli("ids", "--config", str(cfg_path), "--out", str(out2), "--quiet").returncode == 0
    assert (
        run_cli(
            "ids", "--config", str(cfg_path), "--out", str(out3), "--seed", "99", "--quiet"
        ).returncode
        == 0
    )

    def data(path):
        return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]

    assert data(out1) == data(out2)
    assert data(out1) != data(out3)


def test_cli_config_error_exit_code(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"model": {"family": "weibull", "k": 1.0}}))
    proc = run_cli("ids", "--config", str(cfg_path), "--out", str(tmp_path / "x.csv"))
    assert proc.returncode == 2
    assert "weibull" in proc.stderr


def test_cli_missing_config_exit_code(tmp_path):
    proc = run_cli("ids", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "x.csv"))
    assert proc.returncode == 2
