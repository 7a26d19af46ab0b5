"""Experiment orchestration: configs, runs, file formats, report fits.

A single JSON config drives every run type.  Outputs are CSV with full
`%.17g` precision and `# key: value` provenance comments (package version,
command, the resolved config), so a results file pins down the exact run
that produced it.  All runs are deterministic functions of (config, seed)
and bit-identical across `threads` settings.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._version import VERSION
from .asymptotics import EnvelopeTable, envelope
from .autocorr import CorrelationSeries, disorder_average, free_chain_autocorr
from .disorder import Exponential, Stretched, model_from_dict, model_to_dict, sample_couplings
from .kmc import TrajectoryStats, simulate_autocorr
from .spectra import IdsCurve, estimate_ids

logger = logging.getLogger("glauber1d")


class ConfigError(ValueError):
    """Bad configuration or missing run inputs (CLI exit code 2)."""


# ---------------------------------------------------------------------------
# CSV with provenance comments

def _format_cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return f"{float(v):.17g}"


def write_csv(path, columns, rows, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(meta or {}):
            fh.write(f"# {key}: {json.dumps(meta[key], sort_keys=True)}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")


def read_csv(path):
    """Return (header, float rows, meta) from a provenance-commented CSV."""
    meta: dict = {}
    header: list[str] | None = None
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                key, sep, val = body.partition(":")
                if sep:
                    try:
                        meta[key.strip()] = json.loads(val.strip())
                    except json.JSONDecodeError:
                        meta[key.strip()] = val.strip()
                continue
            cells = line.split(",")
            if header is None:
                header = cells
            else:
                rows.append([float(c) if c else math.nan for c in cells])
    if header is None:
        raise ValueError(f"{path} has no header row")
    return header, rows, meta


# ---------------------------------------------------------------------------
# Configuration

_LAMBDA_DEFAULT = {"abs_min": 0.03, "abs_max": 0.3, "points": 13}
_TIME_DEFAULT = {"t_min": 0.1, "t_max": 1.0e4, "per_decade": 8}
_KMC_DEFAULT = {"sites": 65, "trajectories": 20000, "chunk": 1000}
_FIT_DEFAULT = {"t_min": None, "t_max": None}


def _merge_section(name: str, defaults: dict, given) -> dict:
    if given is None:
        return dict(defaults)
    if not isinstance(given, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    unknown = set(given) - set(defaults) - ({"values"} if name == "time_grid" else set())
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in config section {name!r}")
    out = dict(defaults)
    out.update(given)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    model_spec: dict
    r: int = 500
    samples: int = 100
    seed: int = 0
    threads: int = 1
    lambda_grid: dict = field(default_factory=lambda: dict(_LAMBDA_DEFAULT))
    time_grid: dict = field(default_factory=lambda: dict(_TIME_DEFAULT))
    legendre_c: float = 0.5
    envelope_c1: float = 1.0
    envelope_c2: float = 1.0
    kmc: dict = field(default_factory=lambda: dict(_KMC_DEFAULT))
    fit: dict = field(default_factory=lambda: dict(_FIT_DEFAULT))
    report_inputs: dict = field(default_factory=dict)

    _KEYS = (
        "model",
        "r",
        "samples",
        "seed",
        "threads",
        "lambda_grid",
        "time_grid",
        "legendre_c",
        "envelope_c1",
        "envelope_c2",
        "kmc",
        "fit",
        "report_inputs",
    )

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(raw) - set(cls._KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "model" not in raw:
            raise ConfigError("config requires a 'model' section")
        try:
            model_from_dict(raw["model"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        cfg = cls(
            model_spec=dict(raw["model"]),
            r=int(raw.get("r", 500)),
            samples=int(raw.get("samples", 100)),
            seed=int(raw.get("seed", 0)),
            threads=int(raw.get("threads", 1)),
            lambda_grid=_merge_section("lambda_grid", _LAMBDA_DEFAULT, raw.get("lambda_grid")),
            time_grid=_merge_section(
                "time_grid",
                _TIME_DEFAULT if "values" not in (raw.get("time_grid") or {}) else {},
                raw.get("time_grid"),
            ),
            legendre_c=float(raw.get("legendre_c", 0.5)),
            envelope_c1=float(raw.get("envelope_c1", 1.0)),
            envelope_c2=float(raw.get("envelope_c2", 1.0)),
            kmc=_merge_section("kmc", _KMC_DEFAULT, raw.get("kmc")),
            fit=_merge_section("fit", _FIT_DEFAULT, raw.get("fit")),
            report_inputs=dict(raw.get("report_inputs", {})),
        )
        cfg._validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def _validate(self) -> None:
        if self.r < 1:
            raise ConfigError(f"r must be >= 1, got {self.r}")
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if not 0.0 < self.legendre_c < 1.0:
            raise ConfigError(f"legendre_c must lie in (0, 1), got {self.legendre_c}")
        if self.envelope_c1 <= 0.0 or self.envelope_c2 <= 0.0:
            raise ConfigError("envelope constants must be positive")
        lg = self.lambda_grid
        if not (0.0 < lg["abs_min"] < lg["abs_max"] < 1.0) or int(lg["points"]) < 1:
            raise ConfigError(f"bad lambda_grid {lg}")
        if "values" in self.time_grid:
            vals = self.time_grid["values"]
            if not vals or any(not math.isfinite(float(v)) or float(v) < 0.0 for v in vals):
                raise ConfigError(f"bad time_grid values {vals}")
            if any(float(b) <= float(a) for a, b in zip(vals, vals[1:])):
                raise ConfigError("time_grid values must be strictly ascending")
        else:
            tg = self.time_grid
            if not (0.0 < tg["t_min"] < tg["t_max"]) or tg["per_decade"] < 1:
                raise ConfigError(f"bad time_grid {tg}")
        km = self.kmc
        if int(km["sites"]) < 3 or int(km["sites"]) % 2 == 0:
            raise ConfigError(f"kmc sites must be odd and >= 3, got {km['sites']}")
        if int(km["trajectories"]) < 1 or int(km["chunk"]) < 1:
            raise ConfigError(f"bad kmc settings {km}")
        ft = self.fit
        if ft["t_min"] is not None and ft["t_max"] is not None and not ft["t_min"] < ft["t_max"]:
            raise ConfigError(f"bad fit window {ft}")

    def model(self):
        return model_from_dict(self.model_spec)

    def lambda_values(self) -> np.ndarray:
        lg = self.lambda_grid
        return -np.geomspace(lg["abs_min"], lg["abs_max"], int(lg["points"]))

    def time_values(self) -> np.ndarray:
        tg = self.time_grid
        if "values" in tg:
            return np.asarray([float(v) for v in tg["values"]], dtype=np.float64)
        decades = math.log10(tg["t_max"] / tg["t_min"])
        points = max(2, int(round(decades * tg["per_decade"])) + 1)
        return np.geomspace(tg["t_min"], tg["t_max"], points)

    def with_overrides(self, seed: int | None = None, threads: int | None = None) -> "ExperimentConfig":
        out = self
        if seed is not None:
            out = replace(out, seed=int(seed))
        if threads is not None:
            out = replace(out, threads=int(threads))
            if out.threads < 1:
                raise ConfigError(f"threads must be >= 1, got {out.threads}")
        return out

    def resolved(self) -> dict:
        return {
            "model": model_to_dict(self.model()),
            "r": self.r,
            "samples": self.samples,
            "seed": self.seed,
            "threads": self.threads,
            "lambda_grid": self.lambda_grid,
            "time_grid": self.time_grid,
            "legendre_c": self.legendre_c,
            "envelope_c1": self.envelope_c1,
            "envelope_c2": self.envelope_c2,
            "kmc": self.kmc,
            "fit": self.fit,
            "report_inputs": self.report_inputs,
        }

    def require_averaged_regime(self) -> None:
        """Reject models without the moment control the decay laws assume."""
        model = self.model()
        if isinstance(model, Exponential) and model.rate <= 4.0:
            raise ConfigError(
                f"Exponential rate must exceed 4 for averaged-decay runs, got {model.rate}"
            )


def _meta(cfg: ExperimentConfig, command: str, **extra) -> dict:
    meta = {"version": VERSION, "command": command, "config": cfg.resolved()}
    meta.update(extra)
    return meta


# ---------------------------------------------------------------------------
# Runs

def run_ids(cfg: ExperimentConfig, out_path) -> IdsCurve:
    model = cfg.model()
    lams = cfg.lambda_values()
    start = time.perf_counter()
    curve = estimate_ids(model, lams, cfg.r, cfg.samples, cfg.seed, cfg.threads)
    wall = time.perf_counter() - start
    logger.info("ids: r=%d samples=%d wall=%.2fs", cfg.r, cfg.samples, wall)
    for lam, total in zip(curve.lam, curve.counts_total()):
        logger.info("ids: lambda=%.8g total_count=%d", lam, total)
    curve.meta = _meta(cfg, "ids", r=cfg.r, samples=cfg.samples, wall_seconds=round(wall, 3))
    curve.to_csv(out_path)
    return curve


def run_autocorr(cfg: ExperimentConfig, out_path, dump_path=None) -> CorrelationSeries:
    cfg.require_averaged_regime()
    model = cfg.model()
    times = cfg.time_values()
    start = time.perf_counter()
    if dump_path is not None:
        series, records = disorder_average(
            model, times, cfg.r, cfg.samples, cfg.seed, cfg.threads, keep_realizations=True
        )
        with open(dump_path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    else:
        series = disorder_average(model, times, cfg.r, cfg.samples, cfg.seed, cfg.threads)
    wall = time.perf_counter() - start
    logger.info("autocorr: r=%d samples=%d wall=%.2fs", cfg.r, cfg.samples, wall)
    series.meta = _meta(cfg, "autocorr", r=cfg.r, samples=cfg.samples, wall_seconds=round(wall, 3))
    series.to_csv(out_path)
    return series


def run_kmc(cfg: ExperimentConfig, out_path) -> TrajectoryStats:
    model = cfg.model()
    half = (int(cfg.kmc["sites"]) - 1) // 2
    fld = sample_couplings(model, -half, half, cfg.seed, index=0)
    times = cfg.time_values()
    if times[0] > 0.0:
        times = np.concatenate(([0.0], times))
    start = time.perf_counter()
    stats = simulate_autocorr(
        fld,
        times,
        int(cfg.kmc["trajectories"]),
        cfg.seed,
        threads=cfg.threads,
        chunk_size=int(cfg.kmc["chunk"]),
    )
    spectral = free_chain_autocorr(fld, times).values
    wall = time.perf_counter() - start
    logger.info(
        "kmc: sites=%d trajectories=%d wall=%.2fs", int(cfg.kmc["sites"]), stats.n_traj, wall
    )
    stats.meta = _meta(cfg, "kmc", wall_seconds=round(wall, 3))
    stats.to_csv(out_path, spectral=spectral)
    return stats


def run_bounds(cfg: ExperimentConfig, out_path) -> EnvelopeTable:
    cfg.require_averaged_regime()
    times = cfg.time_values()
    if times[0] <= 0.0:
        times = times[times > 0.0]
        if times.size == 0:
            raise ConfigError("bounds need a positive time grid")
    table = envelope(cfg.model(), times, cfg.legendre_c, cfg.envelope_c1, cfg.envelope_c2)
    table.meta = _meta(cfg, "bounds")
    table.to_csv(out_path)
    return table


def run_validate(cfg: ExperimentConfig):
    from .validation import run_checks

    return run_checks(cfg)


# ---------------------------------------------------------------------------
# Fits and report

@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    slope_stderr: float
    rms_residual: float
    n_used: int
    window: tuple[float, float]
    poor_fit: bool


def loglog_wls(x, y, se, window=None, x_transform=None) -> FitResult | None:
    """Weighted least squares of ln y against f(x) (default f = ln).

    Keeps points with y > 3 se (resolved from noise) inside the window; the
    log-scale sigma is se/y, floored to keep exact data from dominating.
    Returns None when fewer than 3 points survive.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    se = np.asarray(se, dtype=np.float64)
    mask = np.isfinite(x) & np.isfinite(y) & (x > 0.0) & (y > 0.0)
    mask &= np.where(np.isfinite(se), y > 3.0 * se, True)
    if window is not None:
        mask &= (x >= window[0]) & (x <= window[1])
    if int(mask.sum()) < 3:
        return None
    xs = x[mask]
    ys = y[mask]
    ses = se[mask]
    fx = np.log(xs) if x_transform is None else x_transform(xs)
    ly = np.log(ys)
    sigma = np.where(np.isfinite(ses), ses / ys, 0.0)
    sigma = np.maximum(sigma, 1e-12)
    w = 1.0 / (sigma * sigma)
    wsum = w.sum()
    xbar = (w * fx).sum() / wsum
    ybar = (w * ly).sum() / wsum
    sxx = (w * (fx - xbar) ** 2).sum()
    if sxx <= 0.0:
        return None
    slope = (w * (fx - xbar) * (ly - ybar)).sum() / sxx
    intercept = ybar - slope * xbar
    resid = ly - (intercept + slope * fx)
    rms = float(np.sqrt(np.mean(resid * resid)))
    poor = rms > max(0.05, 3.0 * float(np.median(sigma)))
    return FitResult(
        slope=float(slope),
        intercept=float(intercept),
        slope_stderr=float(1.0 / math.sqrt(sxx)),
        rms_residual=rms,
        n_used=int(mask.sum()),
        window=(float(xs.min()), float(xs.max())),
        poor_fit=bool(poor),
    )


def largest_reliable_decade(t, values, se) -> tuple[float, float] | None:
    """Window (t_max/10, t_max) ending at the last point resolved from noise."""
    t = np.asarray(t, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    se = np.asarray(se, dtype=np.float64)
    ok = (t > 0.0) & (values > 0.0) & np.where(np.isfinite(se), values > 3.0 * se, True)
    if not np.any(ok):
        return None
    tmax = float(t[ok].max())
    return (tmax / 10.0, tmax)


def _fit_window(cfg: ExperimentConfig, t, values, se):
    if cfg.fit["t_min"] is not None or cfg.fit["t_max"] is not None:
        lo = cfg.fit["t_min"] if cfg.fit["t_min"] is not None else float(np.min(t))
        hi = cfg.fit["t_max"] if cfg.fit["t_max"] is not None else float(np.max(t))
        return (float(lo), float(hi))
    return largest_reliable_decade(t, values, se)


def _fit_envelope_constants(cfg: ExperimentConfig, series: CorrelationSeries, window) -> dict | None:
    mask = (
        (series.times >= window[0])
        & (series.times <= window[1])
        & (series.values > 0.0)
        & np.where(np.isfinite(series.stderr), series.values > 3.0 * series.stderr, True)
    )
    ts = series.times[mask]
    if ts.size < 1:
        return None
    table = envelope(cfg.model(), ts, cfg.legendre_c, 1.0, 1.0)
    ly = np.log(series.values[mask])
    out: dict = {}
    for name, core in (("C1", table.upper), ("C2", table.lower)):
        good = np.isfinite(core) & (core > 0.0)
        if not np.any(good):
            out[name + "_fit"] = None
            continue
        out[name + "_fit"] = float(np.exp(np.mean(ly[good] - np.log(core[good]))))
    return out


def run_report(cfg: ExperimentConfig, out_path) -> dict:
    inputs = cfg.report_inputs
    if not inputs:
        raise ConfigError("report needs report_inputs with 'ids_csv' and/or 'autocorr_csv'")
    unknown = set(inputs) - {"ids_csv", "autocorr_csv"}
    if unknown:
        raise ConfigError(f"unknown report_inputs keys {sorted(unknown)}")
    model = cfg.model()
    report: dict = {"version": VERSION, "config": cfg.resolved()}

    if "ids_csv" in inputs:
        path = inputs["ids_csv"]
        if not os.path.exists(path):
            raise ConfigError(f"report input not found: {path}")
        curve = IdsCurve.from_csv(path)
        counts = curve.counts_total()
        keep = counts >= 100
        section: dict = {
            "points_total": int(curve.lam.size),
            "points_trimmed": int((~keep).sum()),
        }
        fit = loglog_wls(np.abs(curve.lam[keep]), curve.n_hat[keep], curve.stderr[keep])
        if fit is None:
            section.update({"fit_ok": False, "slope": None})
        else:
            section.update(
                {
                    "fit_ok": not fit.poor_fit,
                    "slope": fit.slope,
                    "slope_stderr": fit.slope_stderr,
                    "rms_residual": fit.rms_residual,
                    "n_used": fit.n_used,
                    "window_abs_lambda": list(fit.window),
                    "poor_fit": fit.poor_fit,
                }
            )
        if isinstance(model, Exponential):
            section["theory_band"] = [model.rate / 4.0, model.rate]
        report["ids"] = section

    if "autocorr_csv" in inputs:
        path = inputs["autocorr_csv"]
        if not os.path.exists(path):
            raise ConfigError(f"report input not found: {path}")
        series = CorrelationSeries.from_csv(path)
        window = _fit_window(cfg, series.times, series.values, series.stderr)
        section = {"mean_deficit": series.mean_deficit}
        if window is None:
            section.update({"fit_ok": False, "slope": None})
        else:
            section["window_t"] = list(window)
            fit = loglog_wls(series.times, series.values, series.stderr, window=window)
            if fit is None:
                section.update({"fit_ok": False, "slope": None})
            else:
                section.update(
                    {
                        "fit_ok": not fit.poor_fit,
                        "slope": fit.slope,
                        "slope_stderr": fit.slope_stderr,
                        "rms_residual": fit.rms_residual,
                        "n_used": fit.n_used,
                        "poor_fit": fit.poor_fit,
                    }
                )
                constants = _fit_envelope_constants(cfg, series, window)
                if constants:
                    section["envelope_constants"] = constants
            if isinstance(model, Exponential):
                section["theory_band"] = [-2.0 * model.rate, -model.rate / 8.0]
            if isinstance(model, Stretched):
                a = model.exponent
                # (ln t)^a regressor needs ln t > 0
                swindow = (max(window[0], 1.5), window[1])
                sfit = loglog_wls(
                    series.times,
                    series.values,
                    series.stderr,
                    window=swindow,
                    x_transform=lambda xs: np.log(xs) ** a,
                )
                section["stretched_scale"] = {
                    "alpha": a,
                    "coeff": (None if sfit is None else -sfit.slope),
                    "theory_upper_coeff": 0.5 * 0.25**a,
                    "theory_lower_coeff": 4.0 * 0.5**a,
                }
        report["autocorr"] = section

    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name in ("ids", "autocorr"):
        if name in report and report[name].get("slope") is not None:
            logger.info("report: %s slope=%.4f", name, report[name]["slope"])
    return report
