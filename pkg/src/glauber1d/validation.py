"""Fast self-checks behind the `validate` CLI command.

Each check re-derives a module invariant at reduced scale with the
configured model and seed.  They are meant to catch a broken install or a
numerically hostile model quickly, not to replace the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .asymptotics import RateFunction, legendre_min, rate_derivative, rate_eval
from .autocorr import (
    center_mode_autocorr,
    center_spin_autocorr,
    disorder_spectra,
    free_chain_autocorr,
    ids_laplace,
)
from .disorder import CouplingField, derive, sample_couplings
from .kmc import SpinConfig, glauber_rate, simulate_autocorr
from .onespin import build_generator, center_spin_weights
from .spectra import (
    calm_block_top,
    calm_spectral_bound,
    classify_sites,
    count_above,
    eigensolve,
    estimate_ids,
    phase_count,
    regular_bond_count,
)
from .streams import stream


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def _result(name: str, ok: bool, detail: str) -> CheckResult:
    return CheckResult(name, bool(ok), detail)


def _check_tail_frequency(cfg) -> CheckResult:
    model = cfg.model()
    rng = stream(cfg.seed, 0, domain=7)
    draws = np.asarray(model.sample(rng, 100_000), dtype=np.float64)
    worst = 0.0
    for p in (0.5, 0.25, 0.1, 0.02, 0.005):
        u = model.tail_quantile(p)
        freq = float(np.mean(draws > u))
        se = math.sqrt(p * (1.0 - p) / draws.size)
        worst = max(worst, abs(freq - p) / se)
    return _result("tail_frequency", worst <= 4.0, f"worst deviation {worst:.2f} binomial SEs")


def _check_mixing_forms(cfg) -> CheckResult:
    rng = stream(cfg.seed, 1, domain=7)
    w = rng.random(20_000).reshape(-1, 2) * 15.0
    worst = 0.0
    compared = 0
    for w0, w1 in w:
        a0, a1 = math.tanh(w0), math.tanh(w1)
        denom = 1.0 - a1 * a1 * a0 * a0
        if denom < 1e-3:
            # the textbook form loses ~1/denom of its precision here, so it
            # stops being a usable reference; the corner is covered separately
            # by a high-precision oracle in the test suite
            continue
        fld = CouplingField(0, np.array([w0, w1, 0.5]))
        c = derive(fld).mix[0]
        naive = a1 * a1 * (1.0 - a0 * a0) / denom
        worst = max(worst, abs(c - naive))
        compared += 1
    ok = worst <= 1e-12 and compared >= 2_000
    return _result(
        "mixing_ratio_forms",
        ok,
        f"max |stable - naive| = {worst:.3g} over {compared} well-conditioned pairs",
    )


def _check_generator_ranges(cfg) -> CheckResult:
    model = cfg.model()
    r = 60
    for m in range(30):
        fld = sample_couplings(model, -r - 1, r + 1, cfg.seed, m)
        jm = build_generator(derive(fld), -r, r)
        vals = eigensolve(jm).eigenvalues
        if vals[0] < -2.0 - 1e-10 or vals[-1] > 1e-10 or not vals[-1] < 0.0:
            return _result("generator_ranges", False, f"spectrum escape at realization {m}")
    return _result("generator_ranges", True, "30 windows: entries and spectra in range")


def _check_counting_routes(cfg) -> CheckResult:
    model = cfg.model()
    rng = stream(cfg.seed, 2, domain=7)
    for m in range(40):
        n = int(rng.integers(1, 120))
        fld = sample_couplings(model, -1, n, cfg.seed, 1000 + m)
        jm = build_generator(derive(fld), 0, n - 1)
        vals = eigensolve(jm).eigenvalues
        for lam in -rng.random(8) * 2.4 - 0.001:
            if np.min(np.abs(vals - lam)) < 1e-12:
                continue
            want = int(np.sum(vals > lam))
            if count_above(jm, lam) != want or phase_count(jm, lam) != want:
                return _result("counting_routes", False, f"disagreement at n={n}, lam={lam}")
    return _result("counting_routes", True, "40 windows x 8 probes: all three routes agree")


def _check_regular_bonds(cfg) -> CheckResult:
    model = cfg.model()
    for m in range(30):
        fld = sample_couplings(model, -41, 41, cfg.seed, 2000 + m)
        der = derive(fld)
        jm = build_generator(der, -40, 40)
        for lam in (-0.05, -0.2, -0.5, -0.9):
            if count_above(jm, lam) < regular_bond_count(der, lam, -40, 40):
                return _result("regular_bonds", False, f"bound failed at realization {m}, lam={lam}")
    return _result("regular_bonds", True, "30 windows x 4 levels: lower bound holds")


def _check_strong_calm(cfg) -> CheckResult:
    model = cfg.model()
    r = 80
    for m in range(15):
        fld = sample_couplings(model, -r - 1, r + 1, cfg.seed, 3000 + m)
        jm = build_generator(derive(fld), -r, r)
        for lam in (-0.01, -0.05, -0.2):
            cls = classify_sites(fld, lam, -r, r)
            top = calm_block_top(jm, cls)
            if top is not None and top > calm_spectral_bound(lam) + 1e-10:
                return _result("strong_calm", False, f"calm block above bound at m={m}, lam={lam}")
            if count_above(jm, lam) > jm.n - cls.calm.size:
                return _result("strong_calm", False, f"count exceeds window minus calm at m={m}")
    return _result("strong_calm", True, "15 windows x 3 levels: calm bounds hold")


def _check_weights(cfg) -> CheckResult:
    model = cfg.model()
    worst = 0.0
    for m in range(30):
        fld = sample_couplings(model, -61, 1, cfg.seed, 4000 + m)
        der = derive(fld)
        wt = center_spin_weights(der, -60)
        if not 0.0 < wt.mass <= 1.0 or wt.deficit < 0.0:
            return _result("weights_mass", False, f"mass {wt.mass} out of range at m={m}")
        i0 = -60 - der.lo
        log_prod = 2.0 * float(np.sum(der.log_tanh_w[i0 : i0 + 61]))
        missing = math.exp(log_prod) if log_prod > -745.0 else 0.0
        worst = max(worst, abs(1.0 - wt.mass - missing))
    return _result("weights_mass", worst <= 1e-12, f"telescoping residual {worst:.3g}")


def _check_autocorr(cfg) -> CheckResult:
    model = cfg.model()
    times = np.geomspace(0.1, 100.0, 25)
    grid = np.concatenate(([0.0], times))
    for m in range(8):
        fld = sample_couplings(model, -31, 31, cfg.seed, 5000 + m)
        der = derive(fld)
        res = center_spin_autocorr(der, -30, 30, grid)
        wt = center_spin_weights(der, -30)
        if abs(res.values[0] - wt.mass) > 1e-12:
            return _result("autocorr_identity", False, f"S(0) != mass at m={m}")
        mode = center_mode_autocorr(der, -30, 30, grid)
        if abs(mode.values[0] - 1.0) > 1e-12:
            return _result("autocorr_identity", False, f"mode value(0) != 1 at m={m}")
        v = res.values
        if np.any(v <= 0.0) or np.any(np.diff(v) > 1e-14):
            return _result("autocorr_identity", False, f"positivity/monotonicity failed at m={m}")
        keep = v[1:] > 1e-250  # stay clear of exp underflow before taking logs
        ln = np.log(v[1:][keep])
        slopes = np.diff(ln) / np.diff(times[keep])
        if np.any(np.diff(slopes) < -1e-10):
            return _result("autocorr_identity", False, f"log-convexity failed at m={m}")
    return _result("autocorr_identity", True, "8 realizations: mass, monotone, log-convex")


def _check_laplace(cfg) -> CheckResult:
    model = cfg.model()
    r, samples = 40, 20
    eigs, center = disorder_spectra(model, r, samples, cfg.seed, cfg.threads, want_center=True)
    for t in (1.0, 5.0):
        per_mode = (center * np.exp(eigs * t)).sum(axis=1)
        per_lap = np.exp(eigs * t).mean(axis=1)
        diff = per_mode.mean() - per_lap.mean()
        se = math.sqrt(per_mode.var(ddof=1) / samples + per_lap.var(ddof=1) / samples)
        pooled = ids_laplace(eigs.ravel(), r, t)
        if abs(pooled - per_lap.mean()) > 1e-12:
            return _result("laplace_consistency", False, "pooled laplace mismatch")
        if abs(diff) > max(4.0 * se, 10.0 / r):
            return _result("laplace_consistency", False, f"mode vs laplace gap {diff:.4g} at t={t}")
    return _result("laplace_consistency", True, "center-mode average tracks spectral average")


def _check_detailed_balance(cfg) -> CheckResult:
    rng = stream(cfg.seed, 3, domain=7)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(3, 12))
        fld = CouplingField(0, rng.random(n) * 15.0)
        spins = np.where(rng.random(n) < 0.5, 1, -1)
        x = int(rng.integers(0, n))
        c = glauber_rate(SpinConfig(0, spins), x, fld)
        flipped = spins.copy()
        flipped[x] = -flipped[x]
        c_back = glauber_rate(SpinConfig(0, flipped), x, fld)
        # c rounds to exactly 1.0 when the energy drop exceeds ~36, so only
        # the lower end of the heat-bath range is strict
        if not 0.0 < c <= 1.0:
            return _result("detailed_balance", False, f"rate {c} out of (0,1]")
        h = 0.0
        if x > 0:
            h += 2.0 * fld.values[x] * spins[x - 1] * spins[x]
        if x < n - 1:
            h += 2.0 * fld.values[x + 1] * spins[x] * spins[x + 1]
        ratio = c / c_back
        target = math.exp(-h)
        worst = max(worst, abs(ratio - target) / target)
    return _result("detailed_balance", worst <= 1e-13, f"worst rate-ratio deviation {worst:.3g}")


def _check_kmc_zero_field(cfg) -> CheckResult:
    fld = CouplingField(-16, np.zeros(33))
    times = np.array([0.0, 0.5, 1.0, 2.0])
    stats = simulate_autocorr(fld, times, 4000, cfg.seed, threads=cfg.threads, chunk_size=500)
    if stats.estimates[0] != 1.0:
        return _result("kmc_zero_field", False, "value at t=0 not exactly 1")
    for i in range(1, times.size):
        want = math.exp(-times[i])
        if abs(stats.estimates[i] - want) > 4.0 * stats.stderr[i] + 1e-9:
            return _result("kmc_zero_field", False, f"free-spin decay off at t={times[i]}")
    if np.any(np.abs(stats.spin_mean) > 5.0 / math.sqrt(stats.n_traj)):
        return _result("kmc_zero_field", False, "one-time spin mean off zero")
    return _result("kmc_zero_field", True, "uncoupled chain decays as exp(-t)")


def _check_kmc_vs_spectral(cfg) -> CheckResult:
    model = cfg.model()
    fld = sample_couplings(model, -16, 16, cfg.seed, 0)
    times = np.array([0.0, 0.5, 1.0, 2.0])
    stats = simulate_autocorr(fld, times, 6000, cfg.seed, threads=cfg.threads, chunk_size=500)
    exact = free_chain_autocorr(fld, times).values
    for i in range(1, times.size):
        gap = abs(stats.estimates[i] - exact[i])
        if gap > 4.0 * stats.stderr[i] + 1e-9:
            return _result("kmc_vs_spectral", False, f"gap {gap:.4g} at t={times[i]}")
    return _result("kmc_vs_spectral", True, "simulator matches the exact finite chain")


def _check_legendre(cfg) -> CheckResult:
    model = cfg.model()
    rng = stream(cfg.seed, 4, domain=7)
    ts = np.geomspace(10.0, 1000.0, 7)
    for kind in ("single", "pair"):
        rf = RateFunction(kind, model, cfg.legendre_c)
        interior_t, interior_val = [], []
        for t in ts:
            pt = legendre_min(rf, t)
            if pt.boundary:
                continue
            resid = abs(t - rate_derivative(rf, pt.mu))
            if not resid <= 1e-6 * max(t, 1.0):
                return _result("legendre", False, f"stationarity residual {resid:.3g} at t={t}")
            if not pt.curvature < 0.0:
                return _result("legendre", False, f"curvature {pt.curvature} not negative")
            for mu in rng.random(20) * 0.98 + 0.01:
                if pt.value > t * mu - rate_eval(rf, mu) + 1e-10:
                    return _result("legendre", False, f"dual bound violated at t={t}")
            interior_t.append(t)
            interior_val.append(pt.value)
        if len(interior_val) >= 3:
            tv = np.asarray(interior_t)
            vals = np.asarray(interior_val)
            if np.any(np.diff(vals) < -1e-10):
                return _result("legendre", False, f"{kind} transform not nondecreasing")
            slopes = np.diff(vals) / np.diff(tv)
            if np.any(np.diff(slopes) > 1e-8):
                return _result("legendre", False, f"{kind} transform not concave")
    return _result("legendre", True, "stationarity, duality, monotone concave transform")


def _check_determinism(cfg) -> CheckResult:
    model = cfg.model()
    lams = -np.geomspace(0.05, 0.3, 5)
    a = estimate_ids(model, lams, 30, 12, cfg.seed, threads=1)
    b = estimate_ids(model, lams, 30, 12, cfg.seed, threads=4)
    if not (np.array_equal(a.n_hat, b.n_hat) and np.array_equal(a.stderr, b.stderr)):
        return _result("determinism", False, "ids differs across thread counts")
    fld = sample_couplings(model, -8, 8, cfg.seed, 0)
    times = np.array([0.0, 1.0, 3.0])
    s1 = simulate_autocorr(fld, times, 2500, cfg.seed, threads=1, chunk_size=250)
    s2 = simulate_autocorr(fld, times, 2500, cfg.seed, threads=4, chunk_size=250)
    if not np.array_equal(s1.estimates, s2.estimates):
        return _result("determinism", False, "kmc differs across thread counts")
    return _result("determinism", True, "thread counts 1 and 4 bit-identical")


_CHECKS = (
    _check_tail_frequency,
    _check_mixing_forms,
    _check_generator_ranges,
    _check_counting_routes,
    _check_regular_bonds,
    _check_strong_calm,
    _check_weights,
    _check_autocorr,
    _check_laplace,
    _check_detailed_balance,
    _check_kmc_zero_field,
    _check_kmc_vs_spectral,
    _check_legendre,
    _check_determinism,
)


def run_checks(cfg) -> list[CheckResult]:
    return [chk(cfg) for chk in _CHECKS]
