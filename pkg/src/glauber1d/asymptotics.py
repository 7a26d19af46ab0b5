"""Long-time decay envelopes from the coupling tail.

The averaged autocorrelation is squeezed between two saddle-point
expressions built from log tail probabilities of the coupling law.  For a
spectral weight mu in (0, 1) the two rate functions are

    single:  g(mu) = ln P(w > (1/4) ln(1/mu))
    pair:    g(mu) = 2 ln P(w > (1/2) ln(1/(c mu)))

("single" prices one strong coupling carrying a slow mode, "pair" prices a
pair of strong couplings fencing it in; c in (0, 1) is the pair route's
geometric constant).  Both enter through the Legendre-type minimum

    G(t) = min_{mu in (0,1)} [ t mu - g(mu) ],

and the envelopes evaluated here are

    upper(t) = C1 * sqrt( t e^{-G_single(t)} / sqrt(-g_single''(mu*)) )
    lower(t) = C2 * ( t e^{-G_pair(t)} / sqrt(-g_pair''(mu*)) )^2 .

The minimizer is found numerically (derivative bisection plus a golden
polish); curvatures use closed forms for the exponential and stretched
families and second differences otherwise.  Minima that land on the mu -> 1
boundary are flagged and propagate NaN through the envelope row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .disorder import Exponential, Stretched

_EPS = 1e-12
_DIFF_STEP = float(np.finfo(np.float64).eps) ** (1.0 / 3.0)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RateFunction:
    """One of the two tail rate functions for a coupling model.

    kind: "single" or "pair"; c is used by the pair kind only.
    """

    kind: str
    model: object
    c: float = 0.5

    def __post_init__(self):
        if self.kind not in ("single", "pair"):
            raise ValueError(f"kind must be 'single' or 'pair', got {self.kind!r}")
        if not (math.isfinite(self.c) and 0.0 < self.c < 1.0):
            raise ValueError(f"pair constant c must lie in (0, 1), got {self.c}")


def rate_eval(rf: RateFunction, mu: float) -> float:
    """g(mu); -inf where the threshold exceeds the model's support."""
    mu = float(mu)
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu must lie in (0, 1), got {mu}")
    if rf.kind == "single":
        return float(rf.model.log_tail(-0.25 * math.log(mu)))
    return 2.0 * float(rf.model.log_tail(-0.5 * math.log(rf.c * mu)))


def rate_curvature(rf: RateFunction, mu: float) -> float:
    """g''(mu): closed forms for the two smooth families, differences else."""
    mu = float(mu)
    m = rf.model
    if isinstance(m, Exponential):
        k = m.rate
        return -(k / 4.0) / mu**2 if rf.kind == "single" else -k / mu**2
    if isinstance(m, Stretched):
        a = m.exponent
        if rf.kind == "single":
            ell = -math.log(mu)
            if ell <= 0.0:
                return -math.inf
            return -((0.25**a) * a * ell ** (a - 2.0) * ((a - 1.0) + ell)) / mu**2
        ell = -math.log(rf.c * mu)
        return -(2.0 * (0.5**a) * a * ell ** (a - 2.0) * ((a - 1.0) + ell)) / mu**2
    return _second_difference(rf, mu)


def _second_difference(rf: RateFunction, mu: float) -> float:
    h = mu * _DIFF_STEP
    h = min(h, 0.5 * mu, 0.5 * (1.0 - mu))
    g0 = rate_eval(rf, mu)
    gp = rate_eval(rf, mu + h)
    gm = rate_eval(rf, mu - h)
    return (gp - 2.0 * g0 + gm) / (h * h)


def rate_derivative(rf: RateFunction, mu: float) -> float:
    """Central-difference g'(mu); NaN where mu straddles the support edge."""
    mu = float(mu)
    h = mu * _DIFF_STEP
    h = min(h, 0.5 * mu, 0.5 * (1.0 - mu))
    gm = rate_eval(rf, mu - h)
    if gm == -math.inf:
        return math.nan
    return (rate_eval(rf, mu + h) - gm) / (2.0 * h)


@dataclass(frozen=True)
class LegendrePoint:
    """G(t) = min over mu of t mu - g(mu), with the minimizer and curvature.

    boundary marks a minimum pinned at the right edge mu -> 1 (no interior
    stationary point); curvature is NaN there.
    """

    t: float
    mu: float
    value: float
    curvature: float
    boundary: bool


def legendre_min(rf: RateFunction, t: float) -> LegendrePoint:
    """Minimize t*mu - g(mu) over (0, 1) for t > 0."""
    t = float(t)
    if not (math.isfinite(t) and t > 0.0):
        raise ValueError(f"time must be finite and > 0, got {t}")

    def objective(mu: float) -> float:
        g = rate_eval(rf, mu)
        return math.inf if g == -math.inf else t * mu - g

    def slope(mu: float) -> float:
        h = mu * _DIFF_STEP
        h = min(h, 0.5 * mu, 0.5 * (1.0 - mu))
        gm = rate_eval(rf, mu - h)
        if gm == -math.inf:
            # left of the support edge the objective is +inf and falls rightward
            return -math.inf
        return t - (rate_eval(rf, mu + h) - gm) / (2.0 * h)

    hi = 1.0 - _EPS
    if not slope(hi) > 0.0:
        return LegendrePoint(t, hi, objective(hi), math.nan, True)
    # walk down geometrically until the objective is decreasing (slope < 0);
    # g ~ ln tail explodes near the support edge, so this always terminates
    lo = 0.5
    while lo > _EPS and not slope(lo) < 0.0:
        lo *= 0.5
    if not slope(lo) < 0.0:
        # degenerate: objective nondecreasing everywhere visible
        return LegendrePoint(t, hi, objective(hi), math.nan, True)
    top = hi
    for _ in range(200):
        mid = 0.5 * (lo + top)
        if slope(mid) < 0.0:
            lo = mid
        else:
            top = mid
        if top - lo <= 1e-14 * top:
            break
    a, b = lo, top
    pad = 10.0 * (b - a)
    a = max(_EPS, a - pad)
    b = min(1.0 - _EPS, b + pad)
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = objective(x1), objective(x2)
    for _ in range(120):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = objective(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = objective(x2)
        if b - a <= 1e-15 * b:
            break
    mu = 0.5 * (a + b)
    return LegendrePoint(t, mu, objective(mu), rate_curvature(rf, mu), False)


@dataclass
class EnvelopeTable:
    """Decay envelopes on a time grid, with their saddle data per row."""

    times: np.ndarray
    mu1: np.ndarray
    g1: np.ndarray
    gpp1: np.ndarray
    mu2: np.ndarray
    g2: np.ndarray
    gpp2: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    c: float
    c_upper: float
    c_lower: float
    meta: dict = field(default_factory=dict)

    def to_csv(self, path, meta: dict | None = None) -> None:
        from .harness import write_csv

        rows = [
            (
                self.times[i],
                self.mu1[i],
                self.g1[i],
                self.gpp1[i],
                self.mu2[i],
                self.g2[i],
                self.gpp2[i],
                self.upper[i],
                self.lower[i],
                self.c,
                self.c_upper,
                self.c_lower,
            )
            for i in range(self.times.size)
        ]
        write_csv(
            path,
            ("t", "mu1", "G1", "gpp1", "mu2", "G2", "gpp2", "upper", "lower", "c", "C1", "C2"),
            rows,
            meta or self.meta,
        )


def envelope(model, times, c: float = 0.5, c_upper: float = 1.0, c_lower: float = 1.0) -> EnvelopeTable:
    """Tabulate both envelopes over a positive ascending time grid."""
    t = np.ascontiguousarray(times, dtype=np.float64)
    if t.size == 0 or np.any(t <= 0.0) or np.any(np.diff(t) <= 0.0):
        raise ValueError("time grid must be positive and strictly ascending")
    if not (c_upper > 0.0 and c_lower > 0.0):
        raise ValueError("envelope constants must be positive")
    single = RateFunction("single", model, c)
    pair = RateFunction("pair", model, c)
    cols = {name: np.full(t.size, math.nan) for name in ("mu1", "g1", "gpp1", "mu2", "g2", "gpp2", "upper", "lower")}
    for i, ti in enumerate(t):
        p1 = legendre_min(single, ti)
        p2 = legendre_min(pair, ti)
        cols["mu1"][i], cols["g1"][i], cols["gpp1"][i] = p1.mu, p1.value, p1.curvature
        cols["mu2"][i], cols["g2"][i], cols["gpp2"][i] = p2.mu, p2.value, p2.curvature
        if not p1.boundary:
            log_core = math.log(ti) - p1.value - 0.5 * math.log(-p1.curvature)
            cols["upper"][i] = c_upper * math.exp(0.5 * log_core)
        if not p2.boundary:
            log_core = math.log(ti) - p2.value - 0.5 * math.log(-p2.curvature)
            cols["lower"][i] = c_lower * math.exp(2.0 * log_core)
    return EnvelopeTable(
        times=t,
        mu1=cols["mu1"],
        g1=cols["g1"],
        gpp1=cols["gpp1"],
        mu2=cols["mu2"],
        g2=cols["g2"],
        gpp2=cols["gpp2"],
        upper=cols["upper"],
        lower=cols["lower"],
        c=float(c),
        c_upper=float(c_upper),
        c_lower=float(c_lower),
    )
