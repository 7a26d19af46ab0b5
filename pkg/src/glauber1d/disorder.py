"""Random coupling fields for the ferromagnetic chain.

Couplings w_x >= 0 are i.i.d. with the inverse temperature absorbed into the
distribution.  Three tail families are implemented exactly (not just
asymptotically): Exponential  P(w > u) = e^{-rate u},  Stretched
P(w > u) = e^{-u^exponent} with exponent > 1, and UniformBounded, uniform on
[0, gamma_max].  Sampling goes through the tail quantile so a stream value of
0 maps to w = 0 for every family.

`derive` precomputes the per-site quantities the spectral side consumes:
a_x = tanh w_x, u_x = sech^2 w_x and the bond mixing ratio

    C_x = a_x^2 (1 - a_{x-1}^2) / (1 - a_x^2 a_{x-1}^2).

The stored form is C_x = (1-u_x) u_{x-1} / (u_x + (1-u_x) u_{x-1}), an exact
algebraic rewrite that stays accurate when tanh saturates to 1.0 (w >~ 19.4):
u is computed from exponentials and floored at the smallest normal double, so
C < 1 strictly and the derived chain entries keep their sign constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

_TINY = float(np.finfo(np.float64).tiny)
_QUAD_EPSREL = 1e-10


def _check_threshold(u: float) -> float:
    u = float(u)
    if not math.isfinite(u) or u < 0.0:
        raise ValueError(f"tail threshold must be finite and >= 0, got {u}")
    return u


def _check_tail_level(p: float) -> float:
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"tail level must lie in (0, 1], got {p}")
    return p


@dataclass(frozen=True)
class Cosh4Moment:
    """E[cosh^4 w]; `value` is math.inf when the moment diverges."""

    finite: bool
    value: float


@dataclass(frozen=True)
class Exponential:
    """P(w > u) = exp(-rate * u)."""

    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0.0):
            raise ValueError(f"Exponential rate must be finite and > 0, got {self.rate}")

    def tail(self, u):
        return math.exp(self.log_tail(u))

    def log_tail(self, u):
        return -self.rate * _check_threshold(u)

    def tail_quantile(self, p):
        return -math.log(_check_tail_level(p)) / self.rate

    def sample(self, rng, size):
        return -np.log1p(-rng.random(size)) / self.rate

    def cosh4_moment(self) -> Cosh4Moment:
        k = self.rate
        if k <= 4.0:
            return Cosh4Moment(False, math.inf)

        def integrand(u):
            # cosh^4(u) * k e^{-ku}, written so large u never overflows
            return (k / 16.0) * math.exp((4.0 - k) * u) * (1.0 + math.exp(-2.0 * u)) ** 4

        val, _ = quad(integrand, 0.0, np.inf, epsrel=_QUAD_EPSREL, limit=200)
        return Cosh4Moment(True, float(val))


@dataclass(frozen=True)
class Stretched:
    """P(w > u) = exp(-u^exponent), exponent > 1."""

    exponent: float

    def __post_init__(self):
        if not (math.isfinite(self.exponent) and self.exponent > 1.0):
            raise ValueError(f"Stretched exponent must be finite and > 1, got {self.exponent}")

    def tail(self, u):
        return math.exp(self.log_tail(u))

    def log_tail(self, u):
        return -(_check_threshold(u) ** self.exponent)

    def tail_quantile(self, p):
        return (-math.log(_check_tail_level(p))) ** (1.0 / self.exponent)

    def sample(self, rng, size):
        return (-np.log1p(-rng.random(size))) ** (1.0 / self.exponent)

    def cosh4_moment(self) -> Cosh4Moment:
        a = self.exponent

        def integrand(u):
            if u <= 0.0:
                return 0.0
            return (a * u ** (a - 1.0) / 16.0) * math.exp(4.0 * u - u**a) * (1.0 + math.exp(-2.0 * u)) ** 4

        val, _ = quad(integrand, 0.0, np.inf, epsrel=_QUAD_EPSREL, limit=200)
        return Cosh4Moment(True, float(val))


@dataclass(frozen=True)
class UniformBounded:
    """w uniform on [0, gamma_max]."""

    gamma_max: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma_max) and self.gamma_max > 0.0):
            raise ValueError(f"UniformBounded gamma_max must be finite and > 0, got {self.gamma_max}")

    def tail(self, u):
        u = _check_threshold(u)
        return max(0.0, 1.0 - u / self.gamma_max) if u < self.gamma_max else 0.0

    def log_tail(self, u):
        u = _check_threshold(u)
        if u >= self.gamma_max:
            return -math.inf
        return math.log1p(-u / self.gamma_max)

    def tail_quantile(self, p):
        return self.gamma_max * (1.0 - _check_tail_level(p))

    def sample(self, rng, size):
        return self.gamma_max * rng.random(size)

    def cosh4_moment(self) -> Cosh4Moment:
        g = self.gamma_max

        def integrand(u):
            return math.cosh(u) ** 4 / g

        val, _ = quad(integrand, 0.0, g, epsrel=_QUAD_EPSREL, limit=200)
        return Cosh4Moment(True, float(val))


TailModel = Exponential | Stretched | UniformBounded

_FAMILIES = {
    "exponential": (Exponential, "rate"),
    "stretched": (Stretched, "exponent"),
    "uniform": (UniformBounded, "gamma_max"),
}


def model_from_dict(spec: dict) -> TailModel:
    """Build a tail model from {"family": ..., <parameter>: ...}."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ValueError(f"model spec must be a dict with a 'family' key, got {spec!r}")
    family = spec["family"]
    if family not in _FAMILIES:
        raise ValueError(f"unknown model family {family!r}; expected one of {sorted(_FAMILIES)}")
    cls, param = _FAMILIES[family]
    extra = set(spec) - {"family", param}
    if extra or param not in spec:
        raise ValueError(f"model family {family!r} takes exactly one parameter {param!r}")
    return cls(float(spec[param]))


def model_to_dict(model: TailModel) -> dict:
    for family, (cls, param) in _FAMILIES.items():
        if isinstance(model, cls):
            return {"family": family, param: getattr(model, param)}
    raise TypeError(f"not a tail model: {model!r}")


@dataclass(frozen=True)
class CouplingField:
    """One disorder realization: couplings w_x for x = lo .. lo+len-1.

    w_x sits on the bond (x-1, x).  Immutable after construction; `provenance`
    records (master seed, realization index) when the field was drawn from a
    stream, so identical provenance reproduces identical fields.
    """

    lo: int
    values: np.ndarray
    provenance: tuple[int, int] | None = None

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 3:
            raise ValueError("coupling window must be one-dimensional with at least 3 sites")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0.0):
            raise ValueError("couplings must be finite and nonnegative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "lo", int(self.lo))

    @property
    def hi(self) -> int:
        return self.lo + self.values.size - 1

    def value_at(self, x: int) -> float:
        if not self.lo <= x <= self.hi:
            raise IndexError(f"site {x} outside coupling window [{self.lo}, {self.hi}]")
        return float(self.values[x - self.lo])


def sample_couplings(model, lo: int, hi: int, seed: int, index: int = 0) -> CouplingField:
    """Draw the i.i.d. field on sites lo..hi from substream (seed, index)."""
    from .streams import DOMAIN_COUPLINGS, stream

    if hi - lo + 1 < 3:
        raise ValueError(f"coupling window [{lo}, {hi}] has fewer than 3 sites")
    rng = stream(seed, index, DOMAIN_COUPLINGS)
    vals = np.asarray(model.sample(rng, hi - lo + 1), dtype=np.float64)
    return CouplingField(lo, vals, provenance=(int(seed), int(index)))


@dataclass(frozen=True)
class DerivedField:
    """Per-site hyperbolic quantities and bond mixing ratios for one field.

    Arrays cover sites lo..hi; `mix[i]` is C_{lo+1+i}, defined for
    x = lo+1 .. hi.  log_tanh is -inf at zero couplings, which downstream
    weight products turn into exact zeros.
    """

    lo: int
    tanh_w: np.ndarray
    sech2_w: np.ndarray
    log_tanh_w: np.ndarray
    mix: np.ndarray

    def __post_init__(self):
        for name in ("tanh_w", "sech2_w", "log_tanh_w", "mix"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.tanh_w.size
        if self.sech2_w.size != n or self.log_tanh_w.size != n or self.mix.size != n - 1:
            raise ValueError("derived arrays have inconsistent lengths")
        u = self.sech2_w
        c = self.mix
        if np.any(u <= 0.0) or np.any(u > 1.0):
            raise ValueError("sech^2 values must lie in (0, 1]")
        if c.size and (np.any(c < 0.0) or np.any(c >= 1.0) or not np.all(np.isfinite(c))):
            raise ValueError("mixing ratios must lie in [0, 1)")
        object.__setattr__(self, "lo", int(self.lo))

    @property
    def hi(self) -> int:
        return self.lo + self.tanh_w.size - 1

    def mix_slice(self, x0: int, x1: int) -> np.ndarray:
        """C_x for x = x0 .. x1 inclusive (requires lo+1 <= x0, x1 <= hi)."""
        if x0 < self.lo + 1 or x1 > self.hi:
            raise IndexError(
                f"mixing ratios available for x in [{self.lo + 1}, {self.hi}], requested [{x0}, {x1}]"
            )
        base = self.lo + 1
        return self.mix[x0 - base : x1 - base + 1]


def derive(fld: CouplingField) -> DerivedField:
    """Compute tanh, sech^2, log tanh and mixing ratios for one realization.

    Pure and deterministic: identical fields give bit-identical results.
    """
    w = fld.values
    em = np.exp(-w)
    e2m = em * em
    s = 2.0 * em / (1.0 + e2m)
    # floor keeps u > 0 after sech^2 underflows (w >~ 744), so C stays < 1
    u = np.maximum(s * s, _TINY)
    a = np.tanh(w)
    with np.errstate(divide="ignore"):
        log_a = np.log1p(-e2m) - np.log1p(e2m)
    asq = 1.0 - u
    num = asq[1:] * u[:-1]
    c = num / (u[1:] + num)
    return DerivedField(fld.lo, tanh_w=a, sech2_w=u, log_tanh_w=log_a, mix=c)
