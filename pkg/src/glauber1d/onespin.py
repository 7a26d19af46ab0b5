"""The single-flip sector of the dynamics as a random Jacobi matrix.

In the orthonormal one-flip basis the generator restricted to a window
[lo, hi] is tridiagonal with

    diag_x = -1 - C_x + C_{x+1},        offdiag_x = sqrt(C_x (1 - C_x)),

where C is the bond mixing ratio from `disorder.derive`.  Building the window
therefore needs couplings on [lo-1, hi+1].  Entries obey diag in (-2, 0) and
offdiag in [0, 1/2] for every realization, which pins the spectrum to
[-2, 0).

The center spin decomposes over the one-flip modes of the sites to its left;
`center_spin_weights` carries that expansion with log-domain products so deep
windows cannot overflow, flushing weights below e^{-700} to exact zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .disorder import DerivedField

_LOG_FLUSH = -700.0


@dataclass(frozen=True)
class JacobiMatrix:
    """Tridiagonal window of the one-flip generator on sites lo..hi.

    offdiag[i] couples sites lo+i and lo+i+1 (the bond entry b_{lo+i+1}).
    """

    lo: int
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.diag, dtype=np.float64)
        b = np.ascontiguousarray(self.offdiag, dtype=np.float64)
        if d.ndim != 1 or d.size < 1 or b.shape != (d.size - 1,):
            raise ValueError("need n diagonal entries and n-1 off-diagonal entries")
        if np.any(d <= -2.0) or np.any(d >= 0.0):
            raise ValueError("diagonal entries must lie in (-2, 0)")
        if np.any(b < 0.0) or np.any(b > 0.5):
            raise ValueError("off-diagonal entries must lie in [0, 1/2]")
        d.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", b)
        object.__setattr__(self, "lo", int(self.lo))

    @property
    def n(self) -> int:
        return self.diag.size

    @property
    def hi(self) -> int:
        return self.lo + self.n - 1

    def to_csv(self, path) -> None:
        """Debug dump, one row per site: x, diag, offdiag_to_left."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("x,diag,offdiag_to_left\n")
            for i in range(self.n):
                left = "" if i == 0 else f"{self.offdiag[i - 1]:.17g}"
                fh.write(f"{self.lo + i},{self.diag[i]:.17g},{left}\n")


def build_generator(derived: DerivedField, lo: int, hi: int) -> JacobiMatrix:
    """Assemble the tridiagonal window [lo, hi] from derived bond ratios."""
    if hi < lo:
        raise ValueError(f"empty window [{lo}, {hi}]")
    if derived.lo + 1 > lo or derived.hi < hi + 1:
        raise ValueError(
            f"window [{lo}, {hi}] needs couplings on [{lo - 1}, {hi + 1}], "
            f"field covers [{derived.lo}, {derived.hi}]"
        )
    c = derived.mix_slice(lo, hi + 1)
    diag = -1.0 - c[:-1] + c[1:]
    off = np.sqrt(c[1:-1] * (1.0 - c[1:-1]))
    return JacobiMatrix(lo, diag, off)


@dataclass(frozen=True)
class SpinWeights:
    """Expansion of the center spin over one-flip modes on sites lo..0.

    weights[i] is the coefficient of the mode at site lo+i; mass is the sum
    of squares, deficit = max(0, 1 - mass) the probability weight the finite
    window misses.  `underflowed` records whether any coefficient was flushed
    to zero from a finite log value below -700.
    """

    lo: int
    weights: np.ndarray
    mass: float
    deficit: float
    underflowed: bool

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def center_spin_weights(derived: DerivedField, lo: int) -> SpinWeights:
    """Weights sqrt(u_x) * prod_{j=x+1..0} tanh(w_j) for x = lo..0."""
    if lo > 0:
        raise ValueError(f"expansion window must reach site 0, got lo = {lo}")
    if derived.lo > lo or derived.hi < 0:
        raise ValueError(
            f"expansion window [{lo}, 0] needs couplings on [{lo}, 0], "
            f"field covers [{derived.lo}, {derived.hi}]"
        )
    i0 = lo - derived.lo
    i1 = -derived.lo  # index of site 0
    u = derived.sech2_w[i0 : i1 + 1]
    log_a = derived.log_tanh_w[i0 : i1 + 1]
    n = u.size
    # suffix[i] = sum of log a over sites lo+i+1 .. 0; -inf marks an exact
    # zero coupling cutting the product
    suffix = np.zeros(n)
    if n > 1:
        suffix[:-1] = np.cumsum(log_a[:0:-1])[::-1]
    logw = 0.5 * np.log(u) + suffix
    with np.errstate(over="ignore"):
        w = np.exp(logw)
    flush = logw < _LOG_FLUSH
    underflowed = bool(np.any(flush & np.isfinite(logw)))
    w[flush] = 0.0
    # the exact mass is 1 - prod a_j^2 <= 1; min() undoes summation rounding
    mass = min(float(w @ w), 1.0)
    return SpinWeights(lo, w, mass, max(0.0, 1.0 - mass), underflowed)
