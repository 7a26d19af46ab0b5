"""Spin autocorrelation through the one-flip spectrum.

For one realization the center-spin autocorrelation on a window [lo, hi]
(lo <= 0 <= hi) is

    S_1(t) = sum_j (w . u_j)^2 e^{t lam_j},

with w the center-spin expansion weights on [lo, 0] and (lam_j, u_j) the
eigenpairs of the window generator.  The full eigendecomposition is used on
purpose: the same decomposition also yields the center-mode autocorrelation
sum_j u_j(0)^2 e^{t lam_j} and the per-realization spectral sums behind the
Laplace-transformed IDS, and the three must stay mutually consistent.

`disorder_average` averages S_1 over realizations drawn from per-index
streams, with realization-level standard errors and mass-deficit
bookkeeping: the weights miss 1 - mass of the spin, so S_hat(0) + mean
deficit = 1 up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .disorder import CouplingField, derive, sample_couplings
from .onespin import build_generator, center_spin_weights
from .runtime import ordered_map
from .spectra import eigensolve


def _check_times(times) -> np.ndarray:
    t = np.ascontiguousarray(times, dtype=np.float64)
    if t.size == 0 or np.any(t < 0.0) or not np.all(np.isfinite(t)):
        raise ValueError("time grid must be nonempty, finite and nonnegative")
    if np.any(np.diff(t) < 0.0):
        raise ValueError("time grid must be ascending")
    return t


@dataclass(frozen=True)
class AutocorrResult:
    """One realization's autocorrelation on a time grid."""

    times: np.ndarray
    values: np.ndarray
    mass: float
    deficit: float


def _mode_values(eigs: np.ndarray, coeff_sq: np.ndarray, times: np.ndarray) -> np.ndarray:
    return coeff_sq @ np.exp(np.outer(eigs, times))


def center_spin_autocorr(derived, lo: int, hi: int, times) -> AutocorrResult:
    """S_1(t) for the window [lo, hi] of one realization."""
    times = _check_times(times)
    if not lo <= 0 <= hi:
        raise ValueError(f"window [{lo}, {hi}] must contain site 0")
    jm = build_generator(derived, lo, hi)
    wt = center_spin_weights(derived, lo)
    dec = eigensolve(jm, want_vectors=True)
    w_full = np.zeros(jm.n)
    w_full[: wt.weights.size] = wt.weights
    coeff = dec.eigenvectors.T @ w_full
    vals = _mode_values(dec.eigenvalues, coeff * coeff, times)
    return AutocorrResult(times, vals, wt.mass, wt.deficit)


def center_mode_autocorr(derived, lo: int, hi: int, times) -> AutocorrResult:
    """Autocorrelation of the one-flip mode at site 0; starts exactly at 1."""
    times = _check_times(times)
    if not lo <= 0 <= hi:
        raise ValueError(f"window [{lo}, {hi}] must contain site 0")
    jm = build_generator(derived, lo, hi)
    dec = eigensolve(jm, want_vectors=True)
    row = dec.eigenvectors[-lo]
    vals = _mode_values(dec.eigenvalues, row * row, times)
    return AutocorrResult(times, vals, 1.0, 0.0)


def free_chain_autocorr(fld: CouplingField, times) -> AutocorrResult:
    """Exact S(t) of the finite free-boundary chain on the field's sites.

    Couplings outside the window's internal bonds are zeroed, which is the
    spectral twin of a kinetic Monte Carlo run on the same window: the spin
    expansion then closes inside the window and the mass deficit vanishes.
    """
    inner = np.zeros(fld.values.size + 2)
    inner[2:-1] = fld.values[1:]
    padded = CouplingField(fld.lo - 1, inner)
    return center_spin_autocorr(derive(padded), fld.lo, fld.hi, times)


@dataclass
class CorrelationSeries:
    """Disorder-averaged autocorrelation with realization-level errors."""

    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    r: int
    samples: int
    mean_deficit: float
    meta: dict = field(default_factory=dict)

    def to_csv(self, path, meta: dict | None = None) -> None:
        from .harness import write_csv

        rows = [
            (self.times[i], self.values[i], self.stderr[i], self.mean_deficit)
            for i in range(self.times.size)
        ]
        write_csv(path, ("t", "s_hat", "stderr", "mean_deficit"), rows, meta or self.meta)

    @classmethod
    def from_csv(cls, path) -> "CorrelationSeries":
        from .harness import read_csv

        header, rows, meta = read_csv(path)
        if header != ["t", "s_hat", "stderr", "mean_deficit"]:
            raise ValueError(f"unexpected columns {header} in {path}")
        arr = np.asarray(rows, dtype=np.float64)
        r = int(meta.get("r", 0))
        samples = int(meta.get("samples", 0))
        return cls(
            times=arr[:, 0],
            values=arr[:, 1],
            stderr=arr[:, 2],
            r=r,
            samples=samples,
            mean_deficit=float(arr[0, 3]),
            meta=meta,
        )


def disorder_average(
    model,
    times,
    r: int,
    samples: int,
    seed: int,
    threads: int = 1,
    keep_realizations: bool = False,
):
    """Average S_1 over realizations on the window [-r, r].

    Requires a finite cosh^4 coupling moment (the regime where the averaged
    decay laws make sense).  Returns the series, plus the per-realization
    records when keep_realizations is set.
    """
    times = _check_times(times)
    if r < 1 or samples < 1:
        raise ValueError(f"need r >= 1 and samples >= 1, got r={r}, samples={samples}")
    mom = model.cosh4_moment()
    if not mom.finite:
        raise ValueError("model has infinite cosh^4 moment; averaged decay is not controlled")
    vals = np.empty((samples, times.size))
    deficits = np.empty(samples)

    def work(m: int) -> None:
        fld = sample_couplings(model, -r - 1, r + 1, seed, m)
        res = center_spin_autocorr(derive(fld), -r, r, times)
        vals[m] = res.values
        deficits[m] = res.deficit

    ordered_map(work, samples, threads)
    mean = vals.mean(axis=0)
    if samples >= 2:
        stderr = vals.std(axis=0, ddof=1) / math.sqrt(samples)
    else:
        stderr = np.full(times.size, np.nan)
    series = CorrelationSeries(
        times=times,
        values=mean,
        stderr=stderr,
        r=r,
        samples=samples,
        mean_deficit=float(deficits.mean()),
    )
    if keep_realizations:
        records = [
            {"index": m, "deficit": float(deficits[m]), "values": [float(v) for v in vals[m]]}
            for m in range(samples)
        ]
        return series, records
    return series


def disorder_spectra(model, r: int, samples: int, seed: int, threads: int = 1, want_center: bool = False):
    """Eigenvalues (and optionally squared center components) per realization.

    Returns eigs of shape (samples, 2r+1), ascending per row, plus the
    matching u_j(0)^2 matrix when want_center is set.  Feed the flattened
    eigs to `ids_laplace`.
    """
    if r < 1 or samples < 1:
        raise ValueError(f"need r >= 1 and samples >= 1, got r={r}, samples={samples}")
    n = 2 * r + 1
    eigs = np.empty((samples, n))
    center = np.empty((samples, n)) if want_center else None

    def work(m: int) -> None:
        fld = sample_couplings(model, -r - 1, r + 1, seed, m)
        jm = build_generator(derive(fld), -r, r)
        dec = eigensolve(jm, want_vectors=want_center)
        eigs[m] = dec.eigenvalues
        if want_center:
            row = dec.eigenvectors[r]
            center[m] = row * row

    ordered_map(work, samples, threads)
    return (eigs, center) if want_center else eigs


def ids_laplace(pooled_eigs, r: int, t: float) -> float:
    """Laplace transform of the empirical IDS: mean of e^{t lam} per site.

    pooled_eigs holds the eigenvalues of M windows of half-width r, pooled;
    the normalization 1/(M (2r+1)) is recovered from the array size.
    """
    pooled = np.ascontiguousarray(pooled_eigs, dtype=np.float64).ravel()
    n = 2 * r + 1
    if r < 1 or pooled.size == 0 or pooled.size % n:
        raise ValueError(f"pooled spectrum size {pooled.size} is not a multiple of 2r+1 = {n}")
    t = float(t)
    if t < 0.0 or not math.isfinite(t):
        raise ValueError(f"time must be finite and >= 0, got {t}")
    return float(np.exp(pooled * t).mean())
