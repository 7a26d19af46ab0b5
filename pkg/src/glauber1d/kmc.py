"""Kinetic Monte Carlo oracle for the spin chain.

Simulates the heat-bath single-flip dynamics directly on spin
configurations, with no reference to the one-flip sector, so its center-spin
autocorrelation is an independent check on the spectral route.  The chain
lives on the field's sites with free boundaries: only the window-internal
bonds enter the energy.  Flip rates are c = 1/(1 + e^{dH}), which satisfies
detailed balance for exp(-H).

Time is continuous: candidate events arrive at rate n (one uniform site
each) and a candidate is accepted with probability c <= 1, which realizes
the exact jump chain without computing total rates.  Initial configurations
are exact Gibbs draws, so the process is stationary and the recorded
product s_0(0) s_0(t) estimates the equilibrium autocorrelation.

Standard errors come from batch means over fixed-size trajectory chunks;
each chunk owns one counter-based stream keyed by its index, so estimates
are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import flip_rate, gibbs_fill, kmc_chunk
from .disorder import CouplingField
from .runtime import ordered_map
from .streams import DOMAIN_KMC, stream


@dataclass(frozen=True)
class SpinConfig:
    """One configuration: spins[i] = +-1 at site lo + i."""

    lo: int
    spins: np.ndarray

    def __post_init__(self):
        s = np.ascontiguousarray(self.spins, dtype=np.int64)
        if s.ndim != 1 or s.size == 0 or not np.all(np.abs(s) == 1):
            raise ValueError("spins must be a nonempty +-1 vector")
        s.setflags(write=False)
        object.__setattr__(self, "spins", s)
        object.__setattr__(self, "lo", int(self.lo))

    @property
    def hi(self) -> int:
        return self.lo + self.spins.size - 1


def _internal_bonds(fld: CouplingField) -> np.ndarray:
    # w_x couples sites x-1 and x; the window [lo, hi] keeps x = lo+1 .. hi
    return fld.values[1:]


def _agree_probabilities(bonds: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-2.0 * bonds))


def gibbs_sample(fld: CouplingField, rng) -> SpinConfig:
    """Exact free-boundary Gibbs draw on the field's sites."""
    agree = _agree_probabilities(_internal_bonds(fld))
    spins = np.empty(fld.values.size, dtype=np.int64)
    gibbs_fill(spins, agree, rng)
    return SpinConfig(fld.lo, spins)


def glauber_rate(config: SpinConfig, x: int, fld: CouplingField) -> float:
    """Heat-bath rate for flipping the spin at site x."""
    if not config.lo <= x <= config.hi:
        raise IndexError(f"site {x} outside configuration window [{config.lo}, {config.hi}]")
    if fld.lo != config.lo or fld.hi != config.hi:
        raise ValueError("coupling field and configuration must cover the same window")
    return float(flip_rate(config.spins, x - config.lo, _internal_bonds(fld)))


@dataclass
class TrajectoryStats:
    """Monte Carlo autocorrelation estimates on a time grid.

    estimates[i] is the trajectory average of s_0(0) s_0(times[i]); stderr
    comes from batch means over chunks of `chunk_size` trajectories.
    spin_mean tracks the plain one-time average of s_0(t) (a stationarity
    diagnostic: it should vanish within error).
    """

    times: np.ndarray
    estimates: np.ndarray
    stderr: np.ndarray
    n_traj: int
    chunk_size: int
    spin_mean: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self, path, meta: dict | None = None, spectral: np.ndarray | None = None) -> None:
        from .harness import write_csv

        cols = ["t", "kmc_estimate", "stderr", "n_traj"]
        rows = []
        for i in range(self.times.size):
            row = [self.times[i], self.estimates[i], self.stderr[i], self.n_traj]
            if spectral is not None:
                row.append(spectral[i])
            rows.append(tuple(row))
        if spectral is not None:
            cols.append("spectral")
        write_csv(path, tuple(cols), rows, meta or self.meta)


def simulate_autocorr(
    fld: CouplingField,
    times,
    n_traj: int,
    seed: int,
    threads: int = 1,
    chunk_size: int = 1000,
) -> TrajectoryStats:
    """Estimate the center-spin autocorrelation of one fixed realization.

    The window must contain site 0 (the recorded spin).  times must be
    ascending and start at 0, where the product is exactly 1.
    """
    t = np.ascontiguousarray(times, dtype=np.float64)
    if t.size == 0 or t[0] != 0.0 or np.any(np.diff(t) <= 0.0) or not np.all(np.isfinite(t)):
        raise ValueError("time grid must be strictly ascending and start at 0")
    if not fld.lo <= 0 <= fld.hi:
        raise ValueError(f"window [{fld.lo}, {fld.hi}] must contain site 0")
    if n_traj < 1 or chunk_size < 1:
        raise ValueError(f"need n_traj >= 1 and chunk_size >= 1, got {n_traj}, {chunk_size}")
    bonds = _internal_bonds(fld)
    agree = _agree_probabilities(bonds)
    center = -fld.lo
    n_chunks = (n_traj + chunk_size - 1) // chunk_size
    sizes = np.full(n_chunks, chunk_size, dtype=np.int64)
    sizes[-1] = n_traj - chunk_size * (n_chunks - 1)
    prod_sums = np.empty((n_chunks, t.size))
    spin_sums = np.empty((n_chunks, t.size))

    def work(c: int) -> None:
        rng = stream(seed, c, DOMAIN_KMC)
        prod_sums[c], spin_sums[c] = kmc_chunk(bonds, agree, t, int(sizes[c]), center, rng)

    ordered_map(work, n_chunks, threads)
    total = float(n_traj)
    estimates = prod_sums.sum(axis=0) / total
    spin_mean = spin_sums.sum(axis=0) / total
    if n_chunks >= 2:
        batch = prod_sums / sizes[:, None]
        dev = batch - estimates[None, :]
        var = (sizes[:, None] * dev * dev).sum(axis=0) / total / (n_chunks - 1)
        stderr = np.sqrt(var)
    else:
        stderr = np.full(t.size, np.nan)
    return TrajectoryStats(
        times=t,
        estimates=estimates,
        stderr=stderr,
        n_traj=int(n_traj),
        chunk_size=int(chunk_size),
        spin_mean=spin_mean,
    )
