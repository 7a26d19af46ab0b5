"""JIT-compiled inner loops: pivot counting, phase recursion, KMC events."""

from __future__ import annotations

import numpy as np
from numba import njit

_EPS = float(np.finfo(np.float64).eps)


@njit(cache=True, nogil=True)
def sturm_negatives(diag, off, lam):
    """Number of eigenvalues strictly below lam, by LDL^T pivot signs.

    Zero pivots are perturbed to a negative value proportional to the local
    scale, so an eigenvalue exactly at lam counts as "below".  IEEE inf
    propagation keeps the recursion sign-correct without pivot clamping.
    """
    n = diag.shape[0]
    neg = 0
    d = diag[0] - lam
    if d == 0.0:
        d = -_EPS * (abs(diag[0]) + abs(lam) + 1.0)
    if d < 0.0:
        neg += 1
    for i in range(1, n):
        d = (diag[i] - lam) - off[i - 1] * off[i - 1] / d
        if d == 0.0:
            d = -_EPS * (abs(diag[i]) + abs(lam) + 1.0)
        if d < 0.0:
            neg += 1
    return neg


@njit(cache=True, nogil=True)
def sturm_negatives_grid(diag, off, lams):
    out = np.empty(lams.shape[0], np.int64)
    for j in range(lams.shape[0]):
        out[j] = sturm_negatives(diag, off, lams[j])
    return out


@njit(cache=True, nogil=True)
def phase_negatives(diag, off, lam):
    """Negative terms in the eigenvector-ratio (cotangent) shooting sequence.

    Runs the sign recursion of the flipped chain at height |lam|; every off
    entry must be strictly positive (callers split windows at zero bonds).
    The ratio q_i carries the sign of the i-th shifted pivot, so after a
    final step that closes the window with a fictitious unit bond the count
    of negatives equals sturm_negatives exactly, for lam off the spectrum.
    Divisions by zero ratios resolve through IEEE infinities on purpose.
    """
    mu = -lam
    n = diag.shape[0]
    neg = 0
    q = 0.0
    for i in range(n):
        top = -diag[i] - mu
        b_right = off[i] if i < n - 1 else 1.0
        if i == 0:
            q = top / b_right
        else:
            q = top / b_right - (off[i - 1] / b_right) / q
        if q < 0.0:
            neg += 1
    return neg


@njit(cache=True, nogil=True)
def gibbs_fill(spins, agree, rng):
    """Draw a free-boundary Gibbs configuration in place.

    agree[j] is the probability that neighbors j and j+1 align,
    1/(1 + e^{-2 w}) for bond coupling w.
    """
    spins[0] = 1 if rng.random() < 0.5 else -1
    for j in range(1, spins.shape[0]):
        if rng.random() < agree[j - 1]:
            spins[j] = spins[j - 1]
        else:
            spins[j] = -spins[j - 1]


@njit(cache=True, nogil=True)
def flip_rate(spins, i, bonds):
    """Heat-bath rate 1/(1 + e^{dH}) for flipping window position i."""
    h = 0.0
    if i > 0:
        h += 2.0 * bonds[i - 1] * spins[i - 1] * spins[i]
    if i < spins.shape[0] - 1:
        h += 2.0 * bonds[i] * spins[i] * spins[i + 1]
    return 1.0 / (1.0 + np.exp(h))


@njit(cache=True, nogil=True)
def kmc_chunk(bonds, agree, times, n_traj, center, rng):
    """Simulate one chunk of trajectories; return per-time accumulators.

    Rejection form of the continuous-time chain: candidate events arrive at
    rate n (site uniform), a candidate at site i is accepted with probability
    flip_rate <= 1.  times must be ascending with times[0] == 0.  Returns the
    sums over trajectories of s_center(0)*s_center(t) and of s_center(t).
    """
    nt = times.shape[0]
    n = bonds.shape[0] + 1
    prod_sum = np.zeros(nt)
    spin_sum = np.zeros(nt)
    spins = np.empty(n, np.int64)
    mean_wait = 1.0 / n
    for _ in range(n_traj):
        gibbs_fill(spins, agree, rng)
        s0 = spins[center]
        t = 0.0
        ptr = 0
        while ptr < nt and times[ptr] <= 0.0:
            prod_sum[ptr] += s0 * spins[center]
            spin_sum[ptr] += spins[center]
            ptr += 1
        while ptr < nt:
            t_next = t + rng.exponential(mean_wait)
            while ptr < nt and times[ptr] < t_next:
                prod_sum[ptr] += s0 * spins[center]
                spin_sum[ptr] += spins[center]
                ptr += 1
            if ptr >= nt:
                break
            i = rng.integers(0, n)
            if rng.random() < flip_rate(spins, i, bonds):
                spins[i] = -spins[i]
            t = t_next
    return prod_sum, spin_sum
