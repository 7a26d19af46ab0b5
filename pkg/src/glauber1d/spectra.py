"""Spectral counting and edge statistics for the one-flip generator.

Two independent counting routes are kept deliberately separate so they can
cross-check each other: `count_above` runs the LDL^T pivot (Sturm) sweep on
the tridiagonal window, `phase_count` runs the oscillation-theory ratio
recursion.  Off the spectrum the two agree exactly.

`estimate_ids` turns the counts into the Monte Carlo integrated density of
states near the edge: for each disorder realization the window [-r, r] is
built (couplings drawn on [-r-1, r+1]) and the per-site count above each
probe level is averaged over realizations.

Site classification at level lam < 0 splits the window by coupling strength
against the threshold gamma = (1/4) ln(1/|lam|): "strong" sites exceed it,
"calm" sites see no coupling above it anywhere in their one-neighborhood.
The submatrix on a maximal calm block has its top eigenvalue below
-2|lam|/(1+|lam|), which is what makes the upper counting bound work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal

from ._kernels import phase_negatives, sturm_negatives, sturm_negatives_grid
from .disorder import CouplingField, derive, sample_couplings
from .onespin import JacobiMatrix, build_generator
from .runtime import ordered_map

_CSV_META_PREFIX = "# "


def _check_probe(lam) -> float:
    lam = float(lam)
    if not math.isfinite(lam):
        raise ValueError(f"probe level must be finite, got {lam}")
    return lam


def count_above(jm: JacobiMatrix, lam) -> int:
    """Exact number of eigenvalues strictly greater than lam."""
    lam = _check_probe(lam)
    return jm.n - int(sturm_negatives(jm.diag, jm.offdiag, lam))


def count_above_grid(jm: JacobiMatrix, lams: np.ndarray) -> np.ndarray:
    lams = np.ascontiguousarray(lams, dtype=np.float64)
    if not np.all(np.isfinite(lams)):
        raise ValueError("probe levels must be finite")
    return jm.n - sturm_negatives_grid(jm.diag, jm.offdiag, lams)


def phase_count(jm: JacobiMatrix, lam) -> int:
    """count_above by the oscillation (eigenvector-ratio) recursion.

    Valid for lam off the spectrum; windows are split at exact-zero bonds so
    the recursion only ever divides by positive couplings.
    """
    lam = _check_probe(lam)
    d, b = jm.diag, jm.offdiag
    zero = np.flatnonzero(b == 0.0)
    total = 0
    start = 0
    for z in zero:
        total += phase_negatives(d[start : z + 1], b[start:z], lam)
        start = z + 1
    total += phase_negatives(d[start:], b[start:], lam)
    # the recursion runs on the flipped window at height |lam|, so its
    # negative ratios count eigenvalues below |lam| there, i.e. above lam here
    return total


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and optional eigenvectors of one window.

    Eigenvector column j belongs to eigenvalues[j]; row i belongs to site
    lo + i.
    """

    lo: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.eigenvalues.size


def eigensolve(jm: JacobiMatrix, want_vectors: bool = False, cross_check: bool = True) -> SpectralDecomposition:
    """Dense spectrum of the window, cross-validated against the pivot count.

    The LAPACK solver is accurate to ~1e-11 absolute here (entries are O(1));
    the cross-check probes gap midpoints with `count_above` and raises if the
    two routes ever disagree, so a silently broken solve cannot propagate.
    """
    if want_vectors:
        vals, vecs = eigh_tridiagonal(jm.diag, jm.offdiag)
    else:
        vals = eigvalsh_tridiagonal(jm.diag, jm.offdiag)
        vecs = None
    if cross_check:
        _cross_check_counts(jm, vals)
    return SpectralDecomposition(jm.lo, vals, vecs)


def _cross_check_counts(jm: JacobiMatrix, vals: np.ndarray) -> None:
    probes = [vals[0] - 0.5, vals[-1] + 0.5]
    n = vals.size
    for idx in {n // 4, n // 2, (3 * n) // 4}:
        if 1 <= idx < n:
            gap = vals[idx] - vals[idx - 1]
            if gap > 1e-10:
                probes.append(vals[idx - 1] + 0.5 * gap)
    for p in probes:
        got = count_above(jm, p)
        want = int(np.sum(vals > p))
        if got != want:
            raise ArithmeticError(
                f"eigensolver disagrees with pivot count at {p}: {want} vs {got}"
            )


def regular_bond_count(derived, lam, lo: int, hi: int) -> int:
    """Greedy count of non-overlapping bonds with 1 + C_x - C_{x+1} < |lam|.

    Bonds are scanned left to right over x in [lo, hi-1]; taking the bond at
    x excludes x+1.  Each such bond contributes one eigenvalue above lam, so
    count_above(window, lam) >= this count.
    """
    lam = _check_probe(lam)
    if lam >= 0.0:
        raise ValueError(f"level must be negative, got {lam}")
    if hi <= lo:
        return 0
    c = derived.mix_slice(lo, hi + 1)
    eligible = (1.0 + c[:-1] - c[1:]) < -lam
    count = 0
    x = 0
    stop = eligible.size - 1  # bond index range: x and x+1 must both be <= hi
    while x < stop:
        if eligible[x]:
            count += 1
            x += 2
        else:
            x += 1
    return count


def coupling_threshold(lam) -> float:
    """gamma(lam) = (1/4) ln(1/|lam|), the strong-coupling cut at level lam."""
    lam = _check_probe(lam)
    if not -1.0 < lam < 0.0:
        raise ValueError(f"level must lie in (-1, 0), got {lam}")
    return 0.25 * math.log(1.0 / abs(lam))


def calm_spectral_bound(lam) -> float:
    """Upper bound -2|lam|/(1+|lam|) for the top eigenvalue of a calm block."""
    lam = _check_probe(lam)
    if not -1.0 < lam < 0.0:
        raise ValueError(f"level must lie in (-1, 0), got {lam}")
    m = abs(lam)
    return -2.0 * m / (1.0 + m)


@dataclass(frozen=True)
class SiteClassification:
    """Strong/calm split of a window at one probe level.

    strong: sites x with w_x > gamma.  calm: sites whose whole coupling
    neighborhood (w_{x-1}, w_x, w_{x+1}) stays <= gamma; neighborhoods reach
    one site outside the window, so the field must cover [lo-1, hi+1].
    """

    lam: float
    threshold: float
    lo: int
    hi: int
    strong: np.ndarray
    calm: np.ndarray

    def calm_blocks(self) -> list[tuple[int, int]]:
        """Maximal runs of consecutive calm sites, as inclusive (start, end)."""
        blocks = []
        sites = self.calm
        i = 0
        while i < sites.size:
            j = i
            while j + 1 < sites.size and sites[j + 1] == sites[j] + 1:
                j += 1
            blocks.append((int(sites[i]), int(sites[j])))
            i = j + 1
        return blocks


def classify_sites(fld: CouplingField, lam, lo: int, hi: int) -> SiteClassification:
    """Classify sites of [lo, hi] against gamma(lam)."""
    gamma = coupling_threshold(lam)
    if hi < lo:
        raise ValueError(f"empty window [{lo}, {hi}]")
    if fld.lo > lo - 1 or fld.hi < hi + 1:
        raise ValueError(
            f"classifying [{lo}, {hi}] needs couplings on [{lo - 1}, {hi + 1}], "
            f"field covers [{fld.lo}, {fld.hi}]"
        )
    w = fld.values
    i0 = lo - fld.lo
    i1 = hi - fld.lo
    own = w[i0 : i1 + 1]
    left = w[i0 - 1 : i1]
    right = w[i0 + 1 : i1 + 2]
    sites = np.arange(lo, hi + 1)
    strong = sites[own > gamma]
    calm = sites[(own <= gamma) & (left <= gamma) & (right <= gamma)]
    return SiteClassification(float(lam), gamma, lo, hi, strong, calm)


def calm_block_top(jm: JacobiMatrix, cls: SiteClassification) -> float | None:
    """Top eigenvalue over all maximal calm blocks, None when no calm sites.

    Blocks are cut out of the already built window, so the window must cover
    the classification range.
    """
    if cls.calm.size == 0:
        return None
    if jm.lo > cls.lo or jm.hi < cls.hi:
        raise ValueError("window does not cover the classified range")
    top = -math.inf
    for start, end in cls.calm_blocks():
        i0 = start - jm.lo
        i1 = end - jm.lo
        vals = eigvalsh_tridiagonal(jm.diag[i0 : i1 + 1], jm.offdiag[i0:i1])
        top = max(top, float(vals[-1]))
    return top


@dataclass
class IdsCurve:
    """Monte Carlo integrated density of states above each probe level.

    lam is ascending in |lam|; n_hat[i] is the average of
    count_above(window, lam[i]) / (2r+1) over `samples` realizations, stderr
    its realization-level standard error.
    """

    lam: np.ndarray
    n_hat: np.ndarray
    stderr: np.ndarray
    r: int
    samples: int
    meta: dict = field(default_factory=dict)

    def counts_total(self) -> np.ndarray:
        """Total eigenvalue counts behind each point (for trimming)."""
        return np.rint(self.n_hat * (2 * self.r + 1) * self.samples).astype(np.int64)

    def monotone_within(self, n_se: float = 2.0) -> bool:
        """True when n_hat is nondecreasing in |lam| up to n_se combined SEs."""
        nh, se = self.n_hat, self.stderr
        comb = np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
        return bool(np.all(nh[1:] >= nh[:-1] - n_se * comb))

    def to_csv(self, path, meta: dict | None = None) -> None:
        from .harness import write_csv

        rows = [
            (self.lam[i], self.n_hat[i], self.stderr[i], self.r, self.samples)
            for i in range(self.lam.size)
        ]
        write_csv(path, ("lambda", "n_hat", "stderr", "r", "samples"), rows, meta or self.meta)

    @classmethod
    def from_csv(cls, path) -> "IdsCurve":
        from .harness import read_csv

        header, rows, meta = read_csv(path)
        if header != ["lambda", "n_hat", "stderr", "r", "samples"]:
            raise ValueError(f"unexpected columns {header} in {path}")
        arr = np.asarray(rows, dtype=np.float64)
        return cls(
            lam=arr[:, 0],
            n_hat=arr[:, 1],
            stderr=arr[:, 2],
            r=int(arr[0, 3]),
            samples=int(arr[0, 4]),
            meta=meta,
        )


def estimate_ids(model, lams, r: int, samples: int, seed: int, threads: int = 1) -> IdsCurve:
    """Estimate the IDS above each level in lams over `samples` realizations.

    lams must be negative and ascending in |lam| (descending as reals); each
    realization builds the window [-r, r] from couplings on [-r-1, r+1] drawn
    from substream (seed, realization index).
    """
    lams = np.ascontiguousarray(lams, dtype=np.float64)
    if lams.size == 0 or np.any(lams >= 0.0):
        raise ValueError("probe levels must be negative")
    if np.any(np.diff(np.abs(lams)) <= 0.0):
        raise ValueError("probe levels must be strictly ascending in |lambda|")
    if r < 1 or samples < 1:
        raise ValueError(f"need r >= 1 and samples >= 1, got r={r}, samples={samples}")
    n = 2 * r + 1
    counts = np.empty((samples, lams.size), dtype=np.int64)

    def work(m: int) -> None:
        fld = sample_couplings(model, -r - 1, r + 1, seed, m)
        jm = build_generator(derive(fld), -r, r)
        counts[m] = n - sturm_negatives_grid(jm.diag, jm.offdiag, lams)

    ordered_map(work, samples, threads)
    n_hat = counts.mean(axis=0) / n
    if samples >= 2:
        stderr = counts.std(axis=0, ddof=1) / math.sqrt(samples) / n
    else:
        stderr = np.full(lams.size, np.nan)
    return IdsCurve(lam=lams, n_hat=n_hat, stderr=stderr, r=r, samples=samples)
