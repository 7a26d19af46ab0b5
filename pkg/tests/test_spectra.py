import math

import numpy as np
import pytest

from glauber1d import (
    CouplingField,
    Exponential,
    UniformBounded,
    build_generator,
    calm_block_top,
    calm_spectral_bound,
    classify_sites,
    count_above,
    count_above_grid,
    coupling_threshold,
    derive,
    eigensolve,
    estimate_ids,
    phase_count,
    regular_bond_count,
    sample_couplings,
)
from glauber1d.spectra import IdsCurve

ATANH_HALF = math.atanh(0.5)


def homogeneous_window(w: float, r: int):
    fld = CouplingField(-r - 1, np.full(2 * r + 3, w))
    return build_generator(derive(fld), -r, r)


def random_window(model, r: int, seed: int, index: int):
    fld = sample_couplings(model, -r - 1, r + 1, seed, index)
    return build_generator(derive(fld), -r, r)


# three-site chain at a = 1/2: offdiag 0.4, eigenvalues -1 and -1 -+ 0.4 sqrt(2)
TRIPLE_EIGS = np.array([-1.0 - 0.4 * math.sqrt(2.0), -1.0, -1.0 + 0.4 * math.sqrt(2.0)])


def triple_window():
    fld = CouplingField(-2, np.full(5, ATANH_HALF))
    return build_generator(derive(fld), -1, 1)


# ---------------------------------------------------------------------------
# Counting

def test_count_above_three_site_oracle():
    jm = triple_window()
    assert count_above(jm, -0.9) == 1
    assert count_above(jm, -1.2) == 2
    assert count_above(jm, -3.0) == 3
    assert count_above(jm, -1e-12) == 0


def test_count_above_grid_matches_scalar():
    jm = random_window(Exponential(5.0), 50, seed=2, index=0)
    lams = -np.geomspace(0.01, 1.9, 17)[::-1]
    grid = count_above_grid(jm, lams)
    assert np.array_equal(grid, [count_above(jm, lam) for lam in lams])


def test_phase_count_equals_pivot_count():
    jm = triple_window()
    for lam in (-0.9, -1.2, -2.5, -3.0, -0.01):
        assert phase_count(jm, lam) == count_above(jm, lam)


def test_phase_count_below_spectrum_is_full():
    assert phase_count(triple_window(), -2.5) == 3


def test_counting_single_site_window():
    fld = CouplingField(-1, np.array([0.3, 0.4, 0.5]))
    jm = build_generator(derive(fld), 0, 0)
    assert jm.n == 1
    d = jm.diag[0]
    for lam in (-1.5, -0.5):
        expect = 1 if d > lam else 0
        assert count_above(jm, lam) == expect
        assert phase_count(jm, lam) == expect


def test_counting_routes_agree_on_random_instances():
    model = Exponential(5.0)
    rng = np.random.default_rng(31)
    for m in range(25):
        jm = random_window(model, int(rng.integers(5, 60)), seed=8, index=m)
        vals = eigensolve(jm).eigenvalues
        for lam in -rng.random(6) * 2.2 - 1e-3:
            if np.min(np.abs(vals - lam)) <= 1e-12:
                continue
            reference = int(np.sum(vals > lam))
            assert count_above(jm, lam) == reference
            assert phase_count(jm, lam) == reference


def test_phase_count_splits_at_zero_bonds():
    # a zero coupling cuts the chain into independent blocks
    fld = CouplingField(-3, np.array([0.4, 0.5, 0.6, 0.0, 0.7, 0.3, 0.2]))
    jm = build_generator(derive(fld), -2, 2)
    assert np.any(jm.offdiag == 0.0)
    for lam in (-0.5, -1.0, -1.5):
        assert phase_count(jm, lam) == count_above(jm, lam)


def test_count_probe_validation():
    jm = triple_window()
    with pytest.raises(ValueError):
        count_above(jm, math.nan)
    with pytest.raises(ValueError):
        phase_count(jm, math.inf)


# ---------------------------------------------------------------------------
# Eigensolve

def test_eigensolve_zero_coupling_window():
    fld = CouplingField(-3, np.zeros(7))
    jm = build_generator(derive(fld), -2, 2)
    dec = eigensolve(jm)
    assert dec.eigenvalues == pytest.approx(np.full(5, -1.0), abs=1e-14)


def test_eigensolve_three_site_closed_form():
    dec = eigensolve(triple_window())
    assert dec.eigenvalues == pytest.approx(TRIPLE_EIGS, abs=1e-8)


def test_eigensolve_reconstructs_matrix():
    jm = random_window(Exponential(5.0), 20, seed=5, index=1)
    dec = eigensolve(jm, want_vectors=True)
    q = dec.eigenvectors
    full = (q * dec.eigenvalues) @ q.T
    assert np.diag(full) == pytest.approx(jm.diag, abs=1e-8)
    assert np.diag(full, 1) == pytest.approx(jm.offdiag, abs=1e-8)
    # everything beyond the first off-diagonal is numerically zero
    off2 = np.diag(full, 2)
    assert np.max(np.abs(off2)) < 1e-10


def test_eigensolve_orthonormal_vectors():
    jm = random_window(Exponential(5.0), 15, seed=5, index=2)
    q = eigensolve(jm, want_vectors=True).eigenvectors
    assert q.T @ q == pytest.approx(np.eye(jm.n), abs=1e-10)


def test_homogeneous_dispersion_relation():
    # eigenvalues -1 + tanh(2w) cos(j pi / (n+1)) for the constant chain
    for w in (0.1, 0.5):
        n = 51
        r = (n - 1) // 2
        jm = homogeneous_window(w, r)
        expect = np.sort(
            -1.0 + math.tanh(2.0 * w) * np.cos(np.arange(1, n + 1) * math.pi / (n + 1))
        )
        assert eigensolve(jm).eigenvalues == pytest.approx(expect, abs=1e-10)


def test_spectrum_box_on_random_windows():
    model = Exponential(5.0)
    for m in range(10):
        vals = eigensolve(random_window(model, 40, seed=6, index=m)).eigenvalues
        assert vals[0] >= -2.0 - 1e-10
        assert vals[-1] <= 1e-10
        assert vals[-1] < 0.0


# ---------------------------------------------------------------------------
# Regular bonds

def prescribed_mix(c_values: np.ndarray):
    """DerivedField with hand-set mixing ratios for bond-count tests."""
    from glauber1d.disorder import DerivedField

    n = c_values.size + 1
    return DerivedField(
        0,
        tanh_w=np.full(n, 0.5),
        sech2_w=np.full(n, 0.75),
        log_tanh_w=np.full(n, math.log(0.5)),
        mix=np.asarray(c_values, dtype=np.float64),
    )


def test_regular_bond_direct_inequality():
    # C_1 = 0.01, C_2 = 0.995: 1 + C_1 - C_2 = 0.015 < 0.02
    d = prescribed_mix(np.array([0.01, 0.995, 0.5]))
    assert regular_bond_count(d, -0.02, 1, 2) == 1
    assert regular_bond_count(d, -0.01, 1, 2) == 0


def test_regular_bond_homogeneous_is_zero():
    d = derive(CouplingField(0, np.full(12, 0.9)))
    assert regular_bond_count(d, -0.99, 1, 10) == 0


def test_regular_bond_greedy_non_overlap():
    # a staircase of mixing ratios makes three consecutive bonds regular
    # at level -0.9; they share sites, so only two fit without overlap
    d = prescribed_mix(np.array([0.0, 0.15, 0.3, 0.45, 0.5]))
    stat = 1.0 + d.mix[:-1] - d.mix[1:]
    assert np.sum(stat < 0.9) == 3
    assert regular_bond_count(d, -0.9, 1, 4) == 2


def test_regular_bond_lower_bound_on_counts():
    model = Exponential(5.0)
    for m in range(15):
        fld = sample_couplings(model, -41, 41, seed=12, index=m)
        d = derive(fld)
        jm = build_generator(d, -40, 40)
        for lam in (-0.2, -0.4, -0.6):
            assert count_above(jm, lam) >= regular_bond_count(d, lam, -40, 40)


def test_regular_bond_event_frequency_matches_tail_bound():
    """Frequency of {1 + C_0 - C_1 < |lam|} vs the squared-tail lower bound.

    Both couplings next to the shared site must exceed (1/2) ln(1/(c |lam|))
    to make the bond regular, so the frequency is at least a constant times
    the squared tail.  The constant 0.9 was calibrated at these levels
    (measured frequency/tail^2 ratios are 8.9 to 20.5); smaller |lam| makes
    the event unsampleable at desk scale.
    """
    k, c = 5.0, 0.5
    model = Exponential(k)
    rng = np.random.default_rng(99)
    w = model.sample(rng, (400_000, 3))
    u = 1.0 / np.cosh(w) ** 2
    asq = 1.0 - u

    def mix(i):
        num = asq[:, i] * u[:, i - 1]
        return num / (u[:, i] + num)

    stat = 1.0 + mix(1) - mix(2)
    for lam in (0.3, 0.4, 0.5):
        freq = float(np.mean(stat < lam))
        se = math.sqrt(freq * (1.0 - freq) / stat.size)
        bound = 0.9 * model.tail(0.5 * math.log(1.0 / (c * lam))) ** 2
        assert freq + 4.0 * se >= bound


# ---------------------------------------------------------------------------
# Site classification and calm blocks

def test_coupling_threshold_values():
    assert coupling_threshold(-0.01) == pytest.approx(0.25 * math.log(100.0), rel=1e-12)
    assert coupling_threshold(-0.01) == pytest.approx(1.1512925465, abs=1e-9)
    with pytest.raises(ValueError):
        coupling_threshold(-1.5)
    with pytest.raises(ValueError):
        coupling_threshold(0.5)


def test_calm_spectral_bound_values():
    assert calm_spectral_bound(-0.01) == pytest.approx(-0.0198019802, abs=1e-9)
    # at |lam| = 1/3 the bound equals (3/2) lam exactly
    assert calm_spectral_bound(-1.0 / 3.0) == pytest.approx(-0.5, rel=1e-14)


def test_classify_all_weak_field():
    fld = CouplingField(-5, np.full(11, 0.1))
    cls = classify_sites(fld, -0.05, -4, 4)
    assert cls.strong.size == 0
    assert np.array_equal(cls.calm, np.arange(-4, 5))


def test_classify_single_strong_site():
    values = np.full(11, 0.1)
    values[5] = 3.0  # site 0 of the window [-5, 5]
    fld = CouplingField(-5, values)
    cls = classify_sites(fld, -0.05, -4, 4)
    assert np.array_equal(cls.strong, [0])
    # the coupling w_0 sits on bond (-1, 0): both endpoints plus the site
    # whose left neighbor coupling it is drop out of the calm set
    assert np.array_equal(cls.calm, [-4, -3, -2, 2, 3, 4])
    assert cls.calm_blocks() == [(-4, -2), (2, 4)]


def test_classify_needs_enlarged_field():
    fld = CouplingField(-4, np.full(9, 0.1))
    with pytest.raises(ValueError):
        classify_sites(fld, -0.05, -4, 4)


def test_calm_block_top_zero_field():
    fld = CouplingField(-4, np.zeros(9))
    cls = classify_sites(fld, -0.1, -3, 3)
    jm = build_generator(derive(fld), -3, 3)
    top = calm_block_top(jm, cls)
    assert top == pytest.approx(-1.0, abs=1e-12)
    assert top <= calm_spectral_bound(-0.1)


def test_calm_block_top_none_when_no_calm_sites():
    fld = CouplingField(-3, np.full(7, 5.0))
    cls = classify_sites(fld, -0.1, -2, 2)
    assert cls.calm.size == 0
    jm = build_generator(derive(fld), -2, 2)
    assert calm_block_top(jm, cls) is None


def test_calm_bound_and_count_on_random_fields():
    model = Exponential(5.0)
    r = 50
    for m in range(10):
        fld = sample_couplings(model, -r - 1, r + 1, seed=21, index=m)
        jm = build_generator(derive(fld), -r, r)
        for lam in (-0.05, -0.2):
            cls = classify_sites(fld, lam, -r, r)
            top = calm_block_top(jm, cls)
            if top is not None:
                assert top <= calm_spectral_bound(lam) + 1e-10
            assert count_above(jm, lam) <= jm.n - cls.calm.size


# ---------------------------------------------------------------------------
# IDS estimation

def test_ids_bounded_model_vanishes_above_band_edge():
    # every realization keeps its spectrum below -1 + tanh(2 gamma_max)
    gmax = 0.5
    edge = -1.0 + math.tanh(2.0 * gmax)
    curve = estimate_ids(
        UniformBounded(gmax), np.array([edge + 0.05, edge + 0.02]), r=40, samples=20, seed=0
    )
    assert np.all(curve.n_hat == 0.0)
    assert np.all(curve.stderr == 0.0)


def test_ids_saturates_below_spectrum():
    curve = estimate_ids(Exponential(5.0), np.array([-3.0]), r=30, samples=5, seed=1)
    assert curve.n_hat[0] == 1.0


def test_ids_monotone_and_within_range():
    lams = -np.geomspace(0.03, 0.6, 9)
    curve = estimate_ids(Exponential(5.0), lams, r=100, samples=40, seed=2)
    assert np.all(curve.n_hat >= 0.0) and np.all(curve.n_hat <= 1.0)
    assert curve.monotone_within(2.0)
    assert curve.counts_total().sum() > 0


def test_ids_deterministic_across_threads():
    lams = -np.geomspace(0.05, 0.5, 5)
    a = estimate_ids(Exponential(5.0), lams, r=40, samples=12, seed=7, threads=1)
    b = estimate_ids(Exponential(5.0), lams, r=40, samples=12, seed=7, threads=4)
    assert np.array_equal(a.n_hat, b.n_hat)
    assert np.array_equal(a.stderr, b.stderr)


def test_ids_grid_validation():
    model = Exponential(5.0)
    with pytest.raises(ValueError):
        estimate_ids(model, np.array([0.1, -0.2]), r=20, samples=4, seed=0)
    with pytest.raises(ValueError):
        estimate_ids(model, np.array([-0.2, -0.1]), r=20, samples=4, seed=0)


def test_ids_curve_csv_round_trip(tmp_path):
    lams = -np.geomspace(0.05, 0.5, 4)
    curve = estimate_ids(Exponential(5.0), lams, r=25, samples=6, seed=3)
    curve.meta = {"note": "round trip"}
    path = tmp_path / "ids.csv"
    curve.to_csv(path)
    back = IdsCurve.from_csv(path)
    assert np.array_equal(back.lam, curve.lam)
    assert np.array_equal(back.n_hat, curve.n_hat)
    assert np.array_equal(back.stderr, curve.stderr)
    assert back.r == curve.r and back.samples == curve.samples
    assert back.meta["note"] == "round trip"
