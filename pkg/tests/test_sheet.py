"""Exact sheet sampling, lattice geometry, seeds, and field containers."""
import math

import numpy as np
import pytest
import scipy.stats

from sheetforge import (
    ConfigError,
    GaussianJump,
    GridField,
    Lattice,
    LevyModel,
    NodeNotOnLattice,
    OutOfRange,
    mix64,
    simulate_sheet,
    unit_jump_poisson,
)
from sheetforge.sheet import sample_increments


# -- lattice geometry ---------------------------------------------------------


def test_lattice_nodes_and_partition():
    lat = Lattice(4)
    assert lat.spacing == 0.25
    np.testing.assert_array_equal(lat.midpoints(), [0.125, 0.375, 0.625, 0.875])
    np.testing.assert_array_equal(lat.corners(), [0.25, 0.5, 0.75, 1.0])
    w = lat.partition_widths()
    np.testing.assert_array_equal(w, [0.125, 0.25, 0.25, 0.25])
    # cumulative partition boundaries are exactly the midpoints
    np.testing.assert_allclose(np.cumsum(w), lat.midpoints(), rtol=0, atol=1e-15)
    with pytest.raises(OutOfRange):
        Lattice(0)


# -- seed derivation ----------------------------------------------------------


def _splitmix64_reference(master: int, index: int) -> int:
    """Independent transcription of the SplitMix64 finalizer."""
    mask = (1 << 64) - 1
    z = (master + (index + 1) * 0x9E3779B97F4A7C15) & mask
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & mask
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & mask
    return z ^ (z >> 31)


def test_mix64_matches_reference_and_separates_streams():
    for master in (0, 1, 12345, 2**63 - 1):
        for index in (0, 1, 2, 999):
            assert mix64(master, index) == _splitmix64_reference(master, index)
    seeds = {mix64(777, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert mix64(777, 0) == mix64(777, 0)
    with pytest.raises(OutOfRange):
        mix64(777, -1)


# -- exact structural properties of the sheet ---------------------------------


def test_drift_only_sheet_is_exact_product():
    """With no randomness, L(a, b) = drift * a * b, so the node values are
    drift * n * x_i * y_j exactly."""
    model = LevyModel(sigma=0.0, drift=0.75, jump_rate=0.0, jump_dist=None)
    lat = Lattice(8)
    sheet = simulate_sheet(model, n=9.0, lattice=lat, seed=5)
    x = lat.midpoints()
    expected = 0.75 * 9.0 * np.outer(x, x)
    np.testing.assert_allclose(sheet.field.values, expected, rtol=0, atol=1e-12)


def test_sheet_values_vanish_on_axes_and_increment_adds_up():
    model = unit_jump_poisson()
    lat = Lattice(8)
    sheet = simulate_sheet(model, n=50.0, lattice=lat, seed=11)
    f = sheet.field
    x = lat.midpoints()
    assert f.value_at(0.0, x[3]) == 0.0
    assert f.value_at(x[3], 0.0) == 0.0
    # increments over [0,s]x[0,t] recover node values
    assert f.rect_increment(0.0, 0.0, x[5], x[2]) == f.value_at(x[5], x[2])
    # additivity: stacking two adjacent rectangles matches the union
    a = f.rect_increment(x[1], x[2], x[4], x[6])
    b = f.rect_increment(x[4], x[2], x[7], x[6])
    union = f.rect_increment(x[1], x[2], x[7], x[6])
    assert a + b == pytest.approx(union, abs=1e-12)


def test_sheet_determinism_and_seed_sensitivity():
    model = unit_jump_poisson()
    lat = Lattice(16)
    one = simulate_sheet(model, 100.0, lat, seed=42)
    two = simulate_sheet(model, 100.0, lat, seed=42)
    np.testing.assert_array_equal(one.field.values, two.field.values)
    other = simulate_sheet(model, 100.0, lat, seed=43)
    assert not np.array_equal(one.field.values, other.field.values)


def test_simulate_sheet_validates_n():
    with pytest.raises(OutOfRange):
        simulate_sheet(unit_jump_poisson(), 0.0, Lattice(4), seed=1)
    with pytest.raises(OutOfRange):
        simulate_sheet(unit_jump_poisson(), -2.0, Lattice(4), seed=1)


# -- distributional checks ----------------------------------------------------


def test_poisson_cell_counts_goodness_of_fit():
    """At M=4, n=16 the interior sampling cells have scaled area exactly
    (1/4)^2 * 16 = 1, so unit-jump cell increments are Poisson(1) counts.
    Chi-square them against the exact pmf."""
    model = unit_jump_poisson()
    lat = Lattice(4)
    counts = []
    for r in range(2000):
        sheet = simulate_sheet(model, 16.0, lat, seed=mix64(31337, r))
        vals = np.pad(sheet.field.values, ((1, 0), (1, 0)))
        inc = np.diff(np.diff(vals, axis=0), axis=1)
        counts.append(inc[1:, 1:].ravel())  # 9 interior cells of area 1
    counts = np.concatenate(counts)
    assert counts.size == 18000
    np.testing.assert_array_equal(counts, np.round(counts))
    kmax = 8
    observed = np.bincount(np.minimum(counts.astype(int), kmax), minlength=kmax + 1)
    pmf = np.array([math.exp(-1.0) / math.factorial(k) for k in range(kmax)])
    pmf = np.append(pmf, 1.0 - pmf.sum())  # lump the tail >= kmax
    result = scipy.stats.chisquare(observed, f_exp=counts.size * pmf)
    assert result.pvalue > 1e-3


def test_disjoint_rectangle_increments_uncorrelated():
    model = unit_jump_poisson()
    lat = Lattice(8)
    x = lat.midpoints()
    a_vals, b_vals = [], []
    for r in range(4000):
        sheet = simulate_sheet(model, 4.0, lat, seed=mix64(909, r))
        a_vals.append(sheet.field.rect_increment(x[0], x[0], x[3], x[3]))
        b_vals.append(sheet.field.rect_increment(x[4], x[4], x[7], x[7]))
    a = np.asarray(a_vals)
    b = np.asarray(b_vals)
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr) <= 5.0 / math.sqrt(len(a))


def test_gaussian_jump_increment_moments():
    """Compound Poisson with Gaussian jumps plus diffusion and drift:
    mean = A (drift + rate * mu), var = A (sigma^2 + rate * (mu^2 + tau^2))."""
    model = LevyModel(
        sigma=0.5, drift=1.0, jump_rate=2.0,
        jump_dist=GaussianJump(mu=0.3, tau=0.7),
    )
    area = 1.5
    rng = np.random.default_rng(404)
    draws = sample_increments(model, np.full(100_000, area), rng)
    mean_theory = area * (1.0 + 2.0 * 0.3)
    var_theory = area * (0.25 + 2.0 * (0.09 + 0.49))
    se_mean = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - mean_theory) <= 5.0 * se_mean
    centered_sq = (draws - draws.mean()) ** 2
    se_var = centered_sq.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.var(ddof=1) - var_theory) <= 5.0 * se_var


# -- field container ----------------------------------------------------------


def test_value_at_rejects_off_node_coordinates():
    f = GridField(Lattice(4), np.zeros((4, 4)))
    with pytest.raises(NodeNotOnLattice):
        f.value_at(0.3, 0.125)
    with pytest.raises(NodeNotOnLattice):
        f.rect_increment(0.0, 0.0, 0.2, 0.375)


def test_gridfield_shape_and_kind_validation():
    with pytest.raises(OutOfRange):
        GridField(Lattice(4), np.zeros((3, 4)))
    with pytest.raises(OutOfRange):
        GridField(Lattice(2), np.zeros((2, 2)), node_kind="edge")


def test_gridfield_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(7)
    for kind in ("midpoint", "corner"):
        f = GridField(Lattice(5), rng.standard_normal((5, 5)), node_kind=kind)
        path = tmp_path / f"field_{kind}.csv"
        f.to_csv(path)
        g = GridField.from_csv(path)
        assert g.lattice == f.lattice
        assert g.node_kind == kind
        np.testing.assert_array_equal(g.values, f.values)
    with pytest.raises(ConfigError):
        bad = tmp_path / "bad.csv"
        bad.write_text("m,1\n0.0\n")
        GridField.from_csv(bad)


def test_gridfield_json_round_trip_exact():
    rng = np.random.default_rng(8)
    f = GridField(Lattice(3), rng.standard_normal((3, 3)), node_kind="corner",
                  meta={"n": 4.0})
    g = GridField.from_json_obj(f.to_json_obj())
    assert g.lattice == f.lattice and g.node_kind == f.node_kind
    assert g.meta == f.meta
    np.testing.assert_array_equal(g.values, f.values)
    with pytest.raises(ConfigError):
        GridField.from_json_obj({"schema": "other", "m": 2, "values": []})
