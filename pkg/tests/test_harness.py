"""Statistics harness: covariance reports, replicate generation, and the
moment/gaussianity/independence probes, validated against exact discrete
formulas and synthetic calibrations."""
import math

import numpy as np
import pytest

from sheetforge import (
    CovarianceReport,
    EvalGrid,
    FbmVolterra,
    HolmgrenRL,
    Indicator,
    InsufficientReplicates,
    Lattice,
    MomentEstimate,
    OutOfRange,
    StepFunction,
    UncoupledInputs,
    axis_inner_product,
    bilinear_moment_probe,
    default_zero_mean,
    empirical_covariance,
    gaussianity_test,
    generate_coupled_replicates,
    generate_replicates,
    grid_points,
    independence_probe,
    kac_stroock,
    levy_cos,
    levy_sin,
    theoretical_covariance,
    unit_jump_poisson,
    window_scaling_probe,
)


def exact_parity_covariance_tensor(n: float, lattice: Lattice) -> np.ndarray:
    """Exact discrete covariance of the parity kernel at unit jump rate:

        E[theta(x_i, y_j) theta(x_k, y_l)] = n^2 sqrt(x_i y_j x_k y_l)
            * exp(-2 n (x_i y_j + x_k y_l - 2 min(x_i, x_k) min(y_j, y_l)))

    from E[(-1)^{N(A)} (-1)^{N(B)}] = exp(-2 |A symm-diff B|) for a unit-rate
    Poisson measure. Axis order of the result: (i, j, k, l)."""
    x = lattice.midpoints()
    xy = np.outer(x, x)
    root = np.sqrt(xy)
    mins = np.minimum.outer(x, x)
    expo = (
        xy[:, :, None, None]
        + xy[None, None, :, :]
        - 2.0 * mins[:, None, :, None] * mins[None, :, None, :]
    )
    return n * n * root[:, :, None, None] * root[None, None, :, :] * np.exp(
        -2.0 * n * expo
    )


# -- theoretical covariance ----------------------------------------------------


def test_grid_points_row_major():
    g = EvalGrid((0.25, 0.5), (0.4, 1.0))
    assert grid_points(g) == ((0.25, 0.4), (0.25, 1.0), (0.5, 0.4), (0.5, 1.0))


def test_axis_inner_product_closed_forms():
    assert axis_inner_product(Indicator(), 0.3, 0.8) == 0.3
    spec = FbmVolterra(0.7)
    s, s2 = 0.4, 0.9
    expected = 0.5 * (s**1.4 + s2**1.4 - 0.5**1.4)
    assert axis_inner_product(spec, s, s2) == pytest.approx(expected, rel=1e-15)
    with pytest.raises(OutOfRange):
        axis_inner_product(HolmgrenRL(0.7), 0.4, 0.9, method="closed")
    with pytest.raises(OutOfRange):
        axis_inner_product(Indicator(), 0.4, 1.2)


def test_axis_inner_product_quadrature_matches_closed():
    for alpha in (0.3, 0.5, 0.7):
        spec = FbmVolterra(alpha)
        for s, s2 in ((0.25, 0.25), (0.25, 0.7), (0.5, 1.0), (1.0, 1.0)):
            closed = axis_inner_product(spec, s, s2, method="closed")
            quad = axis_inner_product(spec, s, s2, method="quadrature")
            assert quad == pytest.approx(closed, rel=1e-6)
    assert axis_inner_product(Indicator(), 0.0, 0.5, method="quadrature") == 0.0


def test_theoretical_covariance_product_structure():
    pts = grid_points(EvalGrid.square((0.25, 0.5, 0.75, 1.0)))
    cov = theoretical_covariance(Indicator(), Indicator(), pts)
    for i, (s, t) in enumerate(pts):
        for j, (s2, t2) in enumerate(pts):
            assert cov[i, j] == min(s, s2) * min(t, t2)
    # mixed fractional kernels: entries factor into the two axis products
    k1, k2 = FbmVolterra(0.6), FbmVolterra(0.4)
    cov = theoretical_covariance(k1, k2, pts)
    i = pts.index((0.5, 0.75))
    j = pts.index((1.0, 0.25))
    expected = axis_inner_product(k1, 0.5, 1.0) * axis_inner_product(k2, 0.75, 0.25)
    assert cov[i, j] == pytest.approx(expected, rel=1e-14)
    assert np.all(np.linalg.eigvalsh(cov) > -1e-8)


def test_theoretical_covariance_quadrature_route():
    pts = grid_points(EvalGrid.square((0.35, 0.8)))
    for alpha, beta in ((0.3, 0.7), (0.5, 0.5), (0.7, 0.3)):
        closed = theoretical_covariance(FbmVolterra(alpha), FbmVolterra(beta), pts)
        quad = theoretical_covariance(
            FbmVolterra(alpha), FbmVolterra(beta), pts, method="quadrature"
        )
        np.testing.assert_allclose(quad, closed, rtol=1e-6)


# -- empirical covariance ------------------------------------------------------


def test_empirical_covariance_iid_normal_identity():
    rng = np.random.default_rng(505)
    r, p = 4000, 3
    values = rng.standard_normal((r, p))
    pts = ((0.25, 0.25), (0.5, 0.5), (1.0, 1.0))
    for zero_mean in (True, False):
        rep = empirical_covariance(values, pts, np.eye(p), zero_mean=zero_mean)
        assert rep.max_std_deviation <= 5.0
        assert rep.passes()
    # an injected mean breaks the zero-mean route but not the centered one
    shifted = values + 3.0
    rep = empirical_covariance(shifted, pts, np.eye(p), zero_mean=False)
    assert rep.passes()
    rep0 = empirical_covariance(shifted, pts, np.eye(p), zero_mean=True)
    assert not rep0.passes()


def test_empirical_covariance_se_calibration():
    """For iid N(0, 1) data the variance-entry SE must approach
    sqrt(Var[z^2]) / sqrt(R) = sqrt(2 / R)."""
    rng = np.random.default_rng(606)
    r = 20000
    values = rng.standard_normal((r, 1))
    rep = empirical_covariance(values, ((1.0, 1.0),), np.eye(1), zero_mean=True)
    assert rep.std_errors[0, 0] == pytest.approx(math.sqrt(2.0 / r), rel=0.1)


def test_empirical_covariance_zero_field():
    rep = empirical_covariance(
        np.zeros((10, 2)), ((0.5, 0.5), (1.0, 1.0)), np.zeros((2, 2)),
        zero_mean=True,
    )
    assert rep.max_abs_deviation == 0.0
    assert rep.max_std_deviation == 0.0
    assert rep.passes()


def test_empirical_covariance_validation():
    pts = ((1.0, 1.0),)
    with pytest.raises(InsufficientReplicates):
        empirical_covariance(np.zeros((1, 1)), pts, np.eye(1), zero_mean=True)
    with pytest.raises(OutOfRange):
        empirical_covariance(np.zeros((5, 2)), pts, np.eye(2), zero_mean=True)
    with pytest.raises(OutOfRange):
        empirical_covariance(np.zeros((5, 1)), pts, np.eye(2), zero_mean=True)
    with pytest.raises(InsufficientReplicates):
        MomentEstimate(1.0, 0.1, 1)
    with pytest.raises(OutOfRange):
        MomentEstimate(1.0, -0.1, 5)


def test_covariance_report_serialization_and_floor(tmp_path):
    rng = np.random.default_rng(707)
    values = rng.standard_normal((500, 2))
    pts = ((0.5, 0.5), (1.0, 1.0))
    rep = empirical_covariance(values, pts, np.eye(2), zero_mean=True)
    obj = rep.to_json_obj()
    assert obj["schema"] == "sheetforge/covariance-report/1"
    assert obj["replicates"] == 500
    assert len(obj["points"]) == 2
    text = rep.to_text()
    assert "covariance report" in text and "500 replicates" in text
    path = tmp_path / "cov.csv"
    rep.to_csv(path)
    assert len(path.read_text().strip().split("\n")) == 1 + 4  # header + entries
    # the absolute floor forgives tiny-SE entries with tiny deviations
    small = CovarianceReport(
        points=pts,
        empirical=np.eye(2) + 0.04,
        std_errors=np.full((2, 2), 1e-6),
        theoretical=np.eye(2),
        replicates=500,
        zero_mean=True,
    )
    assert small.passes(se_mult=5.0, floor=0.05)
    assert not small.passes(se_mult=5.0, floor=0.01)
    ij = small.worst_entry(se_mult=5.0, floor=0.01)
    assert small.deviations[ij] == pytest.approx(0.04)


def test_default_zero_mean_policy():
    assert default_zero_mean(kac_stroock(10.0)) is True
    assert default_zero_mean(levy_cos(unit_jump_poisson(), 10.0, 1.0)) is False
    assert default_zero_mean(levy_sin(unit_jump_poisson(), 10.0, 1.0)) is False


# -- replicate generation ------------------------------------------------------


def test_generate_replicates_deterministic_and_thread_invariant():
    spec = kac_stroock(50.0)
    grid = EvalGrid.square((0.5, 1.0))
    lat = Lattice(16)
    one = generate_replicates(spec, Indicator(), Indicator(), grid, lat, 40, 123)
    two = generate_replicates(spec, Indicator(), Indicator(), grid, lat, 40, 123)
    np.testing.assert_array_equal(one.values, two.values)
    threaded = generate_replicates(
        spec, Indicator(), Indicator(), grid, lat, 40, 123, workers=4
    )
    np.testing.assert_array_equal(one.values, threaded.values)
    other = generate_replicates(spec, Indicator(), Indicator(), grid, lat, 40, 124)
    assert not np.array_equal(one.values, other.values)
    assert one.points == grid_points(grid)
    assert one.values.shape == (40, 4)
    assert one.coupled_group is None
    with pytest.raises(InsufficientReplicates):
        generate_replicates(spec, Indicator(), Indicator(), grid, lat, 1, 123)


def test_generate_coupled_replicates_sharing_and_validation():
    cos_spec = levy_cos(unit_jump_poisson(), 100.0, 1.0)
    sin_spec = levy_sin(unit_jump_poisson(), 100.0, 1.0)
    grid = EvalGrid.square((1.0,))
    lat = Lattice(16)
    cset, sset = generate_coupled_replicates(
        cos_spec, sin_spec, Indicator(), Indicator(), grid, lat, 50, 321
    )
    assert cset.coupled_group == sset.coupled_group == (321, "cos-sin-pair")
    assert cset.values.shape == sset.values.shape == (50, 1)
    with pytest.raises(OutOfRange):
        generate_coupled_replicates(
            sin_spec, cos_spec, Indicator(), Indicator(), grid, lat, 50, 321
        )
    mismatched = levy_sin(unit_jump_poisson(), 100.0, 1.5)
    with pytest.raises(OutOfRange):
        generate_coupled_replicates(
            cos_spec, mismatched, Indicator(), Indicator(), grid, lat, 50, 321
        )


# -- independence probe --------------------------------------------------------


def exact_cross_covariance(n, lattice, grid, angle=1.0):
    """Exact finite-n cross-covariance of the coupled cos/sin approximations
    with Indicator kernels, from the independent-region decomposition of the
    shared sheet: for L, L' with intersection/exclusive masses m_S, m_U, m_V,

        E[cos(aL) sin(aL')] = Im[phi(2a;m_S) phi(a;m_U) phi(a;m_V)
                                 - phi(a;m_U) conj(phi(a;m_V))] / 2

    with phi(xi;m) = exp(-m Psi(xi)), minus the product of the exact means."""
    from sheetforge import exponent, quadrature_rows

    model = unit_jump_poisson()
    p1 = complex(exponent(model, angle).a, exponent(model, angle).b)
    p2 = complex(exponent(model, 2.0 * angle).a, exponent(model, 2.0 * angle).b)
    k2 = 2.0  # normalizing constant squared for the unit-jump Poisson
    x = lattice.midpoints()
    xy = np.outer(x, x)
    mins = np.minimum.outer(x, x)
    m_s = n * mins[:, None, :, None] * mins[None, :, None, :]
    m_u = n * xy[:, :, None, None] - m_s
    m_v = n * xy[None, None, :, :] - m_s
    phi_u = np.exp(-m_u * p1)
    phi_v = np.exp(-m_v * p1)
    e_cs = 0.5 * (np.exp(-m_s * p2) * phi_u * phi_v - phi_u * np.conj(phi_v)).imag
    root = np.sqrt(xy)
    cross = n * n * k2 * root[:, :, None, None] * root[None, None, :, :] * e_cs
    a = quadrature_rows(Indicator(), lattice.m, grid.s_points)
    moment = np.einsum("pi,qj,ijkl,rk,sl->pqrs", a, a, cross, a, a)
    phi_full = np.exp(-n * xy * p1)
    mean_c = np.einsum("pi,qj,ij->pq", a, a,
                       n * math.sqrt(k2) * root * phi_full.real)
    mean_s = np.einsum("pi,qj,ij->pq", a, a,
                       n * math.sqrt(k2) * root * phi_full.imag)
    p = len(grid.s_points) ** 2
    return moment.reshape(p, p) - np.outer(mean_c.ravel(), mean_s.ravel())


def test_independence_probe_matches_exact_finite_n_cross_covariance():
    """At finite n the coupled pair is NOT independent; the probe's estimate
    must match the exact discrete cross-covariance (independent oracle)."""
    n, lat = 50.0, Lattice(16)
    grid = EvalGrid.square((0.5, 1.0))
    cos_spec = levy_cos(unit_jump_poisson(), n, 1.0)
    sin_spec = levy_sin(unit_jump_poisson(), n, 1.0)
    cset, sset = generate_coupled_replicates(
        cos_spec, sin_spec, Indicator(), Indicator(), grid, lat, 20000, 13579
    )
    report = independence_probe(cset, sset)
    exact = exact_cross_covariance(n, lat, grid)
    assert np.abs(exact).max() > 0.05  # the finite-n systematic is real
    z = np.abs(report.cross_covariance - exact) / report.std_errors
    assert z.max() <= 5.0


def test_independence_probe_on_coupled_pair():
    """At large n the finite-n cross-covariance is far below the Monte Carlo
    noise floor and the 5 SE criterion holds."""
    cos_spec = levy_cos(unit_jump_poisson(), 400.0, 1.0)
    sin_spec = levy_sin(unit_jump_poisson(), 400.0, 1.0)
    grid = EvalGrid.square((0.5, 1.0))
    cset, sset = generate_coupled_replicates(
        cos_spec, sin_spec, Indicator(), Indicator(), grid, Lattice(64), 1500, 777
    )
    report = independence_probe(cset, sset)
    assert report.replicates == 1500
    assert report.cross_covariance.shape == (4, 4)
    assert report.passes(se_mult=5.0)
    # the probe must have power: a set against itself is maximally dependent
    self_report = independence_probe(cset, cset)
    assert not self_report.passes(se_mult=5.0)


def test_independence_probe_rejects_uncoupled_inputs():
    spec = kac_stroock(50.0)
    grid = EvalGrid.square((1.0,))
    lat = Lattice(8)
    plain = generate_replicates(spec, Indicator(), Indicator(), grid, lat, 10, 1)
    with pytest.raises(UncoupledInputs):
        independence_probe(plain, plain)
    cos_spec = levy_cos(unit_jump_poisson(), 100.0, 1.0)
    sin_spec = levy_sin(unit_jump_poisson(), 100.0, 1.0)
    a_c, a_s = generate_coupled_replicates(
        cos_spec, sin_spec, Indicator(), Indicator(), grid, lat, 10, 1
    )
    b_c, b_s = generate_coupled_replicates(
        cos_spec, sin_spec, Indicator(), Indicator(), grid, lat, 10, 2
    )
    with pytest.raises(UncoupledInputs):
        independence_probe(a_c, b_s)  # different master seeds: different sheets


# -- step functions and the bilinear probe ---------------------------------------


def test_step_function_norm_and_sampling():
    f = StepFunction(breaks=(0.0, 0.25, 1.0), values=(2.0, -1.0))
    assert f.l2_norm_sq() == pytest.approx(4.0 * 0.25 + 1.0 * 0.75, rel=1e-15)
    np.testing.assert_array_equal(
        f.sample(np.array([0.0, 0.1, 0.25, 0.9, 1.0])), [2.0, 2.0, -1.0, -1.0, -1.0]
    )
    with pytest.raises(OutOfRange):
        StepFunction(breaks=(0.1, 1.0), values=(1.0,))
    with pytest.raises(OutOfRange):
        StepFunction(breaks=(0.0, 0.5, 0.5, 1.0), values=(1.0, 2.0, 3.0))
    with pytest.raises(OutOfRange):
        StepFunction(breaks=(0.0, 1.0), values=(1.0, 2.0))


def test_bilinear_probe_second_moment_matches_exact_parity_formula():
    """MC second moment of z = sum u_i theta_ij v_j against the closed-form
    discrete parity covariance (independent oracle)."""
    n = 3.0
    lat = Lattice(4)
    spec = kac_stroock(n)
    f = StepFunction(breaks=(0.0, 0.5, 1.0), values=(1.0, 2.0))
    g = StepFunction(breaks=(0.0, 0.25, 1.0), values=(0.5, 1.5))
    u = f.sample(lat.midpoints()) / lat.m
    v = g.sample(lat.midpoints()) / lat.m
    cov = exact_parity_covariance_tensor(n, lat)
    exact = float(np.einsum("i,j,k,l,ijkl->", u, v, u, v, cov))
    report = bilinear_moment_probe(spec, f, g, lat, replicates=20000, master_seed=42)
    m2 = report.second_moment
    assert abs(m2.value - exact) <= 5.0 * m2.std_error
    assert report.bound_mode is False  # parity kind: constant is informational
    assert report.constant == 1.0


def test_bilinear_probe_wave_bound_holds_with_margin():
    spec = levy_cos(unit_jump_poisson(), 100.0, 1.0)
    f = StepFunction(breaks=(0.0, 1.0), values=(1.0,))
    report = bilinear_moment_probe(spec, f, f, Lattice(64), replicates=800,
                                   master_seed=7)
    assert report.bound_mode is True
    k = math.sqrt(2.0)
    a_val = 1.0 - math.cos(1.0)
    assert report.constant == pytest.approx(136.0 * k * k / a_val**2, rel=1e-12)
    assert report.passes(se_mult=5.0)
    assert report.ratio.value < 0.05  # the bound is far from tight here


def test_bilinear_probe_zero_function():
    spec = kac_stroock(10.0)
    zero = StepFunction(breaks=(0.0, 1.0), values=(0.0,))
    one = StepFunction(breaks=(0.0, 1.0), values=(1.0,))
    report = bilinear_moment_probe(spec, zero, one, Lattice(8), replicates=10,
                                   master_seed=1)
    assert report.second_moment.value == 0.0
    assert report.ratio.value == 0.0


# -- window scaling probe --------------------------------------------------------


def test_window_scaling_moments_match_exact_parity_formula():
    """Each windowed second moment against the exact discrete parity
    covariance summed over the window cells."""
    n = 3.0
    lat = Lattice(8)
    spec = kac_stroock(n)
    windows = ((0.5, 0.75, 0.5, 0.75), (0.5, 0.9, 0.5, 0.9))
    report = window_scaling_probe(
        spec, Indicator(), Indicator(), m_order=2,
        base_rect=(0.0, 1.0, 0.0, 1.0), windows=windows,
        lattice=lat, replicates=20000, master_seed=11,
    )
    cov = exact_parity_covariance_tensor(n, lat)
    mids = lat.midpoints()
    for (s0, s0p, t0, t0p), moment in zip(windows, report.moments):
        u = np.where((mids > s0) & (mids <= s0p), 1.0 / lat.m, 0.0)
        v = np.where((mids > t0) & (mids <= t0p), 1.0 / lat.m, 0.0)
        exact = float(np.einsum("i,j,k,l,ijkl->", u, v, u, v, cov))
        assert abs(moment.value - exact) <= 5.0 * moment.std_error


def test_window_scaling_slope_near_one_for_second_moment():
    """Anchored shrinking windows: Brownian-sheet limit gives second moments
    proportional to window area, slope 1."""
    spec = kac_stroock(400.0)
    windows = tuple(
        (0.4, 0.4 + w, 0.4, 0.4 + w) for w in (0.1, 0.16, 0.24, 0.32)
    )
    report = window_scaling_probe(
        spec, Indicator(), Indicator(), m_order=2,
        base_rect=(0.0, 1.0, 0.0, 1.0), windows=windows,
        lattice=Lattice(64), replicates=1200, master_seed=99,
        predicted_gamma=0.5,
    )
    assert not report.heavy_tail
    assert 0.8 < report.slope < 1.2
    assert report.predicted_min_slope == pytest.approx(1.0)
    assert report.consistent_with_prediction() is True
    lo, hi = report.slope_ci
    assert lo < report.slope < hi


def test_window_scaling_heavy_tail_flag():
    spec = kac_stroock(50.0)
    windows = ((0.4, 0.5, 0.4, 0.5), (0.4, 0.7, 0.4, 0.7))
    report = window_scaling_probe(
        spec, Indicator(), Indicator(), m_order=4,
        base_rect=(0.0, 1.0, 0.0, 1.0), windows=windows,
        lattice=Lattice(16), replicates=8, master_seed=3,
    )
    assert report.heavy_tail is True


def test_window_scaling_validation():
    spec = kac_stroock(10.0)
    ok = ((0.4, 0.5, 0.4, 0.5), (0.4, 0.7, 0.4, 0.7))
    with pytest.raises(OutOfRange):
        window_scaling_probe(spec, Indicator(), Indicator(), 3,
                             (0.0, 1.0, 0.0, 1.0), ok, Lattice(8), 10, 1)
    with pytest.raises(OutOfRange):
        window_scaling_probe(spec, Indicator(), Indicator(), 2,
                             (0.0, 1.0, 0.0, 1.0), ok[:1], Lattice(8), 10, 1)
    bad = ((0.4, 0.85, 0.4, 0.5),)  # s0' >= 2 s0
    with pytest.raises(OutOfRange):
        window_scaling_probe(spec, Indicator(), Indicator(), 2,
                             (0.0, 1.0, 0.0, 1.0), bad + ok[:1], Lattice(8), 10, 1)


# -- gaussianity ----------------------------------------------------------------


def test_gaussianity_accepts_matching_normal():
    rng = np.random.default_rng(808)
    samples = rng.normal(0.0, math.sqrt(2.5), size=5000)
    report = gaussianity_test(samples, sigma2_theory=2.5)
    assert report.p_value > 0.01
    assert report.samples == 5000
    # wrong variance is decisively rejected
    bad = gaussianity_test(samples, sigma2_theory=5.0)
    assert bad.p_value < 1e-6


def test_gaussianity_validation():
    with pytest.raises(InsufficientReplicates):
        gaussianity_test(np.zeros(100), 1.0)
    with pytest.raises(OutOfRange):
        gaussianity_test(np.zeros(600), 0.0)


def test_ks_rejection_rate_calibrated():
    """200 independent KS tests of true-null data at level 0.01: the
    rejection count behaves like Binomial(200, 0.01)."""
    rng = np.random.default_rng(909)
    rejections = sum(
        gaussianity_test(rng.standard_normal(1000), 1.0).p_value < 0.01
        for _ in range(200)
    )
    assert rejections <= 8
