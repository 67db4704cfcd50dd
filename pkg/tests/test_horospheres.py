import math

import numpy as np
import pytest

from horodyn.geometry import (
    GeometryError,
    SetUnion,
    SinglePoint,
    WholeBoundary,
    polydisk,
    unit_ball,
    unit_disk,
)
from horodyn.horospheres import (
    Containment,
    ConvergenceError,
    HoroKind,
    HorosphereSpec,
    alpha_weights,
    boundary_intersection_descr,
    classify_margin,
    default_probe_grid,
    estimate_functional,
    extract_horosphere_subsequence,
    horosphere_margin,
    large_contains,
    large_horosphere,
    make_radial_seq,
    make_rate_seq,
    seq_from_trace,
    sequence_contains,
    sequence_horosphere,
    small_contains,
    small_horosphere,
)
from horodyn.metric import kobayashi

D2 = polydisk(2)
B2 = unit_ball(2)
HALF_LOG3 = 0.5 * math.log(3.0)


def _seed_points(n, count, seed, cap=0.9):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-0.7, 0.7, (count, n)) + 1j * rng.uniform(-0.7, 0.7, (count, n))
    scale = np.maximum(np.max(np.abs(pts), axis=1), np.linalg.norm(pts, axis=1) / math.sqrt(n))
    pts *= (cap * rng.uniform(0.2, 1.0, count) / np.maximum(scale, 1e-9))[:, None]
    return pts


def test_classify_margin_states():
    assert classify_margin(-0.5).state is Containment.INSIDE
    assert classify_margin(0.0).state is Containment.ON_BOUNDARY
    assert classify_margin(5e-10).state is Containment.ON_BOUNDARY
    assert classify_margin(2e-9).state is Containment.OUTSIDE
    assert classify_margin(-0.5, converged=False).state is Containment.INDETERMINATE
    assert classify_margin(-0.5).is_inside
    assert not classify_margin(2e-9).is_inside


def test_radial_sequence_points_and_alpha():
    seq = make_radial_seq(D2, [1.0, 1.0])
    nu = seq.indices
    expect = np.sqrt(1.0 - 1.0 / nu)
    assert np.allclose(seq.points[:, 0], expect, atol=0, rtol=1e-15)
    assert seq.probe_status == "converged"
    a = alpha_weights(seq)
    assert np.all(np.abs(a - 1.0) <= 1e-6)


def test_rate_sequence_alpha_split():
    # coordinate 2 approaches twice as fast, so its depth sets the minimum
    seq = make_rate_seq(D2, [1.0, 1.0], [1.0, 2.0])
    a = alpha_weights(seq)
    assert abs(a[0] - 0.5) <= 1e-4
    assert abs(a[1] - 1.0) <= 1e-4
    with pytest.raises(GeometryError):
        make_rate_seq(D2, [1.0, 1.0], [0.5, 1.0])


def test_sequence_constructor_rejections():
    with pytest.raises(GeometryError):
        seq_from_trace(D2, [1, 1], [[1.0, 0.0]], [1], validate=False)  # boundary point
    with pytest.raises(GeometryError):
        seq_from_trace(D2, [1, 1], [[0.5, 0.5], [0.6, 0.6]], [2, 2], validate=False)
    seq = make_radial_seq(D2, [1.0, 1.0], validate=False)
    assert np.allclose(seq.point_at(16), seq.points[0])
    pt = seq.point_at(100)  # generator-backed off-schedule query
    assert abs(pt[0] - math.sqrt(0.99)) < 1e-15


def test_small_margin_frozen_value():
    h = small_horosphere(D2, [0, 0], [1, 1], 1.0)
    m, ok = horosphere_margin(h, np.array([0.5, 0.0]))
    assert ok
    # max over coordinates of log(|1-z_j|^2/(1-|z_j|^2)) is attained at the
    # untouched coordinate and equals log 1 = 0
    assert abs(m) <= 1e-15
    assert small_contains(h, [0.5, 0.0]).state is Containment.ON_BOUNDARY


def test_large_margin_frozen_value():
    h = large_horosphere(D2, [0, 0], [1, 1], 1.0)
    m, ok = horosphere_margin(h, np.array([0.5, 0.0]))
    assert ok
    assert abs(m + HALF_LOG3) <= 1e-12
    assert large_contains(h, [0.5, 0.0]).state is Containment.INSIDE


def test_pole_membership_threshold():
    # the pole sits inside the small horosphere exactly when R > 1
    for pole in ([0.0, 0.0], [0.3, 0.2j]):
        for radius, state in ((2.0, Containment.INSIDE),
                              (1.0, Containment.ON_BOUNDARY),
                              (0.5, Containment.OUTSIDE)):
            h = small_horosphere(D2, pole, [1, 1], radius)
            assert small_contains(h, pole).state is state


def test_ball_margin_matches_disk_formula():
    x = np.array([1.0, 0.0])
    h = small_horosphere(B2, [0, 0], x, 1.0)
    t = 0.5
    m, _ = horosphere_margin(h, t * x)
    assert abs(m - 0.5 * math.log((1 - t) / (1 + t))) <= 1e-12
    assert abs(m + HALF_LOG3) <= 1e-12


def test_ball_kinds_coincide():
    x = np.array([0.6, 0.8])
    seq = make_radial_seq(B2, x)
    hs = small_horosphere(B2, [0, 0], x, 0.7)
    hl = large_horosphere(B2, [0, 0], x, 0.7)
    hg = sequence_horosphere(B2, [0, 0], seq, 0.7)
    z = _seed_points(2, 40, 7101, cap=0.85)
    z = z[np.linalg.norm(z, axis=1) < 0.95]
    ms, _ = horosphere_margin(hs, z)
    ml, _ = horosphere_margin(hl, z)
    mg, _ = horosphere_margin(hg, z)
    assert np.max(np.abs(ms - ml)) <= 1e-12
    assert np.max(np.abs(ms - mg)) <= 1e-12


def test_radial_sequence_horosphere_equals_small():
    seq = make_radial_seq(D2, [1.0, 1.0])
    hg = sequence_horosphere(D2, [0, 0], seq, 0.8)
    hs = small_horosphere(D2, [0, 0], [1, 1], 0.8)
    z = _seed_points(2, 200, 7103)
    mg, okg = horosphere_margin(hg, z)
    ms, oks = horosphere_margin(hs, z)
    assert okg and oks
    assert np.max(np.abs(mg - ms)) <= 1e-12


def test_anisotropic_sequence_horosphere_frozen():
    # rates (1, 2) give alpha = (1/2, 1); at z = (0, 0.5) the weighted max
    # is attained at the slow coordinate: 1/2 log(1/2)
    seq = make_rate_seq(D2, [1.0, 1.0], [1.0, 2.0])
    hg = sequence_horosphere(D2, [0, 0], seq, 1.0)
    m, ok = horosphere_margin(hg, np.array([0.0, 0.5]))
    assert ok
    assert abs(m - 0.5 * math.log(0.5)) <= 1e-9
    ms, _ = horosphere_margin(small_horosphere(D2, [0, 0], [1, 1], 1.0),
                              np.array([0.0, 0.5]))
    assert abs(ms) <= 1e-12  # the unweighted functional stays at zero here


def test_estimate_matches_closed_form_origin_pole():
    seq = make_radial_seq(D2, [1.0, 1.0])
    hs = small_horosphere(D2, [0, 0], [1, 1], 1.0)
    z = _seed_points(2, 30, 7105)
    closed, _ = horosphere_margin(hs, z)
    for zi, ci in zip(z, closed):
        est = estimate_functional(D2, np.zeros(2, complex), seq, zi)
        assert est.converged
        assert abs(est.value - ci) <= 5e-6


def test_estimate_matches_closed_form_moved_pole():
    pole = np.array([0.3, 0.2j], dtype=complex)
    seq = make_rate_seq(D2, [1.0, 1.0], [1.0, 2.0])
    hg = sequence_horosphere(D2, pole, seq, 1.0)
    z = _seed_points(2, 20, 7107)
    closed, ok = horosphere_margin(hg, z)
    assert ok
    for zi, ci in zip(z, closed):
        est = estimate_functional(D2, pole, seq, zi)
        assert est.converged
        assert abs(est.value - ci) <= 5e-6


def test_pole_cocycle_identity():
    # sub-level families with moving pole and with moving radius coincide:
    # the margin of w about pole z equals f_O(w) - f_O(z)
    seq = make_radial_seq(D2, [1.0, 1.0])
    h_origin = sequence_horosphere(D2, [0, 0], seq, 1.0)
    z = _seed_points(2, 40, 7109)
    f0, _ = horosphere_margin(h_origin, z)
    for i in range(0, 40, 5):
        hz = sequence_horosphere(D2, z[i], seq, 1.0)
        mz, _ = horosphere_margin(hz, z)
        assert np.max(np.abs(mz - (f0 - f0[i]))) <= 1e-8


def test_small_inside_sequence_inside_large():
    seq = make_rate_seq(D2, [1.0, 1j], [1.0, 3.0])
    hs = small_horosphere(D2, [0, 0], [1.0, 1j], 0.9)
    hg = sequence_horosphere(D2, [0, 0], seq, 0.9)
    hl = large_horosphere(D2, [0, 0], [1.0, 1j], 0.9)
    z = _seed_points(2, 300, 7111)
    ms, _ = horosphere_margin(hs, z)
    mg, _ = horosphere_margin(hg, z)
    ml, _ = horosphere_margin(hl, z)
    assert np.all(ml <= mg + 1e-12)
    assert np.all(mg <= ms + 1e-12)


def test_nested_radii_and_midpoint_convexity():
    hs1 = small_horosphere(D2, [0, 0], [1, 1], 0.5)
    hs2 = small_horosphere(D2, [0, 0], [1, 1], 1.5)
    z = _seed_points(2, 300, 7113)
    m1, _ = horosphere_margin(hs1, z)
    m2, _ = horosphere_margin(hs2, z)
    assert np.max(np.abs((m1 - m2) - 0.5 * math.log(3.0))) <= 1e-12
    # midpoint quasi-convexity of the small functional
    mid = 0.5 * (z[:150] + z[150:])
    mm, _ = horosphere_margin(hs1, mid)
    assert np.all(mm <= np.maximum(m1[:150], m1[150:]) + 1e-9)


def test_membership_threshold_radius():
    h1 = small_horosphere(D2, [0, 0], [1, 1], 1.0)
    z = _seed_points(2, 50, 7115)
    f, _ = horosphere_margin(h1, z)
    for i in (0, 13, 29, 41):
        r_star = math.exp(2.0 * f[i])
        inside = small_horosphere(D2, [0, 0], [1, 1], r_star * math.exp(0.2))
        outside = small_horosphere(D2, [0, 0], [1, 1], r_star * math.exp(-0.2))
        assert small_contains(inside, z[i]).state is Containment.INSIDE
        assert small_contains(outside, z[i]).state is Containment.OUTSIDE


def test_kobayashi_ball_bounds():
    # points k-closer to the pole than (log R)/2 lie in the small horosphere
    # (R > 1); for R < 1 the large horosphere avoids the mirrored k-ball
    z = _seed_points(2, 400, 7117)
    kz = kobayashi(D2, np.zeros(2, complex)[None, :], z)
    big = small_horosphere(D2, [0, 0], [1, 1], 3.0)
    mb, _ = horosphere_margin(big, z)
    mask = kz < 0.5 * math.log(3.0) - 1e-9
    assert np.all(mb[mask] < 1e-9)
    small_r = large_horosphere(D2, [0, 0], [1, 1], 1.0 / 3.0)
    ml, _ = horosphere_margin(small_r, z)
    mask2 = ml < -1e-9
    assert np.all(kz[mask2] > -0.5 * math.log(1.0 / 3.0) - 1e-9)


def test_oscillating_rates_stay_indeterminate():
    # alternating approach rates in coordinate 2 leave the alpha ratio
    # without a limit, so sequence membership cannot be certified
    nus = np.arange(16, 16 + 900, dtype=float)
    c2 = np.where((np.arange(900) // 3) % 2 == 0, 8.0, 32.0)
    pts = np.stack([np.sqrt(1.0 - 1.0 / nus), np.sqrt(1.0 - 1.0 / (c2 * nus))], axis=1).astype(complex)
    seq = seq_from_trace(D2, [1.0, 1.0], pts, nus)
    assert seq.probe_status == "failed"
    with pytest.raises(ConvergenceError):
        alpha_weights(seq)
    hg = sequence_horosphere(D2, [0, 0], seq, 1.0)
    res = sequence_contains(hg, [0.4, 0.1])
    assert res.state is Containment.INDETERMINATE


def test_contains_wrappers_check_kind():
    hs = small_horosphere(D2, [0, 0], [1, 1], 1.0)
    with pytest.raises(GeometryError):
        large_contains(hs, [0.1, 0.1])
    with pytest.raises(GeometryError):
        sequence_contains(hs, [0.1, 0.1])


def test_spec_validation_errors():
    with pytest.raises(GeometryError):
        small_horosphere(D2, [0, 0], [1, 1], 0.0)
    with pytest.raises(GeometryError):
        small_horosphere(D2, [1.0, 0.0], [1, 1], 1.0)  # boundary pole
    seq = make_radial_seq(D2, [1.0, 1.0], validate=False)
    with pytest.raises(GeometryError):
        HorosphereSpec(D2, np.zeros(2, complex), np.array([1.0, 1.0]),
                       1.0, HoroKind.SMALL, seq)
    with pytest.raises(GeometryError):
        HorosphereSpec(D2, np.zeros(2, complex), np.array([1.0, -1.0]),
                       1.0, HoroKind.SEQUENCE, make_radial_seq(D2, [1.0, 1.0], validate=False))


def test_extraction_identity_on_radial():
    seq0 = make_radial_seq(D2, [1.0, 1.0], validate=False)
    out = extract_horosphere_subsequence(D2, seq0.points, indices=seq0.indices)
    assert out.probe_status == "converged"
    assert np.array_equal(out.indices, seq0.indices)


def test_extraction_drops_oscillating_odd_terms():
    # even positions follow the clean radial profile; odd positions flip
    # between two approach rates in blocks and never settle
    m = 1200
    nus = np.arange(1, m + 1, dtype=float)
    clean = np.sqrt(1.0 - 1.0 / np.maximum(nus, 2.0))
    c2 = np.where((np.arange(m) // 3) % 2 == 0, 8.0, 32.0)
    junk = np.sqrt(1.0 - 1.0 / (c2 * nus))
    pts = np.zeros((m, 2), dtype=complex)
    even = nus % 2 == 0
    pts[even, 0] = clean[even]
    pts[even, 1] = clean[even]
    pts[~even, 0] = clean[~even]
    pts[~even, 1] = junk[~even]
    out = extract_horosphere_subsequence(D2, pts, indices=nus)
    assert out.probe_status == "converged"
    # the greedy chain anchors on the very first sample and then keeps the
    # coherent even-index class only
    assert out.indices[0] == 1.0
    assert np.all(out.indices[1:] % 2 == 0)
    assert len(out.indices) > 500
    a = alpha_weights(out)
    assert np.all(np.abs(a - 1.0) <= 1e-4)


def test_extraction_preconditions():
    rng = np.random.default_rng(7119)
    interior = 0.3 * (rng.standard_normal((40, 2)) + 1j * rng.standard_normal((40, 2)))
    interior *= 0.3 / np.maximum(np.abs(interior).max(axis=(0, 1)), 1.0)
    with pytest.raises(GeometryError):
        extract_horosphere_subsequence(D2, interior)
    with pytest.raises(GeometryError):
        extract_horosphere_subsequence(D2, np.zeros((3, 2), dtype=complex))


def test_descriptor_large_two_hot_coordinates():
    h = large_horosphere(D2, [0, 0], [1, 1], 1.0)
    descr = boundary_intersection_descr(h, "Ch")
    assert isinstance(descr, WholeBoundary)
    assert descr.distance(np.array([1.0, 0.2])) <= 1e-12


def test_descriptor_large_single_hot_coordinate():
    h = large_horosphere(D2, [0, 0], [1.0, 0.3], 1.0)
    descr = boundary_intersection_descr(h, "ch")
    assert isinstance(descr, SetUnion)
    assert descr.distance(np.array([1.0, 0.9])) <= 1e-12
    assert descr.distance(np.array([0.2, np.exp(0.7j)])) <= 1e-12
    assert descr.distance(np.array([0.5, 0.5])) > 0.1


def test_descriptor_small_union_over_coordinates():
    h = small_horosphere(D2, [0, 0], [1.0, 0.0], 2.0)
    descr = boundary_intersection_descr(h, "Ch")
    assert isinstance(descr, SetUnion)
    assert descr.distance(np.array([1.0, 0.5])) <= 1e-12
    assert descr.distance(np.array([0.3, np.exp(0.5j)])) <= 1e-12
    assert descr.distance(np.array([0.99, 0.0])) > 0.005


def test_descriptor_ball_is_center_point():
    h = small_horosphere(B2, [0, 0], [0.6, 0.8], 0.5)
    descr = boundary_intersection_descr(h, "ch")
    assert isinstance(descr, SinglePoint)
    assert descr.distance(np.array([0.6, 0.8])) <= 1e-12


def test_descriptor_flavor_errors():
    h = small_horosphere(D2, [0, 0], [1.0, 0.0], 1.0)
    with pytest.raises(GeometryError):
        boundary_intersection_descr(h, "none")
    with pytest.raises(GeometryError):
        boundary_intersection_descr(h, "hull")


def test_probe_grid_shapes():
    assert default_probe_grid(unit_disk()).shape == (3, 1)
    g2 = default_probe_grid(D2)
    assert g2.shape == (9, 2)
    gb = default_probe_grid(B2)
    assert np.max(np.linalg.norm(gb, axis=1)) < 1.0
