import math

import numpy as np
import pytest

from horodyn.dynamics import (
    CLUSTER_RADIUS,
    DAMPING_SCHEDULE,
    FixedPointError,
    Orbit,
    Verdict,
    approx_fixed_point,
    check_invariance,
    classify_orbit,
    herve_classify,
    iterate,
    predicted_superset,
    target_set_estimate,
    wolff_point,
)
from horodyn.geometry import (
    CoordinateSlab,
    GeometryError,
    SetUnion,
    SinglePoint,
    polydisk,
    unit_ball,
    unit_disk,
)
from horodyn.horospheres import ConvergenceError, sequence_horosphere, small_horosphere
from horodyn.mapexpr import parse_map

D1 = unit_disk()
D2 = polydisk(2)
B2 = unit_ball(2)

PHI = parse_map("mobius(0.5)(z1)", D1)
F_CASE1 = parse_map("(mobius(0.5)(z1), 0.5*z2)", D2)
F_CASE0 = parse_map("(mobius(0.5)(z1), z2)", D2)
F_CASE2 = parse_map("(mobius(0.5)(z1), mobius(0.5)(z2))", D2)
F_BALL = parse_map("(mobius(0.5)(z1), 0.5*z2)", B2)
SCALE2 = parse_map("(scale(0.5, 0)(z1), scale(0.5, 0)(z2))", D2)
SWAP = parse_map("(z2, z1)", D2)


def _interior_grid(count, seed, spread=0.5):
    rng = np.random.default_rng(seed)
    return spread * (rng.uniform(-1, 1, (count, 2)) + 1j * rng.uniform(-1, 1, (count, 2)))


def test_orbit_closed_form_on_disk():
    o = iterate(PHI, [0.0], 30)
    ks = np.arange(len(o.points))
    oracle = np.tanh(ks * math.atanh(0.5))
    assert np.max(np.abs(o.points[:, 0] - oracle)) <= 1e-14
    # the distance comparison loses a factor 1/(1-|z|^2) to rounding, so
    # only the shallow prefix is held to a tight tolerance
    assert np.max(np.abs(o.k_from_pole[:10] - ks[:10] * math.atanh(0.5))) <= 1e-9
    assert np.all(np.diff(o.points[:, 0].real) > 0)


def test_orbit_escape_and_classification():
    o = iterate(PHI, [0.0], 200)
    assert o.stop == "escaped"
    c = classify_orbit(o)
    assert c.verdict is Verdict.COMPACTLY_DIVERGENT
    assert abs(c.boundary_cluster[0] - 1.0) <= 1e-12


def test_scale_orbit_converges_to_origin():
    o = iterate(SCALE2, [0.7, 0.3 + 0.2j], 500)
    assert o.stop == "converged"
    # Euclidean step halves each iteration
    ratios = np.linalg.norm(o.points[2:6], axis=1) / np.linalg.norm(o.points[1:5], axis=1)
    assert np.max(np.abs(ratios - 0.5)) <= 1e-12
    c = classify_orbit(o)
    assert c.verdict is Verdict.INTERIOR_CONVERGENT
    assert np.linalg.norm(c.fixed_point) <= 1e-9


def test_swap_orbit_period_two_undetermined():
    o = iterate(SWAP, [0.3, 0.1 + 0.1j], 100)
    assert o.stop == "budget"
    assert np.allclose(o.points[0], o.points[2])
    assert np.allclose(o.points[1], o.points[3])
    assert classify_orbit(o).verdict is Verdict.UNDETERMINED


def test_product_orbit_divergent_cluster():
    o = iterate(F_CASE1, [0.0, 0.5], 1000)
    c = classify_orbit(o)
    assert c.verdict is Verdict.COMPACTLY_DIVERGENT
    assert abs(c.boundary_cluster[0] - 1.0) <= 1e-9
    assert abs(c.boundary_cluster[1]) <= 1e-6


def test_orbit_start_must_be_interior():
    with pytest.raises(GeometryError):
        iterate(PHI, [1.0], 10)
    with pytest.raises(GeometryError):
        classify_orbit(Orbit(D1, np.zeros(1, complex), np.zeros((0, 1), complex),
                             np.zeros(0), "budget"))


def test_verdict_stable_across_starts():
    rng = np.random.default_rng(31)
    for m, expected in ((F_CASE1, Verdict.COMPACTLY_DIVERGENT),
                        (SCALE2, Verdict.INTERIOR_CONVERGENT)):
        for _ in range(10):
            start = 0.6 * (rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2))
            v = classify_orbit(iterate(m, start, 3000)).verdict
            assert v is expected


def test_damped_fixed_point_identity():
    x = approx_fixed_point(parse_map("z1", D1), s=0.5)
    assert abs(x[0]) <= 1e-10


def test_damped_fixed_point_mobius_quadratic():
    # (1-s)(x+1/2)/(1+x/2) = x has the interior root -s + sqrt(s^2+1-s)
    s = 0.01
    x = approx_fixed_point(PHI, D1, s)
    oracle = -s + math.sqrt(s * s + 1.0 - s)
    assert abs(x[0] - oracle) <= 1e-9
    assert 0.0 < x[0].real < 1.0


def test_damped_fixed_point_swap_linear():
    x = approx_fixed_point(SWAP, D2, 0.5, z_init=[0.3, -0.2])
    assert np.linalg.norm(x) <= 1e-9


def test_damped_fixed_point_unique_across_inits():
    inits = [[0.0], [0.5], [-0.5], [0.3j], [-0.2 - 0.4j]]
    pts = [approx_fixed_point(PHI, D1, 0.05, z_init=i) for i in inits]
    base = pts[0]
    for p in pts[1:]:
        assert np.linalg.norm(p - base) <= 1e-8


def test_damped_fixed_point_guards():
    with pytest.raises(GeometryError):
        approx_fixed_point(PHI, D1, 1.5)
    with pytest.raises(ConvergenceError):
        approx_fixed_point(PHI, D1, 1e-4, max_iter=3)


def test_wolff_point_disk():
    w = wolff_point(PHI)
    assert abs(w.point[0] - 1.0) <= 1e-12
    assert w.last_delta <= 1e-6
    assert w.seq.probe_status == "converged"
    # trace matches the quadratic closed form
    s = 1.0 / w.schedule
    oracle = -s + np.sqrt(s * s + 1.0 - s)
    assert np.max(np.abs(w.trace[:, 0] - oracle)) <= 1e-8


def test_wolff_point_product_and_ball():
    wf = wolff_point(F_CASE1)
    assert np.allclose(wf.point, [1.0, 0.0], atol=1e-9)
    wb = wolff_point(F_BALL)
    assert np.allclose(wb.point, [1.0, 0.0], atol=1e-9)
    assert abs(np.linalg.norm(wb.point) - 1.0) <= 1e-12


def test_wolff_point_precondition():
    with pytest.raises(FixedPointError):
        wolff_point(SCALE2)
    with pytest.raises(FixedPointError):
        wolff_point(SWAP)


def test_invariance_disk_horocycles():
    z = _interior_grid(400, 77, spread=0.9)[:, :1]
    z = z[np.abs(z[:, 0]) < 0.97]
    for radius in (0.5, 1.0, 2.0):
        h = small_horosphere(D1, [0.0], [1.0], radius)
        rep = check_invariance(PHI, h, z, iterations=50, tol=1e-7)
        assert rep.ok
        assert rep.eligible > 0


def test_invariance_sequence_horosphere():
    w = wolff_point(F_CASE1)
    h = sequence_horosphere(D2, [0, 0], w.seq, 1.0)
    z = _interior_grid(400, 78)
    rep = check_invariance(F_CASE1, h, z, iterations=50, tol=1e-7)
    assert rep.ok and rep.converged
    assert rep.eligible > 0


def test_invariance_identity_map():
    h = small_horosphere(D2, [0, 0], [1.0, 1.0], 1.0)
    z = _interior_grid(300, 79)
    rep = check_invariance(parse_map("(z1, z2)", D2), h, z, iterations=10)
    assert rep.ok
    assert rep.exhausted == 0


def test_invariance_rejects_large_kind():
    from horodyn.horospheres import large_horosphere
    h = large_horosphere(D2, [0, 0], [1.0, 1.0], 1.0)
    with pytest.raises(GeometryError):
        check_invariance(F_CASE1, h, _interior_grid(10, 80))
    h1 = small_horosphere(D1, [0.0], [1.0], 1.0)
    with pytest.raises(GeometryError):
        check_invariance(F_CASE1, h1, _interior_grid(10, 81))


def test_target_set_ball_singleton():
    starts = _interior_grid(40, 82, spread=0.45)
    starts = starts[np.linalg.norm(starts, axis=1) < 0.9]
    w = wolff_point(F_BALL)
    rep = target_set_estimate(F_BALL, B2, starts, n_steps=10000,
                              descr=predicted_superset(B2, w))
    assert rep.clusters.shape[0] == 1
    assert rep.radii[0] <= 1e-4
    assert rep.boundary_gaps[0] <= 1e-6
    assert rep.max_descr_distance <= 1e-3


def test_target_set_product_contained():
    starts = _interior_grid(30, 83)
    w = wolff_point(F_CASE1)
    rep = target_set_estimate(F_CASE1, D2, starts, n_steps=4000,
                              descr=predicted_superset(D2, w))
    assert rep.max_descr_distance <= 1e-3


def test_target_set_fiberwise_for_identity_component():
    starts = _interior_grid(12, 84)
    w = wolff_point(F_CASE0)
    rep = target_set_estimate(F_CASE0, D2, starts, n_steps=4000,
                              descr=predicted_superset(D2, w))
    assert rep.clusters.shape[0] == len(starts)
    assert rep.max_descr_distance <= 1e-3
    # second coordinate rides along unchanged, one cluster per start fiber
    got = np.sort_complex(rep.clusters[:, 1])
    want = np.sort_complex(starts[:, 1])
    assert np.max(np.abs(got - want)) <= 1e-9


def test_target_set_needs_starts():
    with pytest.raises(GeometryError):
        target_set_estimate(F_CASE1, D2, np.zeros((0, 2), dtype=complex))


def test_predicted_superset_shapes():
    w = wolff_point(F_CASE1)
    d_ball = predicted_superset(B2, wolff_point(F_BALL))
    assert isinstance(d_ball, SinglePoint)
    d_prod = predicted_superset(D2, w)
    assert isinstance(d_prod, SetUnion)
    assert d_prod.distance(np.array([1.0, 0.5])) <= 1e-12
    assert d_prod.distance(np.array([0.4, np.exp(0.77j)])) <= 1e-12
    assert d_prod.distance(np.array([0.5, 0.5])) > 0.1
    w2 = wolff_point(F_CASE2)
    d_two = predicted_superset(D2, w2)
    assert d_two.distance(np.array([1.0, 0.3])) <= 1e-12
    assert d_two.distance(np.array([0.3, 1.0])) <= 1e-12


def test_herve_case0():
    r = herve_classify(F_CASE0)
    assert r.case == 0 and r.orientation == "first" and r.consistent
    assert abs(r.sigma - 1.0) <= 1e-6


def test_herve_case1():
    r = herve_classify(F_CASE1)
    assert r.case == 1 and r.orientation == "first" and r.consistent
    assert abs(r.sigma - 1.0) <= 1e-6
    descr = predicted_superset(D2, wolff_point(F_CASE1), map_class=r)
    assert isinstance(descr, CoordinateSlab)
    assert descr.distance(np.array([1.0, 0.2])) <= 1e-9


def test_herve_case2():
    r = herve_classify(F_CASE2)
    assert r.case == 2 and r.consistent
    assert abs(r.sigma - 1.0) <= 1e-6
    assert abs(r.tau - 1.0) <= 1e-6
    descr = predicted_superset(D2, wolff_point(F_CASE2), map_class=r)
    assert descr.distance(np.array([1.0, 1.0])) <= 1e-9


def test_herve_exclusive_single_case():
    seen = [herve_classify(m).case for m in (F_CASE0, F_CASE1, F_CASE2)]
    assert seen == [0, 1, 2]


def test_herve_guards():
    with pytest.raises(FixedPointError):
        herve_classify(SCALE2)
    with pytest.raises(GeometryError):
        herve_classify(F_BALL)


def test_schedule_constants():
    assert DAMPING_SCHEDULE[0] == 2
    assert DAMPING_SCHEDULE[-1] == 2 ** 14
    assert CLUSTER_RADIUS == 1e-3
