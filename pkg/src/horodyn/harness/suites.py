"""Check suites behind the command line interface.

Each suite turns a scenario configuration into a list of records.  Record
identifiers are stable strings so reports sort the same way on every run;
random draws come from per-task streams derived from the scenario seed, so
neither thread scheduling nor task order changes the numbers.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..dynamics import (
    FixedPointError,
    approx_fixed_point,
    classify_orbit,
    herve_classify,
    iterate,
    check_invariance,
    predicted_superset,
    target_set_estimate,
    wolff_point,
)
from ..geometry import DomainKind, DomainSpec, GeometryError, gauge, sample_interior
from ..horospheres import (
    ConvergenceError,
    estimate_functional,
    horosphere_margin,
    large_horosphere,
    make_radial_seq,
    make_rate_seq,
    sequence_horosphere,
    small_contains,
    small_horosphere,
)
from ..mapexpr import ParseError, SelfMapError, evaluate, parse_map
from ..metric import (
    bounds,
    convexity_combination_check,
    kobayashi,
    segment_parameter_check,
)
from .config import ConfigError, ScenarioConfig
from .report import (
    Record,
    Report,
    check,
    config_digest,
    failed,
    indeterminate,
    task_rng,
)

_MAX_WORKERS = 4


def default_maps(d: DomainSpec) -> tuple:
    """Built-in map corpus for a domain, used when the config lists none."""
    if d.dim == 1:
        return ("mobius(0.5)(z1)",)
    if d.kind is DomainKind.POLYDISK and d.dim == 2:
        return (
            "(mobius(0.5)(z1), 0.5*z2)",
            "(mobius(0.5)(z1), z2)",
            "(mobius(0.5)(z1), mobius(0.5)(z2))",
        )
    parts = ["mobius(0.5)(z1)"] + [f"0.5*z{j}" for j in range(2, d.dim + 1)]
    return ("(" + ", ".join(parts) + ")",)


def _run_tasks(tasks):
    if len(tasks) <= 1:
        chunks = [fn() for fn in tasks]
    else:
        with ThreadPoolExecutor(max_workers=min(_MAX_WORKERS, len(tasks))) as pool:
            chunks = list(pool.map(lambda fn: fn(), tasks))
    return [rec for chunk in chunks for rec in chunk]


def _map_error(rid: str, text: str, err: Exception) -> Record:
    return failed(f"{rid}/map-error", float("nan"), note=str(err), map=text)


# ---------------------------------------------------------------------------
# metric suite


def _metric_suite(config: ScenarioConfig):
    d = config.domain
    b = config.budgets
    tol = config.margin_tol()

    def axioms():
        rng = task_rng(config.seed, 0)
        z = sample_interior(d, rng, b.samples)
        w = sample_interior(d, rng, b.samples)
        u = sample_interior(d, rng, b.samples)
        sym = float(np.max(np.abs(kobayashi(d, z, w) - kobayashi(d, w, z))))
        tri = float(np.max(kobayashi(d, z, w) - kobayashi(d, z, u) - kobayashi(d, u, w)))
        return [
            check("metric/symmetry", sym <= 1e-12, sym, samples=b.samples),
            check("metric/triangle", tri <= tol, tri, samples=b.samples),
        ]

    def convexity():
        rng = task_rng(config.seed, 1)
        z1 = sample_interior(d, rng, b.samples)
        z2 = sample_interior(d, rng, b.samples)
        w1 = sample_interior(d, rng, b.samples)
        w2 = sample_interior(d, rng, b.samples)
        s = rng.uniform(0.0, 1.0, b.samples)
        rep = convexity_combination_check(d, z1, z2, w1, w2, s, tol=tol)
        return [check("metric/convex-combination", rep.ok, rep.worst_excess,
                      failures=rep.failures, samples=rep.total)]

    def segments():
        rng = task_rng(config.seed, 2)
        z = sample_interior(d, rng, b.samples)
        w = sample_interior(d, rng, b.samples)
        s = rng.uniform(0.0, 1.0, b.samples)
        t = rng.uniform(0.0, 1.0, b.samples)
        rep = segment_parameter_check(d, z, w, s, t, tol=tol)
        return [check("metric/segment-parameter", rep.ok, rep.worst_excess,
                      failures=rep.failures, samples=rep.total)]

    def sandwich():
        rng = task_rng(config.seed, 3)
        z = sample_interior(d, rng, b.pairs, max_gauge=0.9)
        w = sample_interior(d, rng, b.pairs, max_gauge=0.9)
        btol = config.tolerances.bounds
        worst = -math.inf
        for i in range(b.pairs):
            k = float(kobayashi(d, z[i], w[i]))
            pair = bounds(d, z[i], w[i])
            worst = max(worst, pair.lower - k, k - pair.upper)
        return [check("metric/bounds-sandwich", worst <= btol, worst, pairs=b.pairs)]

    return _run_tasks([axioms, convexity, segments, sandwich])


# ---------------------------------------------------------------------------
# horosphere suite


def _horo_suite(config: ScenarioConfig):
    d = config.domain
    b = config.budgets
    tol = config.margin_tol()
    pole = np.zeros(d.dim, dtype=complex)
    if d.is_product:
        center = np.ones(d.dim, dtype=complex)
    else:
        center = np.zeros(d.dim, dtype=complex)
        center[0] = 1.0

    def sublevel_checks():
        rng = task_rng(config.seed, 10)
        z = sample_interior(d, rng, b.samples)
        h_small = small_horosphere(d, pole, center, 1.0)
        h_large = large_horosphere(d, pole, center, 1.0)
        m_small, _ = horosphere_margin(h_small, z)
        m_large, _ = horosphere_margin(h_large, z)
        recs = [check("horo/limsup-dominates-liminf",
                      float(np.max(m_large - m_small)) <= tol,
                      float(np.max(m_large - m_small)), samples=b.samples)]
        # shrinking the radius shifts every margin by the same half-log
        m_half, _ = horosphere_margin(small_horosphere(d, pole, center, 0.5), z)
        shift = float(np.max(np.abs((m_half - m_small) - 0.5 * math.log(2.0))))
        recs.append(check("horo/radius-shift", shift <= 1e-12, shift))
        # closure of the smaller sublevel set sits inside the larger one
        m_two, _ = horosphere_margin(small_horosphere(d, pole, center, 2.0), z)
        mask = m_small <= 1e-9
        worst = float(np.max(m_two[mask])) if np.any(mask) else -math.inf
        recs.append(check("horo/nesting", worst < 0.0, worst,
                          closure_points=int(np.sum(mask))))
        return recs

    def ball_relations():
        rng = task_rng(config.seed, 11)
        z = sample_interior(d, rng, b.samples)
        k_pole = np.asarray(kobayashi(d, np.broadcast_to(pole, z.shape), z))
        # metric ball of radius (1/2)log R sits inside the R sublevel set
        big_r = 4.0
        m_big, _ = horosphere_margin(small_horosphere(d, pole, center, big_r), z)
        mask_in = k_pole < 0.5 * math.log(big_r)
        worst_in = float(np.max(m_big[mask_in])) if np.any(mask_in) else -math.inf
        recs = [check("horo/metric-ball-inclusion", worst_in < 0.0, worst_in,
                      ball_points=int(np.sum(mask_in)))]
        # for R < 1 the liminf set misses the ball of radius -(1/2)log R
        small_r = 0.25
        m_lim, _ = horosphere_margin(large_horosphere(d, pole, center, small_r), z)
        mask_f = m_lim < 0.0
        gap = 0.5 * math.log(1.0 / small_r) - k_pole
        worst_out = float(np.max(gap[mask_f])) if np.any(mask_f) else -math.inf
        recs.append(check("horo/metric-ball-exclusion", worst_out <= tol, worst_out,
                          liminf_points=int(np.sum(mask_f))))
        return recs

    def shape_checks():
        rng = task_rng(config.seed, 12)
        z = sample_interior(d, rng, b.samples)
        h1 = small_horosphere(d, pole, center, 1.0)
        m1, _ = horosphere_margin(h1, z)
        # each interior point crosses from inside to outside at its own radius
        probes = z[: min(16, len(z))]
        flips = 0
        for i, p in enumerate(probes):
            r_star = math.exp(2.0 * float(m1[i]))
            inner = small_contains(small_horosphere(d, pole, center, r_star * (1.0 + 1e-6)), p)
            outer = small_contains(small_horosphere(d, pole, center, r_star * (1.0 - 1e-6)), p)
            if inner.state.name == "INSIDE" and outer.state.name == "OUTSIDE":
                flips += 1
        recs = [check("horo/threshold-radius", flips == len(probes),
                      float(len(probes) - flips), probes=len(probes))]
        # midpoints of two inside points stay inside (convexity of the sublevel set)
        h2 = small_horosphere(d, pole, center, 2.0)
        m2, _ = horosphere_margin(h2, z)
        inside = z[m2 < 0.0]
        if len(inside) >= 2:
            half = len(inside) // 2
            mids = 0.5 * (inside[:half] + inside[half : 2 * half])
            mm, _ = horosphere_margin(h2, mids)
            worst_mid = float(np.max(mm))
        else:
            worst_mid = -math.inf
        recs.append(check("horo/midpoint-convexity", worst_mid <= tol, worst_mid,
                          pairs=int(len(inside) // 2)))
        return recs

    def family_checks():
        recs = []
        rng = task_rng(config.seed, 13)
        z = sample_interior(d, rng, min(b.samples, 400))
        if d.is_product:
            radial = make_radial_seq(d, center)
            a_err = float(np.max(np.abs(radial.alpha - 1.0)))
            recs.append(check("horo/alpha-radial", a_err <= 1e-6 and radial.probe_status == "converged",
                              a_err, status=radial.probe_status))
            factors = tuple(range(1, d.dim + 1))
            rated = make_rate_seq(d, center, factors)
            expect = np.array(factors, dtype=float) / max(factors)
            r_err = float(np.max(np.abs(rated.alpha - expect)))
            recs.append(check("horo/alpha-rates", r_err <= 1e-4 and rated.probe_status == "converged",
                              r_err, status=rated.probe_status, factors=list(factors)))
            h_seq = sequence_horosphere(d, pole, radial, 1.0)
            h_small = small_horosphere(d, pole, center, 1.0)
            ms, _ = horosphere_margin(h_small, z)
            mg, ok_g = horosphere_margin(h_seq, z)
            same = float(np.max(np.abs(mg - ms)))
            recs.append(check("horo/radial-sequence-is-limsup", same <= tol and ok_g, same))
            h_rate = sequence_horosphere(d, pole, rated, 1.0)
            mr, ok_r = horosphere_margin(h_rate, z)
            ml, _ = horosphere_margin(large_horosphere(d, pole, center, 1.0), z)
            excess = max(float(np.max(mr - ms)), float(np.max(ml - mr)))
            recs.append(check("horo/sequence-sandwich", excess <= tol and ok_r, excess))
            worst = -math.inf
            for i in range(3):
                est = estimate_functional(d, pole, rated, z[i], tol=1e-7, window=3)
                worst = max(worst, abs(est.value - float(mr[i])))
            recs.append(check("horo/dual-route", worst <= 5e-6, worst, probes=3))
        else:
            h_small = small_horosphere(d, pole, center, 1.0)
            h_large = large_horosphere(d, pole, center, 1.0)
            ms, _ = horosphere_margin(h_small, z)
            ml, _ = horosphere_margin(h_large, z)
            same = float(np.max(np.abs(ms - ml)))
            recs.append(check("horo/ball-kinds-coincide", same <= 1e-12, same))
        return recs

    return _run_tasks([sublevel_checks, ball_relations, shape_checks, family_checks])


# ---------------------------------------------------------------------------
# wolff suite


def _wolff_suite(config: ScenarioConfig):
    d = config.domain
    b = config.budgets
    tol_w = config.tolerances.wolff
    inv_tol = config.invariance_tol()
    maps = config.maps or default_maps(d)
    pole = np.zeros(d.dim, dtype=complex)

    def job(index: int, text: str):
        def run():
            rid = f"wolff/m{index}"
            try:
                m = parse_map(text, d)
            except (ParseError, SelfMapError) as err:
                return [_map_error(rid, text, err)]
            try:
                w = wolff_point(m, d, tol_wolff=tol_w)
            except FixedPointError as err:
                return [failed(f"{rid}/point", float("nan"),
                               note=f"precondition: {err}", map=text)]
            except ConvergenceError as err:
                return [failed(f"{rid}/point", float("nan"), note=str(err), map=text)]
            recs = [check(f"{rid}/point", w.last_delta <= tol_w, w.last_delta,
                          map=text, point=w.point,
                          seq_status=w.seq.probe_status)]
            rng = task_rng(config.seed, 100 + index)
            samples = sample_interior(d, rng, b.samples, max_gauge=0.95)
            for radius, tag in ((0.25, "quarter"), (1.0, "unit"), (4.0, "four")):
                h = small_horosphere(d, pole, w.point, radius)
                rep = check_invariance(m, h, samples, iterations=b.iterations, tol=inv_tol)
                recs.append(check(f"{rid}/invariance-{tag}", rep.ok, rep.max_margin,
                                  eligible=rep.eligible, exhausted=rep.exhausted,
                                  violations=len(rep.violations)))
            hs = sequence_horosphere(d, pole, w.seq, 1.0)
            rep = check_invariance(m, hs, samples, iterations=b.iterations, tol=inv_tol)
            if not rep.converged:
                recs.append(indeterminate(f"{rid}/invariance-sequence",
                                          note="sequence margins not certified",
                                          eligible=rep.eligible))
            else:
                recs.append(check(f"{rid}/invariance-sequence", rep.ok, rep.max_margin,
                                  eligible=rep.eligible, exhausted=rep.exhausted,
                                  violations=len(rep.violations)))
            return recs

        return run

    return _run_tasks([job(i + 1, text) for i, text in enumerate(maps)])


# ---------------------------------------------------------------------------
# dynamics suite


def _dynamics_suite(config: ScenarioConfig):
    d = config.domain
    b = config.budgets
    maps = config.maps or default_maps(d)

    def job(index: int, text: str):
        def run():
            rid = f"dyn/m{index}"
            try:
                m = parse_map(text, d)
            except (ParseError, SelfMapError) as err:
                return [_map_error(rid, text, err)]
            rng = task_rng(config.seed, 200 + index)
            starts = sample_interior(d, rng, 10, max_gauge=0.9)
            verdicts = set()
            for s in starts:
                o = iterate(m, s, min(b.orbit_steps, 1500))
                verdicts.add(classify_orbit(o).verdict.name)
            recs = [check(f"{rid}/verdict-stability", len(verdicts) == 1,
                          float(len(verdicts) - 1), map=text,
                          verdicts=sorted(verdicts))]
            try:
                w = wolff_point(m, d)
            except FixedPointError:
                fz = approx_fixed_point(m, d)
                residual = float(np.max(np.abs(evaluate(m, fz) - fz)))
                interior = float(gauge(d, fz)) < 1.0
                recs.append(check(f"{rid}/interior-fixed-point",
                                  interior and residual <= 1e-8, residual,
                                  point=fz))
                return recs
            except ConvergenceError as err:
                recs.append(failed(f"{rid}/target-containment", float("nan"), note=str(err)))
                return recs
            descr = predicted_superset(d, w)
            starts2 = sample_interior(d, task_rng(config.seed, 300 + index),
                                      b.starts, max_gauge=0.9)
            rep = target_set_estimate(m, d, starts2, n_steps=b.orbit_steps,
                                      cluster_radius=b.cluster_radius, descr=descr)
            ctol = config.tolerances.cluster
            recs.append(check(f"{rid}/target-containment",
                              rep.max_descr_distance <= ctol, rep.max_descr_distance,
                              clusters=len(rep.counts), map=text))
            if not d.is_product:
                tight = (len(rep.counts) == 1
                         and float(np.max(rep.radii)) <= ctol
                         and float(np.max(rep.boundary_gaps)) <= 1e-6)
                recs.append(check(f"{rid}/cluster-tightness", tight,
                                  float(np.max(rep.radii)),
                                  boundary_gap=float(np.max(rep.boundary_gaps)),
                                  clusters=len(rep.counts)))
            return recs

        return run

    return _run_tasks([job(i + 1, text) for i, text in enumerate(maps)])


# ---------------------------------------------------------------------------
# slice classification suite


def _herve_suite(config: ScenarioConfig):
    d = config.domain
    b = config.budgets
    if not (d.kind is DomainKind.POLYDISK and d.dim == 2):
        raise ConfigError("the herve suite runs on domain polydisk:2 only")
    maps = config.maps or default_maps(d)

    def job(index: int, text: str):
        def run():
            rid = f"herve/m{index}"
            try:
                m = parse_map(text, d)
            except (ParseError, SelfMapError) as err:
                return [_map_error(rid, text, err)]
            try:
                res = herve_classify(m)
            except FixedPointError as err:
                return [failed(f"{rid}/classification", float("nan"),
                               note=f"precondition: {err}", map=text)]
            except ConvergenceError as err:
                return [failed(f"{rid}/classification", float("nan"),
                               note=str(err), map=text)]
            ok = res.case is not None and res.consistent
            recs = [check(f"{rid}/classification", ok,
                          float(res.case) if res.case is not None else float("nan"),
                          map=text, case=res.case, orientation=res.orientation,
                          sigma=res.sigma, tau=res.tau, detail=res.detail)]
            if not ok:
                return recs
            try:
                w = wolff_point(m, d)
            except (FixedPointError, ConvergenceError) as err:
                recs.append(indeterminate(f"{rid}/target-agreement", note=str(err)))
                return recs
            descr = predicted_superset(d, w, map_class=res)
            starts = sample_interior(d, task_rng(config.seed, 400 + index),
                                     b.starts, max_gauge=0.9)
            rep = target_set_estimate(m, d, starts, n_steps=b.orbit_steps,
                                      cluster_radius=b.cluster_radius, descr=descr)
            recs.append(check(f"{rid}/target-agreement",
                              rep.max_descr_distance <= config.tolerances.cluster,
                              rep.max_descr_distance, clusters=len(rep.counts)))
            return recs

        return run

    return _run_tasks([job(i + 1, text) for i, text in enumerate(maps)])


_SUITES = {
    "metric": _metric_suite,
    "horospheres": _horo_suite,
    "wolff": _wolff_suite,
    "dynamics": _dynamics_suite,
    "herve": _herve_suite,
}


def run_suite(config: ScenarioConfig) -> Report:
    if config.suite not in _SUITES:
        raise ConfigError(f"unknown suite {config.suite!r}")
    begin = time.perf_counter()
    records = _SUITES[config.suite](config)
    records.sort(key=lambda r: r.id)
    report = Report(suite=config.suite, seed=config.seed,
                    digest=config_digest(config), records=records)
    report.runtime = time.perf_counter() - begin
    return report
