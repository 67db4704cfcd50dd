"""Iteration dynamics of distance-nonexpansive self-maps.

Covers orbit iteration with escape/convergence detection, damped
fixed-point approximation, boundary attractor (Wolff point) estimation
with an attached horosphere sequence, forward-invariance checking of
horospheres, orbit target-set estimation with boundary descriptors, and
the four-way slice classification of fixed-point-free bidisk maps.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    CoordinateSlab,
    DomainSpec,
    GeometryError,
    SetUnion,
    SinglePoint,
    cpoint,
    gauge,
    mod1_coords,
    polydisk,
    snap_to_boundary,
    unit_disk,
)
from .horospheres import (
    ConvergenceError,
    HoroKind,
    HoroSeq,
    HorosphereSpec,
    extract_horosphere_subsequence,
    horosphere_margin,
)
from .mapexpr import SelfMapExpr, evaluate
from .metric import kobayashi

__all__ = [
    "ESCAPE_THRESHOLD",
    "TOL_FIX",
    "TOL_WOLFF",
    "DAMPING_SCHEDULE",
    "CLUSTER_RADIUS",
    "FixedPointError",
    "Orbit",
    "Verdict",
    "OrbitClassification",
    "WolffData",
    "InvarianceReport",
    "TargetSetReport",
    "HerveResult",
    "iterate",
    "classify_orbit",
    "approx_fixed_point",
    "wolff_point",
    "check_invariance",
    "target_set_estimate",
    "predicted_superset",
    "herve_classify",
]

ESCAPE_THRESHOLD = 20.0  # tanh(20) is 1 to double precision: unambiguous escape
TOL_FIX = 1e-10
TOL_WOLFF = 1e-6
DAMPING_SCHEDULE = tuple(2 ** k for k in range(1, 15))
CLUSTER_RADIUS = 1e-3
TAIL_FRACTION = 0.1
# beyond this gauge the defect 1 - |z|^2 is no longer representable and
# closed-form margins degenerate, so iterates are retired as exhausted
EXHAUSTION_GAUGE = 1.0 - 1e-14

HERVE_SCHEDULE = tuple(32 * 2 ** k for k in range(8))


class FixedPointError(ValueError):
    """The map has (or may have) an interior fixed point where none is allowed."""


_START_PATTERN = np.array([0.11 + 0.07j, -0.13 + 0.05j, 0.06 - 0.10j, -0.04 - 0.08j])


def _generic_start(d: DomainSpec) -> np.ndarray:
    # asymmetric across coordinates so permutation maps do not fix it
    z = np.resize(_START_PATTERN, d.dim)
    if not d.is_product:
        norm = np.linalg.norm(z)
        if norm > 0.2:
            z = z * (0.2 / norm)
    return z


# ---------------------------------------------------------------------------
# orbits


@dataclass(frozen=True)
class Orbit:
    domain: DomainSpec
    start: np.ndarray
    points: np.ndarray  # (K, dim), includes the start
    k_from_pole: np.ndarray  # (K,)
    stop: str  # "budget" | "converged" | "escaped"


class Verdict(enum.Enum):
    INTERIOR_CONVERGENT = "interior-convergent"
    COMPACTLY_DIVERGENT = "compactly-divergent"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class OrbitClassification:
    verdict: Verdict
    fixed_point: np.ndarray | None = None
    boundary_cluster: np.ndarray | None = None


def iterate(m: SelfMapExpr, start, n_steps: int, pole=None,
            escape_threshold: float = ESCAPE_THRESHOLD,
            tol_fix: float = TOL_FIX) -> Orbit:
    """Iterate the map, recording points and distances from the pole.

    Stops early when a step contracts below tol_fix (the orbit has landed
    on a fixed point) or when the distance from the pole passes the escape
    threshold (the orbit is leaving every compact set).
    """
    d = m.domain
    z = cpoint(start)
    if gauge(d, z) >= 1.0:
        raise GeometryError("orbit start must be interior")
    pole = np.zeros(d.dim, dtype=complex) if pole is None else cpoint(pole)
    pts = [z]
    ks = [float(kobayashi(d, pole, z))]
    stop = "budget"
    for _ in range(n_steps):
        z_new = evaluate(m, z)
        if gauge(d, z_new) >= 1.0:
            pts.append(z_new)
            ks.append(math.inf)
            stop = "escaped"
            break
        step = float(kobayashi(d, z, z_new))
        k_new = float(kobayashi(d, pole, z_new))
        pts.append(z_new)
        ks.append(k_new)
        z = z_new
        if gauge(d, z_new) >= EXHAUSTION_GAUGE:
            # orbits pinned against the boundary by rounding stall there with
            # zero step length; that is escape, not interior convergence
            stop = "escaped"
            break
        if step < tol_fix:
            stop = "converged"
            break
        if k_new > escape_threshold:
            stop = "escaped"
            break
    return Orbit(d, cpoint(start), np.array(pts), np.array(ks), stop)


def classify_orbit(o: Orbit, d: DomainSpec | None = None,
                   escape_threshold: float = ESCAPE_THRESHOLD) -> OrbitClassification:
    """Sort an orbit into convergent / compactly divergent / undetermined."""
    d = o.domain if d is None else d
    if len(o.points) == 0:
        raise GeometryError("cannot classify an empty orbit")
    if o.stop == "converged":
        return OrbitClassification(Verdict.INTERIOR_CONVERGENT, fixed_point=o.points[-1])
    finite = o.k_from_pole[np.isfinite(o.k_from_pole)]
    if o.stop == "escaped" or (finite.size and np.max(finite) > escape_threshold):
        last = o.points[-1]
        g = float(gauge(d, last))
        cluster = snap_to_boundary(d, last, tol=1e-2) if g > 0.99 else last / max(g, 1e-9)
        return OrbitClassification(Verdict.COMPACTLY_DIVERGENT, boundary_cluster=cluster)
    return OrbitClassification(Verdict.UNDETERMINED)


# ---------------------------------------------------------------------------
# damped fixed points


def _damped_picard(step_fun, d: DomainSpec, s: float, z_init, tol_fix: float,
                   max_iter: int | None) -> np.ndarray:
    if not 0.0 < s < 1.0:
        raise GeometryError("damping factor must lie in (0, 1)")
    z = np.zeros(d.dim, dtype=complex) if z_init is None else cpoint(z_init)
    if max_iter is None:
        max_iter = int(math.ceil(40.0 / s)) + 100
    for _ in range(max_iter):
        z_new = (1.0 - s) * step_fun(z)
        if float(kobayashi(d, z, z_new)) < tol_fix:
            return z_new
        z = z_new
    raise ConvergenceError(
        f"damped iteration (s={s}) missed tolerance {tol_fix} in {max_iter} steps")


def approx_fixed_point(m: SelfMapExpr, d: DomainSpec | None = None, s: float = 0.5,
                       z_init=None, tol_fix: float = TOL_FIX,
                       max_iter: int | None = None) -> np.ndarray:
    """Fixed point of the origin-damped map z -> (1-s) m(z), by iteration.

    The damped map is a strict contraction into a compact subset, so the
    fixed point exists and is unique; the returned point p satisfies
    k(p, damped(p)) < tol_fix.
    """
    d = m.domain if d is None else d
    if d != m.domain:
        raise GeometryError("domain does not match the map")
    return _damped_picard(lambda z: evaluate(m, z), d, s, z_init, tol_fix, max_iter)


# ---------------------------------------------------------------------------
# boundary attractor


@dataclass(frozen=True)
class WolffData:
    point: np.ndarray  # boundary attractor
    seq: HoroSeq  # validated horosphere sequence along the damped trace
    trace: np.ndarray  # (len(schedule), dim) damped fixed points
    schedule: np.ndarray
    last_delta: float  # final extrapolant movement


def wolff_point(m: SelfMapExpr, d: DomainSpec | None = None,
                schedule=DAMPING_SCHEDULE, probes=None,
                tol_wolff: float = TOL_WOLFF, precheck: bool = True) -> WolffData:
    """Boundary attractor via damped fixed points x_nu (s = 1/nu).

    The x_nu trace carries a c/nu tail, so the limit is taken on the
    doubling-schedule extrapolants 2 x_{2nu} - x_nu; the trace itself is
    handed to subsequence extraction to certify a horosphere sequence.
    """
    d = m.domain if d is None else d
    if d != m.domain:
        raise GeometryError("domain does not match the map")
    if precheck:
        probe_orbit = iterate(m, _generic_start(d), 3000)
        verdict = classify_orbit(probe_orbit).verdict
        if verdict is not Verdict.COMPACTLY_DIVERGENT:
            raise FixedPointError(
                f"probe orbit is {verdict.value}; boundary attractor needs a "
                "fixed-point-free map")
    xs = []
    warm = None
    for nu in schedule:
        warm = approx_fixed_point(m, d, 1.0 / nu, z_init=warm)
        xs.append(warm)
    trace = np.array(xs)
    nus = np.asarray(schedule, dtype=float)
    extr = (nus[1:, None] * trace[1:] - nus[:-1, None] * trace[:-1]) / (nus[1:, None] - nus[:-1, None])
    deltas = np.linalg.norm(np.diff(extr, axis=0), axis=1)
    if deltas[-1] > tol_wolff:
        raise ConvergenceError(
            f"damped fixed points did not settle: final movement {deltas[-1]:.3e}")
    x = snap_to_boundary(d, extr[-1], tol=1e-2)
    seq = extract_horosphere_subsequence(d, trace, indices=nus, probes=probes,
                                         tol=tol_wolff)
    return WolffData(x, seq, trace, nus, float(deltas[-1]))


# ---------------------------------------------------------------------------
# horosphere invariance


@dataclass(frozen=True)
class InvarianceReport:
    total: int
    eligible: int
    steps: int
    exhausted: int
    violations: tuple  # (sample index, step, margin) triples
    max_margin: float  # worst target margin seen among checked iterates
    converged: bool  # sequence data behind the margins was certified

    @property
    def ok(self) -> bool:
        return len(self.violations) == 0


def check_invariance(m: SelfMapExpr, h: HorosphereSpec, samples,
                     iterations: int = 50, tol: float = 1e-7) -> InvarianceReport:
    """Check forward invariance of a horosphere under iteration.

    Points inside a sublevel-limsup horosphere must have every iterate in
    the matching liminf horosphere of the same radius; points inside a
    sequence horosphere must stay in it.  Iterates driven too close to the
    boundary for the margin formulas to be representable are retired as
    exhausted rather than checked.
    """
    if h.domain != m.domain:
        raise GeometryError("horosphere and map domains differ")
    if h.kind is HoroKind.SMALL:
        target = HorosphereSpec(h.domain, h.pole, h.center, h.radius, HoroKind.LARGE)
    elif h.kind is HoroKind.SEQUENCE:
        target = h
    else:
        raise GeometryError(
            "invariance is checked from a small or sequence horosphere; the "
            "liminf horosphere alone is not forward invariant")
    pts = np.asarray(samples, dtype=complex)
    if pts.ndim != 2 or pts.shape[1] != h.domain.dim:
        raise GeometryError("samples must have shape (count, dim)")
    margins, ok0 = horosphere_margin(h, pts)
    eligible = np.flatnonzero(margins < -tol)
    active = pts[eligible]
    idx = eligible.copy()
    violations = []
    max_margin = -math.inf
    exhausted = 0
    converged = ok0
    for step in range(1, iterations + 1):
        if idx.size == 0:
            break
        active = evaluate(m, active)
        g = np.asarray(gauge(h.domain, active))
        deep = g >= EXHAUSTION_GAUGE
        exhausted += int(np.sum(deep))
        active, idx = active[~deep], idx[~deep]
        if idx.size == 0:
            break
        tmarg, okt = horosphere_margin(target, active)
        converged = converged and okt
        if tmarg.size:
            max_margin = max(max_margin, float(np.max(tmarg)))
        bad = tmarg >= tol
        for i, mg in zip(idx[bad], tmarg[bad]):
            violations.append((int(i), step, float(mg)))
        active, idx = active[~bad], idx[~bad]
    return InvarianceReport(len(pts), int(eligible.size), iterations, exhausted,
                            tuple(violations), max_margin, converged)


# ---------------------------------------------------------------------------
# target sets


@dataclass(frozen=True)
class TargetSetReport:
    clusters: np.ndarray  # (C, dim) centroids of orbit tails
    counts: np.ndarray  # (C,) tail points per cluster
    radii: np.ndarray  # (C,) max member distance from the centroid
    boundary_gaps: np.ndarray  # (C,) 1 - gauge(centroid)
    max_descr_distance: float | None  # against the supplied descriptor


def _greedy_clusters(points: np.ndarray, radius: float):
    anchors: list[np.ndarray] = []
    members: list[list[np.ndarray]] = []
    for p in points:
        placed = False
        for a, ms in zip(anchors, members):
            if np.linalg.norm(p - a) <= radius:
                ms.append(p)
                placed = True
                break
        if not placed:
            anchors.append(p)
            members.append([p])
    cents = np.array([np.mean(ms, axis=0) for ms in members])
    counts = np.array([len(ms) for ms in members])
    radii = np.array([max(np.linalg.norm(np.array(ms) - c, axis=1).max(), 0.0)
                      for ms, c in zip(members, cents)])
    return cents, counts, radii


def target_set_estimate(m: SelfMapExpr, d: DomainSpec | None = None, starts=None,
                        n_steps: int = 2000, cluster_radius: float = CLUSTER_RADIUS,
                        tail_fraction: float = TAIL_FRACTION, descr=None,
                        escape_threshold: float = ESCAPE_THRESHOLD) -> TargetSetReport:
    """Cluster the orbit tails of many starts and compare with a descriptor.

    The tail is the last tail_fraction of each recorded orbit; clustering
    is greedy first-fit in the Euclidean metric, so results are
    deterministic in start order.
    """
    d = m.domain if d is None else d
    if starts is None or len(starts) == 0:
        raise GeometryError("need at least one orbit start")
    tails = []
    for start in np.asarray(starts, dtype=complex):
        o = iterate(m, start, n_steps, escape_threshold=escape_threshold)
        pts = o.points
        if not np.isfinite(o.k_from_pole[-1]):
            pts = pts[:-1]  # drop an exactly-boundary final image
        keep = max(1, int(math.ceil(tail_fraction * len(pts))))
        tails.append(pts[-keep:])
    pool = np.concatenate(tails, axis=0)
    cents, counts, radii = _greedy_clusters(pool, cluster_radius)
    gaps = np.array([1.0 - float(gauge(d, c)) for c in cents])
    max_dist = None
    if descr is not None:
        snapped = []
        for c in cents:
            g = float(gauge(d, c))
            snapped.append(snap_to_boundary(d, c, tol=1e-2) if abs(g - 1.0) <= 1e-2 else c)
        max_dist = max(float(descr.distance(c)) for c in snapped)
    return TargetSetReport(cents, counts, radii, gaps, max_dist)


def predicted_superset(d: DomainSpec, w: WolffData, map_class=None):
    """Boundary descriptor guaranteed to contain every orbit cluster point.

    Ball: the single attractor point.  Polydisk: the union over
    coordinates of pinned slabs (unimodular attractor coordinates) and
    whole-circle slabs (the rest); a slice classification, when supplied,
    tightens the bidisk prediction to the stated case form.
    """
    x = w.point
    if not d.is_product:
        return SinglePoint(x)
    if d.dim == 1:
        return SinglePoint(x)
    if map_class is not None and d.dim == 2 and getattr(map_class, "case", None) in (0, 1, 2, 3):
        res = map_class
        if res.case in (0, 1):
            if res.orientation == "first" and res.sigma is not None:
                return CoordinateSlab(2, pins=((0, complex(res.sigma)),))
            if res.orientation == "second" and res.tau is not None:
                return CoordinateSlab(2, pins=((1, complex(res.tau)),))
        elif res.case == 2 and res.sigma is not None and res.tau is not None:
            return SetUnion([CoordinateSlab(2, pins=((0, complex(res.sigma)),)),
                             CoordinateSlab(2, pins=((1, complex(res.tau)),))])
        elif res.case == 3 and res.sigma is not None and res.tau is not None:
            return SinglePoint(np.array([res.sigma, res.tau]))
    hot = set(int(j) for j in mod1_coords(x))
    members = []
    for j in range(d.dim):
        if j in hot:
            members.append(CoordinateSlab(d.dim, pins=((j, complex(x[j])),)))
        else:
            members.append(CoordinateSlab(d.dim, circles=(j,)))
    return members[0] if len(members) == 1 else SetUnion(members)


# ---------------------------------------------------------------------------
# bidisk slice classification


@dataclass(frozen=True)
class SliceRecord:
    family: str  # "f" (first component, frozen w) or "g" (second, frozen z)
    probe: complex
    verdict: str  # "empty" | "fixed" | "undetermined"
    limit: complex | None  # boundary limit (empty) or interior fixed point


@dataclass(frozen=True)
class HerveResult:
    case: int | None
    orientation: str | None  # "first": slices of the first component escape
    sigma: complex | None
    tau: complex | None
    records: tuple
    consistent: bool
    detail: str = ""


_DISK = unit_disk()
_HERVE_PROBES = (0.0 + 0j, 0.35 + 0j, -0.45 + 0j, 0.3j, -0.25 - 0.35j)


def _slice_fun(F: SelfMapExpr, family: str, probe: complex):
    if family == "f":
        return lambda t: evaluate(F, np.array([t[0], probe]))[0:1]
    return lambda t: evaluate(F, np.array([probe, t[0]]))[1:2]


def _analyze_slice(fun, schedule=HERVE_SCHEDULE, tol_limit: float = 1e-6):
    """Damped fixed points of a 1-D slice decide Fix = empty vs {x}.

    Escape to the boundary band |x_s| > 1 - 10 nu^-1 on every schedule
    entry reads as an empty fixed-point set; a Cauchy interior trace reads
    as a genuine fixed point.  Mixed signals stay undetermined.
    """
    xs = []
    warm = None
    for nu in schedule:
        warm = _damped_picard(fun, _DISK, 1.0 / nu, warm, TOL_FIX, None)
        xs.append(complex(warm[0]))
    xs_arr = np.array(xs)
    nus = np.asarray(schedule, dtype=float)
    bands = 1.0 - 10.0 / nus
    outside = np.abs(xs_arr) > bands
    extr = (nus[1:] * xs_arr[1:] - nus[:-1] * xs_arr[:-1]) / (nus[1:] - nus[:-1])
    if np.all(outside):
        limit = extr[-1]
        limit = limit / abs(limit)
        return "empty", complex(limit)
    if not np.any(outside):
        if np.abs(extr[-1] - extr[-2]) < tol_limit and abs(extr[-1]) < 1.0:
            return "fixed", complex(extr[-1])
    return "undetermined", None


def _family_verdict(records):
    verdicts = {r.verdict for r in records}
    if len(verdicts) != 1:
        return "inconsistent", None
    verdict = verdicts.pop()
    if verdict == "empty":
        limits = np.array([r.limit for r in records])
        if np.max(np.abs(limits - limits[0])) > 1e-3:
            return "inconsistent", None
        mean = np.mean(limits)
        return "empty", complex(mean / abs(mean))
    return verdict, None


def _is_identity_component(F: SelfMapExpr, component: int) -> bool:
    rng = np.random.default_rng(240811)
    z = 0.8 * (rng.uniform(-1, 1, (64, 2)) + 1j * rng.uniform(-1, 1, (64, 2)))
    img = evaluate(F, z)
    return bool(np.max(np.abs(img[:, component] - z[:, component])) < 1e-12)


def herve_classify(F: SelfMapExpr, probes=_HERVE_PROBES,
                   tol_limit: float = 1e-6) -> HerveResult:
    """Classify a fixed-point-free bidisk map by its slice fixed points.

    Slices f_w = F1(., w) and g_z = F2(z, .) are tested per probe; the
    verdict must agree across probes (inconsistency is reported, never
    guessed).  Case 0 means an identity component, 1 means exactly one
    slice family escapes, 2 both, 3 neither (while the full map is still
    fixed-point-free).
    """
    if F.domain != polydisk(2):
        raise GeometryError("slice classification lives on the bidisk")
    probe_orbit = iterate(F, _generic_start(F.domain), 3000)
    verdict = classify_orbit(probe_orbit).verdict
    if verdict is not Verdict.COMPACTLY_DIVERGENT:
        raise FixedPointError(
            f"probe orbit is {verdict.value}; classification applies to "
            "fixed-point-free maps")

    if _is_identity_component(F, 1):
        recs = tuple(SliceRecord("f", p, *_analyze_slice(_slice_fun(F, "f", p), tol_limit=tol_limit))
                     for p in probes)
        verdict, sigma = _family_verdict(recs)
        if verdict != "empty":
            return HerveResult(None, None, None, None, recs, False,
                               "identity second component but first slices do not escape")
        return HerveResult(0, "first", sigma, None, recs, True,
                           "iterates converge fiberwise to (sigma, w)")
    if _is_identity_component(F, 0):
        recs = tuple(SliceRecord("g", p, *_analyze_slice(_slice_fun(F, "g", p), tol_limit=tol_limit))
                     for p in probes)
        verdict, tau = _family_verdict(recs)
        if verdict != "empty":
            return HerveResult(None, None, None, None, recs, False,
                               "identity first component but second slices do not escape")
        return HerveResult(0, "second", None, tau, recs, True,
                           "iterates converge fiberwise to (z, tau)")

    f_recs = tuple(SliceRecord("f", p, *_analyze_slice(_slice_fun(F, "f", p), tol_limit=tol_limit))
                   for p in probes)
    g_recs = tuple(SliceRecord("g", p, *_analyze_slice(_slice_fun(F, "g", p), tol_limit=tol_limit))
                   for p in probes)
    records = f_recs + g_recs
    f_verdict, sigma = _family_verdict(f_recs)
    g_verdict, tau = _family_verdict(g_recs)
    if "inconsistent" in (f_verdict, g_verdict) or "undetermined" in (f_verdict, g_verdict):
        return HerveResult(None, None, sigma, tau, records, False,
                           f"slice verdicts f={f_verdict} g={g_verdict}")
    if f_verdict == "empty" and g_verdict == "empty":
        cluster = classify_orbit(iterate(F, _generic_start(F.domain), 4000)).boundary_cluster
        return HerveResult(2, None, sigma, tau, records, True,
                           f"orbit cluster {np.round(cluster, 6)} selects the branch")
    if f_verdict == "empty":
        return HerveResult(1, "first", sigma, None, records, True,
                           "targets confined to the pinned first coordinate")
    if g_verdict == "empty":
        return HerveResult(1, "second", None, tau, records, True,
                           "targets confined to the pinned second coordinate")
    cluster = classify_orbit(iterate(F, _generic_start(F.domain), 4000)).boundary_cluster
    sigma3 = complex(cluster[0]) if cluster is not None else None
    tau3 = complex(cluster[1]) if cluster is not None else None
    return HerveResult(3, None, sigma3, tau3, records, True,
                       "both slice families keep interior fixed points")
