"""Small, large and sequence horospheres with signed membership margins.

A horosphere of pole z0, boundary center x and radius R collects the points
where a limit of k_D(z, w) - k_D(z0, w) (as w approaches x) stays below
0.5*log R.  The three kinds differ in the limit taken: limsup (small),
liminf (large), or the limit along a fixed boundary-approaching sequence
(sequence kind, with per-coordinate rate weights alpha on product domains).

Margins are the primitive everywhere: margin = functional - 0.5*log R, and
membership is margin < 0 with a +-MARGIN_TIE band reported as on-boundary.
Product domains use pole-at-origin closed forms, transporting other poles
through the Mobius automorphism; the ball has a direct two-pole form, and
its three kinds coincide.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    DomainSpec,
    GeometryError,
    check_dim,
    classify,
    cpoint,
    gauge,
    mod1_coords,
    snap_to_boundary,
)
from .metric import kobayashi, mobius_translate

TOL_LIMIT = 1e-6  # Cauchy tolerance for limit estimation
CAUCHY_WINDOW = 3  # consecutive increments that must sit under TOL_LIMIT
MARGIN_TIE = 1e-9  # half-width of the on-boundary membership band
DEFAULT_SCHEDULE = tuple(int(2**k) for k in range(4, 21))


class ConvergenceError(RuntimeError):
    """A limit estimation failed to converge within its budget."""


class Containment(enum.Enum):
    INSIDE = "inside"
    ON_BOUNDARY = "on_boundary"
    OUTSIDE = "outside"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ContainmentResult:
    margin: float
    state: Containment
    converged: bool = True

    @property
    def is_inside(self) -> bool:
        return self.state is Containment.INSIDE


def classify_margin(margin: float, converged: bool = True, tie: float = MARGIN_TIE) -> ContainmentResult:
    if not converged or math.isnan(margin):
        return ContainmentResult(margin, Containment.INDETERMINATE, False)
    if margin < -tie:
        state = Containment.INSIDE
    elif margin <= tie:
        state = Containment.ON_BOUNDARY
    else:
        state = Containment.OUTSIDE
    return ContainmentResult(margin, state, True)


@dataclass(frozen=True)
class HoroFunctionalEstimate:
    value: float
    converged: bool
    last_increment: float


def _tail_extrapolate(indices: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Eliminate a c/nu tail: combine consecutive samples of L + c/nu into
    estimates of L.  Exact for that model; a no-op on constant sequences."""
    nu = np.asarray(indices, dtype=float)
    v = np.asarray(values, dtype=float)
    if v.shape[-1] < 2:
        return v
    num = nu[1:] * v[..., 1:] - nu[:-1] * v[..., :-1]
    return num / (nu[1:] - nu[:-1])


def _cauchy_tail(extr: np.ndarray, tol: float, window: int) -> tuple[bool, float]:
    if extr.shape[-1] < window + 1:
        return False, math.inf
    inc = np.abs(np.diff(extr))
    tail = inc[..., -window:]
    return bool(np.all(tail <= tol)), float(np.max(inc[..., -1]))


class HoroSeq:
    """Interior points marching to a boundary center, with cached rate data.

    Attributes: domain, center (snapped boundary point), indices (strictly
    increasing), points (len(indices), dim), alpha (per-coordinate weights,
    nan off the unimodular set; None before validation on product domains),
    alpha_converged, probe_status ("unvalidated" / "converged" / "failed").
    """

    def __init__(self, domain: DomainSpec, center, points, indices, generator=None):
        self.domain = domain
        self.center = snap_to_boundary(domain, center)
        pts = np.asarray(points, dtype=complex)
        if pts.ndim != 2 or pts.shape[1] != domain.dim:
            raise GeometryError("sequence points must have shape (count, dim)")
        idx = np.asarray(indices, dtype=float)
        if idx.ndim != 1 or idx.shape[0] != pts.shape[0]:
            raise GeometryError("indices must align with points")
        if np.any(np.diff(idx) <= 0):
            raise GeometryError("sequence indices must be strictly increasing")
        g = gauge(domain, pts)
        if np.any(g >= 1.0):
            raise GeometryError("sequence points must be interior")
        self.points = pts
        self.indices = idx
        self._generator = generator
        self.alpha: np.ndarray | None = None
        self.alpha_converged = False
        self.probe_status = "unvalidated"

    def point_at(self, nu: int) -> np.ndarray:
        if self._generator is None:
            pos = np.searchsorted(self.indices, nu)
            if pos >= len(self.indices) or self.indices[pos] != nu:
                raise GeometryError(f"index {nu} not part of the stored sequence")
            return self.points[pos]
        return np.asarray(self._generator(nu), dtype=complex)

    def validate(self, pole=None, probes=None, tol: float = TOL_LIMIT,
                 window: int = CAUCHY_WINDOW) -> "HoroSeq":
        """Estimate alpha weights (product domains) and run the functional
        convergence probe; caches results and returns self."""
        if self.domain.is_product:
            self.alpha, self.alpha_converged = _alpha_from_points(
                self.center, self.points, self.indices, tol, window)
        else:
            self.alpha = np.full(self.domain.dim, np.nan)
            self.alpha_converged = True
        pole = np.zeros(self.domain.dim, dtype=complex) if pole is None else check_dim(self.domain, pole)
        if probes is None:
            probes = default_probe_grid(self.domain)
        ok = True
        for z in probes:
            est = estimate_functional(self.domain, pole, self, z, tol=tol, window=window)
            ok = ok and est.converged
        self.probe_status = "converged" if (ok and self.alpha_converged) else "failed"
        return self


def default_probe_grid(d: DomainSpec) -> np.ndarray:
    """Real 9-point probe grid in the first two coordinates (3 points for
    one-dimensional domains)."""
    vals = np.array([-0.5, 0.0, 0.5])
    if d.dim == 1:
        return vals[:, None].astype(complex)
    a, b = np.meshgrid(vals, vals, indexing="ij")
    grid = np.zeros((9, d.dim), dtype=complex)
    grid[:, 0] = a.ravel()
    grid[:, 1] = b.ravel()
    if not d.is_product:
        grid *= 0.9  # keep the corner probes inside the unit ball
    return grid


def make_radial_seq(d: DomainSpec, xi, schedule=DEFAULT_SCHEDULE, validate: bool = True) -> HoroSeq:
    """The radial sequence x_nu = (1 - 1/nu)^(1/2) * xi."""
    xi = snap_to_boundary(d, xi)
    idx = np.asarray(schedule, dtype=float)
    pts = np.sqrt(1.0 - 1.0 / idx)[:, None] * xi[None, :]
    seq = HoroSeq(d, xi, pts, idx, generator=lambda nu: math.sqrt(1.0 - 1.0 / nu) * xi)
    return seq.validate() if validate else seq


def make_rate_seq(d: DomainSpec, xi, rate_factors, schedule=DEFAULT_SCHEDULE,
                  validate: bool = True) -> HoroSeq:
    """Per-coordinate approach rates: x_{nu,j} = (1 - 1/(c_j nu))^(1/2) xi_j.

    rate_factors c_j >= 1 slow coordinate j down by that factor; c = 1
    reproduces the radial sequence.
    """
    xi = snap_to_boundary(d, xi)
    c = np.asarray(rate_factors, dtype=float)
    if c.shape != (d.dim,) or np.any(c < 1.0):
        raise GeometryError("rate factors must be >= 1, one per coordinate")
    idx = np.asarray(schedule, dtype=float)
    pts = np.sqrt(1.0 - 1.0 / (c[None, :] * idx[:, None])) * xi[None, :]
    gen = lambda nu: np.sqrt(1.0 - 1.0 / (c * nu)) * xi
    seq = HoroSeq(d, xi, pts, idx, generator=gen)
    return seq.validate() if validate else seq


def seq_from_trace(d: DomainSpec, center, points, indices, validate: bool = True) -> HoroSeq:
    """Wrap an explicit point trace (e.g. damped fixed points) as a HoroSeq."""
    seq = HoroSeq(d, center, points, indices)
    return seq.validate() if validate else seq


# ---------------------------------------------------------------------------
# limit estimation


def estimate_functional(d: DomainSpec, z0, seq: HoroSeq, z,
                        tol: float = TOL_LIMIT, window: int = CAUCHY_WINDOW) -> HoroFunctionalEstimate:
    """Estimate lim [k(z, x_nu) - k(z0, x_nu)] along the sequence samples.

    Raw values carry a c/nu tail on these schedules, so convergence is
    judged on tail-extrapolated values (exact for the c/nu model); the
    estimate is the last extrapolant.
    """
    z0 = check_dim(d, z0)
    z = check_dim(d, z)
    for name, p in (("pole", z0), ("probe", z)):
        if gauge(d, p) >= 1.0:
            raise GeometryError(f"{name} must be interior")
    vals = kobayashi(d, z[None, :], seq.points) - kobayashi(d, z0[None, :], seq.points)
    extr = _tail_extrapolate(seq.indices, vals)
    converged, last_inc = _cauchy_tail(extr, tol, window)
    return HoroFunctionalEstimate(float(extr[-1]), converged, last_inc)


def _alpha_from_points(center, points, indices, tol, window):
    """Weights alpha_j = lim min_h (1-|x_h|^2)/(1-|x_j|^2) per unimodular
    coordinate of the center; nan elsewhere.  Returns (alpha, converged)."""
    hot = mod1_coords(center)
    depth = 1.0 - np.abs(points) ** 2  # (M, n)
    alpha = np.full(points.shape[1], np.nan)
    if hot.size == 0:
        raise GeometryError("sequence center has no unimodular coordinate")
    converged = True
    ratios = np.min(depth[:, None, :], axis=2) / depth  # (M, n): min_h depth_h / depth_j
    for j in hot:
        extr = _tail_extrapolate(indices, ratios[:, j])
        ok, _ = _cauchy_tail(extr, tol, window)
        converged = converged and ok
        alpha[j] = min(max(float(extr[-1]), 0.0), 1.0)
    return alpha, converged


def alpha_weights(seq: HoroSeq, xi=None, tol: float = TOL_LIMIT,
                  window: int = CAUCHY_WINDOW) -> np.ndarray:
    """Estimated alpha weights of a product-domain sequence toward xi.

    Raises ConvergenceError when a ratio fails its Cauchy window.
    """
    if not seq.domain.is_product:
        raise GeometryError("alpha weights are defined for product domains")
    center = seq.center if xi is None else snap_to_boundary(seq.domain, xi)
    alpha, ok = _alpha_from_points(center, seq.points, seq.indices, tol, window)
    if not ok:
        raise ConvergenceError("alpha ratio estimates did not converge")
    return alpha


# ---------------------------------------------------------------------------
# horosphere specifications


class HoroKind(enum.Enum):
    SMALL = "small"
    LARGE = "large"
    SEQUENCE = "sequence"


@dataclass(frozen=True, eq=False)
class HorosphereSpec:
    domain: DomainSpec
    pole: np.ndarray
    center: np.ndarray
    radius: float
    kind: HoroKind
    seq: HoroSeq | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "pole", check_dim(self.domain, self.pole))
        if not classify(self.domain, self.pole).is_interior:
            raise GeometryError("horosphere pole must be interior")
        object.__setattr__(self, "center", snap_to_boundary(self.domain, self.center))
        if not self.radius > 0:
            raise GeometryError("horosphere radius must be positive")
        if self.kind is HoroKind.SEQUENCE:
            if self.seq is None:
                raise GeometryError("sequence horosphere needs a HoroSeq")
            if self.seq.domain != self.domain:
                raise GeometryError("sequence domain mismatch")
            if np.linalg.norm(self.seq.center - self.center) > 1e-7:
                raise GeometryError("sequence center differs from horosphere center")
        elif self.seq is not None:
            raise GeometryError("only sequence horospheres carry a HoroSeq")
        object.__setattr__(self, "_cache", {})

    # -- construction helpers

    @staticmethod
    def small(d: DomainSpec, pole, center, radius: float) -> "HorosphereSpec":
        return HorosphereSpec(d, cpoint(pole), cpoint(center), radius, HoroKind.SMALL)

    @staticmethod
    def large(d: DomainSpec, pole, center, radius: float) -> "HorosphereSpec":
        return HorosphereSpec(d, cpoint(pole), cpoint(center), radius, HoroKind.LARGE)

    @staticmethod
    def sequence(d: DomainSpec, pole, seq: HoroSeq, radius: float) -> "HorosphereSpec":
        if seq.probe_status == "unvalidated":
            seq.validate()
        return HorosphereSpec(d, cpoint(pole), seq.center.copy(), radius, HoroKind.SEQUENCE, seq)

    # -- transported pole-at-origin data (product domains)

    def _product_data(self):
        cache = object.__getattribute__(self, "_cache")
        if "product" not in cache:
            at_origin = bool(np.all(self.pole == 0))
            if at_origin:
                center = self.center
                alpha, alpha_ok = None, True
                if self.kind is HoroKind.SEQUENCE:
                    if self.seq.alpha is None:
                        self.seq.validate()
                    alpha, alpha_ok = self.seq.alpha, self.seq.alpha_converged
            else:
                center = mobius_translate(self.pole, self.center, allow_boundary=True)
                alpha, alpha_ok = None, True
                if self.kind is HoroKind.SEQUENCE:
                    moved = mobius_translate(self.pole[None, :], self.seq.points)
                    alpha, alpha_ok = _alpha_from_points(
                        center, moved, self.seq.indices, TOL_LIMIT, CAUCHY_WINDOW)
            hot = mod1_coords(center)
            if hot.size == 0:
                raise GeometryError("horosphere center has no unimodular coordinate")
            cache["product"] = (center, hot, alpha, alpha_ok)
        return cache["product"]


def small_horosphere(d, pole, center, radius):
    return HorosphereSpec.small(d, pole, center, radius)


def large_horosphere(d, pole, center, radius):
    return HorosphereSpec.large(d, pole, center, radius)


def sequence_horosphere(d, pole, seq, radius):
    return HorosphereSpec.sequence(d, pole, seq, radius)


# ---------------------------------------------------------------------------
# margins


def _log_terms(center: np.ndarray, hot: np.ndarray, z: np.ndarray) -> np.ndarray:
    """log of |xi_j - z_j|^2 / (1 - |z_j|^2) per unimodular coordinate j,
    stable arbitrarily close to the boundary; z has shape (N, n)."""
    zj = z[:, hot]
    xij = center[hot]
    num = np.abs(xij[None, :] - zj)
    az2 = zj.real**2 + zj.imag**2
    return 2.0 * np.log(np.maximum(num, 1e-300)) - np.log1p(-az2)


def _functional_product(h: HorosphereSpec, z: np.ndarray) -> tuple[np.ndarray, bool]:
    center, hot, alpha, alpha_ok = h._product_data()
    if not bool(np.all(h.pole == 0)):
        z = mobius_translate(h.pole[None, :], z)
    terms = _log_terms(center, hot, z)
    if h.kind is HoroKind.SMALL:
        return 0.5 * np.max(terms, axis=1), True
    if h.kind is HoroKind.LARGE:
        return 0.5 * np.min(terms, axis=1), True
    la = np.log(np.maximum(alpha[hot], 1e-300))[None, :]
    return 0.5 * np.max(terms + la, axis=1), alpha_ok


def _functional_ball(h: HorosphereSpec, z: np.ndarray) -> np.ndarray:
    # limit of k(z, w) - k(z0, w) as w -> x in the ball; all kinds coincide
    x = h.center
    def busemann(p):
        inner = np.sum(p * np.conj(x[None, :]), axis=-1)
        n2 = np.sum(p.real**2 + p.imag**2, axis=-1)
        return 0.5 * (2.0 * np.log(np.abs(1.0 - inner)) - np.log1p(-n2))
    return busemann(z) - busemann(h.pole[None, :])


def horosphere_margin(h: HorosphereSpec, z) -> tuple[np.ndarray, bool]:
    """Signed margins (functional - 0.5*log R) for a batch of interior
    points of shape (N, dim); negative means inside."""
    z = np.asarray(z, dtype=complex)
    single = z.ndim == 1
    if single:
        z = z[None, :]
    if z.shape[-1] != h.domain.dim:
        raise GeometryError("point batch dimension mismatch")
    if np.any(np.asarray(gauge(h.domain, z)) >= 1.0):
        raise GeometryError("membership probes must be interior")
    if h.domain.is_product:
        f, ok = _functional_product(h, z)
    else:
        f, ok = _functional_ball(h, z), True
    margins = f - 0.5 * math.log(h.radius)
    return (margins[0] if single else margins), ok


def _contains(h: HorosphereSpec, z, kind: HoroKind) -> ContainmentResult:
    if h.kind is not kind:
        raise GeometryError(f"expected a {kind.value} horosphere, got {h.kind.value}")
    margin, ok = horosphere_margin(h, cpoint(z))
    return classify_margin(float(margin), ok)


def small_contains(h: HorosphereSpec, z) -> ContainmentResult:
    return _contains(h, z, HoroKind.SMALL)


def large_contains(h: HorosphereSpec, z) -> ContainmentResult:
    return _contains(h, z, HoroKind.LARGE)


def sequence_contains(h: HorosphereSpec, z) -> ContainmentResult:
    return _contains(h, z, HoroKind.SEQUENCE)


# ---------------------------------------------------------------------------
# subsequence extraction


def extract_horosphere_subsequence(
    d: DomainSpec, points, indices=None, pole=None, probes=None,
    tol: float = TOL_LIMIT, window: int = CAUCHY_WINDOW, max_starts: int = 4,
) -> HoroSeq:
    """Greedily extract a horosphere subsequence from a raw boundary-bound
    sequence: keep indices whose functional moves stay inside a geometrically
    shrinking band on every probe at once.  Retries from the first few start
    offsets; raises ConvergenceError when no start yields a Cauchy tail.
    """
    pts = np.asarray(points, dtype=complex)
    if pts.ndim != 2 or pts.shape[0] < window + 3:
        raise GeometryError("need a 2-D stack with a handful of points")
    idx = np.arange(1, pts.shape[0] + 1, dtype=float) if indices is None else np.asarray(indices, dtype=float)
    g = gauge(d, pts)
    if np.any(g >= 1.0):
        raise GeometryError("raw sequence points must be interior")
    if g[-1] < 1.0 - 1e-3:
        raise GeometryError("raw sequence does not approach the boundary")
    center = snap_to_boundary(d, pts[-1] / g[-1], tol=1e-2)
    pole = np.zeros(d.dim, dtype=complex) if pole is None else check_dim(d, pole)
    if probes is None:
        probes = default_probe_grid(d)
    probes = np.asarray(probes, dtype=complex)

    # functional samples, one row per sequence point, one column per probe
    kz = np.stack([kobayashi(d, p[None, :], pts) for p in probes], axis=1)
    k0 = kobayashi(d, pole[None, :], pts)[:, None]
    fvals = kz - k0

    m = pts.shape[0]
    for start in range(min(max_starts, m - window - 2)):
        # calibrate the 1/nu tail model c*(1/nu_a - 1/nu_b) on the first pair,
        # then accept moves staying within twice that model
        sel = [start, start + 1]
        gap0 = 1.0 / idx[start] - 1.0 / idx[start + 1]
        c_est = float(np.max(np.abs(fvals[start + 1] - fvals[start]))) / gap0
        for i in range(start + 2, m):
            a = sel[-1]
            dev = float(np.max(np.abs(fvals[i] - fvals[a])))
            band = 2.0 * c_est * (1.0 / idx[a] - 1.0 / idx[i]) + 8.0 * tol
            if dev <= band:
                sel.append(i)
        if len(sel) < window + 2:
            continue
        seq = HoroSeq(d, center, pts[sel], idx[sel])
        seq.validate(pole=pole, probes=probes, tol=tol, window=window)
        if seq.probe_status == "converged":
            return seq
    raise ConvergenceError("no start offset produced a Cauchy horosphere subsequence")


# ---------------------------------------------------------------------------
# boundary intersection descriptors


def boundary_intersection_descr(h: HorosphereSpec, hull: str = "Ch"):
    """Descriptor for the hull of (closure of h) intersected with the domain
    boundary.

    hull is "ch" (one-sided boundary-segment hull), "Ch" (complex supporting
    hyperplane hull) or "none" (the raw trace).  On these domains ch and Ch
    agree on the relevant sets.  The raw polydisk trace is not descriptor
    representable and raises.
    """
    from .geometry import (
        CoordinateSlab,
        SetUnion,
        SinglePoint,
        WholeBoundary,
    )

    if hull not in ("ch", "Ch", "none"):
        raise GeometryError(f"unknown hull flavor {hull!r}")
    d = h.domain
    if not d.is_product:
        return SinglePoint(h.center)
    if hull == "none":
        raise GeometryError(
            "raw polydisk horosphere traces are not representable; request ch or Ch")
    center, hot, _, _ = h._product_data()
    if not bool(np.all(h.pole == 0)):
        # hulls are computed for the untransported center seen from the pole
        center = h.center
        hot = mod1_coords(center)
    if h.kind is HoroKind.LARGE:
        if hot.size >= 2:
            return WholeBoundary(d)
        j0 = int(hot[0])
        members = [CoordinateSlab(d.dim, pins=((j0, complex(center[j0])),))]
        members += [CoordinateSlab(d.dim, circles=(j,)) for j in range(d.dim) if j != j0]
        return members[0] if len(members) == 1 else SetUnion(members)
    members = []
    for j in range(d.dim):
        if j in set(int(k) for k in hot):
            members.append(CoordinateSlab(d.dim, pins=((j, complex(center[j])),)))
        else:
            members.append(CoordinateSlab(d.dim, circles=(j,)))
    return members[0] if len(members) == 1 else SetUnion(members)
