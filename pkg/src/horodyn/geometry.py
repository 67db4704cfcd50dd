"""Bounded convex domains and their boundary geometry.

Three domains are supported: the unit disk, the unit polydisk (product of
disks, max gauge) and the Euclidean unit ball.  Points of C^n are plain 1-D
complex numpy arrays; public functions accept array-likes and normalize them
through :func:`cpoint`.

Boundary subsets produced by the hull operators are represented by a small
descriptor algebra (single point, coordinate slab, union, intersection,
whole boundary) supporting exact Euclidean distance queries.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

BOUNDARY_TOL = 1e-9  # half-width of the boundary classification band


class GeometryError(ValueError):
    """Invalid point, domain or descriptor operation."""


class DimensionMismatch(GeometryError):
    """Point dimension does not match the domain dimension."""


# ---------------------------------------------------------------------------
# domains and points


class DomainKind(enum.Enum):
    UNIT_DISK = "unit_disk"
    POLYDISK = "polydisk"
    UNIT_BALL = "unit_ball"


@dataclass(frozen=True)
class DomainSpec:
    """A bounded convex domain: kind plus complex dimension."""

    kind: DomainKind
    dim: int

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise GeometryError(f"domain dimension must be >= 1, got {self.dim}")
        if self.kind is DomainKind.UNIT_DISK and self.dim != 1:
            raise GeometryError("the unit disk is one dimensional")

    @property
    def is_product(self) -> bool:
        """True for the disk/polydisk family (per-coordinate max gauge)."""
        return self.kind in (DomainKind.UNIT_DISK, DomainKind.POLYDISK)


def unit_disk() -> DomainSpec:
    return DomainSpec(DomainKind.UNIT_DISK, 1)


def polydisk(dim: int) -> DomainSpec:
    return DomainSpec(DomainKind.POLYDISK, dim)


def unit_ball(dim: int) -> DomainSpec:
    return DomainSpec(DomainKind.UNIT_BALL, dim)


def cpoint(coords) -> np.ndarray:
    """Normalize an array-like of complex coordinates to a 1-D complex array.

    Raises GeometryError for empty or non-finite input.  Scalars become
    one-dimensional points.
    """
    arr = np.atleast_1d(np.asarray(coords, dtype=complex))
    if arr.ndim != 1 or arr.size == 0:
        raise GeometryError(f"expected a 1-D point, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("point has non-finite coordinates")
    return arr


def check_dim(d: DomainSpec, p: np.ndarray) -> np.ndarray:
    p = cpoint(p)
    if p.shape[0] != d.dim:
        raise DimensionMismatch(
            f"point has dimension {p.shape[0]}, domain has dimension {d.dim}"
        )
    return p


def gauge(d: DomainSpec, p) -> float | np.ndarray:
    """Minkowski gauge of p: max coordinate modulus (product domains) or
    Euclidean norm (ball).  Accepts stacked points of shape (..., dim); for
    one-dimensional domains bare scalars/arrays are taken elementwise."""
    arr = np.asarray(p, dtype=complex)
    if arr.ndim > 0 and arr.shape[-1] == d.dim:
        if d.is_product:
            out = np.max(np.abs(arr), axis=-1)
        else:
            out = np.linalg.norm(arr, axis=-1)
    elif d.dim == 1:
        out = np.abs(arr)
    else:
        raise DimensionMismatch(
            f"point batch of shape {arr.shape} does not end in dim {d.dim}"
        )
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# classification


class Membership(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


@dataclass(frozen=True)
class MembershipClass:
    """Classification of a point against a domain.

    margin is gauge(p) - 1: negative inside, positive outside, and the
    membership kind applies the tolerance band.
    """

    kind: Membership
    margin: float

    @property
    def is_interior(self) -> bool:
        return self.kind is Membership.INTERIOR


def classify(d: DomainSpec, p, tol: float = BOUNDARY_TOL) -> MembershipClass:
    """Classify p as interior / boundary / exterior with band half-width tol."""
    if tol <= 0:
        raise GeometryError("classification tolerance must be positive")
    margin = gauge(d, check_dim(d, p)) - 1.0
    if margin < -tol:
        kind = Membership.INTERIOR
    elif margin <= tol:
        kind = Membership.BOUNDARY
    else:
        kind = Membership.EXTERIOR
    return MembershipClass(kind, margin)


def snap_to_boundary(d: DomainSpec, p, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Rescale a point in the boundary band onto the exact unit boundary.

    Coordinates of product-domain points that sit in the modulus-1 band are
    additionally snapped to exact modulus 1, so closed-form horosphere data
    built from the result is clean.
    """
    p = check_dim(d, p)
    g = gauge(d, p)
    if abs(g - 1.0) > tol:
        raise GeometryError(f"point with gauge {g!r} is not within {tol} of the boundary")
    q = p / g
    if d.is_product:
        mods = np.abs(q)
        hot = mods >= 1.0 - tol
        q = np.where(hot, q / np.where(hot, mods, 1.0), q)
    return q


def mod1_coords(p, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Indices of coordinates with modulus 1 (within tol)."""
    arr = cpoint(p)
    return np.flatnonzero(np.abs(arr) >= 1.0 - tol)


# ---------------------------------------------------------------------------
# segments


def segment_point(x, y, s: float) -> np.ndarray:
    """Convex combination s*x + (1-s)*y for s in [0, 1]."""
    x = cpoint(x)
    y = cpoint(y)
    if x.shape != y.shape:
        raise DimensionMismatch("segment endpoints have different dimensions")
    if not 0.0 <= s <= 1.0:
        raise GeometryError(f"segment parameter {s} outside [0, 1]")
    return s * x + (1.0 - s) * y


def open_segment_in_boundary(d: DomainSpec, x, y, tol: float = BOUNDARY_TOL) -> bool:
    """Does the open segment between boundary points x and y stay in the boundary?

    For product domains this holds exactly when some coordinate is shared and
    unimodular; the ball is strictly convex so the answer is always False.
    Preconditions: x and y classify as Boundary and differ.
    """
    x = snap_to_boundary(d, x, tol)
    y = snap_to_boundary(d, y, tol)
    if np.linalg.norm(x - y) <= tol:
        raise GeometryError("segment endpoints coincide")
    if not d.is_product:
        return False
    shared = np.abs(x - y) <= tol
    unimod = np.abs(x) >= 1.0 - tol
    return bool(np.any(shared & unimod))


# ---------------------------------------------------------------------------
# boundary set descriptors


@dataclass(frozen=True)
class SinglePoint:
    """The singleton {point}."""

    point: tuple[complex, ...]

    def __init__(self, point) -> None:
        object.__setattr__(self, "point", tuple(complex(c) for c in cpoint(point)))

    @property
    def dim(self) -> int:
        return len(self.point)

    def distance(self, p) -> float:
        p = cpoint(p)
        if p.shape[0] != self.dim:
            raise DimensionMismatch("point dimension differs from descriptor")
        return float(np.linalg.norm(p - np.asarray(self.point)))

    def contains(self, p, tol: float = BOUNDARY_TOL) -> bool:
        return self.distance(p) <= tol


@dataclass(frozen=True)
class CoordinateSlab:
    """Product set in the closed polydisk: some coordinates pinned to
    unimodular values, some confined to the unit circle, the rest ranging
    over the closed unit disk.

    pins is a tuple of (index, value) with |value| = 1; circles is a tuple of
    indices.  At least one coordinate must be constrained, which keeps the
    set inside the boundary of the polydisk.
    """

    dim: int
    pins: tuple[tuple[int, complex], ...] = ()
    circles: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise GeometryError("slab dimension must be >= 1")
        seen: dict[int, complex] = {}
        norm_pins = []
        for j, v in self.pins:
            j = int(j)
            v = complex(v)
            if not 0 <= j < self.dim:
                raise GeometryError(f"pin index {j} out of range for dim {self.dim}")
            if abs(abs(v) - 1.0) > BOUNDARY_TOL:
                raise GeometryError(f"pinned value {v} is not unimodular")
            if j in seen:
                raise GeometryError(f"coordinate {j} pinned twice")
            seen[j] = v
            norm_pins.append((j, v / abs(v)))
        circles = tuple(sorted(int(j) for j in self.circles))
        for j in circles:
            if not 0 <= j < self.dim:
                raise GeometryError(f"circle index {j} out of range for dim {self.dim}")
            if j in seen:
                raise GeometryError(f"coordinate {j} both pinned and on a circle")
        if len(set(circles)) != len(circles):
            raise GeometryError("duplicate circle index")
        if not norm_pins and not circles:
            raise GeometryError("slab must constrain at least one coordinate")
        object.__setattr__(self, "pins", tuple(sorted(norm_pins)))
        object.__setattr__(self, "circles", circles)

    def distance(self, p) -> float:
        """Exact Euclidean distance: the set is a coordinate product, so
        squared distances add up per coordinate."""
        p = cpoint(p)
        if p.shape[0] != self.dim:
            raise DimensionMismatch("point dimension differs from descriptor")
        pinned = dict(self.pins)
        total = 0.0
        for j, c in enumerate(p):
            if j in pinned:
                total += abs(c - pinned[j]) ** 2
            elif j in self.circles:
                total += (abs(c) - 1.0) ** 2
            else:
                total += max(0.0, abs(c) - 1.0) ** 2
        return math.sqrt(total)

    def contains(self, p, tol: float = BOUNDARY_TOL) -> bool:
        return self.distance(p) <= tol


@dataclass(frozen=True)
class WholeBoundary:
    """The full topological boundary of a domain."""

    domain: DomainSpec

    def distance(self, p) -> float:
        p = check_dim(self.domain, p)
        if self.domain.is_product:
            mods = np.abs(p)
            if np.max(mods) >= 1.0:
                return float(np.sqrt(np.sum(np.maximum(mods - 1.0, 0.0) ** 2)))
            return float(1.0 - np.max(mods))
        return abs(float(np.linalg.norm(p)) - 1.0)

    def contains(self, p, tol: float = BOUNDARY_TOL) -> bool:
        return self.distance(p) <= tol


@dataclass(frozen=True)
class EmptySet:
    """The empty boundary set (e.g. an inconsistent intersection)."""

    def distance(self, p) -> float:
        cpoint(p)
        return math.inf

    def contains(self, p, tol: float = BOUNDARY_TOL) -> bool:
        return False


@dataclass(frozen=True)
class SetUnion:
    """Union of member descriptors; distance is the member minimum."""

    members: tuple

    def __init__(self, members) -> None:
        object.__setattr__(self, "members", tuple(members))
        if not self.members:
            raise GeometryError("union needs at least one member")

    def distance(self, p) -> float:
        return min(m.distance(p) for m in self.members)

    def contains(self, p, tol: float = BOUNDARY_TOL) -> bool:
        return self.distance(p) <= tol


@dataclass(frozen=True)
class SetIntersection:
    """Intersection of member descriptors.

    Members must be points, slabs or whole boundaries; the intersection is
    merged into a single point/slab (or EmptySet) so distances stay exact.
    """

    members: tuple
    _merged = None  # computed lazily, cached on first use

    def __init__(self, members) -> None:
        object.__setattr__(self, "members", tuple(members))
        if not self.members:
            raise GeometryError("intersection needs at least one member")

    def merged(self):
        cached = object.__getattribute__(self, "_merged")
        if cached is None:
            cached = _merge_intersection(self.members)
            object.__setattr__(self, "_merged", cached)
        return cached

    def distance(self, p) -> float:
        return self.merged().distance(p)

    def contains(self, p, tol: float = BOUNDARY_TOL) -> bool:
        return self.merged().contains(p, tol)


BoundarySetDescr = (
    SinglePoint | CoordinateSlab | WholeBoundary | EmptySet | SetUnion | SetIntersection
)


def _merge_intersection(members):
    flat = []
    for m in members:
        if isinstance(m, SetIntersection):
            flat.extend(m.members)
        else:
            flat.append(m)
    if any(isinstance(m, EmptySet) for m in flat):
        return EmptySet()
    if any(isinstance(m, SetUnion) for m in flat):
        raise GeometryError("union inside an intersection is not supported")

    points = [m for m in flat if isinstance(m, SinglePoint)]
    slabs = [m for m in flat if isinstance(m, CoordinateSlab)]
    wholes = [m for m in flat if isinstance(m, WholeBoundary)]

    if points:
        x = np.asarray(points[0].point)
        for other in points[1:]:
            if points[0].distance(other.point) > BOUNDARY_TOL:
                return EmptySet()
        for s in slabs + wholes:
            if not s.contains(x):
                return EmptySet()
        return points[0]

    if slabs:
        dim = slabs[0].dim
        if any(s.dim != dim for s in slabs):
            raise DimensionMismatch("intersection members have different dimensions")
        pins: dict[int, complex] = {}
        for s in slabs:
            for j, v in s.pins:
                if j in pins and abs(pins[j] - v) > BOUNDARY_TOL:
                    return EmptySet()
                pins.setdefault(j, v)
        circles = set()
        for s in slabs:
            circles.update(s.circles)
        circles -= set(pins)
        # any constrained slab already lies in the product-domain boundary,
        # so WholeBoundary members of a product domain are redundant here
        for w in wholes:
            if not w.domain.is_product:
                raise GeometryError("cannot intersect a slab with a non-product boundary")
        return CoordinateSlab(dim, tuple(pins.items()), tuple(sorted(circles)))

    if wholes:
        first = wholes[0]
        if any(w.domain != first.domain for w in wholes[1:]):
            raise GeometryError("cannot intersect boundaries of different domains")
        return first
    raise GeometryError("empty intersection member list")


# ---------------------------------------------------------------------------
# hulls of boundary points


def ch_set(d: DomainSpec, x, tol: float = BOUNDARY_TOL) -> BoundarySetDescr:
    """Boundary points joined to x by a boundary segment, together with x.

    For the ball (strictly convex) this is the singleton {x}.  For product
    domains it is the union, over unimodular coordinates j of x, of the slabs
    that pin coordinate j to x_j.
    """
    x = snap_to_boundary(d, x, tol)
    if not d.is_product:
        return SinglePoint(x)
    hot = mod1_coords(x, tol)
    if hot.size == 0:
        raise GeometryError("boundary point of a product domain with no unimodular coordinate")
    if d.dim == 1:
        return SinglePoint(x)
    members = [CoordinateSlab(d.dim, pins=((int(j), complex(x[j])),)) for j in hot]
    if len(members) == 1:
        return members[0]
    return SetUnion(members)


def Ch_set(d: DomainSpec, x, tol: float = BOUNDARY_TOL) -> BoundarySetDescr:
    """Boundary points whose unimodular coordinates all agree with x.

    Singleton for the ball; for product domains the slab pinning every
    unimodular coordinate of x (collapsing to {x} when all coordinates are
    unimodular).
    """
    x = snap_to_boundary(d, x, tol)
    if not d.is_product:
        return SinglePoint(x)
    hot = mod1_coords(x, tol)
    if hot.size == 0:
        raise GeometryError("boundary point of a product domain with no unimodular coordinate")
    if hot.size == d.dim:
        return SinglePoint(x)
    pins = tuple((int(j), complex(x[j])) for j in hot)
    return CoordinateSlab(d.dim, pins=pins)


# ---------------------------------------------------------------------------
# samplers (deterministic given an rng)


def sample_interior(
    d: DomainSpec, rng: np.random.Generator, count: int, max_gauge: float = 0.995
) -> np.ndarray:
    """Draw count interior points, shape (count, dim), gauge <= max_gauge."""
    if not 0 < max_gauge < 1:
        raise GeometryError("max_gauge must lie in (0, 1)")
    n = d.dim
    if d.is_product:
        r = max_gauge * np.sqrt(rng.uniform(size=(count, n)))
        theta = rng.uniform(0.0, 2.0 * np.pi, size=(count, n))
        return r * np.exp(1j * theta)
    vec = rng.normal(size=(count, 2 * n)).view(complex)
    norms = np.linalg.norm(vec, axis=1, keepdims=True)
    radii = max_gauge * rng.uniform(size=(count, 1)) ** (1.0 / (2 * n))
    return vec / norms * radii


def sample_boundary(
    d: DomainSpec, rng: np.random.Generator, count: int, pinned: int = 1
) -> np.ndarray:
    """Draw count boundary points, shape (count, dim).

    For product domains exactly `pinned` random coordinates per point are
    placed on the unit circle and the rest drawn from the open disk; for the
    ball points are uniform on the unit sphere.
    """
    n = d.dim
    if d.is_product:
        if not 1 <= pinned <= n:
            raise GeometryError(f"pinned count {pinned} out of range 1..{n}")
        mods = 0.95 * np.sqrt(rng.uniform(size=(count, n)))
        for i in range(count):
            hot = rng.choice(n, size=pinned, replace=False)
            mods[i, hot] = 1.0
        theta = rng.uniform(0.0, 2.0 * np.pi, size=(count, n))
        return mods * np.exp(1j * theta)
    vec = rng.normal(size=(count, 2 * n)).view(complex)
    return vec / np.linalg.norm(vec, axis=1, keepdims=True)
