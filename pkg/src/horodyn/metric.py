"""Kobayashi distance on the supported convex domains.

Closed forms: the Poincare distance on the unit disk, its coordinate-max
extension to polydisks, and the Euclidean-ball formula.  All distances are on
the 0.5*log scale (arctanh of the Mobius-invariant modulus).

`bounds` provides an independent numerical sandwich for cross-checking the
closed forms: an upper bound from the Poincare distance of an analytic disk
inside the complex-line slice through the two points, and a lower bound from
distances of images under linear maps into the unit disk.  On these domains
both bounds are tight in well-understood configurations, but the contract is
only lower <= kobayashi <= upper up to TOL_BOUNDS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    DomainSpec,
    DimensionMismatch,
    GeometryError,
    check_dim,
    gauge,
)

TOL_BOUNDS = 1e-6  # slack for the optimization-based bounds oracle
DEFAULT_DIRECTIONS = 256  # linear-functional sweep size for lower bounds
GOLDEN_ITERS = 64  # golden-section refinement budget for the upper bound

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _abs2(a: np.ndarray) -> np.ndarray:
    return a.real * a.real + a.imag * a.imag


def poincare(zeta, eta) -> float | np.ndarray:
    """Poincare distance on the unit disk, elementwise on arrays.

    Evaluated as log(A + B) - 0.5*log(1-|zeta|^2) - 0.5*log(1-|eta|^2) with
    A = |1 - conj(zeta)*eta| and B = |eta - zeta|, which is exact at equal
    arguments and cancellation-stable near the boundary.
    """
    z = np.asarray(zeta, dtype=complex)
    e = np.asarray(eta, dtype=complex)
    az2 = _abs2(z)
    ae2 = _abs2(e)
    if np.any(az2 >= 1.0) or np.any(ae2 >= 1.0):
        raise GeometryError("poincare arguments must lie in the open unit disk")
    a = np.abs(1.0 - np.conj(z) * e)
    b = np.abs(e - z)
    out = np.maximum(np.log(a + b) - 0.5 * np.log1p(-az2) - 0.5 * np.log1p(-ae2), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def mobius_translate(z, w, *, allow_boundary: bool = False) -> np.ndarray:
    """Componentwise disk automorphism w_j -> (w_j - z_j)/(1 - conj(z_j) w_j).

    Maps z to the origin; the base point z must be strictly inside the
    polydisk.  With allow_boundary=True the second argument may have
    unimodular coordinates (the automorphism extends continuously there,
    preserving each coordinate's modulus class).
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if np.any(np.abs(z) >= 1.0):
        raise GeometryError("mobius base point must lie in the open polydisk")
    aw = np.abs(w)
    if np.any(aw > 1.0 + 1e-12) or (not allow_boundary and np.any(aw >= 1.0)):
        raise GeometryError("mobius argument must lie in the polydisk")
    return (w - z) / (1.0 - np.conj(z) * w)


def _require_interior(d: DomainSpec, p: np.ndarray, name: str) -> None:
    g = np.asarray(gauge(d, p))
    if np.any(g >= 1.0):
        raise GeometryError(f"{name} must be strictly inside the domain (gauge >= 1 found)")


def _ball_mobius_norm(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Norm of the ball Mobius transform phi_z(w); accurate for moderate
    separations."""
    nz2 = np.sum(_abs2(z), axis=-1)
    inner = np.sum(w * np.conj(z), axis=-1)  # <w, z>
    sz = np.sqrt(np.maximum(1.0 - nz2, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = np.where(nz2 > 0.0, inner / np.where(nz2 > 0.0, nz2, 1.0), 0.0)
    proj = alpha[..., None] * z
    orth = w - proj
    num = z - proj - sz[..., None] * orth
    den = 1.0 - inner
    vec = num / den[..., None]
    out = np.linalg.norm(vec, axis=-1)
    # z = 0 reduces to phi_0(w) = -w
    return np.where(nz2 > 0.0, out, np.linalg.norm(w, axis=-1))


def kobayashi(d: DomainSpec, z, w) -> float | np.ndarray:
    """Kobayashi distance on d; accepts stacked points of shape (..., dim).

    Product domains: max over coordinates of the Poincare distance.  Ball:
    arctanh of the Mobius-invariant modulus t, evaluated through
    log(1+t) + log|1-<w,z>| - 0.5*log(1-|z|^2) - 0.5*log(1-|w|^2) with
    1 - t^2 taken from the product identity near the boundary.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if z.ndim == 0 or z.shape[-1] != d.dim or w.ndim == 0 or w.shape[-1] != d.dim:
        if d.dim == 1:
            z = z.reshape(z.shape + (1,))
            w = w.reshape(w.shape + (1,))
        else:
            raise DimensionMismatch("point batches must end in the domain dimension")
    _require_interior(d, z, "first argument")
    _require_interior(d, w, "second argument")
    if d.is_product:
        out = np.max(poincare(z, w), axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    nz2 = np.sum(_abs2(z), axis=-1)
    nw2 = np.sum(_abs2(w), axis=-1)
    inner = np.sum(w * np.conj(z), axis=-1)
    a = np.abs(1.0 - inner)
    s2 = (1.0 - nz2) * (1.0 - nw2) / (a * a)
    t_near = np.sqrt(np.maximum(1.0 - s2, 0.0))
    t_far = _ball_mobius_norm(np.broadcast_to(z, np.broadcast_shapes(z.shape, w.shape)),
                              np.broadcast_to(w, np.broadcast_shapes(z.shape, w.shape)))
    t = np.where(s2 <= 0.5, t_near, t_far)
    out = np.log1p(t) + np.log(a) - 0.5 * np.log1p(-nz2) - 0.5 * np.log1p(-nw2)
    out = np.maximum(out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def kobayashi_ball_contains(d: DomainSpec, z0, r: float, z) -> bool:
    """Is z inside the open Kobayashi ball of center z0 and radius r?"""
    if r < 0:
        raise GeometryError("Kobayashi ball radius must be nonnegative")
    return bool(kobayashi(d, check_dim(d, z0), check_dim(d, z)) < r)


# ---------------------------------------------------------------------------
# numerical bounds oracle


@dataclass(frozen=True)
class BoundsPair:
    lower: float
    upper: float


def _line_disks(d: DomainSpec, z: np.ndarray, w: np.ndarray):
    """Constraint disks in the t-plane of the slice t -> z + t*(w - z).

    Returns (centers, radii); for the ball a single disk (the slice itself),
    for product domains one disk per coordinate with w_j != z_j.
    """
    dvec = w - z
    if d.is_product:
        centers, radii = [], []
        for j in range(d.dim):
            dj = dvec[j]
            if abs(dj) < 1e-15:
                continue
            centers.append(-z[j] / dj)
            radii.append(1.0 / abs(dj))
        return np.array(centers), np.array(radii)
    nd2 = float(np.sum(_abs2(dvec)))
    beta = complex(np.sum(dvec * np.conj(z)))  # <d, z>
    c0 = -np.conj(beta) / nd2
    r0 = math.sqrt(max((1.0 - float(np.sum(_abs2(z)))) / nd2 + abs(c0) ** 2, 0.0))
    return np.array([c0]), np.array([r0])


def _inscribed_value(c: complex, centers: np.ndarray, radii: np.ndarray) -> float:
    """Poincare distance between t=0 and t=1 in the largest disk centered at
    c inside all constraint disks; inf if that disk misses 0 or 1."""
    rho = float(np.min(radii - np.abs(c - centers)))
    if rho <= max(abs(c), abs(1.0 - c)) * (1.0 + 1e-12) + 1e-300:
        return math.inf
    return float(poincare(-c / rho, (1.0 - c) / rho))


def _golden_line(f, x0: float, x1: float, iters: int) -> float:
    a, b = x0, x1
    c = b - _GOLDEN * (b - a)
    d_ = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d_)
    for _ in range(iters):
        if fc <= fd:
            b, d_, fd = d_, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d_, fd
            d_ = a + _GOLDEN * (b - a)
            fd = f(d_)
    return c if fc <= fd else d_


def _upper_bound(d: DomainSpec, z: np.ndarray, w: np.ndarray, budget: int) -> float:
    centers, radii = _line_disks(d, z, w)
    if centers.size == 0:
        return 0.0
    if centers.size == 1:
        # the slice is a single disk: its Poincare distance is exact
        return _inscribed_value(complex(centers[0]), centers, radii)
    best_c = complex(centers[0])
    best = _inscribed_value(best_c, centers, radii)
    for cand in list(centers) + [0.5 + 0.0j]:
        val = _inscribed_value(complex(cand), centers, radii)
        if val < best:
            best, best_c = val, complex(cand)
    span = float(np.max(radii))
    half = max(budget // 2, 1)
    re = _golden_line(
        lambda x: _inscribed_value(complex(x, best_c.imag), centers, radii),
        best_c.real - span, best_c.real + span, half)
    best_c = complex(re, best_c.imag)
    im = _golden_line(
        lambda y: _inscribed_value(complex(best_c.real, y), centers, radii),
        best_c.imag - span, best_c.imag + span, half)
    cand_c = complex(best_c.real, im)
    val = _inscribed_value(cand_c, centers, radii)
    best = min(best, val)
    if math.isfinite(best):
        return best
    return _chained_upper(centers, radii)


def _chained_upper(centers: np.ndarray, radii: np.ndarray) -> float:
    """Fallback when no single inscribed disk covers both t=0 and t=1: sum
    disk distances along a subdivision of the segment (valid by the triangle
    inequality; the slice region is convex and contains the segment)."""
    for pieces in (2, 4, 8, 16, 32, 64):
        ts = np.linspace(0.0, 1.0, pieces + 1)
        total = 0.0
        for a, b in zip(ts[:-1], ts[1:]):
            c = 0.5 * (a + b)
            rho = float(np.min(radii - np.abs(c - centers)))
            if rho <= 0.5 * (b - a) * (1.0 + 1e-12):
                total = math.inf
                break
            total += float(poincare((a - c) / rho, (b - c) / rho))
        if math.isfinite(total):
            return total
    return math.inf


def _direction_family(d: DomainSpec, z: np.ndarray, w: np.ndarray, count: int) -> np.ndarray:
    """Deterministic family of directions u for linear lower-bound
    functionals, including the adapted directions along z, w and w - z."""
    n = d.dim
    rows = [np.eye(n, dtype=complex)[j] for j in range(n)]
    for vec in (w - z, z, w):
        nv = float(np.linalg.norm(vec))
        if nv > 1e-15:
            rows.append(vec / nv)
    if n == 2:
        m = max(int(math.isqrt(count)), 2)
        theta = np.linspace(0.0, 0.5 * np.pi, m)
        phi = np.linspace(0.0, 2.0 * np.pi, m, endpoint=False)
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        sweep = np.stack([np.cos(tt), np.sin(tt) * np.exp(1j * pp)], axis=-1)
        rows.extend(sweep.reshape(-1, 2))
    elif n > 2:
        rng = np.random.Generator(np.random.Philox(12345))  # fixed enumeration
        vecs = rng.normal(size=(count, 2 * n)).view(complex)
        rows.extend(vecs / np.linalg.norm(vecs, axis=1, keepdims=True))
    return np.asarray(rows)


def _lower_bound(d: DomainSpec, z: np.ndarray, w: np.ndarray, count: int) -> float:
    dirs = _direction_family(d, z, w, count)
    sz = dirs @ np.conj(z)
    sw = dirs @ np.conj(w)
    if d.is_product:
        scale = np.sum(np.abs(dirs), axis=1)
    else:
        scale = np.linalg.norm(dirs, axis=1)
    scale = np.maximum(scale, 1e-300)
    vals = poincare(sz / scale * (1.0 - 1e-15), sw / scale * (1.0 - 1e-15))
    return float(np.max(vals))


def bounds(
    d: DomainSpec,
    z,
    w,
    budget: int = GOLDEN_ITERS,
    directions: int = DEFAULT_DIRECTIONS,
) -> BoundsPair:
    """Numerical lower/upper sandwich for the Kobayashi distance.

    The upper bound is the Poincare distance of an analytic disk inscribed in
    the complex-line slice through z and w (golden-section refinement over
    the disk center, `budget` iterations); the lower bound is the best disk
    distance of the images under a family of linear maps into the disk
    (coordinate projections plus a swept family of `directions` unit
    directions).  Both are valid one-sided bounds irrespective of the
    optimization quality.
    """
    if budget < 1:
        raise GeometryError("bounds budget must be >= 1")
    z = check_dim(d, z)
    w = check_dim(d, w)
    _require_interior(d, z, "first argument")
    _require_interior(d, w, "second argument")
    if np.array_equal(z, w):
        return BoundsPair(0.0, 0.0)
    return BoundsPair(_lower_bound(d, z, w, directions), _upper_bound(d, z, w, budget))


# ---------------------------------------------------------------------------
# batched convexity estimates


@dataclass(frozen=True)
class ViolationReport:
    """Outcome of a batched inequality check."""

    total: int
    failures: int
    worst_excess: float
    indices: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return self.failures == 0


def _report(excess: np.ndarray, tol: float) -> ViolationReport:
    bad = np.flatnonzero(excess > tol)
    worst = float(np.max(excess)) if excess.size else 0.0
    return ViolationReport(int(excess.size), int(bad.size), worst, tuple(int(i) for i in bad[:20]))


def convexity_combination_check(
    d: DomainSpec, z1, z2, w1, w2, s, tol: float = 1e-9
) -> ViolationReport:
    """Check k(s*z1+(1-s)*w1, s*z2+(1-s)*w2) <= max(k(z1,z2), k(w1,w2)) on a
    batch; all point arguments have shape (N, dim), s has shape (N,)."""
    s = np.asarray(s, dtype=float)[:, None]
    lhs = kobayashi(d, s * z1 + (1.0 - s) * w1, s * z2 + (1.0 - s) * w2)
    rhs = np.maximum(kobayashi(d, z1, z2), kobayashi(d, w1, w2))
    return _report(lhs - rhs, tol)


def segment_parameter_check(
    d: DomainSpec, z, w, s, t, tol: float = 1e-9
) -> ViolationReport:
    """Check k(s*z+(1-s)*w, t*z+(1-t)*w) <= k(z, w) on a batch."""
    s = np.asarray(s, dtype=float)[:, None]
    t = np.asarray(t, dtype=float)[:, None]
    lhs = kobayashi(d, s * z + (1.0 - s) * w, t * z + (1.0 - t) * w)
    rhs = kobayashi(d, z, w)
    return _report(lhs - rhs, tol)
