"""Stationary points of the discriminant and the closed-form global
structure of the spectrum: petal, bouquet, and flower counts, plus the
winding-integral band count for a traced petal."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import cpoly
from .boundary import BoundaryCurve, RegionLocation, curve_distance, locate
from .cpoly import Polynomial
from .errors import InsufficientSampling, OnBoundaryAmbiguous

DEFAULT_STRUCTURE_TOL = 1e-7


@dataclass(frozen=True)
class StationaryPoint:
    """A zero of P' with its vanishing order, image under P, and the image's
    location relative to the boundary curve."""

    lam: complex
    order: int
    image: complex
    location: RegionLocation
    borderline: bool = False


@dataclass
class StructureReport:
    stationary: list
    petal_count: int
    bouquet_count: int
    flower_profiles: list  # (center, petals_in_flower)
    sum_tau: int
    decomposition_unique: bool
    degenerate: bool
    warnings: list = field(default_factory=list)


def _vanishing_order(P: Polynomial, derivs: list[Polynomial], x: complex,
                     tol: float) -> int:
    """Largest k with P^(j)(x) ~ 0 for j = 1..k.

    Vanishing is judged against each derivative's size over the root disk,
    not the local coefficient sum: near the origin the local sum collapses
    to the (noise-level) constant term and every comparison degenerates.
    """
    radius = max(cpoly.root_scale(P), abs(x))
    order = 0
    for j in range(1, P.degree + 1):
        dj = derivs[j]
        val = abs(dj(x))
        scale = max(float(cpoly.eval_scale(dj, radius)), 1e-300)
        if val <= tol * scale:
            order = j
        else:
            break
    return order


def stationary_points(P: Polynomial, curve: BoundaryCurve,
                      tol: float = DEFAULT_STRUCTURE_TOL) -> list[StationaryPoint]:
    """Roots of P' clustered into multiple roots, order-confirmed against the
    higher derivatives, each annotated with its image location.

    The cluster radius escalates until the derivative-confirmed orders agree
    with the cluster multiplicities (a near-multiple root of P' computed in
    floating point scatters wider than any fixed radius).
    """
    n = P.degree
    if n < 1:
        raise ValueError("degree must be >= 1")
    if n == 1:
        return []
    dP = cpoly.derivative(P)
    derivs = [P]
    for _ in range(n):
        derivs.append(cpoly.derivative(derivs[-1]))

    raw = cpoly.roots_shifted_batch(dP, np.zeros(1))[0]
    scale = cpoly.root_scale(P)
    base = cpoly.DEFAULT_CLUSTER_FRAC * scale

    # scan radii from wide to tight: a genuine multiple root of P' scatters
    # under coefficient noise far beyond the base radius, while the order
    # confirmation rejects over-merged clusters of distinct points, so the
    # widest consistent clustering recovers the intended multiplicities
    chosen = None
    for mult in (1e5, 1e4, 1e3, 100.0, 10.0, 1.0):
        rs = cpoly.cluster_multiplicities(raw, base * mult)
        ok = all(
            _vanishing_order(P, derivs, r, tol) == m for r, m in rs.entries
        )
        if ok:
            chosen = rs
            break
    if chosen is None:
        # fall back to the tightest clustering whose orders sum correctly
        for mult in (1.0, 10.0, 100.0, 1e3, 1e4, 1e5):
            rs = cpoly.cluster_multiplicities(raw, base * mult)
            total = sum(
                _vanishing_order(P, derivs, r, tol) for r, _ in rs.entries
            )
            if total == n - 1:
                chosen = rs
                break
    if chosen is None:
        chosen = cpoly.cluster_multiplicities(raw, base)

    out = []
    for r, m in chosen.entries:
        image = P(r)
        loc = locate(curve, image, tol)
        dist = curve_distance(curve, image)
        border = dist <= 10.0 * tol * max(curve.size, 1.0)
        out.append(
            StationaryPoint(lam=complex(r), order=m, image=complex(image),
                            location=loc, borderline=border)
        )
    return out


def m_count(stationary, selector) -> int:
    """Sum of orders over stationary points whose image location satisfies
    the selector predicate."""
    return sum(s.order for s in stationary if selector(s.location))


def structure_report(disc, tol: float = DEFAULT_STRUCTURE_TOL) -> StructureReport:
    """Closed-form counts from the stationary data alone (no tracing)."""
    curve = disc.curve
    n = disc.P.degree
    if curve.kind == "point":
        return StructureReport(
            stationary=[], petal_count=0, bouquet_count=0, flower_profiles=[],
            sum_tau=n - 1, decomposition_unique=True, degenerate=True,
        )

    stat = stationary_points(disc.P, curve, tol)
    sum_tau = sum(s.order for s in stat)
    warnings = [
        f"stationary image near the curve at {s.lam!r}"
        for s in stat if s.borderline
    ]

    if curve.kind == "ellipse":
        off_interior = m_count(stat, lambda loc: loc != RegionLocation.INTERIOR)
        exterior = m_count(stat, lambda loc: loc == RegionLocation.EXTERIOR)
        flowers = [
            (s.lam, s.order + 1) for s in stat
            if s.location == RegionLocation.ON_CURVE
        ]
        return StructureReport(
            stationary=stat,
            petal_count=1 + off_interior,
            bouquet_count=1 + exterior,
            flower_profiles=flowers,
            sum_tau=sum_tau,
            decomposition_unique=True,
            degenerate=False,
            warnings=warnings,
        )

    # segment: no closed curves; bouquets split at off-curve images
    exterior = m_count(stat, lambda loc: loc == RegionLocation.EXTERIOR)
    ep, em = curve.endpoints()
    unique = True
    for s in stat:
        if s.location == RegionLocation.ON_CURVE:
            near_end = min(abs(s.image - ep), abs(s.image - em)) <= tol * max(
                curve.size, 1.0
            )
            if not near_end:
                unique = False
    return StructureReport(
        stationary=stat,
        petal_count=0,
        bouquet_count=1 + exterior,
        flower_profiles=[],
        sum_tau=sum_tau,
        decomposition_unique=unique,
        degenerate=False,
        warnings=warnings,
    )


def _closed(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=complex).ravel()
    if pts.size < 3:
        raise ValueError("polyline needs at least 3 points")
    if pts[0] != pts[-1]:
        pts = np.concatenate([pts, pts[:1]])
    return pts


def polyline_winding(points, z: complex) -> int:
    """Winding number of a closed polyline around z."""
    pts = _closed(points) - complex(z)
    ang = np.angle(pts[1:] / pts[:-1])
    return int(round(float(np.sum(ang)) / (2.0 * math.pi)))


def polyline_distance(points, z: complex) -> float:
    """Distance from z to the closed polyline (vertex-to-segment)."""
    pts = _closed(points)
    p0, p1 = pts[:-1], pts[1:]
    seg = p1 - p0
    L2 = np.abs(seg) ** 2
    L2 = np.where(L2 == 0, 1.0, L2)
    t = np.clip(((z - p0) * np.conj(seg)).real / L2, 0.0, 1.0)
    proj = p0 + t * seg
    return float(np.min(np.abs(z - proj)))


def winding_band_count(petal, lam0: complex, P: Polynomial) -> int:
    """Number of bands forming a traced petal, from the total argument
    increment of P - P(lam0) along the closed polyline.

    Requires lam0 strictly inside the polyline. Raises InsufficientSampling
    when any single step turns by pi/2 or more, or when the total increment
    is farther than 0.1 from a multiple of 2*pi.
    """
    pts = _closed(petal)
    if polyline_winding(pts, lam0) == 0:
        raise ValueError("lam0 must lie strictly inside the petal")
    w0 = P(lam0)
    # split polyline segments until every argument step is below pi/2; the
    # image winding of the refined polygon is then unambiguous
    for _ in range(24):
        vals = cpoly.eval_poly(P, pts) - w0
        if np.any(np.abs(vals) == 0):
            raise ValueError("P(lam0) hits the petal image; pick another lam0")
        inc = np.angle(vals[1:] / vals[:-1])
        bad = np.abs(inc) >= 0.5 * math.pi
        if not np.any(bad):
            break
        where = np.flatnonzero(bad)
        if pts.size > 1_000_000:
            raise InsufficientSampling(
                "argument steps will not settle; refine the petal sampling"
            )
        mids = 0.5 * (pts[where] + pts[where + 1])
        pts = np.insert(pts, where + 1, mids)
    else:
        raise InsufficientSampling(
            "argument step >= pi/2 persists; refine the petal sampling"
        )
    total = float(np.sum(inc))
    turns = total / (2.0 * math.pi)
    nearest = round(turns)
    if abs(total - 2.0 * math.pi * nearest) > 0.1:
        raise InsufficientSampling(
            f"total increment {total:.6f} is not close to a multiple of 2*pi"
        )
    return abs(int(nearest))


def enclosed_stationary(petal, stationary, tol: float = 1e-9) -> int:
    """Sum of orders over stationary points strictly inside the petal.

    Stationary points sitting on the polyline are boundary, not interior:
    centers whose image lies on the curve are expected there and are simply
    excluded; any other stationary point within tol of the polyline makes
    the inside/outside call unreliable and raises OnBoundaryAmbiguous.
    """
    pts = _closed(petal)
    total = 0
    for s in stationary:
        d = polyline_distance(pts, s.lam)
        if d <= tol:
            if s.location == RegionLocation.ON_CURVE:
                continue
            raise OnBoundaryAmbiguous(
                f"stationary point {s.lam!r} is within {tol} of the petal"
            )
        if polyline_winding(pts, s.lam) != 0:
            total += s.order
    return total


def interior_point(petal, rng=None, tries: int = 200) -> complex:
    """A point strictly inside a closed polyline, found by candidate search."""
    pts = _closed(petal)
    cand = [complex(np.mean(pts[:-1]))]
    if rng is None:
        rng = np.random.default_rng(12345)
    verts = pts[:-1]
    n = verts.size
    for _ in range(tries):
        z = cand.pop(0) if cand else None
        if z is None:
            i, j, k = rng.integers(0, n, size=3)
            w = rng.dirichlet(np.ones(3))
            z = complex(w[0] * verts[i] + w[1] * verts[j] + w[2] * verts[k])
        d = polyline_distance(pts, z)
        if d > 1e-9 and polyline_winding(pts, z) != 0:
            return z
    raise InsufficientSampling("could not find an interior point of the petal")
