"""The closed curve swept by a*exp(-i*theta) + c*exp(i*theta): ellipse,
segment, or the origin, with region membership tests."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCurve

DEFAULT_CLASSIFY_TOL = 1e-9


class RegionLocation(enum.Enum):
    INTERIOR = "interior"
    ON_CURVE = "on_curve"
    EXTERIOR = "exterior"


@dataclass(frozen=True)
class BoundaryCurve:
    """Range of a*exp(-i*theta) + c*exp(i*theta) over theta in (-pi, pi].

    kind is "ellipse" (|a| != |c|), "segment" (|a| = |c| != 0, the set
    exp(i*phi)*[-2R, 2R]) or "point" (a = c = 0). W denotes the closed
    region bounded by the curve; for a segment W is the segment itself.
    """

    kind: str
    r_a: float
    r_c: float
    phi: float
    a_prod: complex
    c_prod: complex

    @property
    def radius(self) -> float:
        """Half-length parameter R for the segment case."""
        return 0.5 * (self.r_a + self.r_c)

    @property
    def size(self) -> float:
        """Coarse magnitude of the curve, used for relative tolerances."""
        return max(self.r_a + self.r_c, 1e-300)

    def endpoints(self) -> tuple[complex, complex]:
        """Segment endpoints +/- 2R exp(i*phi)."""
        if self.kind != "segment":
            raise DegenerateCurve("endpoints are defined for segments only")
        e = 2.0 * self.radius * np.exp(1j * self.phi)
        return complex(e), complex(-e)


def _half_angle(a: complex, c: complex) -> float:
    """Mean of the principal arguments; arg(0) is treated as 0."""
    phi_a = math.atan2(a.imag, a.real) if a != 0 else 0.0
    phi_c = math.atan2(c.imag, c.real) if c != 0 else 0.0
    return 0.5 * (phi_a + phi_c)


def classify_curve(a_prod: complex, c_prod: complex,
                   tol: float = DEFAULT_CLASSIFY_TOL) -> BoundaryCurve:
    """Decide ellipse / segment / point from the two products."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    a_prod = complex(a_prod)
    c_prod = complex(c_prod)
    ra, rc = abs(a_prod), abs(c_prod)
    scale = max(ra, rc, 1.0)
    if max(ra, rc) <= tol * scale:
        return BoundaryCurve("point", 0.0, 0.0, 0.0, a_prod, c_prod)
    phi = _half_angle(a_prod, c_prod)
    if abs(ra - rc) <= tol * scale:
        return BoundaryCurve("segment", ra, rc, phi, a_prod, c_prod)
    return BoundaryCurve("ellipse", ra, rc, phi, a_prod, c_prod)


def near_degenerate(curve: BoundaryCurve,
                    tol: float = DEFAULT_CLASSIFY_TOL) -> bool:
    """True when |r_a - r_c| sits within 10x of the classification cut, so
    the ellipse/segment decision could flip under noise."""
    scale = max(curve.r_a, curve.r_c, 1.0)
    gap = abs(curve.r_a - curve.r_c)
    return tol * scale < gap <= 10.0 * tol * scale


def curve_point(curve: BoundaryCurve, theta):
    """Point a*exp(-i*theta) + c*exp(i*theta); vectorized over theta."""
    if curve.kind == "point":
        raise DegenerateCurve("the point case has no parameterization")
    theta = np.asarray(theta, dtype=float)
    w = np.exp(1j * theta)
    out = curve.a_prod / w + curve.c_prod * w
    if out.ndim == 0:
        return complex(out)
    return out


def curve_tangent(curve: BoundaryCurve, theta):
    """d/dtheta of curve_point."""
    if curve.kind == "point":
        raise DegenerateCurve("the point case has no parameterization")
    theta = np.asarray(theta, dtype=float)
    w = np.exp(1j * theta)
    out = 1j * (curve.c_prod * w - curve.a_prod / w)
    if out.ndim == 0:
        return complex(out)
    return out


def locate(curve: BoundaryCurve, z: complex, tol: float) -> RegionLocation:
    """Classify z against the closed region W bounded by the curve."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    z = complex(z)
    if curve.kind == "point":
        return RegionLocation.ON_CURVE if abs(z) <= tol else RegionLocation.EXTERIOR

    zr = z * np.exp(-1j * curve.phi)
    if curve.kind == "segment":
        r2 = 2.0 * curve.radius
        if abs(zr.imag) <= tol * r2 and abs(zr.real) <= r2 * (1.0 + tol):
            return RegionLocation.ON_CURVE
        return RegionLocation.EXTERIOR

    # ellipse, semi-axes A = r_a + r_c along the rotated real axis
    A = curve.r_a + curve.r_c
    B = abs(curve.r_c - curve.r_a)
    q = (zr.real / A) ** 2 + (zr.imag / B) ** 2
    band = tol * (A + B)
    if abs(q - 1.0) <= band:
        return RegionLocation.ON_CURVE
    return RegionLocation.INTERIOR if q < 1.0 else RegionLocation.EXTERIOR


def curve_distance(curve: BoundaryCurve, z: complex) -> float:
    """Euclidean distance from z to the curve (point set, not region)."""
    z = complex(z)
    if curve.kind == "point":
        return abs(z)
    zr = z * np.exp(-1j * curve.phi)
    if curve.kind == "segment":
        r2 = 2.0 * curve.radius
        x = min(max(zr.real, -r2), r2)
        return float(abs(zr - x))
    # dense sampling is accurate enough at the tolerance scales used here
    th = np.linspace(-np.pi, np.pi, 2048, endpoint=True)
    pts = curve.r_a * np.exp(-1j * th) + curve.r_c * np.exp(1j * th)
    d = np.abs(zr - pts)
    i = int(np.argmin(d))
    lo, hi = th[max(i - 1, 0)], th[min(i + 1, th.size - 1)]
    for _ in range(40):
        mids = np.linspace(lo, hi, 9)
        pm = curve.r_a * np.exp(-1j * mids) + curve.r_c * np.exp(1j * mids)
        j = int(np.argmin(np.abs(zr - pm)))
        lo, hi = mids[max(j - 1, 0)], mids[min(j + 1, 8)]
        if hi - lo < 1e-14:
            break
    best = 0.5 * (lo + hi)
    pb = curve.r_a * np.exp(-1j * best) + curve.r_c * np.exp(1j * best)
    return float(abs(zr - pb))


def curve_angles(curve: BoundaryCurve, z: complex,
                 tol: float = 1e-6) -> list[tuple[float, bool]]:
    """Parameter angles theta with curve_point(theta) closest to z, as
    (theta, is_turning_point) pairs.

    A turning point is a parameter value where the tangent vanishes; this
    happens exactly at the two ends of a segment. Ellipses give one angle,
    segment interiors two, segment ends one.
    """
    if curve.kind == "point":
        raise DegenerateCurve("the point case has no parameterization")
    a, c = curve.a_prod, curve.c_prod
    z = complex(z)
    out: list[tuple[float, bool]] = []
    if abs(c) <= 1e-300:
        # circle traversed clockwise: z = a * exp(-i*theta)
        u = z / a
        return [(_wrap_angle(-math.atan2(u.imag, u.real)), False)]
    if abs(a) <= 1e-300:
        w = z / c
        return [(_wrap_angle(math.atan2(w.imag, w.real)), False)]
    # c*w^2 - z*w + a = 0 with w = exp(i*theta)
    disc = z * z - 4.0 * a * c
    scale = max(abs(z) ** 2, 4.0 * abs(a * c), 1e-300)
    if abs(disc) <= max(tol, 1e-12) * scale:
        w = z / (2.0 * c)
        out.append((_wrap_angle(math.atan2(w.imag, w.real)), True))
        return out
    sq = np.sqrt(disc)
    for w in ((z + sq) / (2.0 * c), (z - sq) / (2.0 * c)):
        if abs(abs(w) - 1.0) <= max(100 * tol, 1e-8):
            out.append((_wrap_angle(math.atan2(w.imag, w.real)), False))
    # deduplicate near-equal angles
    dedup: list[tuple[float, bool]] = []
    for th, ep in sorted(out):
        if not dedup or abs(th - dedup[-1][0]) > 1e-9:
            dedup.append((th, ep))
    return dedup


def _wrap_angle(theta: float) -> float:
    """Reduce to (-pi, pi]."""
    th = math.remainder(theta, 2.0 * math.pi)
    if th <= -math.pi:
        th += 2.0 * math.pi
    return th


def orientation(curve: BoundaryCurve) -> int:
    """+1 when the parameterization runs counterclockwise (r_c > r_a),
    -1 when clockwise."""
    if curve.kind == "ellipse":
        return 1 if curve.r_c > curve.r_a else -1
    return 1
