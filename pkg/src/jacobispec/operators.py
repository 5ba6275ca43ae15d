"""Periodic tridiagonal operators with period-N coefficient sequences, their
Bloch matrices, and discriminant extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import boundary, cpoly
from .boundary import BoundaryCurve, classify_curve
from .cpoly import Polynomial


@dataclass(frozen=True)
class PeriodicOperator:
    """Three period-N complex sequences: a (upper diagonal), b (diagonal),
    c (lower diagonal)."""

    a: tuple
    b: tuple
    c: tuple

    def __post_init__(self):
        a = tuple(complex(x) for x in self.a)
        b = tuple(complex(x) for x in self.b)
        c = tuple(complex(x) for x in self.c)
        if not (len(a) == len(b) == len(c)) or len(a) == 0:
            raise ValueError("a, b, c must be non-empty sequences of equal length")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def period(self) -> int:
        return len(self.b)


@dataclass(frozen=True)
class Discriminant:
    """Monic degree-N polynomial P with det(lam*Id - J(theta)) =
    P(lam) - a*exp(-i*theta) - c*exp(i*theta), plus the two products and
    the classified boundary curve."""

    P: Polynomial
    a_prod: complex
    c_prod: complex
    curve: BoundaryCurve

    @property
    def degenerate(self) -> bool:
        """Both products vanish; the spectrum is the root set of P."""
        return self.curve.kind == "point"


def products(op: PeriodicOperator) -> tuple[complex, complex]:
    """Componentwise products of the a and c sequences."""
    return (complex(np.prod(np.asarray(op.a))), complex(np.prod(np.asarray(op.c))))


def assemble_bloch(op: PeriodicOperator, theta: float) -> np.ndarray:
    """N x N matrix J0 + J1*exp(i*theta) + J_{-1}*exp(-i*theta).

    For N = 1 and N = 2 the corner entries overlap the tridiagonal band and
    are summed into it.
    """
    n = op.period
    a, b, c = op.a, op.b, op.c
    ei = np.exp(1j * theta)
    if n == 1:
        return np.array([[b[0] + c[0] * ei + a[0] / ei]], dtype=complex)
    m = np.zeros((n, n), dtype=complex)
    np.fill_diagonal(m, b)
    if n == 2:
        m[0, 1] = a[0] + c[1] * ei
        m[1, 0] = c[0] + a[1] / ei
        return m
    for i in range(n - 1):
        m[i, i + 1] = a[i]
        m[i + 1, i] = c[i]
    m[0, n - 1] = c[n - 1] * ei
    m[n - 1, 0] = a[n - 1] / ei
    return m


def det_shifted(op: PeriodicOperator, theta: float, lam: complex) -> complex:
    """det(lam*Id - J(theta)) via the corner-bordered tridiagonal expansion.

    The tridiagonal minors follow the usual three-term recurrence, so the
    cost is O(N) per evaluation.
    """
    n = op.period
    a = np.asarray(op.a)
    b = np.asarray(op.b)
    c = np.asarray(op.c)
    ei = np.exp(1j * theta)
    lam = complex(lam)
    if n == 1:
        return lam - b[0] - c[0] * ei - a[0] / ei
    if n == 2:
        return (lam - b[0]) * (lam - b[1]) - (a[0] + c[1] * ei) * (c[0] + a[1] / ei)

    d = lam - b
    off = a[: n - 1] * c[: n - 1]

    # D_{1..k}
    dm2, dm1 = 1.0 + 0j, d[0]
    for k in range(1, n):
        dm2, dm1 = dm1, d[k] * dm1 - off[k - 1] * dm2
    d_full = dm1

    # D_{2..n-1}
    dm2, dm1 = 1.0 + 0j, d[1]
    for k in range(2, n - 1):
        dm2, dm1 = dm1, d[k] * dm1 - off[k - 1] * dm2
    d_inner = dm1

    a_prod, c_prod = products(op)
    return complex(
        d_full - a[n - 1] * c[n - 1] * d_inner - a_prod / ei - c_prod * ei
    )


def discriminant(op: PeriodicOperator, theta: float = 0.0,
                 tol: float = 1e-8) -> Discriminant:
    """Recover the monic discriminant by interpolating the determinant.

    The determinant is sampled at N+1 equally spaced nodes on a circle
    enclosing the spectrum, and the theta-dependent terms are added back so
    the result does not depend on theta (exposed for verification).
    """
    n = op.period
    a_prod, c_prod = products(op)
    ei = np.exp(1j * theta)
    bloch_term = a_prod / ei + c_prod * ei

    r = 1.0 + max(
        max(abs(x) for x in op.a),
        max(abs(x) for x in op.b),
        max(abs(x) for x in op.c),
    ) * 3.0
    nodes = r * np.exp(2j * np.pi * np.arange(n + 1) / (n + 1))
    values = np.array(
        [det_shifted(op, theta, z) + bloch_term for z in nodes], dtype=complex
    )
    P = cpoly.interpolate_monic(nodes, values, n, tol=tol)
    curve = classify_curve(a_prod, c_prod)
    return Discriminant(P=P, a_prod=a_prod, c_prod=c_prod, curve=curve)


def period_multiply(op: PeriodicOperator, k: int) -> PeriodicOperator:
    """The same operator viewed with period k*N (sequences tiled k times)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return PeriodicOperator(a=op.a * k, b=op.b * k, c=op.c * k)


def parse_operator_json(obj) -> PeriodicOperator:
    """Build an operator from the decoded JSON object
    {"n": int, "a": [[re, im], ...], "b": ..., "c": ...}.

    Raises ValueError with a JSON-path position on malformed input.
    """
    if not isinstance(obj, dict):
        raise ValueError("$: expected a JSON object")
    if "n" not in obj:
        raise ValueError("$.n: missing required field")
    n = obj["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ValueError("$.n: expected a positive integer")
    seqs = {}
    for key in ("a", "b", "c"):
        if key not in obj:
            raise ValueError(f"$.{key}: missing required field")
        arr = obj[key]
        if not isinstance(arr, list):
            raise ValueError(f"$.{key}: expected an array")
        if len(arr) != n:
            raise ValueError(f"$.{key}: expected {n} entries, got {len(arr)}")
        vals = []
        for i, entry in enumerate(arr):
            vals.append(_parse_complex_entry(entry, f"$.{key}[{i}]"))
        seqs[key] = vals
    return PeriodicOperator(a=seqs["a"], b=seqs["b"], c=seqs["c"])


def _parse_complex_entry(entry, where: str) -> complex:
    if isinstance(entry, (int, float)) and not isinstance(entry, bool):
        return complex(entry)
    if (
        isinstance(entry, list)
        and len(entry) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in entry)
    ):
        return complex(entry[0], entry[1])
    raise ValueError(f"{where}: expected a number or [re, im] pair")


def operator_to_json(op: PeriodicOperator) -> dict:
    """Inverse of parse_operator_json."""
    return {
        "n": op.period,
        "a": [[z.real, z.imag] for z in op.a],
        "b": [[z.real, z.imag] for z in op.b],
        "c": [[z.real, z.imag] for z in op.c],
    }
