"""Complex polynomial arithmetic: evaluation, roots, interpolation, and the
flat-band family obtained from the three-term recurrence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentSamples, InvalidNodes, RootFindingFailed

DEFAULT_ROOT_TOL = 1e-10
DEFAULT_CLUSTER_FRAC = 1e-6

_ABERTH_MAX_ITER = 160
_ABERTH_STEP_TOL = 1e-13


class Polynomial:
    """Dense complex polynomial, coefficients ascending by power.

    The coefficient array is frozen after construction; all operations
    return new objects.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex)).copy()
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-d sequence")
        if c.size > 1 and c[-1] == 0:
            raise ValueError("leading coefficient must be nonzero for degree >= 1")
        c.setflags(write=False)
        self.coeffs = c

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_monic(self) -> bool:
        return bool(self.coeffs[-1] == 1)

    def __call__(self, z):
        return eval_poly(self, z)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(
            np.all(self.coeffs == other.coeffs)
        )

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self):
        return f"Polynomial({list(self.coeffs)})"

    def shifted(self, offset: complex) -> "Polynomial":
        """Polynomial with the constant term shifted by ``offset``."""
        c = np.array(self.coeffs)
        c[0] += offset
        return Polynomial(c)

    def composed_affine(self, scale: complex, center: complex) -> "Polynomial":
        """Return q with q(x) = p(scale*x + center)."""
        q = np.zeros(1, dtype=complex)
        for ck in self.coeffs[::-1]:
            q = np.convolve(q, np.array([center, scale], dtype=complex))
            q = q[: self.degree + 1]
            q[0] += ck
        out = np.zeros(self.degree + 1, dtype=complex)
        out[: q.size] = q
        if out[-1] == 0:
            out = np.trim_zeros(out, "b")
            if out.size == 0:
                out = np.zeros(1, dtype=complex)
        return Polynomial(out)


@dataclass(frozen=True)
class RootSet:
    """Roots with multiplicities, as ``(root, multiplicity)`` pairs."""

    entries: tuple

    def expanded(self) -> np.ndarray:
        """All roots repeated by multiplicity."""
        if not self.entries:
            return np.array([], dtype=complex)
        return np.concatenate([[r] * m for r, m in self.entries]).astype(complex)

    @property
    def total(self) -> int:
        return sum(m for _, m in self.entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def eval_poly(p: Polynomial, z):
    """Horner evaluation; accepts scalars or arrays."""
    z = np.asarray(z, dtype=complex)
    acc = np.full(z.shape, p.coeffs[-1], dtype=complex)
    for ck in p.coeffs[-2::-1]:
        acc = acc * z + ck
    if acc.ndim == 0:
        return complex(acc)
    return acc


def eval_scale(p: Polynomial, z) -> np.ndarray:
    """Sum of |c_k| |z|^k; the natural backward-error scale at z."""
    az = np.abs(np.asarray(z, dtype=complex))
    acc = np.full(az.shape, abs(p.coeffs[-1]))
    for ck in p.coeffs[-2::-1]:
        acc = acc * az + abs(ck)
    return acc


def coeff_scale(p: Polynomial) -> float:
    """max(1, largest coefficient magnitude); residual normalizer."""
    return max(1.0, float(np.max(np.abs(p.coeffs))))


def root_scale(p: Polynomial) -> float:
    """Fujiwara-type bound on root magnitudes of a degree >= 1 polynomial."""
    n = p.degree
    if n == 0:
        return 1.0
    lead = abs(p.coeffs[-1])
    mags = np.abs(p.coeffs[:-1]) / lead
    mags[0] *= 0.5
    k = np.arange(n, 0, -1)
    with np.errstate(divide="ignore"):
        bound = 2.0 * np.max(mags ** (1.0 / k))
    return max(1.0, float(bound))


def derivative(p: Polynomial) -> Polynomial:
    """First derivative; the derivative of a constant is the zero polynomial."""
    if p.degree == 0:
        return Polynomial([0.0])
    k = np.arange(1, p.degree + 1)
    return Polynomial(p.coeffs[1:] * k)


def _aberth_batch(coeffs: np.ndarray, max_iter: int = _ABERTH_MAX_ITER,
                  start_angle: float = 0.4) -> tuple[np.ndarray, np.ndarray]:
    """Simultaneous Aberth-Ehrlich iteration on a batch of monic-ish rows.

    coeffs has shape (B, n+1), ascending powers, one polynomial per row,
    all of the same degree n with nonzero leading coefficient. Returns
    (roots (B, n), converged (B,)).
    """
    B, m = coeffs.shape
    n = m - 1
    lead = coeffs[:, -1]
    # Fujiwara radius per row
    mags = np.abs(coeffs[:, :-1] / lead[:, None])
    mags[:, 0] *= 0.5
    k = np.arange(n, 0, -1)
    radius = 2.0 * np.max(mags ** (1.0 / k), axis=1)
    radius = np.maximum(radius, 1e-6)

    # slightly eccentric start circle breaks symmetric stagnation
    j = np.arange(n)
    ang = 2.0 * np.pi * j / n + start_angle
    z = radius[:, None] * (1.0 + 0.05 * np.cos(3 * ang)) * np.exp(1j * ang)

    dcoeffs = coeffs[:, 1:] * np.arange(1, n + 1)
    acoeffs = np.abs(coeffs)
    eps = np.finfo(float).eps

    converged = np.zeros(B, dtype=bool)
    for _ in range(max_iter):
        pv = np.full((B, n), coeffs[:, -1][:, None], dtype=complex)
        pv = pv * z
        for i in range(m - 2, 0, -1):
            pv = (pv + coeffs[:, i][:, None]) * z
        pv = pv + coeffs[:, 0][:, None]

        az = np.abs(z)
        escale = np.full((B, n), acoeffs[:, -1][:, None])
        for i in range(m - 2, -1, -1):
            escale = escale * az + acoeffs[:, i][:, None]

        dv = np.full((B, n), dcoeffs[:, -1][:, None], dtype=complex)
        for i in range(n - 2, -1, -1):
            dv = dv * z + dcoeffs[:, i][:, None]

        bad = dv == 0
        if np.any(bad):
            dv = np.where(bad, 1e-30, dv)
        w = pv / dv

        diff = z[:, :, None] - z[:, None, :]
        np.einsum("bii->bi", diff)[...] = 1.0
        s = np.sum(1.0 / diff, axis=2) - 1.0  # drop the diagonal placeholder

        denom = 1.0 - w * s
        small = np.abs(denom) < 1e-30
        if np.any(small):
            denom = np.where(small, 1e-30, denom)
        delta = w / denom

        # a root is done when its step is tiny or its residual sits at the
        # backward-error floor; frozen roots skip further updates
        done = (np.abs(delta) <= _ABERTH_STEP_TOL * (1.0 + np.abs(z))) | (
            np.abs(pv) <= 8.0 * eps * escale
        )
        z = np.where(done, z, z - delta)

        converged |= np.all(done, axis=1)
        if np.all(converged):
            break
    return z, converged


def _durand_kerner(coeffs: np.ndarray, max_iter: int = 400) -> tuple[np.ndarray, bool]:
    """Durand-Kerner fallback for a single polynomial row."""
    n = coeffs.size - 1
    c = coeffs / coeffs[-1]
    p = Polynomial(c)
    radius = root_scale(p)
    j = np.arange(n)
    z = radius * np.exp(1j * (2 * np.pi * j / n + 0.7)) * (1.0 + 0.1 * j / max(n, 1))
    for _ in range(max_iter):
        pv = eval_poly(p, z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        denom = np.prod(diff, axis=1)
        denom = np.where(denom == 0, 1e-30, denom)
        delta = pv / denom
        z = z - delta
        if np.all(np.abs(delta) <= _ABERTH_STEP_TOL * (1.0 + np.abs(z))):
            return z, True
    return z, False


def roots_shifted_batch(p: Polynomial, shifts: np.ndarray) -> np.ndarray:
    """Roots of p(z) - s for every s in ``shifts``; shape (len(shifts), degree).

    Raises RootFindingFailed if any row does not converge after the
    Durand-Kerner restart.
    """
    shifts = np.asarray(shifts, dtype=complex).ravel()
    n = p.degree
    if n < 1:
        raise ValueError("degree must be >= 1")
    B = shifts.size
    coeffs = np.tile(p.coeffs, (B, 1))
    coeffs[:, 0] -= shifts
    z, ok = _aberth_batch(coeffs)
    if not np.all(ok):
        retry = np.flatnonzero(~ok)
        z2, ok2 = _aberth_batch(coeffs[retry], start_angle=1.1)
        z[retry] = z2
        ok[retry] = ok2
        for idx in np.flatnonzero(~ok):
            zi, good = _durand_kerner(coeffs[idx])
            if not good:
                raise RootFindingFailed(
                    f"no convergence for shift {shifts[idx]!r} after restarts"
                )
            z[idx] = zi
    return z


def roots(p: Polynomial, tol: float = DEFAULT_ROOT_TOL,
          cluster_radius: float | None = None) -> RootSet:
    """All roots of p with multiplicities recovered by clustering.

    Every returned root r satisfies |p(r)| <= tol * scale, where scale is
    the coefficient-magnitude sum at r.

    Raises
    ------
    RootFindingFailed
        if the iteration stagnates or a residual exceeds the bound.
    """
    if p.degree < 1:
        raise ValueError("degree must be >= 1 to extract roots")
    if tol <= 0:
        raise ValueError("tol must be positive")
    raw = roots_shifted_batch(p, np.zeros(1))[0]
    resid = np.abs(eval_poly(p, raw))
    bound = tol * np.maximum(eval_scale(p, raw), 1.0)
    if np.any(resid > bound):
        worst = float(np.max(resid / bound))
        raise RootFindingFailed(f"root residual {worst:.2e}x above tolerance")
    if cluster_radius is None:
        cluster_radius = DEFAULT_CLUSTER_FRAC * root_scale(p)
    rs = cluster_multiplicities(raw, cluster_radius)
    if rs.total != p.degree:
        raise RootFindingFailed("clustered multiplicities lost roots")
    return rs


def cluster_multiplicities(raw_roots, radius: float) -> RootSet:
    """Merge points at mutual distance <= radius (transitive closure) into
    centroids with summed multiplicity."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    pts = np.asarray(list(raw_roots), dtype=complex)
    if pts.size == 0:
        return RootSet(entries=())
    n = pts.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    dist = np.abs(pts[:, None] - pts[None, :])
    for i in range(n):
        for j in range(i + 1, n):
            if dist[i, j] <= radius:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    entries = [(complex(np.mean(pts[idx])), len(idx)) for idx in groups.values()]

    # merged centroids can still land within the radius of each other;
    # repeat until the separation invariant holds
    changed = True
    while changed and len(entries) > 1:
        changed = False
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                (ri, mi), (rj, mj) = entries[i], entries[j]
                if abs(ri - rj) <= radius:
                    merged = ((ri * mi + rj * mj) / (mi + mj), mi + mj)
                    entries[i] = merged
                    del entries[j]
                    changed = True
                    break
            if changed:
                break
    entries.sort(key=lambda e: (-e[0].real, -e[0].imag))
    return RootSet(entries=tuple(entries))


def from_roots(root_set) -> Polynomial:
    """Monic polynomial with the given roots (RootSet or plain iterable)."""
    if isinstance(root_set, RootSet):
        pts = root_set.expanded()
    else:
        pts = np.asarray(list(root_set), dtype=complex)
    c = np.array([1.0 + 0j])
    for r in pts:
        c = np.convolve(c, np.array([-r, 1.0], dtype=complex))
    return Polynomial(c)


def interpolate_monic(nodes, values, degree: int,
                      tol: float = 1e-8) -> Polynomial:
    """The unique monic polynomial of the given degree through degree+1 samples.

    Raises InvalidNodes on duplicate nodes and InconsistentSamples when the
    samples do not actually lie on a monic polynomial of that degree.
    """
    nodes = np.asarray(nodes, dtype=complex).ravel()
    values = np.asarray(values, dtype=complex).ravel()
    if nodes.size != degree + 1 or values.size != degree + 1:
        raise InvalidNodes(f"need exactly {degree + 1} nodes and values")
    scale_nodes = max(1.0, float(np.max(np.abs(nodes))))
    gaps = np.abs(nodes[:, None] - nodes[None, :])
    np.fill_diagonal(gaps, np.inf)
    if np.min(gaps) <= 1e-14 * scale_nodes:
        raise InvalidNodes("interpolation nodes must be pairwise distinct")

    if degree == 0:
        # monic degree 0 means the constant polynomial 1
        if np.max(np.abs(values - 1.0)) > tol:
            raise InconsistentSamples("degree-0 monic polynomial must sample to 1")
        return Polynomial([1.0])

    rhs = values - nodes ** degree
    V = np.vander(nodes, N=degree, increasing=True)
    coeffs, *_ = np.linalg.lstsq(V, rhs, rcond=None)
    p = Polynomial(np.concatenate([coeffs, [1.0]]))
    resid = np.abs(eval_poly(p, nodes) - values)
    bound = tol * np.maximum(eval_scale(p, nodes), 1.0)
    if np.any(resid > bound):
        worst = float(np.max(resid / bound))
        raise InconsistentSamples(
            f"interpolation residual {worst:.2e}x above tolerance"
        )
    return p


def chebyshev_like(n: int) -> Polynomial:
    """Monic degree-n member of the trace recurrence
    q_{k+1} = x*q_k - q_{k-1}, q_0 = 2, q_1 = x."""
    if n < 1:
        raise ValueError("n must be >= 1")
    prev = np.array([2.0 + 0j])
    cur = np.array([0.0, 1.0], dtype=complex)
    for _ in range(n - 1):
        nxt = np.zeros(cur.size + 1, dtype=complex)
        nxt[1:] = cur
        nxt[: prev.size] -= prev
        prev, cur = cur, nxt
    return Polynomial(cur)
