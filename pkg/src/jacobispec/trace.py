"""Continuation of the N roots of P(lam) = curve(theta) around the full
theta circle: band extraction, monodromy, petals as permutation cycles,
bouquet connectivity, and local angle checks at branch-collision points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import cpoly, structure
from .boundary import RegionLocation, curve_angles, curve_point, orientation
from .cpoly import Polynomial, RootSet
from .errors import InsufficientSampling, StructureMismatch, TraceAmbiguous
from .structure import StationaryPoint, structure_report

DEFAULT_TRACE_TOL = 1e-8
DEFAULT_SAMPLES_PER_DEGREE = 256
REFINE_DEPTH = 40

_DELTA_INTERIOR = 1e-8
_DELTA_TURNING = 1e-4
_MIN_STEP = 1e-13


@dataclass(frozen=True)
class Band:
    """One branch lam(theta) sampled over theta in (-pi, pi]."""

    band_index: int
    thetas: np.ndarray
    lams: np.ndarray

    @property
    def samples(self) -> list:
        return [(float(t), complex(z)) for t, z in zip(self.thetas, self.lams)]


@dataclass(frozen=True)
class TraceNode:
    """A branch collision inserted as a shared sample point."""

    theta: float
    lam: complex
    order: int
    kind: str  # "interior" or "turning"
    band_indices: tuple
    in_angles: tuple
    out_angles: tuple


@dataclass(frozen=True)
class FlowerCenter:
    lam: complex
    order: int
    kind: str
    band_indices: tuple
    petal_indices: tuple


@dataclass
class TraceResult:
    disc: object
    bands: list
    monodromy: np.ndarray
    petals: list  # tuples of band indices (cycles of the monodromy)
    bouquets: list | None  # component lists (petal ids; band ids for segments)
    flower_centers: list | None
    nodes: list
    stationary: list
    degenerate_roots: RootSet | None
    meta: dict = field(default_factory=dict)

    def petal_polyline(self, petal_index: int) -> np.ndarray:
        """Closed polyline following the petal's bands end to end."""
        cycle = self.petals[petal_index]
        pts = np.concatenate([self.bands[b].lams for b in cycle])
        return np.concatenate([pts, pts[:1]])


def roots_at(disc, theta: float) -> np.ndarray:
    """The N roots (with multiplicity) of P(lam) = curve(theta)."""
    z = curve_point(disc.curve, theta)
    return cpoly.roots_shifted_batch(disc.P, np.array([z]))[0]


def _deflate(coeffs: np.ndarray, r: complex, times: int) -> np.ndarray:
    """Synthetic division by (x - r), repeated."""
    c = np.asarray(coeffs, dtype=complex)
    for _ in range(times):
        n = c.size - 1
        q = np.empty(n, dtype=complex)
        q[n - 1] = c[n]
        for k in range(n - 1, 0, -1):
            q[k - 1] = c[k] + r * q[k]
        c = q
    return c


def _wrap(theta: float) -> float:
    th = math.remainder(theta, 2.0 * math.pi)
    if th <= -math.pi:
        th += 2.0 * math.pi
    return th


def _ang_diff(x: float, y: float) -> float:
    return abs(math.remainder(x - y, 2.0 * math.pi))


class _NodeSpec:
    """One collision of tau+1 branches at a stationary point on the spectrum."""

    __slots__ = ("theta", "lam", "k", "kind", "stat",
                 "approach_chain_idx", "labels", "in_angles", "out_angles",
                 "chain_idx")

    def __init__(self, theta, lam, k, kind, stat):
        self.theta = theta
        self.lam = lam
        self.k = k
        self.kind = kind
        self.stat = stat
        self.approach_chain_idx = None
        self.labels = None
        self.in_angles = None
        self.out_angles = None
        self.chain_idx = None


def _assign(prev: np.ndarray, new: np.ndarray) -> np.ndarray:
    """Permutation perm with prev[i] matched to new[perm[i]]."""
    cost = np.abs(prev[:, None] - new[None, :]) ** 2
    rows = np.argmin(cost, axis=1)
    if np.unique(rows).size == cost.shape[0]:
        return rows
    _, cols = linear_sum_assignment(cost)
    return cols


def _acceptable(prev: np.ndarray, new: np.ndarray, perm: np.ndarray) -> bool:
    """A matching is trusted when it is unambiguous: every displacement is
    below half the minimal root separation, or each matched root is much
    closer than its runner-up alternative."""
    matched = new[perm]
    d = np.abs(prev - matched)
    scale = 1.0 + float(np.max(np.abs(new)))
    if np.all(d <= 1e-12 * scale):
        return True
    n = new.size
    if n == 1:
        return True
    sep = np.abs(new[:, None] - new[None, :])
    np.fill_diagonal(sep, np.inf)
    if float(np.max(d)) <= 0.5 * float(np.min(sep)):
        return True
    alt = np.abs(prev[:, None] - new[None, :])
    alt[np.arange(n), perm] = np.inf
    second = np.min(alt, axis=1)
    return bool(np.all(d <= 0.4 * second))


class _Tracer:
    def __init__(self, disc, min_samples, tol, refine_depth):
        self.disc = disc
        self.P = disc.P
        self.curve = disc.curve
        self.n = disc.P.degree
        self.tol = tol
        self.refine_depth = refine_depth
        self.min_samples = min_samples
        self.bisections = 0
        self.chain = []  # (ext_theta, wrapped_theta, positions by label)
        self.node_events = []
        self.stationary = []

    # ---- grid --------------------------------------------------------------

    def build_entries(self, stationary):
        specs = []
        for s in stationary:
            if s.location != RegionLocation.ON_CURVE:
                continue
            for th, turning in curve_angles(
                self.curve, s.image, tol=structure.DEFAULT_STRUCTURE_TOL
            ):
                kind = "turning" if turning else "interior"
                specs.append(_NodeSpec(th, s.lam, s.order + 1, kind, s))

        base = -math.pi + 2.0 * math.pi * np.arange(1, self.min_samples + 1) \
            / self.min_samples
        windows = []
        node_points = []
        for spec in specs:
            delta = _DELTA_TURNING if spec.kind == "turning" else _DELTA_INTERIOR
            # keep the offset samples between this node and its neighbors
            gaps = [_ang_diff(spec.theta, o.theta) for o in specs if o is not spec]
            gaps = [g for g in gaps if g > 1e-12]
            if gaps:
                delta = max(min(delta, 0.25 * min(gaps)), 1e-12)
            windows.append((spec.theta, delta))
            node_points.append((_wrap(spec.theta - delta), None))
            node_points.append((spec.theta, spec))
            node_points.append((_wrap(spec.theta + delta), None))
        # grid points inside a node window would become the node's neighbors
        # and sample the branches inside the noise-dominated collision zone
        points = [
            (float(t), None) for t in base
            if all(_ang_diff(t, th) >= 0.999 * dl for th, dl in windows)
        ]
        points.extend(node_points)
        points.sort(key=lambda e: e[0])

        merged = []
        for th, spec in points:
            if merged and abs(th - merged[-1][0]) < 1e-12:
                if spec is not None:
                    if merged[-1][1] is None:
                        merged[-1][1] = [spec]
                    else:
                        merged[-1][1].append(spec)
                continue
            merged.append([th, [spec] if spec is not None else None])
        return merged

    def choose_start(self, entries):
        node_th = [th for th, sp in entries if sp]
        if not node_th:
            return 0
        best, best_gap = 0, -1.0
        for i, (th, sp) in enumerate(entries):
            if sp:
                continue
            gap = min(_ang_diff(th, t) for t in node_th)
            if gap > best_gap:
                best, best_gap = i, gap
        return best

    # ---- root solving ------------------------------------------------------

    def solve_entry(self, theta, specs):
        z = curve_point(self.curve, theta)
        if specs:
            c = np.array(self.P.coeffs)
            c[0] -= z
            out = []
            for sp in specs:
                c = _deflate(c, sp.lam, sp.k)
                out.extend([sp.lam] * sp.k)
            if c.size > 1:
                rest = cpoly.roots_shifted_batch(Polynomial(c), np.zeros(1))[0]
                out.extend(rest.tolist())
            return np.asarray(out, dtype=complex)
        return cpoly.roots_shifted_batch(self.P, np.array([z]))[0]

    # ---- marching ----------------------------------------------------------

    def run(self):
        self.stationary = structure.stationary_points(
            self.P, self.curve, tol=structure.DEFAULT_STRUCTURE_TOL
        )
        entries = self.build_entries(self.stationary)
        K = len(entries)
        start = self.choose_start(entries)
        order = [(start + i) % K for i in range(K)]
        ext = [
            entries[idx][0] if idx >= start else entries[idx][0] + 2.0 * math.pi
            for idx in order
        ]

        plain = [i for i in range(K) if not entries[order[i]][1]]
        cache = {}
        if plain:
            zs = np.atleast_1d(curve_point(
                self.curve, np.array([entries[order[i]][0] for i in plain])
            ))
            batch = cpoly.roots_shifted_batch(self.P, zs)
            for j, i in enumerate(plain):
                cache[i] = batch[j]

        pos = None
        for i in range(K):
            th, specs_here = entries[order[i]]
            if specs_here:
                for sp in specs_here:
                    sp.approach_chain_idx = len(self.chain) - 1
            roots_here = cache.get(i)
            if roots_here is None:
                roots_here = self.solve_entry(th, specs_here)
            if i == 0:
                o = np.lexsort((-roots_here.imag, -roots_here.real))
                pos = roots_here[o]
                self.chain.append((ext[0], th, pos.copy()))
                continue
            pos = self.step(
                self.chain[-1][0], pos, ext[i], th, roots_here,
                entries[order[i - 1]][1], specs_here, self.refine_depth,
            )

        # close the loop back onto the start entry
        closing = self.step(
            self.chain[-1][0], pos, ext[0] + 2.0 * math.pi, entries[order[0]][0],
            self.chain[0][2].copy(), entries[order[-1]][1], None,
            self.refine_depth,
        )
        perm = _assign(closing, self.chain[0][2])
        self.chain.pop()  # the closing sample duplicates the start entry
        return perm

    def step(self, ext_prev, pos_prev, ext_next, th_next, roots_next,
             specs_prev, specs_next, depth):
        if specs_next:
            return self._step_into_node(ext_prev, pos_prev, ext_next, th_next,
                                        roots_next, specs_next, depth)
        if specs_prev:
            return self._step_out_of_node(ext_prev, pos_prev, ext_next, th_next,
                                          roots_next, specs_prev, depth)
        perm = _assign(pos_prev, roots_next)
        if _acceptable(pos_prev, roots_next, perm):
            out = roots_next[perm]
            self.chain.append((ext_next, th_next, out.copy()))
            return out
        return self._bisect(ext_prev, pos_prev, ext_next, th_next, roots_next,
                            None, None, depth)

    def _bisect(self, ext_prev, pos_prev, ext_next, th_next, roots_next,
                specs_prev, specs_next, depth):
        if depth <= 0 or (ext_next - ext_prev) <= _MIN_STEP:
            found = self._detect_node(ext_prev, ext_next, roots_next)
            if found is not None:
                mid_ext, spec = found
                th_mid = _wrap(mid_ext)
                roots_mid = self.solve_entry(th_mid, [spec])
                spec.approach_chain_idx = len(self.chain) - 1
                pos_mid = self._step_into_node(
                    ext_prev, pos_prev, mid_ext, th_mid, roots_mid,
                    [spec], self.refine_depth)
                return self._step_out_of_node(
                    mid_ext, pos_mid, ext_next, th_next, roots_next,
                    [spec], self.refine_depth)
            raise TraceAmbiguous(
                f"matching not resolved on theta interval "
                f"({_wrap(ext_prev):.8f}, {_wrap(ext_next):.8f})"
            )
        self.bisections += 1
        mid_ext = 0.5 * (ext_prev + ext_next)
        th_mid = _wrap(mid_ext)
        roots_mid = self.solve_entry(th_mid, None)
        pos_mid = self.step(ext_prev, pos_prev, mid_ext, th_mid, roots_mid,
                            specs_prev, None, depth - 1)
        return self.step(mid_ext, pos_mid, ext_next, th_next, roots_next,
                         None, specs_next, depth - 1)

    def _detect_node(self, ext_prev, ext_next, roots_next):
        """Depth limit reached: try to recognize an unregistered collision at
        a stationary point and return (ext_theta, spec) for it."""
        if self.n < 2:
            return None
        sep = np.abs(roots_next[:, None] - roots_next[None, :])
        np.fill_diagonal(sep, np.inf)
        i, j = np.unravel_index(np.argmin(sep), sep.shape)
        hot = 0.5 * (roots_next[i] + roots_next[j])
        cand = None
        for s in self.stationary:
            if any(ev.stat is s for ev in self.node_events):
                continue
            if abs(s.lam - hot) <= 0.05 * (1.0 + abs(hot)):
                cand = s
                break
        if cand is None:
            return None
        for th, turning in curve_angles(self.curve, cand.image, tol=1e-3):
            for ext_cand in (th, th + 2.0 * math.pi):
                if ext_prev < ext_cand < ext_next:
                    kind = "turning" if turning else "interior"
                    return ext_cand, _NodeSpec(th, cand.lam, cand.order + 1,
                                               kind, cand)
        return None

    def _step_into_node(self, ext_prev, pos_prev, ext_next, th_next,
                        roots_next, specs_next, depth):
        n = self.n
        out = np.empty(n, dtype=complex)
        taken = np.zeros(n, dtype=bool)
        pending = []
        for spec in specs_next:
            d = np.where(taken, np.inf, np.abs(pos_prev - spec.lam))
            idx = np.argsort(d)
            chosen = idx[: spec.k]
            if int(np.sum(~taken)) > spec.k:
                if d[idx[spec.k - 1]] > 0.45 * d[idx[spec.k]]:
                    return self._bisect(ext_prev, pos_prev, ext_next, th_next,
                                        roots_next, None, specs_next, depth)
            pending.append((spec, chosen))
            taken[chosen] = True

        for spec, chosen in pending:
            spec.labels = [int(l) for l in chosen]
            ref_idx = spec.approach_chain_idx
            ref = self.chain[ref_idx][2] if ref_idx is not None and \
                ref_idx >= 0 else pos_prev
            spec.in_angles = {
                l: math.atan2((ref[l] - spec.lam).imag, (ref[l] - spec.lam).real)
                for l in spec.labels
            }
            out[chosen] = spec.lam
            spec.chain_idx = len(self.chain)
            self.node_events.append(spec)

        rest = np.flatnonzero(~taken)
        if rest.size:
            pool = list(range(n))
            for spec, _ in pending:
                dd = np.abs(roots_next - spec.lam)
                for _ in range(spec.k):
                    best = min(pool, key=lambda t: dd[t])
                    pool.remove(best)
            pool = np.asarray(pool, dtype=int)
            perm = _assign(pos_prev[rest], roots_next[pool])
            if not _acceptable(pos_prev[rest], roots_next[pool], perm):
                for spec, _ in pending:
                    self.node_events.remove(spec)
                return self._bisect(ext_prev, pos_prev, ext_next, th_next,
                                    roots_next, None, specs_next, depth)
            out[rest] = roots_next[pool][perm]
        self.chain.append((ext_next, th_next, out.copy()))
        return out

    def _step_out_of_node(self, ext_prev, pos_prev, ext_next, th_next,
                          roots_next, specs_prev, depth):
        n = self.n
        orient = orientation(self.curve)
        out = np.empty(n, dtype=complex)
        taken_roots = np.zeros(n, dtype=bool)
        assigned = np.zeros(n, dtype=bool)
        for spec in specs_prev:
            d = np.where(taken_roots, np.inf, np.abs(roots_next - spec.lam))
            idx = np.argsort(d)
            cand = idx[: spec.k]
            if int(np.sum(~taken_roots)) > spec.k:
                if d[idx[spec.k - 1]] > 0.45 * d[idx[spec.k]]:
                    return self._bisect(ext_prev, pos_prev, ext_next, th_next,
                                        roots_next, specs_prev, None, depth)
            cand_ang = np.array([
                math.atan2((roots_next[i] - spec.lam).imag,
                           (roots_next[i] - spec.lam).real)
                for i in cand
            ])
            shift = 0.0 if spec.kind == "turning" else -orient * math.pi / spec.k
            targets = [spec.in_angles[l] + shift for l in spec.labels]
            cost = np.array([[_ang_diff(t, a) for a in cand_ang]
                             for t in targets])
            _, cols = linear_sum_assignment(cost)
            spec.out_angles = {}
            for li, ci in enumerate(cols):
                label = spec.labels[li]
                out[label] = roots_next[cand[ci]]
                spec.out_angles[label] = float(cand_ang[ci])
                assigned[label] = True
                taken_roots[cand[ci]] = True

        rest = np.flatnonzero(~assigned)
        if rest.size:
            pool = np.flatnonzero(~taken_roots)
            perm = _assign(pos_prev[rest], roots_next[pool])
            if not _acceptable(pos_prev[rest], roots_next[pool], perm):
                return self._bisect(ext_prev, pos_prev, ext_next, th_next,
                                    roots_next, specs_prev, None, depth)
            out[rest] = roots_next[pool][perm]
        self.chain.append((ext_next, th_next, out.copy()))
        return out


def trace_bands(disc, min_samples: int | None = None,
                tol: float = DEFAULT_TRACE_TOL,
                refine_depth: int = REFINE_DEPTH) -> TraceResult:
    """Trace the spectrum by continuation over theta in (-pi, pi].

    Bands are continuous branches over the wrapped interval; the monodromy
    permutation says which band each band continues into across the
    pi -> -pi seam, and its cycles are the petals. Bouquet connectivity is
    filled in by assemble_bouquets.
    """
    n = disc.P.degree
    if disc.curve.kind == "point":
        return TraceResult(
            disc=disc, bands=[], monodromy=np.array([], dtype=int),
            petals=[], bouquets=[], flower_centers=[], nodes=[],
            stationary=[], degenerate_roots=cpoly.roots(disc.P),
            meta={"min_samples": 0, "tol": tol, "bisections": 0},
        )
    if min_samples is None:
        min_samples = DEFAULT_SAMPLES_PER_DEGREE * n
    if min_samples < 8 * n:
        raise ValueError("min_samples must be at least 8 * degree")

    tracer = _Tracer(disc, min_samples, tol, refine_depth)
    sigma = np.asarray(tracer.run(), dtype=int)
    chain = tracer.chain

    ext_arr = np.array([e for e, _, _ in chain])
    wrapped_arr = np.array([w for _, w, _ in chain])
    # head entries were marched before the pi seam (ext == wrapped); tail
    # entries after it carry ext = wrapped + 2*pi
    is_head = np.abs(ext_arr - wrapped_arr) < 1e-9

    # a continuous branch over (-pi, pi] takes the marching label l on the
    # tail and sigma(l) on the head (the closing match glues tail to head)
    order_wrapped = np.argsort(wrapped_arr, kind="stable")
    band_th = []
    band_lam = []
    owner_of = {}  # (chain_idx, march_label) -> branch id
    for l in range(n):
        ths = np.empty(order_wrapped.size)
        lams = np.empty(order_wrapped.size, dtype=complex)
        for k, ci in enumerate(order_wrapped):
            label = int(sigma[l]) if is_head[ci] else l
            ths[k] = wrapped_arr[ci]
            lams[k] = chain[ci][2][label]
            owner_of[(int(ci), label)] = l
        band_th.append(ths)
        band_lam.append(lams)

    new_order = sorted(
        range(n), key=lambda l: (-band_lam[l][0].real, -band_lam[l][0].imag)
    )
    rank = {old: newi for newi, old in enumerate(new_order)}
    bands = [
        Band(band_index=newi, thetas=band_th[old], lams=band_lam[old])
        for newi, old in enumerate(new_order)
    ]
    mono = np.empty(n, dtype=int)
    for old in range(n):
        mono[rank[old]] = rank[int(sigma[old])]
    petals = _cycles(mono)

    nodes = []
    for ev in tracer.node_events:
        bl = set()
        for label in ev.labels:
            owner = owner_of.get((ev.chain_idx, label))
            if owner is None:
                continue
            bl.add(rank[owner])
        nodes.append(TraceNode(
            theta=float(_wrap(ev.theta)), lam=complex(ev.lam),
            order=ev.k - 1, kind=ev.kind, band_indices=tuple(sorted(bl)),
            in_angles=tuple(ev.in_angles[l] for l in ev.labels),
            out_angles=tuple(
                ev.out_angles[l] for l in ev.labels
            ) if ev.out_angles else tuple(),
        ))

    result = TraceResult(
        disc=disc, bands=bands, monodromy=mono, petals=petals,
        bouquets=None, flower_centers=None, nodes=nodes,
        stationary=tracer.stationary, degenerate_roots=None,
        meta={"min_samples": min_samples, "tol": tol,
              "bisections": tracer.bisections},
    )
    _validate_bands(result, tol)
    return result


def _cycles(perm: np.ndarray) -> list:
    seen = np.zeros(perm.size, dtype=bool)
    cycles = []
    for i in range(perm.size):
        if seen[i]:
            continue
        cyc = []
        j = i
        while not seen[j]:
            seen[j] = True
            cyc.append(int(j))
            j = int(perm[j])
        k = cyc.index(min(cyc))
        cycles.append(tuple(cyc[k:] + cyc[:k]))
    cycles.sort(key=lambda c: c[0])
    return cycles


def _validate_bands(tr: TraceResult, tol: float):
    scale = cpoly.coeff_scale(tr.disc.P)
    worst = 0.0
    for band in tr.bands:
        if np.any(np.diff(band.thetas) <= 0):
            raise TraceAmbiguous("band thetas are not strictly increasing")
        resid = np.abs(
            cpoly.eval_poly(tr.disc.P, band.lams)
            - curve_point(tr.disc.curve, band.thetas)
        )
        worst = max(worst, float(np.max(resid)))
    if worst > tol * scale:
        raise TraceAmbiguous(
            f"band residual {worst:.3e} exceeds {tol:.1e} * coefficient scale"
        )
    tr.meta["max_residual"] = worst


def assemble_bouquets(tr: TraceResult, stationary=None, tol: float = 1e-9,
                      _retry: bool = True) -> TraceResult:
    """Group traced petals (bands, in the segment case) into connected
    components through shared collision points; cross-check the component
    count against the closed-form bouquet count, refining once on mismatch."""
    if tr.disc.curve.kind == "point":
        tr.bouquets = []
        tr.flower_centers = []
        return tr
    rep = structure_report(tr.disc)

    segment = tr.disc.curve.kind == "segment"
    n_items = len(tr.bands) if segment else len(tr.petals)
    parent = list(range(n_items))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    band_to_petal = {}
    for pi, cyc in enumerate(tr.petals):
        for b in cyc:
            band_to_petal[b] = pi

    centers: dict = {}
    for node in tr.nodes:
        key = (round(node.lam.real, 9), round(node.lam.imag, 9))
        rec = centers.setdefault(key, {
            "lam": node.lam, "order": node.order, "kind": node.kind,
            "bands": set(),
        })
        rec["bands"].update(node.band_indices)
        if node.kind == "interior":
            rec["kind"] = "interior"

    flower_centers = []
    for rec in sorted(centers.values(),
                      key=lambda r: (r["lam"].real, r["lam"].imag)):
        items = (sorted(rec["bands"]) if segment
                 else sorted({band_to_petal[b] for b in rec["bands"]}))
        for i, j in zip(items, items[1:]):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[rj] = ri
        flower_centers.append(FlowerCenter(
            lam=complex(rec["lam"]), order=rec["order"], kind=rec["kind"],
            band_indices=tuple(sorted(rec["bands"])),
            petal_indices=tuple(sorted({band_to_petal[b]
                                        for b in rec["bands"]})),
        ))

    comps: dict = {}
    for i in range(n_items):
        comps.setdefault(find(i), []).append(i)
    bouquets = sorted(tuple(sorted(v)) for v in comps.values())

    if len(bouquets) != rep.bouquet_count:
        if _retry:
            tr2 = trace_bands(tr.disc, tr.meta["min_samples"] * 2,
                              tr.meta["tol"])
            return assemble_bouquets(tr2, stationary, tol, _retry=False)
        raise StructureMismatch(
            f"traced {len(bouquets)} components, "
            f"closed form expects {rep.bouquet_count}"
        )
    tr.bouquets = bouquets
    tr.flower_centers = flower_centers
    return tr


def angle_check(tr: TraceResult, center: StationaryPoint,
                tol: float = 0.25) -> list:
    """Angular gaps between the arc directions meeting at a collision point,
    from the trace samples adjacent to the shared node."""
    dirs = []
    for node in tr.nodes:
        if abs(node.lam - center.lam) <= 1e-7 * (1.0 + abs(center.lam)):
            dirs.extend(node.in_angles)
            dirs.extend(node.out_angles)
    if not dirs:
        raise InsufficientSampling("no traced collision at the given center")
    dirs = sorted(_wrap(d) for d in dirs)
    clustered = []
    for d in dirs:
        if clustered and abs(d - clustered[-1]) <= tol:
            continue
        clustered.append(d)
    if len(clustered) > 1 and \
            _ang_diff(clustered[0] + 2.0 * math.pi, clustered[-1]) <= tol:
        clustered.pop()
    if len(clustered) < 2:
        raise InsufficientSampling("fewer than two distinct arc directions")
    gaps = []
    for i, cur in enumerate(clustered):
        nxt = clustered[(i + 1) % len(clustered)]
        gap = nxt - cur if i + 1 < len(clustered) else nxt + 2.0 * math.pi - cur
        gaps.append(float(gap))
    return sorted(gaps)


def spectrum_distance(disc, points) -> float:
    """Largest distance from the given points to the spectrum, by projecting
    each point back onto the traced set through the defining equation."""
    pts = np.asarray(points, dtype=complex).ravel()
    if pts.size == 0:
        return 0.0
    P, curve = disc.P, disc.curve
    if curve.kind == "point":
        roots = cpoly.roots(P).expanded()
        return float(np.max(np.min(np.abs(pts[:, None] - roots[None, :]),
                                   axis=1)))
    dP = cpoly.derivative(P)
    z = np.atleast_1d(cpoly.eval_poly(P, pts))

    grid = np.linspace(-math.pi, math.pi, 257)
    cp = np.atleast_1d(curve_point(curve, grid))
    best = grid[np.argmin(np.abs(z[:, None] - cp[None, :]), axis=1)]
    span = float(grid[1] - grid[0])
    for _ in range(24):
        offs = np.linspace(-span, span, 7)
        th = best[:, None] + offs[None, :]
        vals = np.abs(z[:, None] - curve_point(curve, th))
        best = th[np.arange(pts.size), np.argmin(vals, axis=1)]
        span *= 0.45

    target = np.atleast_1d(curve_point(curve, best))
    lam = pts.copy()
    for _ in range(40):
        f = np.atleast_1d(cpoly.eval_poly(P, lam)) - target
        df = np.atleast_1d(cpoly.eval_poly(dP, lam))
        df = np.where(np.abs(df) < 1e-300, 1e-300, df)
        step = f / df
        step_norm = np.abs(step)
        step = np.where(step_norm > 0.5, step * (0.5 / step_norm), step)
        lam = lam - step
        if float(np.max(np.abs(step))) < 1e-14:
            break
    return float(np.max(np.abs(lam - pts)))


def export_geometry(tr: TraceResult, fmt: str = "csv") -> str:
    """Serialize the traced spectrum: CSV point rows or an SVG drawing."""
    if fmt == "csv":
        return _export_csv(tr)
    if fmt == "svg":
        return _export_svg(tr)
    raise ValueError("format must be 'csv' or 'svg'")


def _band_petal_bouquet(tr: TraceResult):
    band_to_petal = {}
    for pi, cyc in enumerate(tr.petals):
        for b in cyc:
            band_to_petal[b] = pi
    item_to_bouquet = {}
    if tr.bouquets:
        for qi, comp in enumerate(tr.bouquets):
            for item in comp:
                item_to_bouquet[item] = qi
    segment = tr.disc.curve.kind == "segment"

    def bouquet_of(band_id: int) -> int:
        if not item_to_bouquet:
            return -1
        if segment:
            return item_to_bouquet.get(band_id, -1)
        return item_to_bouquet.get(band_to_petal.get(band_id, -1), -1)

    return band_to_petal, bouquet_of


def _export_csv(tr: TraceResult) -> str:
    lines = ["band_id,petal_id,bouquet_id,theta,re,im"]
    if tr.degenerate_roots is not None:
        for r, m in tr.degenerate_roots:
            for _ in range(m):
                lines.append(f"-1,-1,-1,0.0,{r.real!r},{r.imag!r}")
        return "\n".join(lines) + "\n"
    band_to_petal, bouquet_of = _band_petal_bouquet(tr)
    segment = tr.disc.curve.kind == "segment"
    for band in tr.bands:
        pid = -1 if segment else band_to_petal.get(band.band_index, -1)
        qid = bouquet_of(band.band_index)
        for t, lam in zip(band.thetas, band.lams):
            lines.append(
                f"{band.band_index},{pid},{qid},{float(t)!r},"
                f"{lam.real!r},{lam.imag!r}"
            )
    return "\n".join(lines) + "\n"


def _svg_path(points: np.ndarray, sx, sy) -> str:
    cmds = []
    for i, zv in enumerate(points):
        op = "M" if i == 0 else "L"
        cmds.append(f"{op}{sx(zv.real):.3f},{sy(zv.imag):.3f}")
    return " ".join(cmds)


def _export_svg(tr: TraceResult) -> str:
    W = H = 640.0
    pts = []
    if tr.degenerate_roots is not None:
        pts.append(tr.degenerate_roots.expanded())
    else:
        for band in tr.bands:
            pts.append(band.lams)
    curve = tr.disc.curve
    if curve.kind != "point":
        th = np.linspace(-math.pi, math.pi, 512)
        pts.append(np.atleast_1d(curve_point(curve, th)))
    for s in tr.stationary:
        pts.append(np.array([s.image]))
    allpts = np.concatenate(pts) if pts else np.zeros(1, dtype=complex)
    x0, x1 = float(np.min(allpts.real)), float(np.max(allpts.real))
    y0, y1 = float(np.min(allpts.imag)), float(np.max(allpts.imag))
    pad = 0.08 * max(x1 - x0, y1 - y0, 1e-6)
    x0, x1, y0, y1 = x0 - pad, x1 + pad, y0 - pad, y1 + pad
    span = max(x1 - x0, y1 - y0)

    def sx(x):
        return (x - x0) / span * W

    def sy(y):
        return H - (y - y0) / span * H

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" '
        f'height="{H:.0f}" viewBox="0 0 {W:.0f} {H:.0f}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    if curve.kind != "point":
        th = np.linspace(-math.pi, math.pi, 512)
        cpts = np.atleast_1d(curve_point(curve, th))
        parts.append(
            f'<path d="{_svg_path(cpts, sx, sy)}" fill="none" stroke="red" '
            'stroke-width="1.2"/>'
        )
    if tr.degenerate_roots is not None:
        for r, _ in tr.degenerate_roots:
            parts.append(
                f'<circle cx="{sx(r.real):.3f}" cy="{sy(r.imag):.3f}" r="3" '
                'fill="black"/>'
            )
    elif tr.petals and curve.kind == "ellipse":
        for pi in range(len(tr.petals)):
            poly = tr.petal_polyline(pi)
            parts.append(
                f'<path d="{_svg_path(poly, sx, sy)}" fill="none" '
                'stroke="black" stroke-width="1.0"/>'
            )
    else:
        for band in tr.bands:
            parts.append(
                f'<path d="{_svg_path(band.lams, sx, sy)}" fill="none" '
                'stroke="black" stroke-width="1.0"/>'
            )
    for s in tr.stationary:
        parts.append(_svg_star(sx(s.image.real), sy(s.image.imag), 6.0))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _svg_star(cx: float, cy: float, r: float) -> str:
    pts = []
    for i in range(10):
        rr = r if i % 2 == 0 else 0.4 * r
        ang = -math.pi / 2 + i * math.pi / 5
        pts.append(f"{cx + rr * math.cos(ang):.2f},"
                   f"{cy + rr * math.sin(ang):.2f}")
    return (f'<polygon points="{" ".join(pts)}" fill="gold" stroke="black" '
            'stroke-width="0.6"/>')
