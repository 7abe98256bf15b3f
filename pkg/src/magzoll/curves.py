"""Discrete closed curves: length, self-intersection count, capping flux, winding.

A loop is stored as a lifted polyline: consecutive chart points plus an
integer winding vector giving the closure displacement (lattice units on the
torus, whole turns of phi on revolution charts).  Points of the lift are
consecutive-close; the quotient representative is obtained by reduction.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DegenerateSegments, NonContractible
from .geometry import MagneticSurface

_GAUSS_SEG = np.polynomial.legendre.leggauss(8)
_GAUSS_PRIM = np.polynomial.legendre.leggauss(64)


@dataclass
class DiscreteLoop:
    """Closed polyline with a free period.

    ``points`` is the lift (row per vertex, no repeated endpoint); vertex N-1
    connects back to vertex 0 displaced by ``winding`` chart periods.
    """

    points: np.ndarray
    period: float
    winding: tuple = (0, 0)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError("points must be an (N, 2) array")
        if len(self.points) < 8:
            raise ValueError("loops need at least 8 points")
        if not self.period > 0:
            raise ValueError("period must be positive")
        self.winding = (int(self.winding[0]), int(self.winding[1]))
        d = np.diff(self.points, axis=0)
        if np.any((d == 0).all(axis=1)):
            raise ValueError("consecutive points must be distinct")

    @property
    def n(self):
        return len(self.points)

    def closure_shift(self, surface) -> np.ndarray:
        """Chart displacement added to vertex 0 to close the lift."""
        if surface.kind == "flat_torus":
            return np.array(self.winding, dtype=float)
        if surface.is_revolution_chart:
            return np.array([0.0, 2 * math.pi * self.winding[1]])
        return np.zeros(2)

    def closed_points(self, surface) -> np.ndarray:
        """Lifted polyline with the closing vertex appended."""
        return np.vstack([self.points, self.points[0] + self.closure_shift(surface)])

    def segments(self, surface):
        pts = self.closed_points(surface)
        return pts[:-1], pts[1:]

    def is_contractible(self, surface) -> bool:
        if surface.kind == "plane":
            return True
        if surface.kind == "flat_torus":
            return self.winding == (0, 0)
        return True  # simply connected

    def diameter(self) -> float:
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def resample(self, n_new, surface) -> "DiscreteLoop":
        """Periodic cubic resampling to ``n_new`` vertices (uniform parameter).

        The winding drift is split off so wound lifts resample smoothly.
        """
        shift = self.closure_shift(surface)
        pts = np.vstack([self.points, self.points[0] + shift])
        s = np.linspace(0.0, 1.0, len(pts))
        periodic_part = pts - np.outer(s, shift)
        spl = CubicSpline(s, periodic_part, axis=0, bc_type="periodic")
        s_new = np.arange(n_new) / n_new
        return DiscreteLoop(spl(s_new) + np.outer(s_new, shift),
                            self.period, self.winding)

    def reversed(self) -> "DiscreteLoop":
        pts = np.vstack([self.points[:1], self.points[1:][::-1]])
        return DiscreteLoop(pts, self.period, (-self.winding[0], -self.winding[1]))

    def cycled(self, k, surface) -> "DiscreteLoop":
        """Cyclic reparametrization starting at vertex ``k`` (same lift class)."""
        shift = self.closure_shift(surface)
        rolled = np.vstack([self.points[k:], self.points[:k] + shift])
        return DiscreteLoop(rolled, self.period, self.winding)

    def vertex_tangent(self, i, surface):
        """Lift-aware central-difference tangent direction at vertex ``i``."""
        shift = self.closure_shift(surface)
        nxt = self.points[(i + 1) % self.n] + (shift if i + 1 >= self.n else 0.0)
        prv = self.points[(i - 1) % self.n] - (shift if i == 0 else 0.0)
        return nxt - prv

    def to_json_dict(self):
        return {"points": self.points.tolist(), "period": self.period,
                "winding": list(self.winding)}

    @classmethod
    def from_json_dict(cls, d):
        return cls(np.asarray(d["points"], dtype=float), float(d["period"]),
                   tuple(d.get("winding", (0, 0))))


def lift_chart_points(points, surface) -> tuple[np.ndarray, tuple]:
    """Continuous lift of a closed chart polyline; returns (lift, winding)."""
    pts = np.asarray(points, dtype=float)
    if surface.kind == "flat_torus":
        period = (1.0, 1.0)
    elif surface.is_revolution_chart:
        period = (0.0, 2 * math.pi)  # theta is not periodic
    else:
        return pts.copy(), (0, 0)
    lift = pts.copy()
    for i in range(1, len(pts)):
        d = pts[i] - lift[i - 1]
        for k in (0, 1):
            if period[k]:
                d[k] -= period[k] * round(d[k] / period[k])
        lift[i] = lift[i - 1] + d
    d = pts[0] - lift[-1]
    for k in (0, 1):
        if period[k]:
            d[k] -= period[k] * round(d[k] / period[k])
    end = lift[-1] + d
    w = [0, 0]
    for k in (0, 1):
        if period[k]:
            w[k] = int(round((end[k] - lift[0][k]) / period[k]))
    return lift, (w[0], w[1])


def loop_from_chart_points(points, period, surface) -> DiscreteLoop:
    lift, w = lift_chart_points(points, surface)
    return DiscreteLoop(lift, period, w)


# ----------------------------------------------------------------------
# length


def loop_length(loop: DiscreteLoop, surface: MagneticSurface) -> float:
    """Polyline length with the metric evaluated at segment midpoints."""
    a, b = loop.segments(surface)
    d = b - a
    mid = 0.5 * (a + b)
    if surface.is_flat_chart:
        G = surface._G
        val = np.einsum("ij,jk,ik->i", d, G, d)
    else:
        av = np.asarray(surface.warp(mid[:, 0]), dtype=float)
        val = d[:, 0] ** 2 + (av * d[:, 1]) ** 2
    return float(np.sum(np.sqrt(np.maximum(val, 0.0))))


def homotopy_class(loop: DiscreteLoop, surface: MagneticSurface) -> tuple:
    """Winding vector of the lift; (0, 0) iff contractible on the torus."""
    if surface.kind != "flat_torus":
        raise ValueError("homotopy classes are tracked on the flat torus")
    return loop.winding


# ----------------------------------------------------------------------
# self-intersections


def _quotient_segments(loop: DiscreteLoop, surface):
    a, b = loop.segments(surface)
    if surface.kind == "flat_torus":
        base = np.floor(a)
        return a - base, b - base, np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)
    if surface.is_revolution_chart:
        shift = np.zeros((3, 2))
        shift[:, 1] = np.array([-2 * math.pi, 0.0, 2 * math.pi])
        base = np.zeros_like(a)
        base[:, 1] = 2 * math.pi * np.floor(a[:, 1] / (2 * math.pi))
        return a - base, b - base, shift
    return a, b, np.zeros((1, 2))


def _count_proper(A, B, offsets, eps, n_segments, collect_degenerate):
    """Count proper crossings of the closed polyline on the quotient.

    All segment pairs are tested per lattice offset with vectorized
    orientation predicates; pairs with any orientation inside the collar and
    overlapping boxes are reported as degenerate contact events.
    """
    N = n_segments
    count = 0
    degenerate = []
    half = len(offsets) // 2
    for oi, off in enumerate(offsets):
        off = np.asarray(off, dtype=float)
        is_zero = not off.any()
        A2 = A + off
        B2 = B + off
        r = B - A
        s2 = B2 - A2
        # orientation of the second segment's endpoints against the first, and
        # vice versa, for every (i, j) pair
        dax = A2[None, :, 0] - A[:, None, 0]
        day = A2[None, :, 1] - A[:, None, 1]
        dbx = B2[None, :, 0] - A[:, None, 0]
        dby = B2[None, :, 1] - A[:, None, 1]
        o1 = r[:, None, 0] * day - r[:, None, 1] * dax
        o2 = r[:, None, 0] * dby - r[:, None, 1] * dbx
        o3 = -(s2[None, :, 0] * day - s2[None, :, 1] * dax)
        o4 = s2[None, :, 0] * (B[:, None, 1] - A2[None, :, 1]) - \
            s2[None, :, 1] * (B[:, None, 0] - A2[None, :, 0])
        min_abs = np.minimum(np.minimum(np.abs(o1), np.abs(o2)),
                             np.minimum(np.abs(o3), np.abs(o4)))

        # pair selection mask; consecutive segments of the curve never count
        # as contacts (their shared endpoint may sit across a cell boundary)
        idx = np.arange(N)
        adjacent = (idx[:, None] + 1 == idx[None, :]) \
            | ((idx[:, None] == 0) & (idx[None, :] == N - 1))
        sel = (idx[:, None] < idx[None, :]) & ~adjacent
        if not is_zero and oi < half:
            sel |= idx[:, None] == idx[None, :]

        proper = sel & (min_abs > eps) & ((o1 > 0) != (o2 > 0)) & ((o3 > 0) != (o4 > 0))
        count += int(proper.sum())

        near = sel & (min_abs <= eps)
        if near.any():
            # discard pairs whose boxes are separated (no actual contact)
            lo1 = np.minimum(A, B)
            hi1 = np.maximum(A, B)
            lo2 = np.minimum(A2, B2)
            hi2 = np.maximum(A2, B2)
            seplo = eps
            overlap = ~((hi1[:, None, 0] + seplo < lo2[None, :, 0])
                        | (hi2[None, :, 0] + seplo < lo1[:, None, 0])
                        | (hi1[:, None, 1] + seplo < lo2[None, :, 1])
                        | (hi2[None, :, 1] + seplo < lo1[:, None, 1]))
            near &= overlap
            if collect_degenerate:
                for i, j in np.argwhere(near):
                    pt = 0.25 * (A[i] + B[i] + A2[j] + B2[j])
                    degenerate.append((int(i), int(j), tuple(off), pt))
            elif near.any():
                degenerate.append(None)
    return count, degenerate


def self_intersections(loop: DiscreteLoop, surface: MagneticSurface) -> int:
    """Transversal self-crossings of the closed polyline, with multiplicity.

    Proper pairwise crossings are counted exactly (an m-branch transversal
    point therefore contributes m(m-1)/2).  Contact events that are
    degenerate at the collar scale (tangencies, vertex hits) are resolved by
    a deterministic radial perturbation over 8 phases; each event contributes
    the minimum simple count over the phases, and at least one.
    """
    A, B, offsets = _quotient_segments(loop, surface)
    diam = max(loop.diameter(), 1e-30)
    eps = 1e-12 * diam * diam
    count, degenerate = _count_proper(A, B, offsets, eps, loop.n, True)
    if not degenerate:
        return count

    # Cluster contact events by location, then resolve each cluster by
    # perturbing the whole loop and re-counting within the cluster radius.
    pts = np.array([d[3] for d in degenerate])
    seg_len = np.median(np.linalg.norm(B - A, axis=1))
    radius = 3.0 * seg_len
    clusters = []
    used = np.zeros(len(pts), dtype=bool)
    for i in range(len(pts)):
        if used[i]:
            continue
        sel = np.linalg.norm(pts - pts[i], axis=1) <= radius
        used |= sel
        clusters.append(pts[sel].mean(axis=0))

    delta = 1e-7 * diam
    centroid = loop.points.mean(axis=0)
    base_pts = loop.points
    radial = base_pts - centroid
    nrm = np.linalg.norm(radial, axis=1)
    nrm[nrm == 0] = 1.0
    radial = radial / nrm[:, None]
    idx = np.arange(loop.n)

    best = None
    for phase in range(8):
        bump = np.cos(2 * math.pi * 3 * idx / loop.n + 2 * math.pi * phase / 8)
        pert = DiscreteLoop(base_pts + delta * bump[:, None] * radial,
                            loop.period, loop.winding)
        Ap, Bp, offs = _quotient_segments(pert, surface)
        total_p, degen_p = _count_proper(Ap, Bp, offs, eps, pert.n, True)
        if degen_p:
            continue
        if best is None or total_p < best:
            best = total_p
    if best is None:
        raise DegenerateSegments("radial perturbation failed to separate overlapping segments")
    # Each contact event counts at least one (tangencies perturb away but
    # still contribute); exact multi-branch points keep their perturbed count.
    return max(best, count + len(clusters))


# ----------------------------------------------------------------------
# capping flux


_PRIMITIVE_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _symmetric_primitive(surface, sweep, lo, hi):
    """Cached spline antiderivative of the sweep-line density for fields that
    do not depend on the transverse coordinate (value and derivative evaluate
    as an exactly consistent pair)."""
    cache = _PRIMITIVE_CACHE.setdefault(surface, {})
    entry = cache.get(sweep)
    if entry is not None:
        spl_A, spl_g, dom = entry
        if dom[0] <= lo and hi <= dom[1]:
            return spl_A, spl_g
    if surface.is_revolution_chart:
        dom = (0.0, surface.theta_max)
    else:
        dom = (min(-4.0, math.floor(lo) - 1.0), max(5.0, math.ceil(hi) + 1.0))
    s = np.linspace(dom[0], dom[1], 4001)
    if surface.is_revolution_chart:
        dens = surface.f(s, np.zeros_like(s)) * np.asarray(surface.warp(s), dtype=float)
    elif sweep == "x":
        dens = surface.f(s, np.zeros_like(s)) * surface._sqrtg
    else:
        dens = surface.f(np.zeros_like(s), s) * surface._sqrtg
    spl_g = CubicSpline(s, np.broadcast_to(dens, s.shape))
    spl_A = spl_g.antiderivative()
    shiftv = float(spl_A(0.0))
    # anchor the primitive at 0 so the gauge matches the direct quadrature
    spl_A = CubicSpline(s, spl_A(s) - shiftv)
    cache[sweep] = (spl_A, spl_g, dom)
    return spl_A, spl_g


def _symmetric_fast_path(surface, sweep):
    if surface.is_revolution_chart:
        return not surface.f.depends_on(1)
    if sweep == "x":
        return not surface.f.depends_on(1)
    return not surface.f.depends_on(0)


def _flux_primitive_values(surface, lam, pts, sweep, want_grad=False):
    """Primitive P with dP = lam * f * area-form along the sweep coordinate.

    Returns P (and optionally grad P) at the given chart points.
    ``sweep='x'`` builds P(x, y) = lam * int_0^x f(s, y) sqrt(g) ds acting on
    dy; ``sweep='y'`` the analogous x-form with a sign flip.
    """
    u, w = pts[:, 0], pts[:, 1]
    if _symmetric_fast_path(surface, sweep):
        sw = u if (surface.is_revolution_chart or sweep == "x") else w
        spl_A, spl_g = _symmetric_primitive(surface, sweep,
                                            float(sw.min()), float(sw.max()))
        P = lam * np.asarray(spl_A(sw), dtype=float)
        if not want_grad:
            return P
        Pd = lam * np.asarray(spl_g(sw), dtype=float)
        zero = np.zeros_like(P)
        if surface.is_revolution_chart or sweep == "x":
            return P, Pd, zero
        return P, zero, Pd
    nodes, weights = _GAUSS_PRIM
    if surface.is_flat_chart:
        sg = surface._sqrtg
        if sweep == "x":
            S = 0.5 * u[:, None] * (nodes[None, :] + 1.0)
            Yb = np.broadcast_to(w[:, None], S.shape)
            vals = surface.f(S, Yb)
            P = lam * sg * 0.5 * u * (vals * weights[None, :]).sum(axis=1)
            if not want_grad:
                return P
            Pu = lam * sg * surface.f(u, w)
            dvals = surface.f.diff(1)(S, Yb)
            Pw = lam * sg * 0.5 * u * (dvals * weights[None, :]).sum(axis=1)
            return P, Pu, Pw
        S = 0.5 * w[:, None] * (nodes[None, :] + 1.0)
        Xb = np.broadcast_to(u[:, None], S.shape)
        vals = surface.f(Xb, S)
        P = lam * sg * 0.5 * w * (vals * weights[None, :]).sum(axis=1)
        if not want_grad:
            return P
        dvals = surface.f.diff(0)(Xb, S)
        Pu = lam * sg * 0.5 * w * (dvals * weights[None, :]).sum(axis=1)
        Pw = lam * sg * surface.f(u, w)
        return P, Pu, Pw
    # revolution chart: P(theta, phi) = lam * int_0^theta f(s, phi) a(s) ds on dphi
    S = 0.5 * u[:, None] * (nodes[None, :] + 1.0)
    Pb = np.broadcast_to(w[:, None], S.shape)
    av = np.asarray(surface.warp(S), dtype=float)
    vals = surface.f(S, Pb) * av
    P = lam * 0.5 * u * (vals * weights[None, :]).sum(axis=1)
    if not want_grad:
        return P
    Pu = lam * surface.f(u, w) * np.asarray(surface.warp(u), dtype=float)
    dvals = surface.f.diff(1)(S, Pb) * av
    Pw = lam * 0.5 * u * (dvals * weights[None, :]).sum(axis=1)
    return P, Pu, Pw


def _flux_line_integral(loop, surface, lam, sweep):
    """Gauss quadrature of the primitive 1-form along the lifted polyline."""
    a, b = loop.segments(surface)
    d = b - a
    tn, tw = _GAUSS_SEG
    tpts = 0.5 * (tn + 1.0)
    # evaluation points: (n_seg, n_nodes, 2)
    pts = a[:, None, :] + tpts[None, :, None] * d[:, None, :]
    flat = pts.reshape(-1, 2)
    P = _flux_primitive_values(surface, lam, flat, sweep).reshape(len(a), -1)
    if sweep == "x":
        comp = d[:, 1]
    else:
        comp = -d[:, 0]
    return float(np.sum(P @ (0.5 * tw) * comp))


def flux(loop: DiscreteLoop, surface: MagneticSurface, lam: float,
         sweep: str = "x") -> float:
    """Capping integral of ``lam * f`` against the area form.

    Torus/plane: signed flux through the region enclosed by the lift (the
    loop must be contractible); orientation reversal flips the sign.  On
    revolution spheres the capping disk is the one whose boundary orientation
    is the loop's; the whole-surface ambiguity is exposed by
    :func:`flux_with_alternative`.
    """
    if surface.is_flat_chart:
        if not loop.is_contractible(surface):
            raise NonContractible("capping flux needs winding (0, 0) on the torus")
        return _flux_line_integral(loop, surface, lam, sweep)
    value, _alt = flux_with_alternative(loop, surface, lam)
    return value


def flux_with_alternative(loop: DiscreteLoop, surface: MagneticSurface, lam: float):
    """Sphere capping flux plus the value across the opposite capping.

    The two differ by the total flux of the surface; the first entry is the
    disk positively bounded by the loop.
    """
    if surface.is_flat_chart:
        v = flux(loop, surface, lam)
        return v, v
    raw = _flux_line_integral(loop, surface, lam, "x")
    total = lam * surface.total_magnetic_flux()
    if _sphere_loop_is_ccw(loop, surface):
        primary = raw
    else:
        primary = raw + total
    return primary, primary - total


def _sphere_loop_is_ccw(loop, surface) -> bool:
    """Orientation of the loop as seen in a plane chart centered at theta=0."""
    pts = loop.closed_points(surface)
    u = pts[:, 0] * np.cos(pts[:, 1])
    w = pts[:, 0] * np.sin(pts[:, 1])
    area2 = np.sum(u[:-1] * w[1:] - u[1:] * w[:-1])
    return area2 > 0
