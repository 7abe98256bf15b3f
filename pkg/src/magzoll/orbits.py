"""Closed-orbit detection, Zoll certification, the short/long classifier,
and the rotational first integral.

Return detection works on the full unit-bundle state: a trajectory is
scanned for local minima of the distance to its initial state, each
candidate is refined by golden-section search on the interpolated flow, and
a return is accepted only below the detection tolerance.  Prime periods are
extracted by testing integer divisors of the first return time.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate as _sciint

from . import curves, flow
from .curves import DiscreteLoop
from .errors import (InconclusiveScan, NotRotationallySymmetric, PoleEscape,
                     WindowOverlap)
from .geometry import MagneticSurface, UnitTangentState, state_distance_batch

DEFAULT_RETURN_TOL = 1e-7
_GOLD = (math.sqrt(5) - 1) / 2


@dataclass
class ClosedOrbit:
    """A detected periodic orbit of the flow."""

    loop: DiscreteLoop
    period: float
    length: float
    self_int: int
    flux_value: float | None      # magnetic action term: minus the capping flux
    flux_alternative: float | None
    start: UnitTangentState
    lam: float

    def to_json_dict(self):
        return {
            "period": self.period,
            "length": self.length,
            "self_intersections": self.self_int,
            "flux_value": self.flux_value,
            "flux_alternative": self.flux_alternative,
            "start": {"q": self.start.q.tolist(), "v": self.start.v.tolist()},
            "lambda": self.lam,
            "loop": self.loop.to_json_dict(),
        }


@dataclass
class ZollReport:
    is_zoll: bool
    sample_count: int
    common_period: float | None
    period_spread: float
    witness: UnitTangentState | None
    witness_kind: str | None = None   # "nonclosing" | "period-mismatch"
    witness_min_distance: float | None = None
    orbits: list = field(default_factory=list)
    grid: tuple = ()
    starts: list = field(default_factory=list)
    pole_excluded: int = 0

    def to_json_dict(self):
        d = {
            "is_zoll": self.is_zoll,
            "sample_count": self.sample_count,
            "common_period": self.common_period,
            "period_spread": self.period_spread,
            "witness": None,
            "witness_kind": self.witness_kind,
            "witness_min_distance": self.witness_min_distance,
            "grid": list(self.grid),
            "pole_excluded": self.pole_excluded,
        }
        if self.witness is not None:
            d["witness"] = {"q": self.witness.q.tolist(), "v": self.witness.v.tolist()}
        return d


class DichotomyClass(Enum):
    SHORT = "Short"
    LONG = "Long"
    VIOLATION = "Violation"


# ----------------------------------------------------------------------
# return scanning


@dataclass
class _ScanOutcome:
    closed: bool
    period: float | None
    trajectory: object | None
    min_distance: float
    minima: list
    horizon: float
    approaching: bool = False  # still closing in on a return at the horizon


def _local_minima(d):
    """Indices of strict-ish interior local minima of a sampled function."""
    if len(d) < 3:
        return np.empty(0, dtype=int)
    mask = (d[1:-1] <= d[:-2]) & (d[1:-1] <= d[2:])
    return np.nonzero(mask)[0] + 1


def _golden_minimize(dist, t_lo, t_hi, iters=80):
    a, b = t_lo, t_hi
    c = b - _GOLD * (b - a)
    d_ = a + _GOLD * (b - a)
    fc, fd = dist(c), dist(d_)
    for _ in range(iters):
        if b - a < 1e-13 * max(1.0, abs(b)):
            break
        if fc <= fd:
            b, d_, fd = d_, c, fc
            c = b - _GOLD * (b - a)
            fc = dist(c)
        else:
            a, c, fc = c, d_, fd
            d_ = a + _GOLD * (b - a)
            fd = dist(d_)
    if fc <= fd:
        return c, fc
    return d_, fd


def _interp_distance(surface, traj, start, t):
    q, v = traj.interpolate(t)
    return float(state_distance_batch(surface, start, q[None, :], v[None, :])[0])


def _exact_distance(surface, lam, traj, start, t, integ_tol, max_step):
    """Return distance at ``t`` via a short re-integration from the nearest
    stored sample (free of interpolation error)."""
    i = int(np.clip(np.searchsorted(traj.ts, t, side="right") - 1, 0, len(traj.ts) - 1))
    dt = t - float(traj.ts[i])
    if dt <= 1e-15:
        q, v = traj.qs[i], traj.vs[i]
    else:
        sub = flow.integrate(surface, traj.lam,
                             surface.unit_state(traj.qs[i], traj.vs[i]),
                             (0.0, dt), tol=integ_tol, max_step=max_step)
        q, v = sub.qs[-1], sub.vs[-1]
    return float(state_distance_batch(surface, start, q[None, :], v[None, :])[0])


def _refine_return(surface, lam, traj, start, t_lo, t_hi, tol, integ_tol, max_step):
    """Two-stage minimization of the return distance over [t_lo, t_hi].

    A golden-section pass on the Hermite interpolant locates the dip; when
    the value is anywhere near the tolerance the minimum is re-refined with
    exact short re-integrations, which removes the interpolant's floor.
    """
    t1, d1 = _golden_minimize(lambda t: _interp_distance(surface, traj, start, t),
                              t_lo, t_hi)
    if d1 >= 2000 * tol:
        return t1, d1
    w = max(10.0 * (d1 + tol), 1e-9)
    a = max(t_lo, t1 - w)
    b = min(t_hi, t1 + w)
    t2, d2 = _golden_minimize(
        lambda t: _exact_distance(surface, lam, traj, start, t, integ_tol, max_step),
        a, b, iters=60)
    return (t2, d2) if d2 <= d1 else (t1, d1)


def _scan_for_return(surface, lam, start, horizon, tol, integ_tol, max_step):
    """Integrate up to ``horizon`` watching for a full-state return."""
    fmin, fmax = _field_bounds(surface, lam, start)
    if lam != 0.0 and fmin > 0:
        expected = 2 * math.pi / (abs(lam) * fmax)
        chunk = max(3.0 * expected, 50 * max_step)
    else:
        chunk = horizon / 16
    chunk = min(chunk, horizon)

    pieces_t, pieces_q, pieces_v = [], [], []
    traj_all = None
    t_reached = 0.0
    state_y = start.as_array()
    minima_vals = []
    min_distance = math.inf
    d_prev_tail = None

    while t_reached < horizon - 1e-12:
        t_next = min(horizon, t_reached + chunk)
        tr = flow.integrate(surface, lam, surface.unit_state(state_y[:2], state_y[2:]),
                            (0.0, t_next - t_reached), tol=integ_tol, max_step=max_step)
        ts = tr.ts + t_reached
        lo = 1 if pieces_t else 0
        pieces_t.append(ts[lo:])
        pieces_q.append(tr.qs[lo:])
        pieces_v.append(tr.vs[lo:])
        state_y = np.concatenate([tr.qs[-1], tr.vs[-1]])
        t_reached = float(ts[-1])

        full_t = np.concatenate(pieces_t)
        full_y = np.concatenate([np.concatenate(pieces_q), np.concatenate(pieces_v)], axis=1)
        traj_all = flow.Trajectory(surface, lam, full_t, full_y, tr.step_stats)
        d = state_distance_batch(surface, start, traj_all.qs, traj_all.vs)
        if len(d) > 1:
            min_distance = min(min_distance, float(d[1:].min()))

        for k in _local_minima(d):
            tk = traj_all.ts[k]
            if tk <= 10 * max_step:
                continue
            # require the distance to have genuinely left the start first
            if d[:k].max() < max(100 * tol, 4 * d[k]):
                continue
            t_lo = traj_all.ts[max(k - 1, 0)]
            t_hi = traj_all.ts[min(k + 1, len(d) - 1)]
            if d_prev_tail is not None and tk <= d_prev_tail:
                continue  # already examined in a previous chunk
            t_star, d_star = _refine_return(surface, lam, traj_all, start,
                                            t_lo, t_hi, tol, integ_tol, max_step)
            minima_vals.append((t_star, d_star))
            min_distance = min(min_distance, d_star)
            if d_star < tol:
                return _ScanOutcome(True, t_star, traj_all, d_star, minima_vals, horizon)
        d_prev_tail = traj_all.ts[-2] if len(d) > 1 else None
        chunk = min(chunk * 2, horizon)

    # a run that ends while strictly closing in on a return is flagged so the
    # caller can separate "undecided at this horizon" from a clean witness
    vals = [v for _, v in minima_vals]
    approaching = (len(vals) >= 3 and vals[-1] < vals[-2] < vals[-3]
                   and vals[-1] < 1e3 * tol)
    if not approaching and traj_all is not None and len(traj_all.ts) > 8:
        tail = state_distance_batch(surface, start, traj_all.qs[-8:], traj_all.vs[-8:])
        approaching = bool(np.all(np.diff(tail) < 0) and tail[-1] < 1e3 * tol)
    return _ScanOutcome(False, None, traj_all, min_distance, minima_vals, horizon,
                        approaching)


def _field_bounds(surface, lam, start):
    if surface.kind == "plane":
        hw = flow.PLANE_PROBE_HALFWIDTH
        box = ((start.q[0] - hw, start.q[0] + hw), (start.q[1] - hw, start.q[1] + hw))
        return surface.f_bounds(box)
    return surface.f_bounds()


def default_horizon(surface, lam, start=None):
    """200 periods of the fastest expected loop; requires f > 0."""
    fmin, _ = _field_bounds(surface, lam, start) if start is not None else surface.f_bounds()
    if lam == 0.0 or fmin <= 0:
        raise ValueError("default horizon needs lam != 0 and f > 0; pass horizon explicitly")
    return 200.0 * (2 * math.pi / (abs(lam) * fmin))


def _extract_prime_period(surface, lam, traj, start, period, tol, integ_tol, max_step):
    """Divide out iteration multiplicity by testing integer divisors.

    A single interpolated evaluation at T/k pre-filters each divisor (a
    genuine sub-period return sits within the refinement error of T/k);
    full refinement runs only on survivors.
    """
    window = 2 * float(np.diff(traj.ts).max())
    changed = True
    while changed:
        changed = False
        for k in range(12, 1, -1):
            tk = period / k
            if tk <= traj.ts[0] or tk >= traj.ts[-1]:
                continue
            if _interp_distance(surface, traj, start, tk) >= 2000 * tol:
                continue
            t_lo = max(traj.ts[0], tk - window)
            t_hi = min(traj.ts[-1], tk + window)
            t_star, d_star = _refine_return(surface, lam, traj, start, t_lo, t_hi,
                                            tol, integ_tol, max_step)
            if d_star < tol:
                period = t_star
                changed = True
                break
    return period


def find_closed_orbit(surface: MagneticSurface, lam: float, start: UnitTangentState,
                      horizon: float, tol: float = DEFAULT_RETURN_TOL, *,
                      integ_tol: float = flow.DEFAULT_TOL, max_step=None,
                      loop_points: int | None = None,
                      count_points: int = 1024) -> ClosedOrbit | None:
    """First full-state return of the flow through ``start``, or None.

    The period is refined to the detection tolerance and divided down to the
    prime period; the returned orbit carries its length, self-intersection
    count, and (when a capping disk exists) the signed magnetic action term.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if max_step is None:
        max_step = flow.default_max_step(surface, lam, start.q)
    outcome = _scan_for_return(surface, lam, start, horizon, tol, integ_tol, max_step)
    if not outcome.closed:
        return None
    return _build_orbit(surface, lam, start, outcome, tol, integ_tol, max_step,
                        loop_points=loop_points, count_points=count_points)


def _build_orbit(surface, lam, start, outcome, tol, integ_tol, max_step,
                 loop_points=None, count_points=1024):
    traj = outcome.trajectory
    period = _extract_prime_period(surface, lam, traj, start, outcome.period, tol,
                                   integ_tol, max_step)
    if loop_points is None:
        # inscription deficit of a closed polygon is about l*(2*pi/N)^2/24 per
        # turn; choose N so the stored length matches the period within 10*tol
        loop_points = int(min(16384, max(512, 2 * math.pi * math.sqrt(
            2 * math.pi / (240.0 * tol)))))
    ts = period * np.arange(loop_points) / loop_points
    pts = traj.positions_at(ts)
    end_q = traj.positions_at(np.array([period]))[0]
    winding = _winding_of(surface, pts[0], end_q)
    loop = DiscreteLoop(pts, period, winding)
    length = curves.loop_length(loop, surface)
    count_loop = loop.resample(count_points, surface) if loop_points > count_points else loop
    self_int = curves.self_intersections(count_loop, surface)
    flux_value = flux_alt = None
    if loop.is_contractible(surface) and surface.kind != "plane":
        fv, fa = curves.flux_with_alternative(loop, surface, lam)
        flux_value, flux_alt = -fv, -fa
    elif surface.kind == "plane":
        flux_value = -curves.flux(loop, surface, lam)
        flux_alt = flux_value
    return ClosedOrbit(loop, period, length, self_int, flux_value, flux_alt, start, lam)


def _winding_of(surface, q0, q_end):
    d = np.asarray(q_end) - np.asarray(q0)
    if surface.kind == "flat_torus":
        return (int(round(d[0])), int(round(d[1])))
    if surface.is_revolution_chart:
        return (0, int(round(d[1] / (2 * math.pi))))
    return (0, 0)


# ----------------------------------------------------------------------
# Zoll certification


def grid_starts(surface, grid):
    """Deterministic scan order of unit-bundle starts for a (n1, n2, ndir) grid."""
    n1, n2, ndir = grid
    if surface.kind == "flat_torus":
        xs = (np.arange(n1) + 0.5) / n1
        ys = (np.arange(n2) + 0.5) / n2
        angles = 2 * math.pi * np.arange(ndir) / ndir
    elif surface.is_revolution_chart:
        lo = surface.pole_margin * 10
        hi = surface.theta_max - lo
        xs = lo + (hi - lo) * (np.arange(n1) + 0.5) / n1
        ys = 2 * math.pi * np.arange(n2) / n2
        # half-step offset keeps meridional directions (which can run into a
        # pole of the chart) off the grid
        angles = 2 * math.pi * (np.arange(ndir) + 0.5) / ndir
    else:
        raise ValueError("grid scans need a closed surface")
    starts = []
    for x in xs:
        for y in ys:
            for a in angles:
                starts.append(((float(x), float(y)), float(a)))
    return starts


_WORKER_CTX = {}


def _init_worker(surface, lam, horizon, tol, integ_tol, max_step):
    _WORKER_CTX.update(surface=surface, lam=lam, horizon=horizon, tol=tol,
                       integ_tol=integ_tol, max_step=max_step)


def _scan_one(args):
    (q, ang) = args
    surface = _WORKER_CTX["surface"]
    start = surface.state_from_angle(q, ang)
    try:
        out = _scan_for_return(surface, _WORKER_CTX["lam"], start,
                               _WORKER_CTX["horizon"], _WORKER_CTX["tol"],
                               _WORKER_CTX["integ_tol"], _WORKER_CTX["max_step"])
    except PoleEscape:
        # single-chart limitation: the orbit ran into a coordinate pole
        return ("pole", None, math.nan, [])
    if out.closed:
        traj = out.trajectory
        period = _extract_prime_period(surface, _WORKER_CTX["lam"], traj, start,
                                       out.period, _WORKER_CTX["tol"],
                                       _WORKER_CTX["integ_tol"], _WORKER_CTX["max_step"])
        return ("closed", period, out.min_distance, False)
    return ("open", None, out.min_distance, out.approaching)


def zoll_check(surface: MagneticSurface, lam: float, grid=(12, 12, 8),
               horizon: float | None = None, tol: float = 1e-6, *,
               return_tol: float = DEFAULT_RETURN_TOL,
               integ_tol: float = flow.DEFAULT_TOL, jobs: int | None = None,
               with_orbits: bool = False) -> ZollReport:
    """Certify or refute the common-prime-period property on a start grid.

    ``is_zoll`` holds iff every sampled start closes up and the prime periods
    agree within ``tol``.  A clean non-closing witness requires the return
    distance to stay above 10x the detection tolerance over the horizon;
    a start that is still approaching closure at the horizon raises
    :class:`InconclusiveScan` (unless a clean witness settles the verdict
    first).  Scanning stops at the first clean witness.
    """
    max_step = flow.default_max_step(surface, lam)
    if horizon is None:
        horizon = default_horizon(surface, lam)
    starts = grid_starts(surface, grid)
    if jobs is None:
        jobs = int(os.environ.get("MAGZOLL_JOBS", "1"))

    results = []
    witness_idx = None
    witness_kind = None
    witness_dist = None
    inconclusive_idx = None

    def handle(i, res):
        nonlocal witness_idx, witness_kind, witness_dist, inconclusive_idx
        kind, period, min_d, vals = res
        results.append((i, kind, period, min_d))
        if kind == "open":
            approaching = (len(vals) >= 3 and vals[-1] < vals[-2] < vals[-3]
                           and vals[-1] < 1e3 * return_tol)
            clean = min_d >= 10 * return_tol and not approaching
            if clean and witness_idx is None:
                witness_idx = i
                witness_kind = "nonclosing"
                witness_dist = min_d
                return True
            if inconclusive_idx is None:
                inconclusive_idx = i
        return False

    if jobs > 1 and hasattr(os, "fork"):
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(jobs, initializer=_init_worker,
                      initargs=(surface, lam, horizon, return_tol, integ_tol, max_step)) as pool:
            for i, res in enumerate(pool.imap(_scan_one, starts, chunksize=1)):
                if handle(i, res):
                    pool.terminate()
                    break
    else:
        _init_worker(surface, lam, horizon, return_tol, integ_tol, max_step)
        for i, st in enumerate(starts):
            if handle(i, _scan_one(st)):
                break

    sample_count = len(results)
    n_pole = sum(1 for _, kind, _, _ in results if kind == "pole")

    if witness_idx is not None:
        q, ang = starts[witness_idx]
        wit = surface.state_from_angle(q, ang)
        return ZollReport(False, sample_count, None, math.inf, wit,
                          witness_kind, witness_dist, grid=grid, starts=starts,
                          pole_excluded=n_pole)

    if inconclusive_idx is not None:
        q, ang = starts[inconclusive_idx]
        wit = surface.state_from_angle(q, ang)
        report = ZollReport(False, sample_count, None, math.inf, wit,
                            "inconclusive", None, grid=grid, starts=starts,
                            pole_excluded=n_pole)
        raise InconclusiveScan(
            "a start exhausted the horizon while still approaching closure", report)

    closed = [(i, p) for (i, kind, p, _) in results if kind == "closed"]
    if not closed:
        raise InconclusiveScan("every sampled start ran into a chart pole", None)
    periods = np.array([p for _, p in closed])
    spread = float(periods.max() - periods.min())
    common = float(np.median(periods))
    if spread <= tol:
        report = ZollReport(True, sample_count, common, spread, None,
                            grid=grid, starts=starts, pole_excluded=n_pole)
    else:
        bad = int(np.argmax(np.abs(periods - common)))
        q, ang = starts[closed[bad][0]]
        report = ZollReport(False, sample_count, common, spread,
                            surface.state_from_angle(q, ang), "period-mismatch",
                            grid=grid, starts=starts, pole_excluded=n_pole)
    if with_orbits and report.is_zoll:
        report.orbits = [(starts[i], p) for i, p in closed]
    return report


# ----------------------------------------------------------------------
# short/long dichotomy


def classify_dichotomy(orbit: ClosedOrbit, lam: float, f_min: float, f_max: float,
                       eps: float, n: int) -> DichotomyClass:
    """Classify a prime orbit against the short window / long threshold.

    Short: embedded with length in ((2pi-eps)/(lam f_max), (2pi+eps)/(lam f_min));
    Long: at least ``n`` self-intersections and length above 1/(lam eps).
    The window and the threshold must be disjoint.
    """
    if eps <= 0 or f_min <= 0 or f_max < f_min or lam <= 0:
        raise ValueError("need lam > 0, eps > 0, 0 < f_min <= f_max")
    lo = (2 * math.pi - eps) / (lam * f_max)
    hi = (2 * math.pi + eps) / (lam * f_min)
    long_threshold = 1.0 / (lam * eps)
    if hi >= long_threshold:
        raise WindowOverlap(
            f"short window (... , {hi:g}) meets the long threshold {long_threshold:g}")
    if orbit.self_int == 0 and lo < orbit.length < hi:
        return DichotomyClass.SHORT
    if orbit.self_int >= n and orbit.length > long_threshold:
        return DichotomyClass.LONG
    return DichotomyClass.VIOLATION


# ----------------------------------------------------------------------
# rotational first integral


def _sampled_depends(surface, which, tol=1e-10):
    """Sampled test of whether f actually varies with chart coordinate ``which``."""
    rng = np.random.default_rng(7)
    n = 24
    if surface.is_revolution_chart:
        th = rng.uniform(surface.theta_max * 0.05, surface.theta_max * 0.95, n)
        ph = rng.uniform(0, 2 * math.pi, n)
        if which == 1:
            return bool(np.max(np.abs(surface.f(th, ph) - surface.f(th, np.zeros(n)))) > tol)
        return bool(np.max(np.abs(surface.f(th, ph)
                                  - surface.f(np.full(n, th[0]), ph))) > tol)
    xs, ys = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
    if which == 0:
        return bool(np.max(np.abs(surface.f(xs, ys) - surface.f(np.zeros(n), ys))) > tol)
    return bool(np.max(np.abs(surface.f(xs, ys) - surface.f(xs, np.zeros(n)))) > tol)


def _symmetry_axis(surface) -> int:
    """Coordinate the magnetic function depends on (the other is symmetric)."""
    f = surface.f
    if surface.is_revolution_chart:
        if f.depends_on(1) and _sampled_depends(surface, 1):
            raise NotRotationallySymmetric("f depends on phi")
        return 0
    if surface.kind == "flat_torus":
        dep0 = f.depends_on(0) and _sampled_depends(surface, 0)
        dep1 = f.depends_on(1) and _sampled_depends(surface, 1)
        if dep0 and dep1:
            raise NotRotationallySymmetric("f depends on both chart coordinates")
        return 1 if dep1 else 0
    raise NotRotationallySymmetric("first integral needs a revolution chart or torus")


def first_integral(surface: MagneticSurface, lam: float,
                   state: UnitTangentState) -> float:
    """Conserved momentum of rotationally invariant systems.

    Revolution charts: I = a(theta)^2 * phidot + lam * W(theta) with W an
    exact antiderivative of f*a (anchored so W decreases along increasing
    theta for positive orientation).  Flat torus with f depending on one
    chart coordinate: the conjugate momentum with the matching magnetic
    potential.  Raises :class:`NotRotationallySymmetric` otherwise.
    """
    q, v = state.q, state.v
    if surface.is_revolution_chart:
        _symmetry_axis(surface)
        a = float(surface.warp(q[0]))
        W = _magnetic_potential_theta(surface, q[0])
        return a * a * v[1] + lam * surface.orientation * W
    if surface.kind == "flat_torus":
        axis = _symmetry_axis(surface)
        G = surface._G
        sg = surface._sqrtg
        if axis == 0:
            # f = f(x): conserved y-momentum
            p = G[1, 0] * v[0] + G[1, 1] * v[1]
            F = _line_integral_f(surface, q[0], coord=0)
            return p - lam * surface.orientation * sg * F
        p = G[0, 0] * v[0] + G[0, 1] * v[1]
        F = _line_integral_f(surface, q[1], coord=1)
        return p + lam * surface.orientation * sg * F
    raise NotRotationallySymmetric("first integral needs a revolution chart or torus")


def _magnetic_potential_theta(surface, theta):
    """W(theta) = int_theta^theta_max f(s) a(s) ds (exact quadrature)."""
    val, _ = _sciint.quad(lambda s: surface.f.scalar(s, 0.0) * float(surface.warp(s)),
                          theta, surface.theta_max, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def _line_integral_f(surface, u, coord):
    if coord == 0:
        fn = lambda s: surface.f.scalar(s, 0.0)
    else:
        fn = lambda s: surface.f.scalar(0.0, s)
    val, _ = _sciint.quad(fn, 0.0, u, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def critical_latitudes(surface: MagneticSurface, lam: float, n_scan: int = 2048):
    """Latitudes that are orbits: a'(theta) = +-lam f(theta) a(theta).

    Returns a list of (theta, direction) with direction +1 for increasing-phi
    traversal.
    """
    lo = surface.pole_margin * 5
    hi = surface.theta_max - lo
    ts = np.linspace(lo, hi, n_scan)
    a = np.asarray(surface.warp(ts), dtype=float)
    a1 = np.asarray(surface.warp_d1(ts), dtype=float)
    fv = surface.f(ts, np.zeros_like(ts))
    found = []
    for sign in (+1, -1):
        g = a1 - sign * lam * surface.orientation * fv * a
        roots = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
        for i in roots:
            t0, t1 = ts[i], ts[i + 1]
            g0, g1 = g[i], g[i + 1]
            for _ in range(80):
                tm = 0.5 * (t0 + t1)
                gm = (float(surface.warp_d1(tm))
                      - sign * lam * surface.orientation
                      * surface.f.scalar(tm, 0.0) * float(surface.warp(tm)))
                if g0 * gm <= 0:
                    t1, g1 = tm, gm
                else:
                    t0, g0 = tm, gm
            found.append((0.5 * (t0 + t1), sign))
    return found
