"""Numerical integration of the prescribed-curvature equation on the unit bundle.

A trajectory solves, in chart coordinates,

    dv^k/dt + Gamma^k_ij v^i v^j = lam * f(q) * (J v)^k,   |v|_g = 1,

with adaptive 4/5-order stepping and per-step renormalization of the
velocity.  Torus trajectories are propagated on the universal cover; points
are reduced modulo the lattice only for output and intersection purposes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import PoleEscape, StepUnderflow
from .geometry import MagneticSurface, UnitTangentState

DEFAULT_TOL = 1e-10
PLANE_PROBE_HALFWIDTH = 3.0


@dataclass
class StepStats:
    max_step: float
    min_step: float
    max_unit_deviation: float


class Trajectory:
    """Time-sampled solution with one row per accepted step."""

    def __init__(self, surface, lam, ts, ys, step_stats):
        self.surface = surface
        self.lam = lam
        self.ts = ts
        self.qs = ys[:, :2]
        self.vs = ys[:, 2:]
        self.step_stats = step_stats
        self._acc_cache = {}

    def __len__(self):
        return len(self.ts)

    @property
    def t0(self):
        return float(self.ts[0])

    @property
    def t1(self):
        return float(self.ts[-1])

    def state(self, i) -> UnitTangentState:
        return UnitTangentState(self.qs[i], self.vs[i], self.surface)

    def final_state(self) -> UnitTangentState:
        return self.state(-1)

    def _accel(self, i):
        acc = self._acc_cache.get(i)
        if acc is None:
            acc = acceleration(self.surface, self.lam, self.qs[i], self.vs[i])
            self._acc_cache[i] = acc
        return acc

    def interpolate(self, t):
        """Cubic-Hermite state at time ``t`` (velocity renormalized)."""
        t = float(t)
        i = int(np.searchsorted(self.ts, t, side="right") - 1)
        i = max(0, min(i, len(self.ts) - 2))
        t0, t1 = self.ts[i], self.ts[i + 1]
        h = t1 - t0
        s = (t - t0) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        q = (h00 * self.qs[i] + h10 * h * self.vs[i]
             + h01 * self.qs[i + 1] + h11 * h * self.vs[i + 1])
        a0 = self._accel(i)
        a1 = self._accel(i + 1)
        v = (h00 * self.vs[i] + h10 * h * a0
             + h01 * self.vs[i + 1] + h11 * h * a1)
        n = self.surface.g_norm(q, v)
        return q, v / n

    def positions_at(self, ts_query):
        """Vectorized cubic-Hermite base positions at the query times."""
        tq = np.asarray(ts_query, dtype=float)
        i = np.clip(np.searchsorted(self.ts, tq, side="right") - 1, 0, len(self.ts) - 2)
        t0 = self.ts[i]
        h = self.ts[i + 1] - t0
        s = ((tq - t0) / h)[:, None]
        h_ = h[:, None]
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return (h00 * self.qs[i] + h10 * h_ * self.vs[i]
                + h01 * self.qs[i + 1] + h11 * h_ * self.vs[i + 1])

    def to_csv(self, path):
        """Write ``t,x,y,vx,vy`` rows with 17 significant digits."""
        with open(path, "w") as fh:
            fh.write("t,x,y,vx,vy\n")
            for t, q, v in zip(self.ts, self.qs, self.vs):
                fh.write(f"{t:.17g},{q[0]:.17g},{q[1]:.17g},{v[0]:.17g},{v[1]:.17g}\n")


def acceleration(surface, lam, q, v):
    """Chart acceleration of the flow at (q, v)."""
    gam = surface.christoffels(q)
    quad = np.array([
        -(gam[0] @ v) @ v,
        -(gam[1] @ v) @ v,
    ])
    if lam != 0.0:
        quad = quad + lam * surface.f_value(q) * surface.rotate90(q, v)
    return quad


def default_max_step(surface, lam, start=None):
    """0.1 * min(1, 1/(lam * max|f|)) with max|f| taken over a probe grid."""
    if surface.kind == "plane":
        q = np.zeros(2) if start is None else np.asarray(start, dtype=float)
        box = ((q[0] - PLANE_PROBE_HALFWIDTH, q[0] + PLANE_PROBE_HALFWIDTH),
               (q[1] - PLANE_PROBE_HALFWIDTH, q[1] + PLANE_PROBE_HALFWIDTH))
        fmin, fmax = surface.f_bounds(box)
    else:
        fmin, fmax = surface.f_bounds()
    fabsmax = max(abs(fmin), abs(fmax))
    scale = abs(lam) * fabsmax
    if scale <= 0:
        return 0.1
    return 0.1 * min(1.0, 1.0 / scale)


def integrate(surface: MagneticSurface, lam: float, start: UnitTangentState,
              t_span, tol: float = DEFAULT_TOL, max_step: float | None = None) -> Trajectory:
    """Integrate the flow through ``start`` over ``t_span = (t0, t1)``.

    Negative times are handled by integrating the sign-reversed field and
    reflecting; ``t0 < t1`` is required.  Raises :class:`PoleEscape` when a
    revolution-chart trajectory enters the pole margin, and
    :class:`StepUnderflow` on step collapse.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not t0 < t1:
        raise ValueError("need t0 < t1")
    if max_step is None:
        max_step = default_max_step(surface, lam, start.q)

    y0 = start.as_array()
    pieces = []
    if t0 < 0:
        tb = min(t1, 0.0)
        # Backward arc: forward run of the reversed field from (q, -v).
        yrev = np.concatenate([start.q, -start.v])
        ts, ys, status, stats_b = kernels.propagate(
            surface, -lam, yrev, 0.0, -t0, tol, max_step)
        _raise_for_status(surface, status, ts, ys)
        ys = ys.copy()
        ys[:, 2:] *= -1.0
        ts = -ts[::-1]
        ys = ys[::-1]
        if tb < t1:
            pieces.append((ts[:-1], ys[:-1]))  # forward piece re-adds t=0
        else:
            keep = ts <= t1 + 1e-15
            pieces.append((ts[keep], ys[keep]))
        stats = [stats_b]
    else:
        stats = []
    if t1 > 0 or t0 >= 0:
        f0 = max(t0, 0.0) if t0 < 0 else t0
        ts, ys, status, stats_f = kernels.propagate(
            surface, lam, y0, f0, t1, tol, max_step)
        _raise_for_status(surface, status, ts, ys)
        pieces.append((ts, ys))
        stats.append(stats_f)

    ts = np.concatenate([p[0] for p in pieces])
    ys = np.concatenate([p[1] for p in pieces])
    min_h = min(s[0] for s in stats if s[0] > 0) if any(s[0] > 0 for s in stats) else 0.0
    max_h = max(s[1] for s in stats)
    max_dev = max(s[2] for s in stats)
    return Trajectory(surface, lam, ts, ys, StepStats(max_h, min_h, max_dev))


def _raise_for_status(surface, status, ts, ys):
    if status == kernels.STATUS_POLE:
        raise PoleEscape(float(ts[-1]), ys[-1, :2].tolist(), surface.pole_margin)
    if status == kernels.STATUS_UNDERFLOW:
        raise StepUnderflow(float(ts[-1]), ys[-1, :2].tolist())


# ----------------------------------------------------------------------
# localization behavior on compact regions


@dataclass
class ChartDisk:
    """Metric disk in the chart (quotient distance on the torus)."""
    center: tuple
    radius: float

    def contains(self, q, surface) -> bool:
        return surface.base_distance(np.asarray(self.center, dtype=float), q) <= self.radius


@dataclass
class LocalizationWitness:
    start: UnitTangentState
    t_escape: float
    point: tuple


@dataclass
class LocalizationReport:
    holds: bool
    witness: LocalizationWitness | None
    starts_checked: int
    time_horizon: float


def localization_check(surface, lam, K: ChartDisk, U: ChartDisk, T: float,
                       grid=(5, 8), tol: float = DEFAULT_TOL,
                       max_step=None) -> LocalizationReport:
    """Whether every flow line started in K stays in U for |t| <= T.

    Starts are sampled on a square grid over K times uniformly spaced
    directions; the witness is the first escaping trajectory in scan order.
    """
    n_side, n_dir = grid
    c = np.asarray(K.center, dtype=float)
    xs = np.linspace(c[0] - K.radius, c[0] + K.radius, n_side)
    ys = np.linspace(c[1] - K.radius, c[1] + K.radius, n_side)
    angles = np.linspace(0.0, 2 * math.pi, n_dir, endpoint=False)
    checked = 0
    for x in xs:
        for y in ys:
            q = np.array([x, y])
            if not K.contains(q, surface):
                continue
            for ang in angles:
                start = surface.state_from_angle(q, ang)
                traj = integrate(surface, lam, start, (-T, T), tol=tol, max_step=max_step)
                checked += 1
                for i in range(len(traj)):
                    if not U.contains(traj.qs[i], surface):
                        wit = LocalizationWitness(start, float(traj.ts[i]),
                                                  tuple(traj.qs[i]))
                        return LocalizationReport(False, wit, checked, T)
    return LocalizationReport(True, None, checked, T)
