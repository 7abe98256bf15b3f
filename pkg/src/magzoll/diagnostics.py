"""Closed-form system diagnostics and the guiding-drift analysis.

Covers the average magnetic curvature, helicity and its zero, the systolic
value of common-period systems, the inverse critical-value bound, the
geometric lower bound for the per-loop drift in a linear field, and the
measured drift itself (integration plus axis-crossing events).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import flow, geometry
from .errors import (CrossingNotFound, DenominatorNonpositive, NonNegativeEuler,
                     NonpositiveMagneticCurvature, TorusEulerZero, ZeroMeanField)

_COS30 = math.cos(math.pi / 6)


@dataclass(frozen=True)
class SystemConstants:
    """Area, Euler characteristic, and the field integral of a closed system."""

    area: float
    euler: int
    f_total: float

    @property
    def f_avg(self) -> float:
        return self.f_total / self.area

    @classmethod
    def from_values(cls, area, euler, f_total):
        if not area > 0:
            raise ValueError("area must be positive")
        return cls(float(area), int(euler), float(f_total))

    @classmethod
    def from_surface(cls, surface: geometry.MagneticSurface):
        area = surface.total_area()
        chi = surface.euler_characteristic
        if chi is None:
            raise ValueError("constants need a closed surface")
        return cls(area, chi, surface.total_magnetic_flux())

    @classmethod
    def constant_curvature(cls, K: float, f_const: float):
        """Genus >= 2 style constants: area fixed by total curvature 2*pi*chi."""
        if K >= 0:
            raise ValueError("use from_surface for nonnegative curvature models")
        chi = -2  # genus-2 normalization; area scales out of the formulas below
        area = 2 * math.pi * chi / K
        return cls(area, chi, f_const * area)


def avg_magnetic_curvature(consts: SystemConstants, lam: float) -> float:
    """lam^2 <f>^2 + 2 pi chi / A (the mean-field convention)."""
    return lam * lam * consts.f_avg**2 + 2 * math.pi * consts.euler / consts.area


def helicity(consts: SystemConstants, lam: float) -> float:
    """A^2/(2 chi) times the average magnetic curvature; strictly decreasing
    in the coupling when chi < 0 and the field mean is nonzero."""
    if consts.euler == 0:
        raise TorusEulerZero("helicity is undefined at Euler characteristic 0")
    return consts.area**2 / (2 * consts.euler) * avg_magnetic_curvature(consts, lam)


def lambda_zero(consts: SystemConstants) -> float:
    """Coupling at which the helicity vanishes: sqrt(-2 pi chi A)/|total f|."""
    if consts.euler >= 0:
        raise NonNegativeEuler("helicity zero needs negative Euler characteristic")
    if consts.f_total == 0:
        raise ZeroMeanField("helicity zero needs a nonzero field integral")
    return math.sqrt(-2 * math.pi * consts.euler * consts.area) / abs(consts.f_total)


def systolic_value(consts: SystemConstants, lam: float) -> float:
    """2 pi / (lam <f> + sqrt(K)) with K the average magnetic curvature.

    This equals length plus the signed capping term on every orbit of the
    constant model families; see :func:`systolic_value_literal` for the
    variant with 2 pi / A inside the root.
    """
    K = avg_magnetic_curvature(consts, lam)
    if K <= 0:
        raise NonpositiveMagneticCurvature(f"average magnetic curvature {K:g} <= 0")
    return 2 * math.pi / (lam * consts.f_avg + math.sqrt(K))


def systolic_value_literal(consts: SystemConstants, lam: float) -> float:
    """Variant with the area normalization 2 pi / A inside the square root.

    On the round sphere the two variants differ (2 pi chi / A doubles this
    term at chi = 2); both are reported so the discrepancy stays visible.
    """
    K = lam * lam * consts.f_avg**2 + 2 * math.pi / consts.area
    if K <= 0:
        raise NonpositiveMagneticCurvature(f"curvature surrogate {K:g} <= 0")
    return 2 * math.pi / (lam * consts.f_avg + math.sqrt(K))


@dataclass
class ManeEstimate:
    value: float
    exact: bool     # False: upper bound from the helicity zero


def mane_h(consts: SystemConstants | None = None, constant_curvature: float | None = None,
           constant_f: float | None = None) -> ManeEstimate:
    """Inverse critical value h = 1/sqrt(2c).

    Exact closed form sqrt(-K)/f for constant systems of negative curvature;
    otherwise the helicity zero is returned, flagged as an upper bound (the
    two agree exactly when both curvature and field are constant).
    """
    if constant_curvature is not None and constant_f is not None:
        if constant_curvature >= 0 or constant_f <= 0:
            raise ValueError("closed form needs K < 0 and constant f > 0")
        return ManeEstimate(math.sqrt(-constant_curvature) / constant_f, True)
    if consts is None:
        raise ValueError("need system constants or a constant system")
    return ManeEstimate(lambda_zero(consts), False)


# ----------------------------------------------------------------------
# drift bound and measurement


@dataclass(frozen=True)
class DriftSetup:
    """Linear-field drift configuration: f = e + L*y near the origin."""

    e: float
    L: float
    lam: float
    eps: float = 0.0

    def __post_init__(self):
        if self.e <= 0 or self.lam <= 0 or self.L < 0 or self.eps < 0:
            raise ValueError("need e > 0, lam > 0, L >= 0, eps >= 0")


@dataclass
class DriftBound:
    delta: float          # per-loop advance bound is 2*delta
    bound: float          # 2*delta
    r_lam: float
    r0: float
    r1: float
    r2: float
    c: float
    sensitivity: dict = field(default_factory=dict)


def drift_bound(setup: DriftSetup, c: float = 2.0, _with_sensitivity=True) -> DriftBound:
    """Comparison-arc lower bound for the per-loop drift.

    Radii: r_lam = c/(e lam) encloses one loop; the bounding arcs have radii
    r1 = 1/(lam e + eps r_lam), r0 = 1/(lam e - L lam/(2(lam e + eps r_lam))
    + eps r_lam), r2 = 1/(lam e - eps r_lam); the advance satisfies
    dx >= 2 r1 + 2 cos(30deg) (r0 - r1) - 2 r2 = 2 delta.
    """
    e, L, lam, eps = setup.e, setup.L, setup.lam, setup.eps
    r_lam = c / (e * lam)
    den1 = lam * e + eps * r_lam
    den2 = lam * e - eps * r_lam
    if den2 <= 0:
        raise DenominatorNonpositive("r2")
    den0 = lam * e - L * lam / (2 * den1) + eps * r_lam
    if den0 <= 0:
        raise DenominatorNonpositive("r0")
    r1 = 1.0 / den1
    r0 = 1.0 / den0
    r2 = 1.0 / den2
    delta = _COS30 * r0 + (1 - _COS30) * r1 - r2
    out = DriftBound(delta, 2 * delta, r_lam, r0, r1, r2, c)
    if _with_sensitivity:
        for c_alt in (1.5, 4.0):
            out.sensitivity[c_alt] = drift_bound(setup, c_alt, False).bound
    return out


@dataclass
class DriftMeasurement:
    dx_per_loop: float
    loops: int
    crossings: list
    lam: float
    e: float
    L: float


def measure_drift(lam: float, e: float, L: float, n_loops: int = 50,
                  tol: float = 1e-10) -> DriftMeasurement:
    """Mean x-advance per loop of the planar flow in the field e + L*y.

    Starts at the origin heading in the negative y-direction and measures
    successive downward crossings of the x-axis, refined through the cubic
    Hermite representation of each bracketing step.
    """
    if n_loops < 1:
        raise ValueError("need at least one loop")
    surface = geometry.plane(f=f"{e!r} + {L!r}*y")
    start = surface.unit_state((0.0, 0.0), (0.0, -1.0))
    gyro = 2 * math.pi / (lam * e)
    t_end = (n_loops + 2.5) * gyro
    traj = flow.integrate(surface, lam, start, (0.0, t_end), tol=tol)
    if L > 0 and (e + L * traj.qs[:, 1].min()) <= 0:
        raise CrossingNotFound("field changes sign along the trajectory")

    ys = traj.qs[:, 1]
    vys = traj.vs[:, 1]
    down = np.nonzero((ys[:-1] > 0) & (ys[1:] <= 0))[0]
    crossings = [(0.0, 0.0)]
    for i in down:
        t0, t1 = traj.ts[i], traj.ts[i + 1]

        def yval(t):
            q, _ = traj.interpolate(t)
            return q[1]

        t_star = brentq(yval, t0, t1, xtol=1e-13, rtol=8.9e-16)
        q, _ = traj.interpolate(t_star)
        crossings.append((float(t_star), float(q[0])))
        if len(crossings) > n_loops:
            break
    if len(crossings) <= n_loops:
        raise CrossingNotFound(
            f"found {len(crossings) - 1} downward crossings, needed {n_loops}")
    xs = np.array([x for _, x in crossings[: n_loops + 1]])
    dx = float(np.diff(xs).mean())
    return DriftMeasurement(dx, n_loops, crossings[: n_loops + 1], lam, e, L)
