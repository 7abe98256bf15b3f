import math

import numpy as np
import pytest

from magzoll import curves, diagnostics as dg, flow, geometry
from magzoll.curves import DiscreteLoop
from magzoll.errors import (CrossingNotFound, DenominatorNonpositive,
                            NonNegativeEuler, NonpositiveMagneticCurvature,
                            TorusEulerZero, ZeroMeanField)


@pytest.fixture(scope="module")
def genus2():
    # area 4*pi fixed by total curvature at K = -1, unit field
    return dg.SystemConstants.from_values(4 * math.pi, -2, 4 * math.pi)


# arithmetic ----------------------------------------------------------------

def test_avg_magnetic_curvature(genus2):
    torus = dg.SystemConstants.from_values(1.0, 0, 1.0)
    assert dg.avg_magnetic_curvature(torus, 3.0) == pytest.approx(9.0)
    sphere = dg.SystemConstants.from_values(4 * math.pi, 2, 4 * math.pi)
    assert dg.avg_magnetic_curvature(sphere, 1.0) == pytest.approx(2.0)
    assert dg.avg_magnetic_curvature(genus2, 1.0) == pytest.approx(0.0, abs=1e-15)


def test_helicity(genus2):
    assert dg.helicity(genus2, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert dg.helicity(genus2, 2.0) == pytest.approx(-12 * math.pi**2, abs=1e-9)
    with pytest.raises(TorusEulerZero):
        dg.helicity(dg.SystemConstants.from_values(1.0, 0, 1.0), 1.0)


def test_helicity_strictly_decreasing(genus2):
    lams = np.linspace(0.01, 5.0, 100)
    vals = [dg.helicity(genus2, lam) for lam in lams]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_lambda_zero(genus2):
    assert dg.lambda_zero(genus2) == pytest.approx(1.0, abs=1e-12)
    doubled = dg.SystemConstants.from_values(4 * math.pi, -2, 8 * math.pi)
    assert dg.lambda_zero(doubled) == pytest.approx(0.5, abs=1e-12)
    assert abs(dg.helicity(genus2, dg.lambda_zero(genus2))) < 1e-12
    with pytest.raises(NonNegativeEuler):
        dg.lambda_zero(dg.SystemConstants.from_values(4 * math.pi, 2, 1.0))
    with pytest.raises(ZeroMeanField):
        dg.lambda_zero(dg.SystemConstants.from_values(4 * math.pi, -2, 0.0))


def test_systolic_value():
    torus = dg.SystemConstants.from_values(1.0, 0, 1.0)
    assert dg.systolic_value(torus, 2.0) == pytest.approx(math.pi / 2)
    sphere = dg.SystemConstants.from_values(4 * math.pi, 2, 4 * math.pi)
    assert dg.systolic_value(sphere, 1.0) == pytest.approx(2 * math.pi / (1 + math.sqrt(2)))
    # large-coupling asymptotics: value * lam -> pi / f_avg
    assert dg.systolic_value(torus, 1e6) * 1e6 == pytest.approx(math.pi, rel=1e-5)
    # the literal-normalization variant differs on the sphere and is reported
    assert dg.systolic_value_literal(sphere, 1.0) != pytest.approx(
        dg.systolic_value(sphere, 1.0), abs=1e-3)
    g2 = dg.SystemConstants.from_values(4 * math.pi, -2, 4 * math.pi)
    with pytest.raises(NonpositiveMagneticCurvature):
        dg.systolic_value(g2, 0.5)


def test_mane_h(genus2):
    assert dg.mane_h(constant_curvature=-1.0, constant_f=1.0).value == pytest.approx(1.0)
    assert dg.mane_h(constant_curvature=-4.0, constant_f=2.0).value == pytest.approx(1.0)
    assert dg.mane_h(constant_curvature=-1.0, constant_f=1.0).exact
    est = dg.mane_h(genus2)
    assert not est.exact
    assert est.value == pytest.approx(dg.lambda_zero(genus2))


def test_constants_from_surface():
    c = dg.SystemConstants.from_surface(geometry.flat_torus(f=1.0))
    assert c.area == pytest.approx(1.0)
    assert c.euler == 0
    assert c.f_avg == pytest.approx(1.0)
    s = dg.SystemConstants.from_surface(geometry.round_sphere(1.0, f=1.0))
    assert s.area == pytest.approx(4 * math.pi)
    assert s.f_total == pytest.approx(4 * math.pi)


# drift bound -----------------------------------------------------------------

def test_drift_bound_closed_form():
    b = dg.drift_bound(dg.DriftSetup(1.0, 1.0, 10.0))
    lam2delta = 10.0 * math.cos(math.pi / 6) / (2 * (10.0 - 0.5))
    assert b.delta * 100 == pytest.approx(lam2delta, rel=1e-12)
    assert b.bound == pytest.approx(0.00911605688, rel=1e-8)
    # the eps = 0 bound does not involve the enclosing-radius constant
    assert b.sensitivity[1.5] == pytest.approx(b.bound)
    assert b.sensitivity[4.0] == pytest.approx(b.bound)


def test_drift_bound_zero_gradient():
    b = dg.drift_bound(dg.DriftSetup(1.0, 0.0, 10.0))
    assert b.bound == pytest.approx(0.0, abs=1e-15)
    assert b.r0 == b.r1 == b.r2


def test_drift_bound_large_coupling_limit():
    # lam^2 * Delta(0, lam) -> L cos(30 deg) / (2 e^3)
    e, L = 1.3, 0.7
    target = L * math.cos(math.pi / 6) / (2 * e**3)
    vals = [lam**2 * dg.drift_bound(dg.DriftSetup(e, L, lam)).delta
            for lam in (1e3, 1e5)]
    assert vals[1] == pytest.approx(target, rel=1e-4)


def test_drift_bound_eps_sensitivity():
    b0 = dg.drift_bound(dg.DriftSetup(1.0, 1.0, 10.0, eps=0.05))
    assert b0.sensitivity[1.5] != pytest.approx(b0.bound, rel=1e-6)
    with pytest.raises(DenominatorNonpositive):
        dg.drift_bound(dg.DriftSetup(1.0, 1.0, 1.0, eps=1.0), c=2.0)


# measured drift ----------------------------------------------------------------

def test_measure_drift_zero_gradient():
    m = dg.measure_drift(10.0, 1.0, 0.0, n_loops=5)
    assert abs(m.dx_per_loop) < 1e-9


def test_measure_drift_guiding_center():
    m = dg.measure_drift(10.0, 1.0, 1.0, n_loops=50)
    oracle = math.pi * 1.0 / (10.0**2 * 1.0**3)
    assert abs(m.dx_per_loop - oracle) / oracle < 0.10
    assert m.dx_per_loop >= dg.drift_bound(dg.DriftSetup(1.0, 1.0, 10.0)).bound


def test_measure_drift_field_sign_guard():
    with pytest.raises(CrossingNotFound):
        dg.measure_drift(1.0, 0.3, 1.0, n_loops=3)


def test_drifting_orbit_self_intersects():
    # the drifting trajectory acquires crossings within three loops
    surf = geometry.plane(f="1 + 1*y")
    lam = 10.0
    start = surf.unit_state((0.0, 0.0), (0.0, -1.0))
    t_end = 3.2 * 2 * math.pi / lam
    traj = flow.integrate(surf, lam, start, (0.0, t_end))
    ts = np.linspace(0.0, t_end, 900, endpoint=False)
    pts = traj.positions_at(ts)
    loop = DiscreteLoop(pts, t_end)  # closed by the final short segment
    assert curves.self_intersections(loop, surf) >= 1
