import math

import numpy as np
import pytest

from magzoll import curves, geometry
from magzoll.curves import DiscreteLoop, flux, homotopy_class, loop_length, self_intersections
from magzoll.errors import DegenerateSegments, NonContractible


@pytest.fixture(scope="module")
def torus():
    return geometry.flat_torus(f=1.0)


@pytest.fixture(scope="module")
def plane():
    return geometry.plane(f=0.0)


def circle_loop(center, r, n=512, period=None):
    t = 2 * math.pi * np.arange(n) / n
    pts = np.stack([center[0] + r * np.cos(t), center[1] + r * np.sin(t)], axis=1)
    return DiscreteLoop(pts, period if period else 2 * math.pi * r)


# length ----------------------------------------------------------------

def test_circle_length(torus):
    loop = circle_loop((0.5, 0.5), 0.25)
    assert loop_length(loop, torus) == pytest.approx(2 * math.pi * 0.25, abs=1e-4)


def test_lattice_vector_length(torus):
    s = np.arange(64) / 64
    loop = DiscreteLoop(np.stack([s, 0 * s], axis=1), 1.0, (1, 0))
    assert loop_length(loop, torus) == pytest.approx(1.0)


def test_equator_length():
    sph = geometry.round_sphere(1.0)
    s = np.arange(512) / 512
    eq = DiscreteLoop(np.stack([np.full(512, math.pi / 2), 2 * math.pi * s], axis=1),
                      2 * math.pi, (0, 1))
    assert loop_length(eq, sph) == pytest.approx(2 * math.pi, abs=1e-4)


def test_length_deck_invariance(torus):
    loop = circle_loop((0.5, 0.5), 0.2)
    shifted = DiscreteLoop(loop.points + np.array([3.0, -2.0]), loop.period)
    assert loop_length(shifted, torus) == pytest.approx(
        loop_length(loop, torus), rel=1e-14)


# homotopy class ----------------------------------------------------------

def test_homotopy_classes(torus):
    s = np.arange(64) / 64
    assert homotopy_class(DiscreteLoop(np.stack([s, 0 * s], axis=1), 1.0, (1, 0)),
                          torus) == (1, 0)
    assert homotopy_class(DiscreteLoop(np.stack([2 * s, 3 * s], axis=1), 1.0, (2, 3)),
                          torus) == (2, 3)
    assert homotopy_class(circle_loop((0.5, 0.5), 0.1, 64), torus) == (0, 0)


def test_lift_from_chart_points(torus):
    # wrapped chart samples of a (1, 0) loop recover the winding
    s = np.arange(64) / 64
    chart_pts = np.stack([(3 * s) % 1.0, 0.2 + 0 * s], axis=1)
    loop = curves.loop_from_chart_points(chart_pts, 3.0, torus)
    assert loop.winding == (3, 0)
    assert np.max(np.abs(np.diff(loop.points[:, 0]) - 3 / 64)) < 1e-12


# self-intersections ------------------------------------------------------

def test_embedded_circle(torus):
    assert self_intersections(circle_loop((0.5, 0.5), 0.25), torus) == 0


def test_figure_eight(plane):
    t = 2 * math.pi * np.arange(512) / 512
    loop = DiscreteLoop(np.stack([np.sin(t), np.sin(t) * np.cos(t)], axis=1), 1.0)
    assert self_intersections(loop, plane) == 1


def _cross2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _brute_force_crossings(pts):
    """Independent all-pairs proper-crossing count (plane, no collar)."""
    n = len(pts)
    segs = [(pts[i], pts[(i + 1) % n]) for i in range(n)]
    count = 0
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            p1, p2 = segs[i]
            q1, q2 = segs[j]
            r = p2 - p1
            s = q2 - q1
            o1 = _cross2(r, q1 - p1)
            o2 = _cross2(r, q2 - p1)
            o3 = _cross2(s, p1 - q1)
            o4 = _cross2(s, p2 - q1)
            if (o1 > 0) != (o2 > 0) and (o3 > 0) != (o4 > 0):
                count += 1
    return count


def test_limacon_against_brute_force(plane):
    t = 2 * math.pi * np.arange(512) / 512
    r = 0.5 + np.cos(t)
    pts = np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
    loop = DiscreteLoop(pts, 1.0)
    oracle = _brute_force_crossings(pts)
    assert oracle == 1
    assert self_intersections(loop, plane) == oracle


def test_three_petal_rose_multiplicity(plane):
    # triple transversal point counts with multiplicity 3
    t = math.pi * np.arange(512) / 512
    r = np.cos(3 * t)
    loop = DiscreteLoop(np.stack([r * np.cos(t), r * np.sin(t)], axis=1), 1.0)
    assert self_intersections(loop, plane) == 3


def test_exact_tangency_counts_one(plane):
    # branches y = x^2 and y = -x^2 meet at a shared vertex at the origin
    t = 2 * math.pi * np.arange(512) / 512
    loop = DiscreteLoop(np.stack([np.sin(t), np.sin(t) ** 2 * np.cos(t)], axis=1), 1.0)
    assert self_intersections(loop, plane) == 1


def test_doubled_curve_degenerate(torus):
    s = np.arange(64) / 64
    dbl = DiscreteLoop(np.stack([2 * s, 0 * s + 0.3], axis=1), 1.0, (2, 0))
    with pytest.raises(DegenerateSegments):
        self_intersections(dbl, torus)


def test_quotient_crossings(torus):
    # the (1,2) straight loop is embedded on the quotient
    s = np.arange(256) / 256
    diag = DiscreteLoop(np.stack([s, 2 * s], axis=1), 1.0, (1, 2))
    assert self_intersections(diag, torus) == 0
    # a circle of radius 0.7 meets its four axis translates twice each
    big = circle_loop((0.5, 0.5), 0.7)
    assert self_intersections(big, torus) == 4


def test_cyclic_and_resample_invariance(plane):
    t = 2 * math.pi * np.arange(512) / 512
    r = 0.5 + np.cos(t)
    loop = DiscreteLoop(np.stack([r * np.cos(t), r * np.sin(t)], axis=1), 1.0)
    base = self_intersections(loop, plane)
    assert self_intersections(loop.cycled(137, plane), plane) == base
    assert self_intersections(loop.resample(1024, plane), plane) == base


# flux --------------------------------------------------------------------

def test_flux_signed_area(torus):
    loop = circle_loop((0.5, 0.5), 0.5, 512, period=1.0)
    polygon_area = 0.5**2 * math.pi * (512 / (2 * math.pi)) * math.sin(2 * math.pi / 512)
    val = flux(loop, torus, 2.0)
    assert val == pytest.approx(2 * polygon_area, abs=1e-12)
    assert val == pytest.approx(math.pi / 2, abs=1e-4)


def test_flux_orientation_antisymmetry(torus):
    loop = circle_loop((0.5, 0.5), 0.5, 512, period=1.0)
    assert flux(loop.reversed(), torus, 2.0) == pytest.approx(
        -flux(loop, torus, 2.0), abs=1e-12)


def test_flux_two_primitives_agree():
    surf = geometry.flat_torus(f="0.4*cos(2*pi*x)*sin(2*pi*y)")  # zero mean
    rng = np.random.default_rng(2)
    t = 2 * math.pi * np.arange(256) / 256
    for _ in range(3):
        cx, cy = rng.uniform(0.3, 0.7, 2)
        rx, ry = rng.uniform(0.1, 0.25, 2)
        pts = np.stack([cx + rx * np.cos(t), cy + ry * np.sin(t)], axis=1)
        loop = DiscreteLoop(pts, 1.0)
        fx = flux(loop, surf, 1.3, sweep="x")
        fy = flux(loop, surf, 1.3, sweep="y")
        assert abs(fx - fy) < 1e-8


def test_flux_noncontractible_rejected(torus):
    s = np.arange(64) / 64
    line = DiscreteLoop(np.stack([s, 0 * s], axis=1), 1.0, (1, 0))
    with pytest.raises(NonContractible):
        flux(line, torus, 1.0)


def test_sphere_cap_flux():
    sph = geometry.round_sphere(1.0, f=1.0)
    s = np.arange(512) / 512
    lat = DiscreteLoop(np.stack([np.full(512, math.pi / 4), 2 * math.pi * s], axis=1),
                       1.0, (0, 1))
    cap = 2 * math.pi * (1 - math.cos(math.pi / 4))
    val, alt = curves.flux_with_alternative(lat, sph, 1.0)
    assert val == pytest.approx(cap, abs=1e-10)
    assert alt == pytest.approx(cap - 4 * math.pi, abs=1e-9)
    # reversed latitude positively bounds the complementary cap
    val_r, _ = curves.flux_with_alternative(lat.reversed(), sph, 1.0)
    assert val_r == pytest.approx(4 * math.pi - cap, abs=1e-9)


def test_flux_additivity_connected_sum(torus):
    # two disjoint circles joined by a thin corridor: fluxes add up to the
    # corridor contribution (width x max|lam f| x length)
    surf = geometry.flat_torus(f="1 + 0.5*cos(2*pi*x)")
    lam = 1.5
    w = 1e-4
    n = 256
    cA, rA = np.array([0.3, 0.5]), 0.12
    cB, rB = np.array([0.7, 0.5]), 0.12
    # mouths face each other along y = 0.5
    tA = np.linspace(0.02, 2 * math.pi - 0.02, n)
    ptsA = cA + rA * np.stack([np.cos(tA), np.sin(tA)], axis=1)
    tB = np.linspace(math.pi + 0.02, 3 * math.pi - 0.02, n)
    ptsB = cB + rB * np.stack([np.cos(tB), np.sin(tB)], axis=1)
    bridge1 = np.stack([np.linspace(ptsA[-1][0], ptsB[0][0], 32),
                        np.linspace(ptsA[-1][1], ptsB[0][1], 32) + w], axis=1)[1:-1]
    bridge2 = np.stack([np.linspace(ptsB[-1][0], ptsA[0][0], 32),
                        np.linspace(ptsB[-1][1], ptsA[0][1], 32) - w], axis=1)[1:-1]
    sum_pts = np.vstack([ptsA, bridge1, ptsB, bridge2])
    loopA = circle_loop(cA, rA, n)
    loopB = circle_loop(cB, rB, n)
    loopSum = DiscreteLoop(sum_pts, 1.0)
    total = flux(loopSum, surf, lam)
    parts = flux(loopA, surf, lam) + flux(loopB, surf, lam)
    corridor_len = np.linalg.norm(cB - cA)
    # corridor width is set by the mouth opening (arc angle 0.04 plus 2w)
    width = 2 * rA * math.sin(0.02) + 2 * w
    max_lam_f = lam * 1.5
    bound = 1.5 * width * max_lam_f * corridor_len
    assert abs(total - parts) < bound


def test_loop_json_roundtrip(torus):
    loop = circle_loop((0.5, 0.5), 0.2, 64)
    d = loop.to_json_dict()
    back = DiscreteLoop.from_json_dict(d)
    assert np.allclose(back.points, loop.points)
    assert back.period == loop.period


def test_loop_validation():
    with pytest.raises(ValueError):
        DiscreteLoop(np.zeros((4, 2)), 1.0)  # too few points
    pts = np.array([[0, 0], [1, 0], [1, 0], [1, 1], [0, 1], [0, 2], [1, 2], [2, 2]],
                   dtype=float)
    with pytest.raises(ValueError):
        DiscreteLoop(pts, 1.0)  # repeated consecutive point
    t = 2 * math.pi * np.arange(8) / 8
    with pytest.raises(ValueError):
        DiscreteLoop(np.stack([np.cos(t), np.sin(t)], axis=1), 0.0)  # period
