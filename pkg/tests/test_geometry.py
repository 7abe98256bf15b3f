import math

import numpy as np
import pytest
from scipy import integrate as sciint

from magzoll import geometry
from magzoll.errors import ConfigError, PoleEvaluation, UnboundedDomain
from magzoll.geometry import (christoffels, gauss_curvature, sasaki_distance,
                              total_area)

NECK_PROFILE = "sin(theta)*(1 - 0.2*exp(-(theta-pi/2)**2/0.09))"


@pytest.fixture(scope="module")
def torus():
    return geometry.flat_torus(f=1.0)


@pytest.fixture(scope="module")
def sphere():
    return geometry.round_sphere(1.0, f=1.0)


@pytest.fixture(scope="module")
def neck():
    return geometry.sphere_of_revolution(NECK_PROFILE, f=1.0)


# christoffels ---------------------------------------------------------

def test_christoffels_flat_torus_zero(torus):
    rng = np.random.default_rng(1)
    for _ in range(5):
        q = rng.uniform(0, 1, 2)
        assert np.all(christoffels(torus, q) == 0.0)


def test_christoffels_revolution_symbols(neck):
    th = 1.1
    gam = christoffels(neck, (th, 0.3))
    a = float(neck.warp(th))
    a1 = float(neck.warp_d1(th))
    assert gam[0, 1, 1] == pytest.approx(-a * a1, rel=1e-12)
    assert gam[1, 0, 1] == pytest.approx(a1 / a, rel=1e-12)
    assert gam[1, 1, 0] == gam[1, 0, 1]
    # all other entries vanish
    mask = np.zeros((2, 2, 2), dtype=bool)
    mask[0, 1, 1] = mask[1, 0, 1] = mask[1, 1, 0] = True
    assert np.all(gam[~mask] == 0.0)


def test_christoffels_round_sphere_equator(sphere):
    gam = christoffels(sphere, (math.pi / 2, 0.0))
    assert gam[0, 1, 1] == pytest.approx(0.0, abs=1e-15)


def test_pole_evaluation_error(neck):
    with pytest.raises(PoleEvaluation):
        christoffels(neck, (0.0, 0.0))
    with pytest.raises(PoleEvaluation):
        gauss_curvature(neck, (math.pi + 0.1, 0.0))


# curvature and area ---------------------------------------------------

def test_gauss_curvature_values(torus, sphere):
    assert gauss_curvature(torus, (0.3, 0.4)) == 0.0
    assert gauss_curvature(geometry.round_sphere(2.0), (1.0, 0.0)) == pytest.approx(0.25)
    # a(theta) = sin(theta) gives constant curvature 1
    plain = geometry.sphere_of_revolution("sin(theta)")
    for th in (0.4, 1.0, 2.2):
        assert gauss_curvature(plain, (th, 0.0)) == pytest.approx(1.0, rel=1e-10)


def test_total_area(torus, sphere):
    assert total_area(torus) == pytest.approx(1.0)
    assert total_area(sphere) == pytest.approx(4 * math.pi)
    plain = geometry.sphere_of_revolution("sin(theta)")
    assert total_area(plain) == pytest.approx(4 * math.pi, rel=1e-10)
    with pytest.raises(UnboundedDomain):
        total_area(geometry.plane())


def test_skew_lattice_area():
    surf = geometry.flat_torus([[2.0, 0.5], [0.0, 1.0]])
    assert total_area(surf) == pytest.approx(2.0)


# metric compatibility (finite differences) ----------------------------

@pytest.mark.parametrize("kind", ["torus", "neck", "sphere"])
def test_metric_compatibility(kind, torus, neck, sphere):
    surf = {"torus": torus, "neck": neck, "sphere": sphere}[kind]
    rng = np.random.default_rng(11)
    h = 1e-6
    for _ in range(100):
        if surf.is_revolution_chart:
            q = np.array([rng.uniform(0.3, surf.theta_max - 0.3), rng.uniform(0, 6)])
        else:
            q = rng.uniform(0, 1, 2)
        gam = surf.christoffels(q)
        G = surf.metric(q)
        for k in range(2):
            dq = np.zeros(2)
            dq[k] = h
            dG = (surf.metric(q + dq) - surf.metric(q - dq)) / (2 * h)
            # nabla g = 0: d_k g_ij = Gamma^l_{ki} g_lj + Gamma^l_{kj} g_il
            pred = np.einsum("li,lj->ij", gam[:, k, :], G) \
                + np.einsum("lj,il->ij", gam[:, k, :], G)
            assert np.max(np.abs(dG - pred)) < 1e-6


# Gauss-Bonnet ---------------------------------------------------------

def test_gauss_bonnet(torus, sphere, neck):
    # flat torus: chi = 0 and K vanishes identically
    assert gauss_curvature(torus, (0.1, 0.9)) == 0.0
    for surf in (sphere, neck):
        val, _ = sciint.quad(
            lambda t: gauss_curvature(surf, (t, 0.0)) * float(surf.warp(t)),
            1e-9, surf.theta_max - 1e-9, limit=300)
        total = 2 * math.pi * val
        assert total == pytest.approx(4 * math.pi, rel=1e-6)


# sasaki distance ------------------------------------------------------

def test_sasaki_examples(torus):
    s1 = torus.unit_state((0.2, 0.2), (1.0, 0.0))
    assert sasaki_distance(s1, s1, torus) == 0.0
    s2 = torus.unit_state((0.2, 0.2), (-1.0, 0.0))
    assert sasaki_distance(s1, s2, torus) == pytest.approx(math.pi)
    a = torus.unit_state((0.0, 0.0), (0.3, 0.1))
    b = torus.unit_state((0.3, 0.4), (0.3, 0.1))
    assert sasaki_distance(a, b, torus) == pytest.approx(0.5)


def test_sasaki_covering_distance(torus):
    a = torus.unit_state((0.05, 0.5), (1.0, 0.0))
    b = torus.unit_state((0.95, 0.5), (1.0, 0.0))
    assert sasaki_distance(a, b, torus) == pytest.approx(0.1)


def _random_states(surf, rng, n):
    out = []
    for _ in range(n):
        if surf.is_revolution_chart:
            q = np.array([rng.uniform(0.4, surf.theta_max - 0.4), rng.uniform(0, 7)])
        else:
            q = rng.uniform(0, 1, 2)
        out.append(surf.state_from_angle(q, rng.uniform(0, 2 * math.pi)))
    return out


@pytest.mark.parametrize("kind", ["torus", "sphere", "neck", "plane"])
def test_sasaki_metric_properties(kind, torus, sphere, neck):
    surf = {"torus": torus, "sphere": sphere, "neck": neck,
            "plane": geometry.plane(f=0.0)}[kind]
    rng = np.random.default_rng(5)
    states = _random_states(surf, rng, 30)
    for i in range(0, 30, 3):
        a, b, c = states[i], states[i + 1], states[i + 2]
        dab = sasaki_distance(a, b, surf)
        dba = sasaki_distance(b, a, surf)
        assert dab == pytest.approx(dba, abs=1e-9)
        dac = sasaki_distance(a, c, surf)
        dbc = sasaki_distance(b, c, surf)
        assert dac <= dab + dbc + 1e-9


# construction and config ----------------------------------------------

def test_state_normalization(neck):
    st = neck.unit_state((1.2, 0.0), (3.0, 4.0))
    assert abs(neck.g_norm(st.q, st.v) - 1.0) < 1e-12


def test_surface_from_config_roundtrip():
    cfg = {"kind": "flat_torus", "lattice": [[1, 0], [0, 1]],
           "f": "1 + 0.5*cos(2*pi*x)"}
    surf = geometry.surface_from_config(cfg)
    assert surf.f_value((0.0, 0.2)) == pytest.approx(1.5)
    assert surf.to_config() == cfg
    with pytest.raises(ConfigError):
        geometry.surface_from_config({"kind": "flat_torus", "bogus": 1})
    with pytest.raises(ConfigError):
        geometry.surface_from_config({"kind": "nonsense"})


def test_nonperiodic_torus_field_rejected():
    with pytest.raises(ConfigError):
        geometry.flat_torus(f="1 + x")


def test_profile_must_vanish_at_poles():
    with pytest.raises(ConfigError):
        geometry.sphere_of_revolution("sin(theta) + 0.5")


def test_orientation_flips_rotation(torus):
    rev = geometry.flat_torus(f=1.0, orientation=-1)
    v = np.array([1.0, 0.0])
    assert np.allclose(rev.rotate90((0.1, 0.1), v), -torus.rotate90((0.1, 0.1), v))
