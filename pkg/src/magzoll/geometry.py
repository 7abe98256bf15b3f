"""Surface models, metric data, and the combined distance on the unit tangent bundle.

Four chart families are supported:

* ``flat_torus`` -- quotient of the plane by a lattice, in the linear chart
  where the fundamental domain is the unit square and the metric is the
  constant matrix ``L^T L`` (``L`` columns are the lattice vectors);
* ``plane`` -- the Euclidean plane (identity metric, used for drift runs);
* ``round_sphere`` -- arc-length colatitude chart, warp ``a(t) = R sin(t/R)``
  on ``(0, pi R)``;
* ``sphere_of_revolution`` -- arc-length colatitude chart with a supplied
  warp profile ``a`` vanishing exactly at the two poles.

All surfaces are immutable after construction and safe to share across
worker processes.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate as _sciint
from scipy.interpolate import CubicSpline

from .errors import ConfigError, PoleEvaluation, UnboundedDomain
from .fields import FieldExpr

DEFAULT_POLE_MARGIN = 1e-3

# Offsets used when minimizing over lattice translates on the torus.
_TORUS_OFFSETS = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)


class SurfaceParams:
    """Coupling scaling of a magnetic system: the flow of (g, lam * f)."""

    __slots__ = ("lam",)

    def __init__(self, lam: float):
        if lam < 0:
            raise ConfigError("coupling lambda must be nonnegative")
        self.lam = float(lam)

    def __repr__(self):
        return f"SurfaceParams(lam={self.lam!r})"


class UnitTangentState:
    """A point of the unit tangent bundle: chart point plus unit direction.

    The constructor renormalizes ``v`` to unit metric norm, so states
    satisfy ``|v|_g = 1`` to within 1e-12 by construction.
    """

    __slots__ = ("q", "v")

    def __init__(self, q, v, surface: "MagneticSurface"):
        q = np.asarray(q, dtype=float).copy()
        v = np.asarray(v, dtype=float).copy()
        if q.shape != (2,) or v.shape != (2,):
            raise ValueError("state components must be 2-vectors")
        n = surface.g_norm(q, v)
        if not n > 0:
            raise ValueError("velocity must be nonzero")
        self.q = q
        self.v = v / n

    def as_array(self):
        return np.concatenate([self.q, self.v])

    def __repr__(self):
        return f"UnitTangentState(q={self.q.tolist()}, v={self.v.tolist()})"


class MagneticSurface:
    """A chart-based surface together with a magnetic function.

    Construct through :func:`flat_torus`, :func:`plane`,
    :func:`round_sphere`, :func:`sphere_of_revolution` or
    :func:`surface_from_config`.
    """

    __slots__ = (
        "kind", "f", "orientation", "pole_margin",
        "lattice", "radius", "profile", "profile_d1", "profile_d2", "theta_max",
        "_G", "_Ginv", "_sqrtg", "_embed_z", "_f_bounds", "_config", "__weakref__",
    )

    def __init__(self, kind, f, orientation=1, pole_margin=DEFAULT_POLE_MARGIN,
                 lattice=None, radius=None, profile=None, profile_d1=None,
                 profile_d2=None, theta_max=None, config=None):
        self.kind = kind
        self.f = FieldExpr.parse(f)
        if orientation not in (1, -1):
            raise ConfigError("orientation must be +1 or -1")
        self.orientation = int(orientation)
        self.pole_margin = float(pole_margin)
        self.lattice = None if lattice is None else np.asarray(lattice, dtype=float)
        self.radius = radius
        self.profile = profile
        self.profile_d1 = profile_d1
        self.profile_d2 = profile_d2
        self.theta_max = theta_max
        self._embed_z = None
        self._f_bounds = None
        self._config = config

        if kind == "flat_torus":
            if abs(np.linalg.det(self.lattice)) < 1e-14:
                raise ConfigError("lattice matrix must be invertible")
            self._G = self.lattice.T @ self.lattice
            self._Ginv = np.linalg.inv(self._G)
            self._sqrtg = math.sqrt(abs(np.linalg.det(self._G)))
            _check_periodic(self.f, (1.0, 0.0), "flat torus field must have chart period 1 in x")
            _check_periodic(self.f, (0.0, 1.0), "flat torus field must have chart period 1 in y")
        elif kind == "plane":
            self._G = np.eye(2)
            self._Ginv = np.eye(2)
            self._sqrtg = 1.0
        elif kind in ("round_sphere", "sphere_of_revolution"):
            self._G = None
            self._Ginv = None
            self._sqrtg = None
            if kind == "round_sphere":
                if not radius or radius <= 0:
                    raise ConfigError("sphere radius must be positive")
                self.theta_max = math.pi * radius
            else:
                if self.theta_max is None or self.theta_max <= 0:
                    raise ConfigError("profile domain length theta_max must be positive")
                self._validate_profile()
            _check_periodic(self.f, (0.0, 2 * math.pi),
                            "revolution-chart field must have period 2*pi in phi")
        else:
            raise ConfigError(f"unknown surface kind {kind!r}")

    # ------------------------------------------------------------------
    # construction helpers

    def _validate_profile(self):
        tm = self.theta_max
        ts = np.linspace(tm * 1e-4, tm * (1 - 1e-4), 257)
        vals = self.profile(ts, np.zeros_like(ts))
        if np.any(vals <= 0):
            raise ConfigError("profile must be strictly positive between the poles")
        for t_end in (0.0, tm):
            if abs(self.profile.scalar(t_end, 0.0)) > 1e-6:
                raise ConfigError("profile must vanish at both poles")

    def to_config(self):
        """Serializable description sufficient to reconstruct the surface."""
        if self._config is not None:
            return dict(self._config)
        cfg = {"kind": self.kind, "f": self.f.text, "orientation": self.orientation}
        if self.kind == "flat_torus":
            cfg["lattice"] = self.lattice.tolist()
        elif self.kind == "round_sphere":
            cfg["radius"] = self.radius
        elif self.kind == "sphere_of_revolution":
            cfg["profile"] = self.profile.text
            cfg["theta_max"] = self.theta_max
            cfg["pole_margin"] = self.pole_margin
        return cfg

    def __reduce__(self):
        return (surface_from_config, (self.to_config(),))

    # ------------------------------------------------------------------
    # warp profile of revolution charts

    def warp(self, theta):
        if self.kind == "round_sphere":
            r = self.radius
            return r * np.sin(np.asarray(theta) / r)
        return self.profile(theta, 0.0)

    def warp_d1(self, theta):
        if self.kind == "round_sphere":
            return np.cos(np.asarray(theta) / self.radius)
        return self.profile_d1(theta, 0.0)

    def warp_d2(self, theta):
        if self.kind == "round_sphere":
            r = self.radius
            return -np.sin(np.asarray(theta) / r) / r
        return self.profile_d2(theta, 0.0)

    def _check_interior(self, q):
        th = float(np.asarray(q, dtype=float)[0])
        if not 0.0 < th < self.theta_max:
            raise PoleEvaluation(
                f"theta={th:g} is at or beyond a pole of the chart (0, {self.theta_max:g})")
        return th

    # ------------------------------------------------------------------
    # metric data

    @property
    def is_flat_chart(self):
        return self.kind in ("flat_torus", "plane")

    @property
    def is_revolution_chart(self):
        return self.kind in ("round_sphere", "sphere_of_revolution")

    def metric(self, q):
        """Metric tensor g_ij at a chart point."""
        if self.is_flat_chart:
            return self._G.copy()
        th = self._check_interior(q)
        a = float(self.warp(th))
        return np.array([[1.0, 0.0], [0.0, a * a]])

    def sqrt_det_metric(self, q):
        if self.is_flat_chart:
            return self._sqrtg
        th = self._check_interior(q)
        return float(self.warp(th))

    def g_inner(self, q, u, v):
        G = self.metric(q)
        return float(u @ G @ v)

    def g_norm(self, q, v):
        return math.sqrt(max(self.g_inner(q, v, v), 0.0))

    def rotate90(self, q, v):
        """Rotation of a tangent vector by +pi/2 in the oriented metric frame."""
        G = self.metric(q)
        s = self.sqrt_det_metric(q)
        w1 = -(G[1, 0] * v[0] + G[1, 1] * v[1]) / s
        w2 = (G[0, 0] * v[0] + G[0, 1] * v[1]) / s
        return self.orientation * np.array([w1, w2])

    def unit_state(self, q, v) -> UnitTangentState:
        return UnitTangentState(q, v, self)

    def state_from_angle(self, q, angle) -> UnitTangentState:
        """Unit state at chart point ``q`` with direction ``angle`` in the
        positively-oriented orthonormal frame (e1 along the first coordinate)."""
        q = np.asarray(q, dtype=float)
        G = self.metric(q)
        e1 = np.array([1.0 / math.sqrt(G[0, 0]), 0.0])
        e2 = self.rotate90(q, e1)
        v = math.cos(angle) * e1 + math.sin(angle) * e2
        return UnitTangentState(q, v, self)

    def frame_angle(self, q, v) -> float:
        """Direction angle of ``v`` in the oriented orthonormal frame at ``q``."""
        q = np.asarray(q, dtype=float)
        G = self.metric(q)
        e1 = np.array([1.0 / math.sqrt(G[0, 0]), 0.0])
        e2 = self.rotate90(q, e1)
        return math.atan2(self.g_inner(q, v, e2), self.g_inner(q, v, e1))

    # ------------------------------------------------------------------
    # curvature

    def christoffels(self, q):
        """Christoffel symbols Gamma^k_{ij}, shape (2, 2, 2), index order [k][i][j]."""
        out = np.zeros((2, 2, 2))
        if self.is_flat_chart:
            return out
        th = self._check_interior(q)
        a = float(self.warp(th))
        a1 = float(self.warp_d1(th))
        out[0, 1, 1] = -a * a1
        out[1, 0, 1] = a1 / a
        out[1, 1, 0] = a1 / a
        return out

    def gauss_curvature(self, q):
        if self.kind == "flat_torus" or self.kind == "plane":
            return 0.0
        if self.kind == "round_sphere":
            self._check_interior(q)
            return 1.0 / self.radius**2
        th = self._check_interior(q)
        return float(-self.warp_d2(th) / self.warp(th))

    def total_area(self):
        if self.kind == "plane":
            raise UnboundedDomain("the plane has infinite area")
        if self.kind == "flat_torus":
            return abs(float(np.linalg.det(self.lattice)))
        if self.kind == "round_sphere":
            return 4.0 * math.pi * self.radius**2
        val, _ = _sciint.quad(lambda t: float(self.warp(t)), 0.0, self.theta_max,
                              epsabs=1e-13, epsrel=1e-12, limit=200)
        return 2.0 * math.pi * val

    @property
    def euler_characteristic(self):
        if self.kind == "flat_torus":
            return 0
        if self.is_revolution_chart:
            return 2
        return None

    @property
    def is_closed_surface(self):
        return self.kind != "plane"

    # ------------------------------------------------------------------
    # points and base distance

    def reduce_point(self, q):
        """Representative of ``q`` in the fundamental chart domain."""
        q = np.asarray(q, dtype=float)
        if self.kind == "flat_torus":
            return q - np.floor(q)
        if self.is_revolution_chart:
            return np.array([q[0], q[1] - 2 * math.pi * math.floor(q[1] / (2 * math.pi))])
        return q.copy()

    def base_distance(self, q1, q2):
        """Distance between base points (quotient distance on the torus,
        great-circle distance on the round sphere, embedded chordal distance
        on general revolution surfaces)."""
        q1 = np.asarray(q1, dtype=float)
        q2 = np.asarray(q2, dtype=float)
        if self.kind == "plane":
            return float(np.linalg.norm(q2 - q1))
        if self.kind == "flat_torus":
            d = self.reduce_point(q2) - self.reduce_point(q1)
            cands = (d + _TORUS_OFFSETS) @ self.lattice.T
            return float(np.sqrt((cands * cands).sum(axis=1).min()))
        if self.kind == "round_sphere":
            n1 = self._sphere_point(q1)
            n2 = self._sphere_point(q2)
            c = min(1.0, max(-1.0, float(n1 @ n2)))
            return self.radius * math.acos(c)
        p1 = self._embed_point(q1)
        p2 = self._embed_point(q2)
        return float(np.linalg.norm(p2 - p1))

    def _sphere_point(self, q):
        t = q[0] / self.radius
        return np.array([math.sin(t) * math.cos(q[1]),
                         math.sin(t) * math.sin(q[1]),
                         math.cos(t)])

    def _embedding_height(self):
        # Profile arc parameter gives a' as the cosine of the profile slope,
        # so the height satisfies z' = sqrt(1 - a'^2); clamped at 0 if the
        # profile is not isometrically embeddable (|a'| > 1 somewhere).
        if self._embed_z is None:
            ts = np.linspace(0.0, self.theta_max, 4001)
            a1 = np.asarray(self.warp_d1(ts), dtype=float)
            zp = np.sqrt(np.maximum(0.0, 1.0 - a1 * a1))
            z = _sciint.cumulative_trapezoid(zp, ts, initial=0.0)
            self._embed_z = CubicSpline(ts, z)
        return self._embed_z

    def _embed_point(self, q):
        a = float(self.warp(q[0]))
        z = float(self._embedding_height()(q[0]))
        return np.array([a * math.cos(q[1]), a * math.sin(q[1]), z])

    # ------------------------------------------------------------------
    # magnetic function helpers

    def f_value(self, q):
        q = self.reduce_point(q) if self.kind == "flat_torus" else np.asarray(q, dtype=float)
        return self.f.scalar(q[0], q[1])

    def f_bounds(self, box=None, n=64):
        """(min, max) of the magnetic function on a probe grid.

        ``box`` is required for the plane: ((x0, x1), (y0, y1)).
        """
        if self.kind == "plane":
            if box is None:
                raise ValueError("plane surfaces need an explicit probe box")
            xs = np.linspace(box[0][0], box[0][1], n)
            ys = np.linspace(box[1][0], box[1][1], n)
        elif self.kind == "flat_torus":
            if self._f_bounds is not None:
                return self._f_bounds
            xs = np.linspace(0.0, 1.0, n, endpoint=False)
            ys = np.linspace(0.0, 1.0, n, endpoint=False)
        else:
            if self._f_bounds is not None:
                return self._f_bounds
            xs = np.linspace(self.theta_max * 1e-3, self.theta_max * (1 - 1e-3), n)
            ys = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        vals = self.f(X, Y)
        bounds = (float(np.min(vals)), float(np.max(vals)))
        if self.kind != "plane":
            self._f_bounds = bounds
        return bounds

    def total_magnetic_flux(self):
        """Integral of ``f`` against the area form over the closed surface."""
        if self.kind == "plane":
            raise UnboundedDomain("the plane has no total flux")
        if self.f.is_constant:
            return self.f.constant_value() * self.total_area()
        if self.kind == "flat_torus":
            val, _ = _dblquad_grid(lambda x, y: self.f(x, y) * self._sqrtg,
                                   0.0, 1.0, 0.0, 1.0)
            return val
        val, _ = _dblquad_grid(lambda t, p: self.f(t, p) * np.asarray(self.warp(t)),
                               0.0, self.theta_max, 0.0, 2 * math.pi)
        return val


def _dblquad_grid(fn, x0, x1, y0, y1, n=256):
    """Tensor Gauss-Legendre quadrature on a rectangle (smooth integrands)."""
    xs, wx = np.polynomial.legendre.leggauss(n)
    xs_a = 0.5 * (x1 - x0) * (xs + 1) + x0
    ys_a = 0.5 * (y1 - y0) * (xs + 1) + y0
    X, Y = np.meshgrid(xs_a, ys_a, indexing="ij")
    vals = fn(X, Y)
    w2 = np.outer(wx, wx) * 0.25 * (x1 - x0) * (y1 - y0)
    return float(np.sum(vals * w2)), 0.0


def _check_periodic(f: FieldExpr, shift, message, tol=1e-9):
    if f.is_constant:
        return
    rng = np.random.default_rng(12345)
    pts = rng.uniform(-2.0, 2.0, size=(32, 2))
    base = f(pts[:, 0], pts[:, 1])
    moved = f(pts[:, 0] + shift[0], pts[:, 1] + shift[1])
    if np.max(np.abs(np.asarray(moved) - np.asarray(base))) > tol:
        raise ConfigError(message)


# ----------------------------------------------------------------------
# constructors

def flat_torus(lattice=((1.0, 0.0), (0.0, 1.0)), f=0.0, orientation=1) -> MagneticSurface:
    return MagneticSurface("flat_torus", f, orientation, lattice=lattice)


def plane(f=0.0, orientation=1) -> MagneticSurface:
    return MagneticSurface("plane", f, orientation)


def round_sphere(radius=1.0, f=0.0, orientation=1) -> MagneticSurface:
    return MagneticSurface("round_sphere", f, orientation, radius=float(radius))


def sphere_of_revolution(profile, f=0.0, theta_max=math.pi, orientation=1,
                         profile_d1=None, profile_d2=None,
                         pole_margin=DEFAULT_POLE_MARGIN) -> MagneticSurface:
    """Revolution surface from a warp profile ``a(theta)`` on ``(0, theta_max)``.

    Derivatives default to the exact symbolic ones; explicit expressions may
    be supplied to override.
    """
    prof = FieldExpr.parse(profile)
    d1 = FieldExpr.parse(profile_d1) if profile_d1 is not None else prof.diff(0)
    d2 = FieldExpr.parse(profile_d2) if profile_d2 is not None else d1.diff(0)
    return MagneticSurface("sphere_of_revolution", f, orientation,
                           pole_margin=pole_margin, profile=prof,
                           profile_d1=d1, profile_d2=d2, theta_max=float(theta_max))


_SURFACE_KEYS = {
    "flat_torus": {"kind", "lattice", "f", "orientation"},
    "plane": {"kind", "f", "orientation"},
    "round_sphere": {"kind", "radius", "f", "orientation"},
    "sphere_of_revolution": {"kind", "profile", "profile_d1", "profile_d2",
                             "theta_max", "f", "orientation", "pole_margin"},
}


def surface_from_config(cfg: dict) -> MagneticSurface:
    """Build a surface from its JSON description.

    Example: ``{"kind": "flat_torus", "lattice": [[1,0],[0,1]],
    "f": "1 + 0.5*cos(2*pi*x)"}``.
    """
    if not isinstance(cfg, dict):
        raise ConfigError("surface description must be a JSON object")
    kind = cfg.get("kind")
    if kind not in _SURFACE_KEYS:
        raise ConfigError(f"unknown surface kind {kind!r}")
    unknown = set(cfg) - _SURFACE_KEYS[kind]
    if unknown:
        raise ConfigError(f"unknown surface keys for {kind}: {sorted(unknown)}")
    f = cfg.get("f", 0.0)
    orientation = cfg.get("orientation", 1)
    if kind == "flat_torus":
        surf = flat_torus(cfg.get("lattice", ((1, 0), (0, 1))), f, orientation)
    elif kind == "plane":
        surf = plane(f, orientation)
    elif kind == "round_sphere":
        surf = round_sphere(cfg.get("radius", 1.0), f, orientation)
    else:
        surf = sphere_of_revolution(
            cfg["profile"], f,
            theta_max=cfg.get("theta_max", math.pi),
            orientation=orientation,
            profile_d1=cfg.get("profile_d1"),
            profile_d2=cfg.get("profile_d2"),
            pole_margin=cfg.get("pole_margin", DEFAULT_POLE_MARGIN),
        )
    surf._config = dict(cfg)
    return surf


# ----------------------------------------------------------------------
# module-level operations

def christoffels(surface: MagneticSurface, q):
    return surface.christoffels(q)


def gauss_curvature(surface: MagneticSurface, q):
    return surface.gauss_curvature(q)


def total_area(surface: MagneticSurface):
    return surface.total_area()


def sasaki_distance(s1: UnitTangentState, s2: UnitTangentState,
                    surface: MagneticSurface) -> float:
    """Combined unit-tangent-bundle distance sqrt(d_base^2 + d_fiber^2).

    The fiber term is the angle between the two directions after carrying
    the first along a minimizing base geodesic: exact parallel transport on
    flat charts and the round sphere, frame-angle transport on general
    revolution charts (the two agree to first order near coincidence).
    """
    return float(state_distance_batch(surface, s1, s2.q[None, :], s2.v[None, :])[0])


def state_distance_batch(surface, s0: UnitTangentState, qs, vs):
    """Distances from one state to arrays of states (rows of qs, vs)."""
    qs = np.asarray(qs, dtype=float)
    vs = np.asarray(vs, dtype=float)
    if surface.kind == "plane":
        db = np.linalg.norm(qs - s0.q, axis=1)
        G = surface._G
        c = np.clip(vs @ (G @ s0.v), -1.0, 1.0)
        df = np.arccos(c)
    elif surface.kind == "flat_torus":
        d = (qs - np.floor(qs)) - surface.reduce_point(s0.q)
        cands = d[:, None, :] + _TORUS_OFFSETS[None, :, :]
        lengths = np.einsum("nok,kl,nol->no", cands, surface._G, cands)
        db = np.sqrt(lengths.min(axis=1))
        c = np.clip(vs @ (surface._G @ s0.v), -1.0, 1.0)
        df = np.arccos(c)
    elif surface.kind == "round_sphere":
        R = surface.radius
        n0 = surface._sphere_point(s0.q)
        t = qs[:, 0] / R
        st, ct = np.sin(t), np.cos(t)
        cp, sp = np.cos(qs[:, 1]), np.sin(qs[:, 1])
        n = np.stack([st * cp, st * sp, ct], axis=1)
        cosang = np.clip(n @ n0, -1.0, 1.0)
        db = R * np.arccos(cosang)
        v0 = _sphere_tangent(surface, s0.q, s0.v)
        e_t = np.stack([ct * cp, ct * sp, -st], axis=1)
        e_p = np.stack([-sp, cp, np.zeros_like(sp)], axis=1)
        a = R * st
        w = vs[:, :1] * e_t + (vs[:, 1:] * a[:, None]) * e_p
        w = w / np.linalg.norm(w, axis=1, keepdims=True)
        # parallel transport of v0 along the minimizing great circle to each n
        axis = np.cross(np.broadcast_to(n0, n.shape), n)
        na = np.linalg.norm(axis, axis=1)
        safe = na > 1e-14
        ang = np.arctan2(na, cosang * 1.0)
        v0t = np.broadcast_to(v0, n.shape).copy()
        if safe.any():
            ax = axis[safe] / na[safe][:, None]
            c_, s_ = np.cos(ang[safe])[:, None], np.sin(ang[safe])[:, None]
            v0b = np.broadcast_to(v0, ax.shape)
            v0t[safe] = v0b * c_ + np.cross(ax, v0b) * s_ \
                + ax * (ax @ v0)[:, None] * (1 - c_)
        cf = np.clip(np.sum(v0t * w, axis=1), -1.0, 1.0)
        df = np.arccos(cf)
    else:
        a0 = float(surface.warp(s0.q[0]))
        z = surface._embedding_height()
        p0 = np.array([a0 * math.cos(s0.q[1]), a0 * math.sin(s0.q[1]), float(z(s0.q[0]))])
        av = np.asarray(surface.warp(qs[:, 0]), dtype=float)
        pz = np.asarray(z(qs[:, 0]), dtype=float)
        p = np.stack([av * np.cos(qs[:, 1]), av * np.sin(qs[:, 1]), pz], axis=1)
        db = np.linalg.norm(p - p0, axis=1)
        ps0 = math.atan2(surface.orientation * a0 * s0.v[1], s0.v[0])
        psi = np.arctan2(surface.orientation * av * vs[:, 1], vs[:, 0])
        d = psi - ps0
        df = np.abs((d + math.pi) % (2 * math.pi) - math.pi)
    return np.sqrt(db * db + df * df)


def _sphere_tangent(surface, q, v):
    R = surface.radius
    t, p = q[0] / R, q[1]
    e_t = np.array([math.cos(t) * math.cos(p), math.cos(t) * math.sin(p), -math.sin(t)])
    e_p = np.array([-math.sin(p), math.cos(p), 0.0])
    a = R * math.sin(t)
    w = v[0] * e_t + v[1] * a * e_p
    n = np.linalg.norm(w)
    return w / n if n > 0 else w


def _wrap_angle(a):
    return (a + math.pi) % (2 * math.pi) - math.pi
