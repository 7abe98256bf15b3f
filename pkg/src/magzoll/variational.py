"""Free-period action on discrete loops, waist finding, and continuation.

The functional on a loop (Gamma, tau) is

    A_lam = (1/2 tau) * int |Gamma'|^2 ds  -  lam * (capping flux of f)  +  tau/2,

discretized with midpoint metric evaluation on segments; the magnetic term
is the quadrature capping flux from :mod:`curves`.  Critical points at the
optimal period tau = ||Gamma'||_L2 are closed orbits of the flow.  Waists
are local minimizers; they are found by preconditioned gradient descent
with an exact period update and continued in the coupling by re-seeding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import curves, flow
from .curves import DiscreteLoop
from .errors import ContinuationLost, NonContractible, NonPositiveInput
from .geometry import MagneticSurface

_GAUSS_SEG = curves._GAUSS_SEG


@dataclass
class ActionValue:
    value: float
    kinetic: float
    magnetic: float
    period_term: float


@dataclass
class Waist:
    """A local minimizer of the free-period action."""

    loop: DiscreteLoop
    action: float
    lam: float
    stability_margin: float
    probe_radius: float
    grad_norm: float
    length: float
    continuation_trace: list | None = None

    def to_json_dict(self):
        return {
            "action": self.action,
            "lambda": self.lam,
            "length": self.length,
            "stability_margin": self.stability_margin,
            "probe_radius": self.probe_radius,
            "grad_norm": self.grad_norm,
            "continuation_trace": self.continuation_trace,
            "loop": self.loop.to_json_dict(),
        }


@dataclass
class WaistOptions:
    gtol: float = 1e-8
    max_iter: int = 20000
    tau_min: float = 1e-4
    probe_radius: float = 1e-2
    probe_count: int = 16
    seed: int = 0
    armijo_c: float = 1e-4
    step_init: float = 1.0
    verbose: bool = False


# ----------------------------------------------------------------------
# action and its exact discrete gradient


def _segment_quadratic(loop, surface):
    """Q = N * sum_i <d_i, d_i>_{G(mid_i)} (discrete int |Gamma'|^2 ds)."""
    a, b = loop.segments(surface)
    d = b - a
    mid = 0.5 * (a + b)
    if surface.is_flat_chart:
        G = surface._G
        val = np.einsum("ij,jk,ik->i", d, G, d)
    else:
        av = np.asarray(surface.warp(mid[:, 0]), dtype=float)
        val = d[:, 0] ** 2 + (av * d[:, 1]) ** 2
    return float(len(a) * np.sum(val))


def _magnetic_term(loop, surface, lam):
    if lam == 0.0:
        return 0.0
    if surface.is_flat_chart and not loop.is_contractible(surface):
        raise NonContractible(
            "magnetic action needs a capping disk: torus loops must have winding (0, 0)")
    if surface.kind == "plane" or surface.kind == "flat_torus":
        return curves.flux(loop, surface, lam)
    value, _ = curves.flux_with_alternative(loop, surface, lam)
    return value


def action(loop: DiscreteLoop, surface: MagneticSurface, lam: float) -> ActionValue:
    """Free-period action of a loop: kinetic - magnetic + period terms."""
    Q = _segment_quadratic(loop, surface)
    kinetic = Q / (2.0 * loop.period)
    magnetic = _magnetic_term(loop, surface, lam)
    period_term = loop.period / 2.0
    return ActionValue(kinetic - magnetic + period_term, kinetic, magnetic, period_term)


def action_gradient(loop: DiscreteLoop, surface: MagneticSurface, lam: float):
    """Exact gradient of the discretized action: (point gradients, d/dtau)."""
    N = loop.n
    tau = loop.period
    a, b = loop.segments(surface)
    d = b - a
    mid = 0.5 * (a + b)

    grad = np.zeros((N, 2))
    if surface.is_flat_chart:
        G = surface._G
        Gd = d @ G.T          # G d_i
        quad = np.einsum("ij,ij->i", d, Gd)
        dG_term = np.zeros((len(d), 2))
    else:
        av = np.asarray(surface.warp(mid[:, 0]), dtype=float)
        a1v = np.asarray(surface.warp_d1(mid[:, 0]), dtype=float)
        Gd = np.stack([d[:, 0], av * av * d[:, 1]], axis=1)
        quad = d[:, 0] ** 2 + (av * d[:, 1]) ** 2
        # metric variation: d/dtheta <d, d>_G = 2 a a' dphi^2, at the midpoint
        dG_term = np.stack([av * a1v * d[:, 1] ** 2, np.zeros_like(av)], axis=1)

    Q = N * float(np.sum(quad))
    c = N / (2.0 * tau)
    # segment i contributes -2 G d_i + (1/2) dG_i to its start vertex and
    # +2 G d_i + (1/2) dG_i to its end vertex (indices mod N)
    start_contrib = c * (-2.0 * Gd + dG_term)
    end_contrib = c * (2.0 * Gd + dG_term)
    grad += start_contrib
    grad += np.roll(end_contrib, 1, axis=0)

    if lam != 0.0:
        grad -= _magnetic_gradient(loop, surface, lam)

    dtau = -Q / (2.0 * tau * tau) + 0.5
    return grad, dtau


def _magnetic_gradient(loop, surface, lam):
    """Exact gradient of the quadrature capping flux with respect to vertices."""
    if surface.is_flat_chart and not loop.is_contractible(surface):
        raise NonContractible(
            "magnetic action needs a capping disk: torus loops must have winding (0, 0)")
    a, b = loop.segments(surface)
    d = b - a
    tn, tw = _GAUSS_SEG
    t = 0.5 * (tn + 1.0)
    w = 0.5 * tw
    pts = a[:, None, :] + t[None, :, None] * d[:, None, :]
    flat = pts.reshape(-1, 2)
    sweep = "x"
    P, Pu, Pw = curves._flux_primitive_values(surface, lam, flat, sweep, want_grad=True)
    n_seg = len(a)
    P = P.reshape(n_seg, -1)
    Pu = Pu.reshape(n_seg, -1)
    Pw = Pw.reshape(n_seg, -1)
    comp = d[:, 1]  # flux = sum_i sum_al w_al P(xi_ial) * dyi

    gx_start = (Pu * (1 - t)[None, :]) @ w * comp
    gy_start = (Pw * (1 - t)[None, :]) @ w * comp - P @ w
    gx_end = (Pu * t[None, :]) @ w * comp
    gy_end = (Pw * t[None, :]) @ w * comp + P @ w

    grad = np.zeros((loop.n, 2))
    grad[:, 0] += gx_start
    grad[:, 1] += gy_start
    grad[:, 0] += np.roll(gx_end, 1)
    grad[:, 1] += np.roll(gy_end, 1)
    return grad


# ----------------------------------------------------------------------
# loop-space metric and probes


def h1_norm(dpoints, dtau, n, tau) -> float:
    """Discrete H1-type norm sqrt(sum|dP|^2 * N/tau + dtau^2)."""
    return math.sqrt(float(np.sum(dpoints * dpoints)) * n / tau + dtau * dtau)


def h1_distance(l1: DiscreteLoop, l2: DiscreteLoop, surface=None) -> float:
    """Loop-space distance, minimizing over cyclic vertex alignment."""
    if l1.n != l2.n:
        raise ValueError("loops must share the vertex count")
    p1, p2 = l1.points, l2.points
    best = math.inf
    step = max(1, l1.n // 64)
    for k in range(0, l1.n, step):
        d = np.roll(p2, -k, axis=0) - p1
        best = min(best, float(np.sum(d * d)))
    return math.sqrt(best * l1.n / l1.period + (l1.period - l2.period) ** 2)


def stability_probe(loop, surface, lam, radius, count, seed):
    """Minimum action gap over a sphere of loop perturbations."""
    rng = np.random.default_rng(seed)
    base = action(loop, surface, lam).value
    margin = math.inf
    for _ in range(count):
        dp = rng.standard_normal(loop.points.shape)
        dt = rng.standard_normal()
        scale = radius / h1_norm(dp, dt, loop.n, loop.period)
        probe = DiscreteLoop(loop.points + scale * dp,
                             max(loop.period + scale * dt, 1e-8), loop.winding)
        margin = min(margin, action(probe, surface, lam).value - base)
    return margin


# ----------------------------------------------------------------------
# descent


def _optimal_period(loop, surface):
    return math.sqrt(_segment_quadratic(loop, surface))


def _precondition(grad, n, tau):
    """Inverse-H1 averaging of the point gradient (circular FFT smoother)."""
    gh = np.fft.rfft(grad, axis=0)
    k = np.arange(gh.shape[0])
    lam_k = 4.0 * np.sin(math.pi * k / n) ** 2
    gh /= (1.0 + (n / tau) * lam_k)[:, None]
    return np.fft.irfft(gh, n=n, axis=0)


@dataclass
class DescentResult:
    status: str          # "converged" | "collapse" | "no-convergence"
    waist: Waist | None
    iterations: int
    grad_norm: float


def descend(surface: MagneticSurface, lam: float, seed_loop: DiscreteLoop,
            opts: WaistOptions | None = None) -> DescentResult:
    """Preconditioned gradient descent with exact period updates."""
    opts = opts or WaistOptions()
    pts = seed_loop.points.copy()
    winding = seed_loop.winding
    step = opts.step_init
    gnorm = math.inf
    it = 0

    def make_loop(p, tau=None):
        lp = DiscreteLoop(p, tau if tau is not None else 1.0, winding)
        if tau is None:
            lp = DiscreteLoop(p, max(_optimal_period(lp, surface), 1e-12), winding)
        return lp

    loop = make_loop(pts)
    if loop.period < opts.tau_min:
        return DescentResult("collapse", None, 0, math.inf)
    value = action(loop, surface, lam).value

    for it in range(1, opts.max_iter + 1):
        grad, _ = action_gradient(loop, surface, lam)
        gnorm = float(np.abs(grad).max())
        if gnorm <= opts.gtol:
            break
        direction = -_precondition(grad, loop.n, loop.period)
        slope = float(np.sum(grad * direction))
        if slope >= 0:
            direction = -grad
            slope = -float(np.sum(grad * grad))
        s = step
        accepted = False
        for _ in range(60):
            trial = make_loop(loop.points + s * direction)
            if trial.period < opts.tau_min:
                return DescentResult("collapse", None, it, gnorm)
            tval = action(trial, surface, lam).value
            if tval <= value + opts.armijo_c * s * slope:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
        loop, value = trial, tval
        step = min(s * 2.0, 64.0)
        if loop.period < opts.tau_min:
            return DescentResult("collapse", None, it, gnorm)

    if gnorm > opts.gtol:
        status = "no-convergence"
        return DescentResult(status, None, it, gnorm)
    margin = stability_probe(loop, surface, lam, opts.probe_radius,
                             opts.probe_count, opts.seed)
    waist = Waist(loop, value, lam, margin, opts.probe_radius, gnorm,
                  curves.loop_length(loop, surface))
    return DescentResult("converged", waist, it, gnorm)


def find_waist(surface: MagneticSurface, lam: float, seed_loop: DiscreteLoop,
               opts: WaistOptions | None = None) -> Waist | None:
    """Local minimizer of the free-period action, or None on collapse or
    non-convergence (collapse is reported distinctly by :func:`descend`)."""
    return descend(surface, lam, seed_loop, opts).waist


# ----------------------------------------------------------------------
# perturbation threshold and continuation


def perturbation_threshold(eps: float, r: float, theta_sup: float) -> float:
    """Coupling bound eps / (4 r sup|theta|) below which a stable minimizer
    persists under the magnetic perturbation."""
    if eps <= 0 or r <= 0 or theta_sup <= 0:
        raise NonPositiveInput("eps, r, theta_sup must all be positive")
    return eps / (4.0 * r * theta_sup)


def continue_waist(surface: MagneticSurface, waist: Waist, lam_target: float,
                   steps: int = 10, opts: WaistOptions | None = None,
                   max_drift: float = 1.0) -> Waist | None:
    """Continuation of a zero-coupling waist to ``lam_target``.

    Re-runs the descent at each intermediate coupling, seeded by the previous
    minimizer; raises :class:`ContinuationLost` (carrying the largest
    coupling reached) if the descent collapses, stops converging, or drifts
    out of [max_drift] of the seed waist in the loop metric.
    """
    if lam_target == 0.0:
        return waist
    if lam_target < 0:
        raise ValueError("lam_target must be nonnegative")
    opts = opts or WaistOptions()
    lam_reached = waist.lam
    current = waist
    trace = []
    for lam_k in np.linspace(waist.lam, lam_target, steps + 1)[1:]:
        res = descend(surface, float(lam_k), current.loop, opts)
        if res.status != "converged":
            raise ContinuationLost(
                f"continuation {res.status} at lam={lam_k:g} "
                f"(reached lam={lam_reached:g})", lam_reached)
        dist = h1_distance(waist.loop, res.waist.loop)
        if dist > max_drift:
            raise ContinuationLost(
                f"continuation escaped the seed neighborhood at lam={lam_k:g} "
                f"(drift {dist:g}, reached lam={lam_reached:g})", lam_reached)
        trace.append({"lambda": float(lam_k), "action": res.waist.action,
                      "drift": dist, "grad_norm": res.grad_norm})
        current = res.waist
        lam_reached = float(lam_k)
    current.continuation_trace = trace
    return current


def continuation_sweep(surface, waist, lam_max, steps=20, opts=None, max_drift=1.0):
    """Push the continuation upward until loss; returns (last waist, lam_reached)."""
    lams = np.linspace(waist.lam, lam_max, steps + 1)[1:]
    current = waist
    reached = waist.lam
    for lam_k in lams:
        try:
            current = continue_waist(surface, current, float(lam_k), steps=1,
                                     opts=opts, max_drift=max_drift)
        except ContinuationLost:
            break
        reached = float(lam_k)
    return current, reached


# ----------------------------------------------------------------------
# seed loops


def seed_circle(center, radius, n=256, surface=None) -> DiscreteLoop:
    t = 2 * math.pi * np.arange(n) / n
    pts = np.stack([center[0] + radius * np.cos(t),
                    center[1] + radius * np.sin(t)], axis=1)
    return DiscreteLoop(pts, 2 * math.pi * radius, (0, 0))


def seed_torus_class(winding, offset=0.37, n=256) -> DiscreteLoop:
    """Straight representative of a torus homotopy class, offset from 0."""
    s = np.arange(n) / n
    pts = np.stack([winding[0] * s + offset, winding[1] * s + offset], axis=1)
    if winding == (0, 0):
        raise ValueError("use seed_circle for contractible seeds")
    return DiscreteLoop(pts, math.hypot(*winding), (int(winding[0]), int(winding[1])))


def seed_parallel(surface, theta, n=256) -> DiscreteLoop:
    """Latitude circle of a revolution chart (increasing phi)."""
    phis = 2 * math.pi * np.arange(n) / n
    pts = np.stack([np.full(n, float(theta)), phis], axis=1)
    a = float(surface.warp(theta))
    return DiscreteLoop(pts, 2 * math.pi * a, (0, 1))


def seed_from_spec(surface, spec: dict) -> DiscreteLoop:
    kind = spec.get("kind")
    n = int(spec.get("n", 256))
    if kind == "circle":
        return seed_circle(spec["center"], spec["radius"], n)
    if kind == "torus_class":
        return seed_torus_class(tuple(spec["winding"]), spec.get("offset", 0.37), n)
    if kind == "parallel":
        return seed_parallel(surface, spec["theta"], n)
    if kind == "points":
        return curves.loop_from_chart_points(np.asarray(spec["points"], dtype=float),
                                             float(spec["period"]), surface)
    raise ValueError(f"unknown seed kind {kind!r}")
