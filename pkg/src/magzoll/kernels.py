"""Kernel backend selection and the surface payload consumed by the steppers.

The compiled extension is preferred when importable; set
``MAGZOLL_KERNEL=python`` or ``MAGZOLL_KERNEL=cython`` to force a backend.
"""

from __future__ import annotations

import math
import os
import weakref
from dataclasses import dataclass

import numpy as np

from . import _kernel_py
from .errors import ConfigError

try:
    from . import _kernel as _kernel_c
except ImportError:  # extension not built
    _kernel_c = None

STATUS_DONE = _kernel_py.STATUS_DONE
STATUS_FULL = _kernel_py.STATUS_FULL
STATUS_POLE = _kernel_py.STATUS_POLE
STATUS_UNDERFLOW = _kernel_py.STATUS_UNDERFLOW

_CHUNK = 200_000

_DUMMY_OPS = np.zeros(1, dtype=np.int32)
_DUMMY_ARGS = np.zeros(1, dtype=np.float64)


def available_backends():
    names = ["python"]
    if _kernel_c is not None:
        names.insert(0, "cython")
    return names


def default_backend() -> str:
    req = os.environ.get("MAGZOLL_KERNEL", "auto")
    if req == "auto":
        return "cython" if _kernel_c is not None else "python"
    if req == "cython":
        if _kernel_c is None:
            raise ConfigError("MAGZOLL_KERNEL=cython but the extension is not built")
        return "cython"
    if req == "python":
        return "python"
    raise ConfigError(f"unknown MAGZOLL_KERNEL value {req!r}")


@dataclass
class KernelPayload:
    kind_code: int
    sp: np.ndarray
    f_ops: np.ndarray
    f_args: np.ndarray
    a_ops: np.ndarray
    a_args: np.ndarray
    a1_ops: np.ndarray
    a1_args: np.ndarray
    orient: float
    pole_lo: float
    pole_hi: float
    f_scalar: object
    a_scalar: object
    a1_scalar: object


_payload_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def payload_for(surface) -> KernelPayload:
    cached = _payload_cache.get(surface)
    if cached is not None:
        return cached

    from .fields import program_to_scalar_fn

    f_ops, f_args = surface.f.program
    # scalar callables are generated from the same stack programs the
    # compiled kernel interprets, so the two backends agree bit for bit
    fm = program_to_scalar_fn(f_ops, f_args)
    a_ops, a_args = _DUMMY_OPS, _DUMMY_ARGS
    a1_ops, a1_args = _DUMMY_OPS, _DUMMY_ARGS
    a_scalar = a1_scalar = None
    pole_lo, pole_hi = -1e308, 1e308

    if surface.kind in ("flat_torus", "plane"):
        G = surface._G
        sp = np.array([G[0, 0], G[0, 1], G[1, 1], surface._sqrtg,
                       1.0 if surface.kind == "flat_torus" else 0.0])
        kind_code = 0
    elif surface.kind == "round_sphere":
        sp = np.array([float(surface.radius)])
        kind_code = 1
        R = float(surface.radius)
        a_scalar = lambda t: R * math.sin(t / R)
        a1_scalar = lambda t: math.cos(t / R)
        pole_lo = surface.pole_margin
        pole_hi = surface.theta_max - surface.pole_margin
    else:
        sp = np.zeros(1)
        kind_code = 2
        a_ops, a_args = surface.profile.program
        a1_ops, a1_args = surface.profile_d1.program
        a_scalar = program_to_scalar_fn(a_ops, a_args)
        a1_scalar = program_to_scalar_fn(a1_ops, a1_args)
        pole_lo = surface.pole_margin
        pole_hi = surface.theta_max - surface.pole_margin

    payload = KernelPayload(
        kind_code=kind_code,
        sp=np.ascontiguousarray(sp, dtype=np.float64),
        f_ops=np.ascontiguousarray(f_ops, dtype=np.int32),
        f_args=np.ascontiguousarray(f_args, dtype=np.float64),
        a_ops=np.ascontiguousarray(a_ops, dtype=np.int32),
        a_args=np.ascontiguousarray(a_args, dtype=np.float64),
        a1_ops=np.ascontiguousarray(a1_ops, dtype=np.int32),
        a1_args=np.ascontiguousarray(a1_args, dtype=np.float64),
        orient=float(surface.orientation),
        pole_lo=pole_lo,
        pole_hi=pole_hi,
        f_scalar=fm,
        a_scalar=a_scalar,
        a1_scalar=a1_scalar,
    )
    _payload_cache[surface] = payload
    return payload


def _call_backend(backend, payload, lam, y, t, t1, rtol, atol, max_step,
                  out_t, out_y, h0):
    if backend == "cython":
        return _kernel_c.propagate(
            payload.kind_code, payload.sp,
            payload.f_ops, payload.f_args,
            payload.a_ops, payload.a_args,
            payload.a1_ops, payload.a1_args,
            lam, payload.orient, y, t, t1, rtol, atol, max_step,
            payload.pole_lo, payload.pole_hi, out_t, out_y, h0)
    return _kernel_py.propagate(payload, lam, y, t, t1, rtol, atol, max_step,
                                out_t, out_y, h0)


def propagate(surface, lam, y0, t0, t1, tol, max_step, backend=None):
    """Drive a kernel forward over [t0, t1], stitching fixed-size chunks.

    Returns ``(ts, ys, status, (min_h, max_h, max_dev))`` with one row per
    accepted step (initial state included).
    """
    if backend is None:
        backend = default_backend()
    payload = payload_for(surface)
    y = np.ascontiguousarray(y0, dtype=np.float64)
    t = float(t0)
    parts_t, parts_y = [], []
    min_h, max_h, max_dev = math.inf, 0.0, 0.0
    first = True
    h0 = 0.0
    while True:
        out_t = np.empty(_CHUNK)
        out_y = np.empty((_CHUNK, 4))
        n, status, mnh, mxh, dev, h0 = _call_backend(
            backend, payload, lam, y, t, t1, tol, tol, max_step, out_t, out_y, h0)
        lo = 0 if first else 1  # drop the duplicated resume sample
        parts_t.append(out_t[lo:n].copy())
        parts_y.append(out_y[lo:n].copy())
        if mnh > 0:
            min_h = min(min_h, mnh)
        max_h = max(max_h, mxh)
        max_dev = max(max_dev, dev)
        first = False
        if status == STATUS_FULL:
            t = float(out_t[n - 1])
            y = out_y[n - 1].copy()
            continue
        break
    ts = np.concatenate(parts_t)
    ys = np.concatenate(parts_y)
    if math.isinf(min_h):
        min_h = 0.0
    return ts, ys, status, (min_h, max_h, max_dev)
