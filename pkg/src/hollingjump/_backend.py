"""Kernel backend selection and parameter packing.

The compiled extension ``hollingjump._kernel`` is used when importable;
otherwise the pure-Python mirror in ``_kernel_py``.  Set
``HOLLINGJUMP_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _kernel_py

if os.environ.get("HOLLINGJUMP_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernel as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"

COEFFICIENTS = ("a1", "a2", "b1", "b2", "c1", "c2", "m", "sigma1", "sigma2",
                "gamma1", "gamma2", "delta1", "delta2")
_KIND_CODE = {"constant": 0, "sinusoidal": 1, "piecewise": 2}


def implementation(name: str | None = None):
    """Kernel module by name (``"cython"`` / ``"python"``), default active."""
    name = name or BACKEND
    if name == "python":
        return _kernel_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernel not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


@dataclass(frozen=True, eq=False)
class KernelParams:
    """A model flattened into the arrays the kernels consume."""

    kind: np.ndarray      # int32 (13,)
    par: np.ndarray       # float64 (13, 4): offset, amplitude, omega, phase
    pw_off: np.ndarray    # int64 (14,)
    pw_t: np.ndarray
    pw_v: np.ndarray
    shape: np.ndarray     # (c, d) of gamma1, gamma2, delta1, delta2
    comp: np.ndarray      # compensator factor per species: lam1 * E[c + d z]

    def coef_args(self):
        return self.kind, self.par, self.pw_off, self.pw_t, self.pw_v


def pack(spec) -> KernelParams:
    p, q = spec.prey, spec.predator
    tfs = (p.a, q.a, p.b, q.b, p.c, q.c, spec.m, p.sigma, q.sigma,
           p.gamma.scale, q.gamma.scale, p.delta.scale, q.delta.scale)
    kind = np.empty(len(tfs), dtype=np.int32)
    par = np.zeros((len(tfs), 4))
    off = [0]
    pw_t: list[float] = []
    pw_v: list[float] = []
    for k, tf in enumerate(tfs):
        kind[k] = _KIND_CODE[tf.kind]
        par[k] = (tf.offset, tf.amplitude, tf.omega, tf.phase)
        for b, v in tf.pieces:
            pw_t.append(b)
            pw_v.append(v)
        off.append(len(pw_t))
    shape = np.array([p.gamma.c, p.gamma.d, q.gamma.c, q.gamma.d,
                      p.delta.c, p.delta.d, q.delta.c, q.delta.d], dtype=float)
    lam1, zbar1 = spec.pi1.intensity, spec.pi1.marks.mean
    comp = np.array([lam1 * (p.gamma.c + p.gamma.d * zbar1),
                     lam1 * (q.gamma.c + q.gamma.d * zbar1)])
    return KernelParams(kind, par, np.array(off, dtype=np.int64),
                        np.array(pw_t, dtype=float), np.array(pw_v, dtype=float),
                        shape, comp)
