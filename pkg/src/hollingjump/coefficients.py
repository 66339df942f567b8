"""Time-dependent coefficients, jump measures and jump amplitude kernels.

Everything here is an immutable value object.  A model coefficient is a
:class:`TimeFunction`; a finite jump measure is a :class:`LevyMeasureSpec`
(total intensity times a normalised :class:`MarkDistribution`); a jump
amplitude is a :class:`JumpKernel` ``scale(t) * shape(z)``.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, KernelDomainError

__all__ = [
    "TimeFunction",
    "MarkDistribution",
    "LevyMeasureSpec",
    "JumpKernel",
    "TRANSFORMS",
    "eval_coefficient",
    "jump_integral",
    "integrate_at_scale",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)

TRANSFORMS = ("identity", "log1p", "x_minus_log1p", "power", "power_minus_one")


@dataclass(frozen=True)
class TimeFunction:
    """Bounded coefficient of time on ``[0, inf)``.

    Use the constructors :meth:`constant`, :meth:`sinusoidal` and
    :meth:`piecewise` rather than the raw fields.  Piecewise functions are
    right-continuous: at a breakpoint the new value applies.
    """

    kind: str
    offset: float = 0.0
    amplitude: float = 0.0
    omega: float = 1.0
    phase: float = 0.0
    pieces: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("constant", "sinusoidal", "piecewise"):
            raise ValueError(f"unknown TimeFunction kind {self.kind!r}")
        if self.kind == "sinusoidal" and not self.omega > 0:
            raise ValueError("sinusoidal angular frequency must be > 0")
        if self.kind == "piecewise":
            if not self.pieces:
                raise ValueError("piecewise function needs at least one piece")
            breaks = [b for b, _ in self.pieces]
            if breaks[0] != 0.0:
                raise ValueError("first breakpoint must be 0")
            if any(b1 <= b0 for b0, b1 in zip(breaks, breaks[1:])):
                raise ValueError("breakpoints must be strictly increasing")
        for v in (self.offset, self.amplitude, self.omega, self.phase):
            if not math.isfinite(v):
                raise ValueError("TimeFunction parameters must be finite")

    @classmethod
    def constant(cls, value: float) -> "TimeFunction":
        return cls("constant", offset=float(value))

    @classmethod
    def sinusoidal(cls, offset: float, amplitude: float, omega: float,
                   phase: float = 0.0) -> "TimeFunction":
        """``offset + amplitude * sin(omega * t + phase)``."""
        return cls("sinusoidal", offset=float(offset), amplitude=float(amplitude),
                   omega=float(omega), phase=float(phase))

    @classmethod
    def piecewise(cls, pieces: Sequence[tuple[float, float]]) -> "TimeFunction":
        """Step function from ``(breakpoint, value)`` pairs; the last value
        extends to infinity."""
        return cls("piecewise",
                   pieces=tuple((float(b), float(v)) for b, v in pieces))

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "sinusoidal":
            return self.amplitude == 0.0
        return len({v for _, v in self.pieces}) == 1

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(b for b, _ in self.pieces)

    def __call__(self, t: float) -> float:
        if t < 0:
            raise DomainError(f"time must be >= 0, got {t}")
        if self.kind == "constant":
            return self.offset
        if self.kind == "sinusoidal":
            return self.offset + self.amplitude * math.sin(self.omega * t + self.phase)
        i = bisect.bisect_right(self.breakpoints, t) - 1
        return self.pieces[i][1]

    def evaluate(self, t) -> np.ndarray:
        """Vectorised evaluation on an array of times."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("time must be >= 0")
        if self.kind == "constant":
            return np.full(t.shape, self.offset)
        if self.kind == "sinusoidal":
            return self.offset + self.amplitude * np.sin(self.omega * t + self.phase)
        breaks = np.array(self.breakpoints)
        values = np.array([v for _, v in self.pieces])
        return values[np.searchsorted(breaks, t, side="right") - 1]

    def extremes(self) -> tuple[float, float]:
        """Exact ``(inf, sup)`` over ``[0, inf)``."""
        if self.kind == "constant":
            return self.offset, self.offset
        if self.kind == "sinusoidal":
            a = abs(self.amplitude)
            return self.offset - a, self.offset + a
        values = [v for _, v in self.pieces]
        return min(values), max(values)

    def integral(self, t0: float, t1: float) -> float:
        """Exact integral over ``[t0, t1]``."""
        if t0 < 0 or t1 < t0:
            raise DomainError("need 0 <= t0 <= t1")
        if self.kind == "constant":
            return self.offset * (t1 - t0)
        if self.kind == "sinusoidal":
            w, p = self.omega, self.phase
            return (self.offset * (t1 - t0)
                    + self.amplitude * (math.cos(w * t0 + p) - math.cos(w * t1 + p)) / w)
        total = 0.0
        ends = list(self.breakpoints[1:]) + [math.inf]
        for (b, v), e in zip(self.pieces, ends):
            lo, hi = max(b, t0), min(e, t1)
            if hi > lo:
                total += v * (hi - lo)
        return total

    def scaled(self, k: float) -> "TimeFunction":
        if self.kind == "constant":
            return TimeFunction.constant(k * self.offset)
        if self.kind == "sinusoidal":
            return TimeFunction.sinusoidal(k * self.offset, k * self.amplitude,
                                           self.omega, self.phase)
        return TimeFunction.piecewise([(b, k * v) for b, v in self.pieces])

    def is_zero(self) -> bool:
        lo, hi = self.extremes()
        return lo == 0.0 and hi == 0.0


def eval_coefficient(f: TimeFunction, t: float) -> float:
    return f(t)


@dataclass(frozen=True)
class MarkDistribution:
    """Normalised law of the jump marks ``z``.

    ``atom`` puts all mass on ``z0``; ``discrete`` holds ``(z_k, prob_k)``
    pairs; ``uniform`` is continuous on ``[lo, hi]``.
    """

    kind: str
    z0: float = 0.0
    points: tuple[tuple[float, float], ...] = ()
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind == "atom":
            pass
        elif self.kind == "discrete":
            if not self.points:
                raise ValueError("discrete mark law needs at least one point")
            probs = [p for _, p in self.points]
            if any(p < 0 for p in probs):
                raise ValueError("probabilities must be non-negative")
            if abs(math.fsum(probs) - 1.0) > 1e-12:
                raise ValueError("probabilities must sum to 1 within 1e-12")
        elif self.kind == "uniform":
            if not self.lo < self.hi:
                raise ValueError("uniform marks need lo < hi")
        else:
            raise ValueError(f"unknown mark kind {self.kind!r}")

    @classmethod
    def atom(cls, z0: float = 1.0) -> "MarkDistribution":
        return cls("atom", z0=float(z0))

    @classmethod
    def discrete(cls, points: Sequence[tuple[float, float]]) -> "MarkDistribution":
        return cls("discrete", points=tuple((float(z), float(p)) for z, p in points))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "MarkDistribution":
        return cls("uniform", lo=float(lo), hi=float(hi))

    @property
    def support(self) -> tuple[float, float]:
        """Closed hull ``(min, max)`` of the support."""
        if self.kind == "atom":
            return self.z0, self.z0
        if self.kind == "discrete":
            zs = [z for z, p in self.points if p > 0]
            return min(zs), max(zs)
        return self.lo, self.hi

    @property
    def mean(self) -> float:
        if self.kind == "atom":
            return self.z0
        if self.kind == "discrete":
            return math.fsum(z * p for z, p in self.points)
        return 0.5 * (self.lo + self.hi)

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and probability weights: exact for atomic and discrete laws,
        64-node Gauss-Legendre for uniform."""
        if self.kind == "atom":
            return np.array([self.z0]), np.array([1.0])
        if self.kind == "discrete":
            pts = np.array(self.points)
            return pts[:, 0], pts[:, 1]
        half = 0.5 * (self.hi - self.lo)
        return half * _GL_X + 0.5 * (self.hi + self.lo), 0.5 * _GL_W


@dataclass(frozen=True)
class LevyMeasureSpec:
    """Finite jump measure ``Pi(A) = intensity * marks(A)``."""

    intensity: float = 0.0
    marks: MarkDistribution = field(default_factory=MarkDistribution.atom)

    def __post_init__(self):
        if not (math.isfinite(self.intensity) and self.intensity >= 0):
            raise ValueError("intensity must be finite and >= 0")


_SHAPES = ("identity", "constant", "affine")


@dataclass(frozen=True)
class JumpKernel:
    """Jump amplitude ``scale(t) * (c + d * z)``.

    ``shape`` names how the mark enters: ``identity`` (``z``), ``constant``
    (``c``) or ``affine`` (``c + d z``).
    """

    scale: TimeFunction = field(default_factory=lambda: TimeFunction.constant(0.0))
    shape: str = "constant"
    c: float = 1.0
    d: float = 0.0

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown kernel shape {self.shape!r}")
        if self.shape == "identity" and (self.c, self.d) != (0.0, 1.0):
            object.__setattr__(self, "c", 0.0)
            object.__setattr__(self, "d", 1.0)
        if self.shape == "constant" and self.d != 0.0:
            object.__setattr__(self, "d", 0.0)

    @classmethod
    def zero(cls) -> "JumpKernel":
        return cls()

    @classmethod
    def constant(cls, value: float) -> "JumpKernel":
        """Mark-independent amplitude ``value``."""
        return cls(TimeFunction.constant(value), "constant", 1.0, 0.0)

    @classmethod
    def identity(cls, scale: TimeFunction | float = 1.0) -> "JumpKernel":
        if not isinstance(scale, TimeFunction):
            scale = TimeFunction.constant(scale)
        return cls(scale, "identity", 0.0, 1.0)

    @classmethod
    def affine(cls, c: float, d: float,
               scale: TimeFunction | float = 1.0) -> "JumpKernel":
        if not isinstance(scale, TimeFunction):
            scale = TimeFunction.constant(scale)
        return cls(scale, "affine", float(c), float(d))

    def shape_value(self, z):
        return self.c + self.d * z

    def amplitude(self, t: float, z: float) -> float:
        return self.scale(t) * (self.c + self.d * z)

    def is_zero(self) -> bool:
        return self.scale.is_zero() or (self.c == 0.0 and self.d == 0.0)

    def shape_range(self, marks: MarkDistribution) -> tuple[float, float]:
        lo, hi = marks.support
        v0, v1 = self.shape_value(lo), self.shape_value(hi)
        return min(v0, v1), max(v0, v1)

    def amplitude_range(self, marks: MarkDistribution,
                        scale_range: tuple[float, float] | None = None) -> tuple[float, float]:
        """Exact range of the amplitude over all ``t >= 0`` (or over the given
        scale interval) and the closed mark support."""
        s_lo, s_hi = scale_range if scale_range is not None else self.scale.extremes()
        k_lo, k_hi = self.shape_range(marks)
        corners = (s_lo * k_lo, s_lo * k_hi, s_hi * k_lo, s_hi * k_hi)
        return min(corners), max(corners)


def _apply_transform(u: np.ndarray, transform: str, p: float | None) -> np.ndarray:
    if transform == "identity":
        return u
    if transform == "log1p":
        return np.log1p(u)
    if transform == "x_minus_log1p":
        return u - np.log1p(u)
    if p is None:
        raise ValueError(f"transform {transform!r} needs an exponent p")
    if transform == "power":
        return (1.0 + u) ** p - 1.0
    if transform == "power_minus_one":
        return (1.0 + u) ** p - 1.0 - p * u
    raise ValueError(f"unknown transform {transform!r}")


def integrate_at_scale(kernel: JumpKernel, measure: LevyMeasureSpec, s: float,
                       transform: str, p: float | None = None) -> float:
    """``int transform(s * shape(z)) Pi(dz)`` for a frozen scale value ``s``."""
    if measure.intensity == 0.0:
        return 0.0
    lo, _ = kernel.amplitude_range(measure.marks, (s, s))
    if not 1.0 + lo > 0.0:
        raise KernelDomainError(
            f"jump amplitude reaches {lo} <= -1 on the mark support")
    z, w = measure.marks.quadrature()
    u = s * kernel.shape_value(z)
    return float(measure.intensity * np.dot(w, _apply_transform(u, transform, p)))


def jump_integral(kernel: JumpKernel, measure: LevyMeasureSpec, t: float,
                  transform: str = "identity", p: float | None = None) -> float:
    """Integrate a transform of the jump amplitude against a jump measure.

    Parameters
    ----------
    kernel, measure
        Amplitude kernel and finite measure ``Pi``.
    t
        Time at which the kernel's scale is evaluated.
    transform
        One of ``identity`` (u), ``log1p`` (ln(1+u)), ``x_minus_log1p``
        (u - ln(1+u)), ``power`` ((1+u)^p - 1) or ``power_minus_one``
        ((1+u)^p - 1 - p u).
    p
        Exponent for the power transforms.

    Raises
    ------
    KernelDomainError
        If ``1 + amplitude <= 0`` somewhere on the closed mark support.
    """
    return integrate_at_scale(kernel, measure, kernel.scale(t), transform, p)
