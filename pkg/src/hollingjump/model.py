"""Model parameters, derived rate functions and the assumption validator.

The model is the two-species system

    dx_i = x_i [ (-1)^(i-1) (a_i - c_i x_{3-i} / (1 + m x_1)) - b_i x_i ] dt
           + sigma_i x_i dw_i
           + int gamma_i(t, z) x_i(t-) (nu_1 - Pi_1 dt)(dt, dz)
           + int delta_i(t, z) x_i(t-) nu_2(dt, dz)

with species 1 the prey and species 2 the predator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .coefficients import (
    JumpKernel,
    LevyMeasureSpec,
    TimeFunction,
    integrate_at_scale,
    jump_integral,
)
from .errors import DomainError

__all__ = [
    "SpeciesParams",
    "ModelSpec",
    "RateKind",
    "Extremes",
    "Clause",
    "ValidationReport",
    "derived_rate",
    "rate_series",
    "time_average",
    "extremes",
    "validate_assumption1",
    "drift_state",
    "drift_log",
    "event_drift",
]


def _tf(v) -> TimeFunction:
    return v if isinstance(v, TimeFunction) else TimeFunction.constant(v)


def _kernel(v) -> JumpKernel:
    return v if isinstance(v, JumpKernel) else JumpKernel.constant(v)


@dataclass(frozen=True)
class SpeciesParams:
    """Coefficients of one species.  Plain numbers are promoted to constant
    time functions / mark-independent kernels."""

    a: TimeFunction
    b: TimeFunction
    c: TimeFunction | None = None
    sigma: TimeFunction = field(default_factory=lambda: TimeFunction.constant(0.0))
    gamma: JumpKernel = field(default_factory=JumpKernel.zero)
    delta: JumpKernel = field(default_factory=JumpKernel.zero)

    def __post_init__(self):
        for name in ("a", "b", "sigma"):
            object.__setattr__(self, name, _tf(getattr(self, name)))
        if self.c is not None:
            object.__setattr__(self, "c", _tf(self.c))
        object.__setattr__(self, "gamma", _kernel(self.gamma))
        object.__setattr__(self, "delta", _kernel(self.delta))


@dataclass(frozen=True)
class ModelSpec:
    """Complete parameter set plus initial state.

    When ``kappa`` is given and ``predator.c`` is omitted, the predator's
    conversion coefficient is set to ``kappa * prey.c``.
    """

    prey: SpeciesParams
    predator: SpeciesParams
    m: TimeFunction
    pi1: LevyMeasureSpec = field(default_factory=LevyMeasureSpec)
    pi2: LevyMeasureSpec = field(default_factory=LevyMeasureSpec)
    x0: tuple[float, float] = (1.0, 1.0)
    kappa: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "m", _tf(self.m))
        object.__setattr__(self, "x0", (float(self.x0[0]), float(self.x0[1])))
        if self.prey.c is None:
            raise ValueError("prey ingestion coefficient c is required")
        if self.predator.c is None:
            if self.kappa is None:
                raise ValueError("give predator c or declare kappa")
            object.__setattr__(self, "predator",
                               replace(self.predator, c=self.prey.c.scaled(self.kappa)))

    def species(self, i: int) -> SpeciesParams:
        if i == 1:
            return self.prey
        if i == 2:
            return self.predator
        raise ValueError(f"species index must be 1 or 2, got {i}")

    def time_functions(self) -> list[TimeFunction]:
        out = [self.m]
        for sp in (self.prey, self.predator):
            out += [sp.a, sp.b, sp.c, sp.sigma, sp.gamma.scale, sp.delta.scale]
        return out

    @property
    def is_autonomous(self) -> bool:
        return all(f.is_constant for f in self.time_functions())

    @property
    def has_noise(self) -> bool:
        return not (self.prey.sigma.is_zero() and self.predator.sigma.is_zero())

    @property
    def has_jumps(self) -> bool:
        return self.pi1.intensity > 0 or self.pi2.intensity > 0


@dataclass(frozen=True)
class RateKind:
    """One of the derived rates ``alpha``, ``beta``, ``p`` or ``q`` for a
    species index 1 (prey) or 2 (predator)."""

    name: str
    species: int

    def __post_init__(self):
        if self.name not in ("alpha", "beta", "p", "q"):
            raise ValueError(f"unknown rate {self.name!r}")
        if self.species not in (1, 2):
            raise ValueError("species index must be 1 or 2")

    @classmethod
    def parse(cls, text: str) -> "RateKind":
        return cls(text[:-1], int(text[-1]))

    def __str__(self):
        return f"{self.name}{self.species}"


def _as_rate(kind) -> RateKind:
    return RateKind.parse(kind) if isinstance(kind, str) else kind


# A rate is a signed sum of terms, each depending on at most two time
# functions.  Evaluation and range bounds share this decomposition.
class _Term(NamedTuple):
    op: str            # "lin" | "sq" | "jump" | "ratio"
    coef: float
    tfs: tuple
    kernel: JumpKernel | None = None
    measure: LevyMeasureSpec | None = None
    transform: str | None = None


def _terms(spec: ModelSpec, kind: RateKind) -> list[_Term]:
    i = kind.species
    sp = spec.species(i)
    if kind.name == "alpha":
        return [_Term("lin", 1.0, (sp.a,)),
                _Term("jump", 1.0, (sp.delta.scale,), sp.delta, spec.pi2, "identity")]
    beta = [_Term("sq", 0.5, (sp.sigma,)),
            _Term("jump", 1.0, (sp.gamma.scale,), sp.gamma, spec.pi1, "x_minus_log1p"),
            _Term("jump", -1.0, (sp.delta.scale,), sp.delta, spec.pi2, "log1p")]
    if kind.name == "beta":
        return beta
    neg_beta = [t._replace(coef=-t.coef) for t in beta]
    sign = 1.0 if i == 1 else -1.0
    terms = [_Term("lin", sign, (sp.a,))]
    if kind.name == "q" and i == 2:
        terms.append(_Term("ratio", 1.0, (sp.c, spec.m)))
    return terms + neg_beta


def _term_value(term: _Term, t: float) -> float:
    if term.op == "lin":
        return term.coef * term.tfs[0](t)
    if term.op == "sq":
        s = term.tfs[0](t)
        return term.coef * s * s
    if term.op == "ratio":
        return term.coef * term.tfs[0](t) / term.tfs[1](t)
    return term.coef * jump_integral(term.kernel, term.measure, t, term.transform)


def derived_rate(spec: ModelSpec, kind: RateKind | str, t: float) -> float:
    """Evaluate ``alpha_i``, ``beta_i``, ``p_i`` or ``q_i`` at time ``t``.

    ``alpha_i = a_i + int delta_i dPi_2``;
    ``beta_i = sigma_i^2/2 + int [gamma_i - ln(1+gamma_i)] dPi_1 - int ln(1+delta_i) dPi_2``;
    ``p_1 = q_1 = a_1 - beta_1``; ``p_2 = -a_2 - beta_2``;
    ``q_2 = -a_2 + c_2/m - beta_2``.
    """
    if t < 0:
        raise DomainError(f"time must be >= 0, got {t}")
    kind = _as_rate(kind)
    return math.fsum(_term_value(term, t) for term in _terms(spec, kind))


def _term_series(term: _Term, ts: np.ndarray) -> np.ndarray:
    if term.op == "lin":
        return term.coef * term.tfs[0].evaluate(ts)
    if term.op == "sq":
        s = term.tfs[0].evaluate(ts)
        return term.coef * s * s
    if term.op == "ratio":
        return term.coef * term.tfs[0].evaluate(ts) / term.tfs[1].evaluate(ts)
    scale = term.tfs[0]
    if scale.is_constant:
        v = integrate_at_scale(term.kernel, term.measure, scale(0.0), term.transform)
        return np.full(ts.shape, term.coef * v)
    s = scale.evaluate(ts)
    uniq, inv = np.unique(s, return_inverse=True)
    vals = np.array([integrate_at_scale(term.kernel, term.measure, u, term.transform)
                     for u in uniq])
    return term.coef * vals[inv]


def rate_series(spec: ModelSpec, kind: RateKind | str, ts) -> np.ndarray:
    """Vectorised :func:`derived_rate` on an array of times."""
    ts = np.asarray(ts, dtype=float)
    kind = _as_rate(kind)
    return sum(_term_series(term, ts) for term in _terms(spec, kind))


def _is_constant_rate(terms: list[_Term]) -> bool:
    return all(tf.is_constant for term in terms for tf in term.tfs)


def time_average(spec: ModelSpec, kind: RateKind | str, T: float, n: int = 2000) -> float:
    """Finite-horizon average ``(1/T) int_0^T rate(s) ds``.

    Composite Simpson on ``n`` uniform panels (rounded up to even, at least
    16).  Constant rates are returned exactly.  This is the proxy used for the
    limsup averages of the rates.
    """
    if not T > 0:
        raise DomainError("horizon must be > 0")
    kind = _as_rate(kind)
    if _is_constant_rate(_terms(spec, kind)):
        return derived_rate(spec, kind, 0.0)
    n = max(16, int(n))
    n += n % 2
    ts = np.linspace(0.0, T, n + 1)
    f = rate_series(spec, kind, ts)
    h = T / n
    integral = h / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-1:2].sum())
    return float(integral / T)


class Extremes(NamedTuple):
    inf: float
    sup: float
    exact: bool


def _range_of_term(term: _Term) -> tuple[float, float]:
    if term.op == "lin":
        lo, hi = term.tfs[0].extremes()
        vals = (term.coef * lo, term.coef * hi)
    elif term.op == "sq":
        lo, hi = term.tfs[0].extremes()
        sq_hi = max(lo * lo, hi * hi)
        sq_lo = 0.0 if lo <= 0.0 <= hi else min(lo * lo, hi * hi)
        vals = (term.coef * sq_lo, term.coef * sq_hi)
    elif term.op == "ratio":
        c_lo, c_hi = term.tfs[0].extremes()
        m_lo, m_hi = term.tfs[1].extremes()
        if m_lo <= 0.0 <= m_hi:
            return -math.inf, math.inf
        q = (c_lo / m_lo, c_lo / m_hi, c_hi / m_lo, c_hi / m_hi)
        vals = (term.coef * min(q), term.coef * max(q))
    else:
        s_lo, s_hi = term.tfs[0].extremes()

        def f(s):
            return integrate_at_scale(term.kernel, term.measure, s, term.transform)

        cand = [f(s_lo), f(s_hi)]
        if s_hi > s_lo:
            # jump integrals are convex or concave in the scale, so one extreme
            # sits at an endpoint and the other may be interior
            for sgn in (1.0, -1.0):
                res = minimize_scalar(lambda s: sgn * f(s), bounds=(s_lo, s_hi),
                                      method="bounded", options={"xatol": 1e-12})
                cand.append(f(float(res.x)))
        vals = (term.coef * min(cand), term.coef * max(cand))
    return min(vals), max(vals)


def extremes(spec: ModelSpec, kind: RateKind | str) -> Extremes:
    """``(inf, sup)`` of a derived rate over ``t >= 0``.

    Exact when the rate is built from constant and piecewise-constant
    coefficients, or when a single term varies in time.  Otherwise the bound is
    the sum of per-term ranges and ``exact`` is False (conservative).
    """
    kind = _as_rate(kind)
    terms = _terms(spec, kind)
    varying = [tf for term in terms for tf in term.tfs if not tf.is_constant]
    if not varying:
        v = derived_rate(spec, kind, 0.0)
        return Extremes(v, v, True)
    if all(tf.kind == "piecewise" for tf in varying):
        breaks = sorted({b for tf in varying for b in tf.breakpoints})
        vals = [derived_rate(spec, kind, b) for b in breaks]
        return Extremes(min(vals), max(vals), True)
    lo = hi = 0.0
    for term in terms:
        t_lo, t_hi = _range_of_term(term)
        lo += t_lo
        hi += t_hi
    return Extremes(lo, hi, len(varying) == 1)


@dataclass(frozen=True)
class Clause:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    clauses: tuple[Clause, ...]
    warnings: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    @property
    def failures(self) -> list[Clause]:
        return [c for c in self.clauses if not c.passed]

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "clauses": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                        for c in self.clauses],
            "warnings": list(self.warnings),
        }

    def __str__(self):
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}"
                 + (f"  ({c.detail})" if c.detail else "") for c in self.clauses]
        lines += [f"WARN  {w}" for w in self.warnings]
        return "\n".join(lines)


_KAPPA_PROBE = np.linspace(0.0, 100.0, 2001)


def _kappa_consistent(spec: ModelSpec) -> tuple[bool, str]:
    c1, c2, k = spec.prey.c, spec.predator.c, spec.kappa
    if c1.is_constant and c2.is_constant:
        err = abs(c2(0.0) - k * c1(0.0))
    else:
        probe = np.concatenate([_KAPPA_PROBE, c1.breakpoints, c2.breakpoints])
        err = float(np.max(np.abs(c2.evaluate(probe) - k * c1.evaluate(probe))))
    return err <= 1e-12, f"max |c2 - kappa*c1| = {err:.3g}"


def validate_assumption1(spec: ModelSpec, allow_degenerate: bool = False) -> ValidationReport:
    """Check every clause of the standing model assumption.

    With ``allow_degenerate`` the strict positivity clauses on ``a_i``,
    ``b_i``, ``c_i`` and ``m`` only require non-negativity (vanishing
    coefficients are reported as warnings).  This admits the deterministic
    limit without predator self-limitation and the linear test models.
    Jump-domain and finiteness clauses are never relaxed.
    """
    clauses: list[Clause] = []
    warnings: list[str] = []

    def positive(name: str, value: float):
        if value > 0:
            clauses.append(Clause(name, True, f"{value:.6g}"))
        elif allow_degenerate and value == 0:
            clauses.append(Clause(name, True, "0 (degenerate mode)"))
            warnings.append(f"{name} fails with value 0; accepted in degenerate mode")
        else:
            clauses.append(Clause(name, False, f"{value:.6g}"))

    for i, sp in ((1, spec.prey), (2, spec.predator)):
        positive(f"a{i}(t)>0", sp.a.extremes()[0])
        positive(f"b{i}_inf>0", sp.b.extremes()[0])
        positive(f"c{i}_inf>0", sp.c.extremes()[0])
    positive("m_inf>0", spec.m.extremes()[0])

    for j, pi in ((1, spec.pi1), (2, spec.pi2)):
        ok = math.isfinite(pi.intensity)
        clauses.append(Clause(f"Pi{j}(R)<inf", ok, f"{pi.intensity:.6g}"))

    for i, sp in ((1, spec.prey), (2, spec.predator)):
        for sym, kern, pi in (("gamma", sp.gamma, spec.pi1), ("delta", sp.delta, spec.pi2)):
            lo, hi = kern.amplitude_range(pi.marks)
            ok = 1.0 + lo > 0.0
            clauses.append(Clause(f"1+{sym}{i}>0", ok, f"min amplitude {lo:.6g}"))
            bounded = ok and math.isfinite(hi)
            clauses.append(Clause(f"ln(1+{sym}{i}) bounded", bounded,
                                  f"amplitude in [{lo:.6g}, {hi:.6g}]"))

    for i, x in enumerate(spec.x0, start=1):
        clauses.append(Clause(f"x{i}0>0", x > 0, f"{x:.6g}"))

    if spec.kappa is not None:
        ok, detail = _kappa_consistent(spec)
        clauses.append(Clause("c2=kappa*c1", ok, detail))

    for name, tf in _named_functions(spec):
        if tf.kind == "piecewise" and not tf.is_constant:
            warnings.append(f"{name} is piecewise-constant; continuity in t is waived")
    return ValidationReport(tuple(clauses), tuple(warnings))


def _named_functions(spec: ModelSpec):
    yield "m", spec.m
    for i, sp in ((1, spec.prey), (2, spec.predator)):
        for name in ("a", "b", "c", "sigma"):
            yield f"{name}{i}", getattr(sp, name)
        yield f"gamma{i}.scale", sp.gamma.scale
        yield f"delta{i}.scale", sp.delta.scale


def _holling(spec: ModelSpec, t: float, x1: float, x2: float) -> tuple[float, float]:
    """The bracketed per-capita interaction terms without self-limitation."""
    denom = 1.0 + spec.m(t) * x1
    h1 = spec.prey.a(t) - spec.prey.c(t) * x2 / denom
    h2 = -(spec.predator.a(t) - spec.predator.c(t) * x1 / denom)
    return h1, h2


def drift_state(spec: ModelSpec, t: float, x) -> tuple[float, float]:
    """Drift of the state equation (no diffusion, no jump terms).

    Zero densities are accepted (the axes are invariant); negative ones raise
    :class:`DomainError`.
    """
    x1, x2 = float(x[0]), float(x[1])
    if x1 < 0 or x2 < 0:
        raise DomainError(f"state must be non-negative, got {(x1, x2)}")
    h1, h2 = _holling(spec, t, x1, x2)
    return (x1 * (h1 - spec.prey.b(t) * x1),
            x2 * (h2 - spec.predator.b(t) * x2))


def drift_log(spec: ModelSpec, t: float, xi) -> tuple[float, float]:
    """Drift of ``ln x`` with the jump integrals written in compensated form:
    ``(-1)^(i-1)(a_i - c_i e^xi_{3-i}/(1 + m e^xi_1)) - b_i e^xi_i - beta_i``."""
    x1, x2 = math.exp(xi[0]), math.exp(xi[1])
    h1, h2 = _holling(spec, t, x1, x2)
    return (h1 - spec.prey.b(t) * x1 - derived_rate(spec, "beta1", t),
            h2 - spec.predator.b(t) * x2 - derived_rate(spec, "beta2", t))


def event_drift(spec: ModelSpec, t: float, xi) -> tuple[float, float]:
    """Drift of ``ln x`` between jump events.

    Jumps of both measures are then applied as raw events, so only the
    compensator of the centred measure remains:
    ``(-1)^(i-1)(...) - b_i e^xi_i - sigma_i^2/2 - int gamma_i dPi_1``.
    """
    x1, x2 = math.exp(xi[0]), math.exp(xi[1])
    h1, h2 = _holling(spec, t, x1, x2)
    out = []
    for h, x, sp in ((h1, x1, spec.prey), (h2, x2, spec.predator)):
        s = sp.sigma(t)
        comp = jump_integral(sp.gamma, spec.pi1, t, "identity")
        out.append(h - sp.b(t) * x - 0.5 * s * s - comp)
    return out[0], out[1]
