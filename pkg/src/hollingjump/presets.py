"""Named model specifications used by the examples, tests and CLI."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .coefficients import JumpKernel, LevyMeasureSpec, MarkDistribution, TimeFunction
from .model import ModelSpec, SpeciesParams


def baseline(x0=(1.0, 1.0)) -> ModelSpec:
    """Noise and both jump types on both species.

    Satisfies every modelling assumption.  The predator lands in a gap of the
    sufficient conditions: q2 = 0.0193271 > 0 while p2 < 0 everywhere.
    """
    prey = SpeciesParams(a=1.0, b=0.5, c=1.0, sigma=0.2,
                         gamma=JumpKernel.constant(0.1), delta=JumpKernel.constant(-0.05))
    predator = SpeciesParams(a=0.4, b=0.1, sigma=0.2,
                             gamma=JumpKernel.constant(0.1), delta=JumpKernel.constant(-0.05))
    return ModelSpec(prey, predator, m=2.0, kappa=1.0,
                     pi1=LevyMeasureSpec(2.0, MarkDistribution.atom(1.0)),
                     pi2=LevyMeasureSpec(1.0, MarkDistribution.atom(1.0)), x0=x0)


def oracle(x0=(1.0, 1.0)) -> ModelSpec:
    """Deterministic limit without predator self-limitation (b2 = 0).

    Interior equilibrium (2/3, 8/9).  Only valid in degenerate mode.
    """
    prey = SpeciesParams(a=1.0, b=0.5, c=1.0)
    predator = SpeciesParams(a=0.5, b=0.0)
    return ModelSpec(prey, predator, m=0.5, kappa=1.0, x0=x0)


ORACLE_EQUILIBRIUM = (2.0 / 3.0, 8.0 / 9.0)


def extinction() -> ModelSpec:
    """Prey with q1 = a1 - sigma1^2/2 = 0.2 - 0.32 = -0.12 and no prey jumps."""
    base = baseline()
    prey = replace(base.prey, a=TimeFunction.constant(0.2), sigma=TimeFunction.constant(0.8),
                   gamma=JumpKernel.zero(), delta=JumpKernel.zero())
    return replace(base, prey=prey)


def permanence() -> ModelSpec:
    """Predator boosted by large positive non-centred jumps.

    delta2 = 0.5 at rate 2 gives beta2 = -2 ln 1.5 and p2 = -0.1 + 2 ln 1.5 =
    0.7109302 > 0 with sigma2 = gamma2 = 0.
    """
    base = baseline()
    prey = replace(base.prey, delta=JumpKernel.zero())
    predator = SpeciesParams(a=0.1, b=0.5, c=1.0, sigma=0.0,
                             gamma=JumpKernel.zero(), delta=JumpKernel.constant(0.5))
    return ModelSpec(prey, predator, m=2.0, kappa=1.0, pi1=base.pi1,
                     pi2=LevyMeasureSpec(2.0, MarkDistribution.atom(1.0)), x0=base.x0)


def weak_persistence() -> ModelSpec:
    """Predator with positive mean p2 but p2_inf < 0 (seasonal mortality)."""
    spec = permanence()
    predator = replace(spec.predator, a=TimeFunction.sinusoidal(0.5, 0.45, 1.0))
    return replace(spec, predator=predator)


def diffusive(sigma: float = 0.2) -> ModelSpec:
    """Baseline coefficients with Brownian noise only."""
    base = baseline()
    prey = replace(base.prey, sigma=TimeFunction.constant(sigma),
                   gamma=JumpKernel.zero(), delta=JumpKernel.zero())
    predator = replace(base.predator, sigma=TimeFunction.constant(sigma),
                       gamma=JumpKernel.zero(), delta=JumpKernel.zero())
    return replace(base, prey=prey, predator=predator, pi1=LevyMeasureSpec(),
                   pi2=LevyMeasureSpec())


def deterministic() -> ModelSpec:
    """Baseline coefficients without noise or jumps."""
    return diffusive(0.0)


def logistic_prey(sigma: float = 0.0, x0=(1.0, 1.0)) -> ModelSpec:
    """Prey logistic with a1 = 1, b1 = 0.5 (capacity 2), decoupled from a
    frozen predator (all predator rates zero).  Degenerate mode only."""
    prey = SpeciesParams(a=1.0, b=0.5, c=0.0, sigma=sigma)
    predator = SpeciesParams(a=0.0, b=0.0, c=0.0)
    return ModelSpec(prey, predator, m=1.0, x0=x0)


def pure_jump_prey(x0=(1.0, 1.0)) -> ModelSpec:
    """Linear pure-jump prey: dx = 0.1 x (nu_1 - 2 dt).  Closed form
    x(t) = x0 1.1^N(t) exp(-0.2 t).  Degenerate mode only."""
    prey = SpeciesParams(a=0.0, b=0.0, c=0.0, gamma=JumpKernel.constant(0.1))
    predator = SpeciesParams(a=0.0, b=0.0, c=0.0)
    return ModelSpec(prey, predator, m=1.0,
                     pi1=LevyMeasureSpec(2.0, MarkDistribution.atom(1.0)), x0=x0)


def random_spec(rng: np.random.Generator, constant: bool = False) -> ModelSpec:
    """A random model satisfying every modelling assumption.

    Jump amplitudes stay in [-0.5, 0.5].  Unless ``constant``, some
    coefficients are sinusoidal or piecewise.
    """
    u = rng.uniform

    def coef(lo, hi):
        v = u(lo, hi)
        if constant or rng.random() < 0.6:
            return TimeFunction.constant(v)
        if rng.random() < 0.5:
            return TimeFunction.sinusoidal(v, u(0.0, 0.9) * v, u(0.1, 3.0), u(0.0, 6.3))
        return TimeFunction.piecewise([(0.0, v), (u(1.0, 10.0), u(lo, hi))])

    def kernel():
        r = rng.random()
        if r < 0.25:
            return JumpKernel.zero()
        if r < 0.75 or constant:
            return JumpKernel.constant(u(-0.5, 0.5))
        return JumpKernel.identity(u(-0.5, 0.5))

    def measure():
        lam = 0.0 if rng.random() < 0.2 else u(0.1, 3.0)
        marks = MarkDistribution.uniform(0.0, 1.0) if rng.random() < 0.3 \
            else MarkDistribution.atom(1.0)
        return LevyMeasureSpec(lam, marks)

    def species(c):
        return SpeciesParams(a=coef(0.05, 2.0), b=coef(0.05, 1.0), c=c,
                             sigma=TimeFunction.constant(u(0.0, 1.0)),
                             gamma=kernel(), delta=kernel())

    return ModelSpec(species(coef(0.1, 2.0)), species(None), m=coef(0.1, 3.0),
                     pi1=measure(), pi2=measure(), kappa=float(u(0.2, 2.0)),
                     x0=(float(u(0.1, 5.0)), float(u(0.1, 5.0))))


PRESETS = {
    "baseline": baseline,
    "oracle": oracle,
    "extinction": extinction,
    "permanence": permanence,
    "weak_persistence": weak_persistence,
    "diffusive": diffusive,
    "deterministic": deterministic,
    "logistic_prey": logistic_prey,
    "pure_jump_prey": pure_jump_prey,
}
