"""JSON experiment configuration: parsing, canonical echo and hashing.

Numbers may stand in for constant time functions and for mark-independent
jump kernels.  The echoed form spells every field and default out, and
parsing it back yields an identical :class:`ModelSpec`.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

from .coefficients import JumpKernel, LevyMeasureSpec, MarkDistribution, TimeFunction
from .jumps import RngSpec
from .integrator import SolverConfig
from .model import ModelSpec, SpeciesParams

__all__ = [
    "ConfigError",
    "AnalysisConfig",
    "ExperimentConfig",
    "spec_to_dict",
    "spec_from_dict",
    "spec_digest",
    "load_config",
]


class ConfigError(ValueError):
    """Malformed configuration file."""


def tf_to_dict(tf: TimeFunction) -> dict:
    if tf.kind == "constant":
        return {"kind": "constant", "value": tf.offset}
    if tf.kind == "sinusoidal":
        return {"kind": "sinusoidal", "offset": tf.offset, "amplitude": tf.amplitude,
                "omega": tf.omega, "phase": tf.phase}
    return {"kind": "piecewise", "pieces": [[b, v] for b, v in tf.pieces]}


def tf_from(obj) -> TimeFunction:
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return TimeFunction.constant(obj)
    if not isinstance(obj, dict):
        raise ConfigError(f"cannot read a time function from {obj!r}")
    kind = obj.get("kind", "constant")
    if kind == "constant":
        return TimeFunction.constant(obj["value"])
    if kind == "sinusoidal":
        return TimeFunction.sinusoidal(obj["offset"], obj["amplitude"], obj["omega"],
                                       obj.get("phase", 0.0))
    if kind == "piecewise":
        return TimeFunction.piecewise([tuple(p) for p in obj["pieces"]])
    raise ConfigError(f"unknown time function kind {kind!r}")


def kernel_to_dict(k: JumpKernel) -> dict:
    return {"scale": tf_to_dict(k.scale), "shape": k.shape, "c": k.c, "d": k.d}


def kernel_from(obj) -> JumpKernel:
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return JumpKernel.constant(obj)
    if not isinstance(obj, dict):
        raise ConfigError(f"cannot read a jump kernel from {obj!r}")
    shape = obj.get("shape", "constant")
    defaults = {"identity": (0.0, 1.0), "constant": (1.0, 0.0), "affine": (0.0, 0.0)}
    if shape not in defaults:
        raise ConfigError(f"unknown kernel shape {shape!r}")
    c0, d0 = defaults[shape]
    return JumpKernel(tf_from(obj.get("scale", 1.0)), shape,
                      float(obj.get("c", c0)), float(obj.get("d", d0)))


def marks_to_dict(m: MarkDistribution) -> dict:
    if m.kind == "atom":
        return {"kind": "atom", "z0": m.z0}
    if m.kind == "discrete":
        return {"kind": "discrete", "points": [[z, p] for z, p in m.points]}
    return {"kind": "uniform", "lo": m.lo, "hi": m.hi}


def marks_from(obj) -> MarkDistribution:
    kind = obj.get("kind", "atom")
    if kind == "atom":
        return MarkDistribution.atom(obj.get("z0", 1.0))
    if kind == "discrete":
        return MarkDistribution.discrete([tuple(p) for p in obj["points"]])
    if kind == "uniform":
        return MarkDistribution.uniform(obj["lo"], obj["hi"])
    raise ConfigError(f"unknown mark kind {kind!r}")


def _species_to_dict(sp: SpeciesParams) -> dict:
    return {"a": tf_to_dict(sp.a), "b": tf_to_dict(sp.b), "c": tf_to_dict(sp.c),
            "sigma": tf_to_dict(sp.sigma), "gamma": kernel_to_dict(sp.gamma),
            "delta": kernel_to_dict(sp.delta)}


def _species_from(obj: dict, need_c: bool) -> SpeciesParams:
    if "c" not in obj and need_c:
        raise ConfigError("prey needs an ingestion coefficient 'c'")
    return SpeciesParams(
        a=tf_from(obj["a"]), b=tf_from(obj["b"]),
        c=tf_from(obj["c"]) if "c" in obj else None,
        sigma=tf_from(obj.get("sigma", 0.0)),
        gamma=kernel_from(obj.get("gamma", 0.0)),
        delta=kernel_from(obj.get("delta", 0.0)),
    )


def spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "prey": _species_to_dict(spec.prey),
        "predator": _species_to_dict(spec.predator),
        "m": tf_to_dict(spec.m),
        "kappa": spec.kappa,
        "pi1": {"intensity": spec.pi1.intensity, "marks": marks_to_dict(spec.pi1.marks)},
        "pi2": {"intensity": spec.pi2.intensity, "marks": marks_to_dict(spec.pi2.marks)},
        "x0": list(spec.x0),
    }


def _measure_from(obj) -> LevyMeasureSpec:
    if obj is None:
        return LevyMeasureSpec()
    return LevyMeasureSpec(float(obj.get("intensity", 0.0)),
                           marks_from(obj.get("marks", {})))


def spec_from_dict(obj: dict) -> ModelSpec:
    try:
        return ModelSpec(
            prey=_species_from(obj["prey"], need_c=True),
            predator=_species_from(obj["predator"], need_c=False),
            m=tf_from(obj["m"]),
            pi1=_measure_from(obj.get("pi1")),
            pi2=_measure_from(obj.get("pi2")),
            x0=tuple(obj.get("x0", (1.0, 1.0))),
            kappa=obj.get("kappa"),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model section: {exc!r}") from exc


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def spec_digest(spec: ModelSpec) -> str:
    return hashlib.sha256(canonical_json(spec_to_dict(spec)).encode()).hexdigest()


@dataclass
class AnalysisConfig:
    """Estimator settings for ensembles, classification and verdicts."""

    moments: list[float] = field(default_factory=lambda: [1.0, 2.0])
    theta: float = 0.5
    chi: float = 10.0
    extinction_threshold: float = 1e-3
    extinction_min_fraction: float = 0.95
    epsilon: float = 0.05
    checkpoints: list[float] = field(default_factory=lambda: [100.0, 150.0, 200.0])
    reference_time: float = 50.0
    lemma1_margin: float = 0.05
    nonpersistence_level: float = 0.01
    persistence_level: float = 0.05
    average_horizon: float = 200.0
    classifier_tol: float = 1e-9
    predator_absent: bool = False

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if any(p <= 0 for p in self.moments):
            raise ValueError("moment orders must be > 0")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")


@dataclass
class ExperimentConfig:
    model: ModelSpec
    solver: SolverConfig
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output_dir: str = "out"
    n_paths: int = 100
    workers: int = 1
    dts: list[float] = field(default_factory=lambda: [1e-2, 5e-3, 2.5e-3, 1.25e-3])
    allow_degenerate: bool = False

    def to_dict(self, runtime: bool = True) -> dict:
        """Full echo.  ``runtime=False`` drops the worker count and output
        directory, which cannot change results, so digests and written files
        match across worker counts and destinations."""
        s = self.solver
        d = {
            "model": spec_to_dict(self.model),
            "solver": {"horizon": s.horizon, "dt_max": s.dt_max,
                       "record_stride": s.record_stride,
                       "seed": s.rng.seed, "stream_id": s.rng.stream_id},
            "analysis": asdict(self.analysis),
            "ensemble": {"n_paths": self.n_paths, "workers": self.workers},
            "convergence": {"dts": list(self.dts)},
            "output": {"dir": self.output_dir},
            "allow_degenerate": self.allow_degenerate,
        }
        if not runtime:
            del d["ensemble"]["workers"]
            del d["output"]
        return d

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict(runtime=False)).encode()).hexdigest()

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict) or "model" not in obj:
            raise ConfigError("config must be an object with a 'model' section")
        model = spec_from_dict(obj["model"])
        sv = obj.get("solver", {})
        try:
            solver = SolverConfig(
                horizon=float(sv.get("horizon", 100.0)),
                dt_max=float(sv.get("dt_max", 1e-3)),
                record_stride=sv.get("record_stride"),
                rng=RngSpec(int(sv.get("seed", 0)), int(sv.get("stream_id", 0))),
            )
            known = set(AnalysisConfig.__dataclass_fields__)
            an = obj.get("analysis", {})
            unknown = set(an) - known
            if unknown:
                raise ConfigError(f"unknown analysis keys {sorted(unknown)}")
            analysis = AnalysisConfig(**an)
            ens = obj.get("ensemble", {})
            return cls(
                model=model, solver=solver, analysis=analysis,
                output_dir=obj.get("output", {}).get("dir", "out"),
                n_paths=int(ens.get("n_paths", 100)),
                workers=int(ens.get("workers", 1)),
                dts=[float(d) for d in obj.get("convergence", {}).get(
                    "dts", [1e-2, 5e-3, 2.5e-3, 1.25e-3])],
                allow_degenerate=bool(obj.get("allow_degenerate", False)),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return ExperimentConfig.from_dict(obj)
