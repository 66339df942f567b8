"""Positivity-preserving path integration.

The state is advanced as ``xi = ln x``.  Between jump events one
Euler-Maruyama step is taken on the event-based log drift; at each event the
exact multiplicative jump ``x -> x (1 + amplitude)`` becomes the additive
update ``xi -> xi + ln(1 + amplitude)``.  The time grid is the uniform
``dt_max`` grid refined by every event time.  Since ``x = exp(xi)``,
recorded densities are positive by construction.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import KernelDomainError, ValidationError
from .jumps import JumpEvent, JumpSchedule, RngSpec, build_schedule
from .model import ModelSpec, event_drift, validate_assumption1

__all__ = [
    "SolverConfig",
    "Trajectory",
    "ConvergenceReport",
    "build_grid",
    "step_continuous",
    "apply_jump",
    "integrate_path",
    "integrate_deterministic",
    "convergence_study",
    "write_trajectory_csv",
]

MAX_RECORDED = 100_000


@dataclass(frozen=True)
class SolverConfig:
    """``dt_max`` is the grid step between jumps; ``record_stride`` keeps
    every k-th uniform grid point (``None`` picks the smallest stride keeping
    at most 10^5 points)."""

    horizon: float
    dt_max: float = 1e-3
    record_stride: int | None = None
    rng: RngSpec = field(default_factory=RngSpec)

    def __post_init__(self):
        if not self.dt_max > 0:
            raise ValueError("dt_max must be > 0")
        if not self.horizon >= 0:
            raise ValueError("horizon must be >= 0")
        if self.horizon > 0 and self.dt_max > self.horizon:
            raise ValueError("dt_max must not exceed the horizon")
        if self.record_stride is not None and self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @property
    def n_base(self) -> int:
        if self.horizon == 0:
            return 0
        return max(1, int(math.ceil(self.horizon / self.dt_max - 1e-9)))

    @property
    def stride(self) -> int:
        if self.record_stride is not None:
            return self.record_stride
        return max(1, math.ceil(self.n_base / MAX_RECORDED))


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray          # (n, 2), x > 0
    log_states: np.ndarray      # (n, 2)
    integrals: np.ndarray       # (n, 2), running int_0^t x ds
    events: JumpSchedule
    meta: dict
    diverged: bool = False

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def time_average(self) -> np.ndarray:
        """Per-species ``(1/T) int_0^T x ds`` on the integration grid."""
        T = self.times[-1]
        if T == 0:
            return self.states[0].copy()
        return self.integrals[-1] / T


@dataclass
class ConvergenceReport:
    dts: list[float]
    strong_errors: list[float]
    weak_errors: list[float]
    strong_order: float
    weak_order: float
    reference_dt: float
    n_paths: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def build_grid(horizon: float, dt: float, event_times) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform grid ``k dt`` (closed at ``horizon``) merged with event times.

    Returns the grid and the node indices of the uniform points and of the
    events.
    """
    n = max(1, int(math.ceil(horizon / dt - 1e-9)))
    base = np.arange(n + 1) * dt
    base[-1] = horizon
    event_times = np.asarray(event_times, dtype=float)
    if len(event_times) == 0:
        return base, np.arange(n + 1, dtype=np.int64), np.empty(0, dtype=np.int64)
    grid = np.concatenate([base, event_times])
    grid.sort(kind="stable")
    grid = grid[np.concatenate([[True], grid[1:] != grid[:-1]])]
    return (grid, np.searchsorted(grid, base).astype(np.int64),
            np.searchsorted(grid, event_times).astype(np.int64))


def _record_nodes(base_nodes: np.ndarray, stride: int) -> np.ndarray:
    """Every ``stride``-th uniform node plus the final one."""
    rec = base_nodes[::stride]
    if rec[-1] != base_nodes[-1]:
        rec = np.append(rec, base_nodes[-1])
    return rec


def step_continuous(spec: ModelSpec, t: float, xi, dt: float, dW) -> tuple[float, float]:
    """One Euler-Maruyama step of ``ln x`` between events.

    ``xi_i' = xi_i + g_i(t, xi) dt + sigma_i(t) dW_i`` with ``g`` the
    event-based drift (see :func:`hollingjump.model.event_drift`).  Overflow
    yields NaN, which the path integrator reports as divergence.
    """
    try:
        g1, g2 = event_drift(spec, t, xi)
    except OverflowError:
        return math.nan, math.nan
    s1, s2 = spec.prey.sigma(t), spec.predator.sigma(t)
    return xi[0] + g1 * dt + s1 * dW[0], xi[1] + g2 * dt + s2 * dW[1]


def apply_jump(spec: ModelSpec, t: float, xi, event: JumpEvent) -> tuple[float, float]:
    """Multiply each density by ``1 + amplitude`` at a jump event.

    Measure 1 uses the ``gamma`` kernels, measure 2 the ``delta`` kernels;
    both species see the same mark.
    """
    if event.measure_id == 1:
        k1, k2 = spec.prey.gamma, spec.predator.gamma
    else:
        k1, k2 = spec.prey.delta, spec.predator.delta
    a1, a2 = k1.amplitude(t, event.mark), k2.amplitude(t, event.mark)
    if not (a1 > -1.0 and a2 > -1.0):
        raise KernelDomainError(f"jump amplitude <= -1 at t={t}: {(a1, a2)}")
    return xi[0] + math.log1p(a1), xi[1] + math.log1p(a2)


def _check(spec, validate, allow_degenerate):
    if validate:
        report = validate_assumption1(spec, allow_degenerate=allow_degenerate)
        if not report.passed:
            raise ValidationError(report)


def _meta(spec, config, **extra) -> dict:
    from .config import spec_digest

    meta = {
        "spec_sha256": spec_digest(spec),
        "seed": config.rng.seed,
        "stream_id": config.rng.stream_id,
        "dt_max": config.dt_max,
        "horizon": config.horizon,
        "record_stride": config.stride,
        "backend": _backend.BACKEND,
    }
    meta.update(extra)
    return meta


def _brownian(spec: ModelSpec, rng: RngSpec, grid: np.ndarray) -> np.ndarray:
    if not spec.has_noise:
        return np.empty((0, 2))
    h = np.diff(grid)
    z = rng.generator("brownian").standard_normal((len(h), 2))
    return z * np.sqrt(h)[:, None]


def run_log_kernel(kp, spec: ModelSpec, grid, dW, ev_nodes, schedule: JumpSchedule,
                   rec_nodes, backend: str | None = None):
    """Invoke the log-space kernel; returns ``(log_states, integrals, status, node)``
    with NaN rows past a divergence."""
    impl = _backend.implementation(backend)
    rec_nodes = np.ascontiguousarray(rec_nodes, dtype=np.int64)
    out_xi = np.full((len(rec_nodes), 2), np.nan)
    out_int = np.full((len(rec_nodes), 2), np.nan)
    status, node = impl.integrate_log(
        *kp.coef_args(), kp.shape, kp.comp,
        np.ascontiguousarray(grid, dtype=float), np.ascontiguousarray(dW, dtype=float),
        np.ascontiguousarray(ev_nodes, dtype=np.int64),
        np.ascontiguousarray(schedule.measure_ids, dtype=np.int64),
        np.ascontiguousarray(schedule.marks, dtype=float),
        math.log(spec.x0[0]), math.log(spec.x0[1]), rec_nodes, out_xi, out_int)
    if status == 2:
        raise KernelDomainError(f"jump amplitude <= -1 at t={grid[node]}")
    return out_xi, out_int, status, node


def integrate_path(spec: ModelSpec, config: SolverConfig, *, validate: bool = True,
                   allow_degenerate: bool = False, record_events: bool = True,
                   schedule: JumpSchedule | None = None,
                   backend: str | None = None) -> Trajectory:
    """Simulate one trajectory with the jump-adapted log-space scheme.

    Records every ``stride``-th uniform grid point, the horizon and (with
    ``record_events``) the post-jump state at every event time.  Overflow
    (``ln x > 700``) marks the trajectory ``diverged`` instead of raising.
    """
    _check(spec, validate, allow_degenerate)
    if config.horizon == 0:
        x0 = np.array([spec.x0])
        return Trajectory(np.array([0.0]), x0, np.log(x0), np.zeros((1, 2)),
                          JumpSchedule.empty(0.0), _meta(spec, config))
    if schedule is None:
        schedule = build_schedule(spec, config.horizon, config.rng)
    grid, base_nodes, ev_nodes = build_grid(config.horizon, config.dt_max, schedule.times)
    rec = _record_nodes(base_nodes, config.stride)
    if record_events:
        rec = np.union1d(rec, ev_nodes)
    dW = _brownian(spec, config.rng, grid)
    log_states, integrals, status, node = run_log_kernel(
        _backend.pack(spec), spec, grid, dW, ev_nodes, schedule, rec, backend)
    diverged = status == 1
    meta = _meta(spec, config, diverged=diverged, n_events=len(schedule))
    if diverged:
        meta["diverged_at"] = float(grid[node])
    return Trajectory(grid[rec], np.exp(log_states), log_states, integrals,
                      schedule, meta, diverged)


def integrate_deterministic(spec: ModelSpec, config: SolverConfig, *, validate: bool = True,
                            allow_degenerate: bool = False,
                            backend: str | None = None) -> Trajectory:
    """Classical RK4 on the noise-free, jump-free state equation.

    Reference oracle for the zero-noise limit of :func:`integrate_path`.
    """
    if spec.has_noise or spec.has_jumps:
        raise ValueError("deterministic integration needs sigma = 0 and no jumps")
    _check(spec, validate, allow_degenerate)
    if config.horizon == 0:
        x0 = np.array([spec.x0])
        return Trajectory(np.array([0.0]), x0, np.log(x0), np.zeros((1, 2)),
                          JumpSchedule.empty(0.0), _meta(spec, config, method="rk4"))
    grid, base_nodes, _ = build_grid(config.horizon, config.dt_max, ())
    rec = np.union1d(base_nodes[::config.stride], base_nodes[-1:]).astype(np.int64)
    out_x = np.full((len(rec), 2), np.nan)
    out_int = np.full((len(rec), 2), np.nan)
    kp = _backend.pack(spec)
    status, node = _backend.implementation(backend).integrate_rk4(
        *kp.coef_args(), grid, spec.x0[0], spec.x0[1], rec, out_x, out_int)
    with np.errstate(invalid="ignore", divide="ignore"):
        logs = np.log(out_x)
    diverged = status == 1 or bool(np.any(out_x[~np.isnan(out_x)] <= 0))
    return Trajectory(grid[rec], out_x, logs, out_int, JumpSchedule.empty(config.horizon),
                      _meta(spec, config, method="rk4", diverged=diverged), diverged)


def _fit_order(dts, errors) -> float:
    e = np.asarray(errors)
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        return math.nan
    return float(np.polyfit(np.log(dts), np.log(e), 1)[0])


def convergence_study(spec: ModelSpec, dts, n_paths: int, T: float, seed: int = 0,
                      ref_factor: int = 8, backend: str | None = None) -> ConvergenceReport:
    """Strong and weak errors at ``x(T)`` against a fine reference solution.

    All levels share one Brownian path per sample (coarse increments are sums
    of reference increments) and one jump schedule, so every level grid is a
    subset of the reference grid.  The reference step is
    ``min(dts) / ref_factor``; each ``dt`` must be an integer multiple of it.
    Errors sum over both species; orders are least-squares log-log slopes.
    """
    dts = [float(d) for d in dts]
    if len(dts) < 3:
        raise ValueError("need at least 3 step sizes")
    dt_ref = min(dts) / ref_factor
    ratios = []
    for d in dts:
        r = d / dt_ref
        if abs(r - round(r)) > 1e-6 * r:
            raise ValueError(f"dt={d} is not an integer multiple of the reference step {dt_ref}")
        ratios.append(int(round(r)))
    kp = _backend.pack(spec)
    finals = np.empty((len(dts) + 1, n_paths, 2))
    for i in range(n_paths):
        rng = RngSpec(seed, i)
        schedule = build_schedule(spec, T, rng)
        grid, base_nodes, ev_nodes = build_grid(T, dt_ref, schedule.times)
        if spec.has_noise:
            W = np.concatenate([[[0.0, 0.0]], np.cumsum(_brownian(spec, rng, grid), axis=0)])
        for lvl, r in enumerate(ratios + [1]):
            nodes = np.union1d(np.union1d(base_nodes[::r], base_nodes[-1:]), ev_nodes)
            dW = np.diff(W[nodes], axis=0) if spec.has_noise else np.empty((0, 2))
            lvl_ev = np.searchsorted(nodes, ev_nodes)
            xi, _, status, _ = run_log_kernel(kp, spec, grid[nodes], dW, lvl_ev, schedule,
                                              np.array([len(nodes) - 1]), backend)
            finals[lvl, i] = np.exp(xi[0]) if status == 0 else np.nan
    ref = finals[-1]
    strong, weak = [], []
    for lvl in range(len(dts)):
        diff = np.abs(finals[lvl] - ref)
        strong.append(float(np.nanmean(diff.sum(axis=1))))
        weak.append(float(np.sum(np.abs(np.nanmean(finals[lvl], axis=0)
                                        - np.nanmean(ref, axis=0)))))
    return ConvergenceReport(dts, strong, weak, _fit_order(dts, strong), _fit_order(dts, weak),
                             dt_ref, n_paths)


def write_trajectory_csv(traj: Trajectory, path, provenance: str | None = None) -> None:
    """``t,x1,x2`` rows with round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x1", "x2"])
        for t, (x1, x2) in zip(traj.times, traj.states):
            w.writerow([repr(float(t)), repr(float(x1)), repr(float(x2))])


def write_metadata_json(meta: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
