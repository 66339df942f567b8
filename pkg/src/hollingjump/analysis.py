"""Regime classification and Monte Carlo verification of the long-time results.

:func:`classify_regime` evaluates the sufficient conditions (signs of the
rate infima and time averages) on a model.  :func:`run_ensemble` simulates
many seeded trajectories and collects the statistics that the ``verify_*``
functions compare against each conclusion.  Every limsup/liminf in the
theory is replaced by late-time checkpoints; these are finite-horizon
proxies and the reports say which times were used.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _backend
from .config import AnalysisConfig
from .errors import DivergenceError, ValidationError
from .integrator import (SolverConfig, _brownian, _record_nodes, build_grid,
                         run_log_kernel)
from .jumps import build_schedule
from .model import ModelSpec, extremes, time_average, validate_assumption1

__all__ = [
    "RegimeReport",
    "EnsembleStats",
    "classify_regime",
    "run_ensemble",
    "verify_lemma1",
    "verify_boundedness",
    "verify_permanence",
    "verify_extinction",
    "verify_mean_persistence",
    "verify_moment_bounds",
    "theorem_verdicts",
    "write_stats_csv",
]

EXTINCT = "extinct"
NON_PERSISTENT = "non-persistent-in-mean"
WEAKLY_PERSISTENT = "weakly-persistent-in-mean"
PERMANENT = "stochastically-permanent"
INDETERMINATE = "indeterminate"

SPECIES = ("prey", "predator")


@dataclass
class RegimeReport:
    p1_inf: float
    p2_inf: float
    pbar_star: tuple[float, float]
    qbar_star: tuple[float, float]
    labels: dict[str, str]
    fired_rules: list[tuple[str, str, float]]
    ultimately_bounded: bool = True
    extremes_exact: dict[str, bool] = field(default_factory=dict)
    horizon: float = 200.0
    tol: float = 1e-9

    def as_dict(self) -> dict:
        d = asdict(self)
        d["fired_rules"] = [{"theorem": t, "condition": c, "value": v}
                            for t, c, v in self.fired_rules]
        return d

    def table(self) -> str:
        rows = [f"{'quantity':<14}{'prey':>14}{'predator':>14}",
                f"{'p_inf':<14}{self.p1_inf:>14.7g}{self.p2_inf:>14.7g}",
                f"{'pbar*':<14}{self.pbar_star[0]:>14.7g}{self.pbar_star[1]:>14.7g}",
                f"{'qbar*':<14}{self.qbar_star[0]:>14.7g}{self.qbar_star[1]:>14.7g}",
                f"{'label':<14}{self.labels['prey']:>28}",
                f"{'':<14}{self.labels['predator']:>28}  (predator)"]
        rows += [f"fired: {t}  {c}  [{v:.7g}]" for t, c, v in self.fired_rules]
        rows.append("ultimately bounded: yes (unconditional)")
        return "\n".join(rows)


def classify_regime(spec: ModelSpec, horizon: float = 200.0, tol: float = 1e-9,
                    predator_absent: bool = False, n: int = 2000,
                    validate: bool = True, allow_degenerate: bool = False) -> RegimeReport:
    """Label each species by the first sufficient condition that holds.

    Rules, per species ``i``: ``qbar*_i < -tol`` gives extinct;
    ``|qbar*_i| <= tol`` non-persistent in the mean.  Otherwise the predator
    is stochastically permanent if ``p2_inf > tol`` and weakly persistent in
    the mean if ``pbar*_2 > tol``; the prey is weakly persistent in the mean
    if ``pbar*_1 > tol`` and ``qbar*_2 < -tol``, and stochastically permanent
    when the predator is absent and ``p1_inf > tol``.  Anything else is
    indeterminate.  Averages use :func:`time_average` over ``horizon``.
    """
    if validate:
        report = validate_assumption1(spec, allow_degenerate=allow_degenerate)
        if not report.passed:
            raise ValidationError(report)
    ex1, ex2 = extremes(spec, "p1"), extremes(spec, "p2")
    pbar = (time_average(spec, "p1", horizon, n), time_average(spec, "p2", horizon, n))
    qbar = (time_average(spec, "q1", horizon, n), time_average(spec, "q2", horizon, n))
    fired: list[tuple[str, str, float]] = []
    labels = {}
    for i, name in ((1, "prey"), (2, "predator")):
        q = qbar[i - 1]
        if q < -tol:
            labels[name] = EXTINCT
            fired.append(("theorem5", f"qbar*_{i} < 0", q))
        elif abs(q) <= tol:
            labels[name] = NON_PERSISTENT
            fired.append(("theorem6", f"qbar*_{i} = 0", q))
        elif i == 2 and ex2.inf > tol:
            labels[name] = PERMANENT
            fired.append(("permanence", "p2_inf > 0", ex2.inf))
        elif i == 2 and pbar[1] > tol:
            labels[name] = WEAKLY_PERSISTENT
            fired.append(("theorem7", "pbar*_2 > 0", pbar[1]))
        elif i == 1 and predator_absent and ex1.inf > tol:
            labels[name] = PERMANENT
            fired.append(("theorem3", "predator absent and p1_inf > 0", ex1.inf))
        elif i == 1 and pbar[0] > tol and qbar[1] < -tol:
            labels[name] = WEAKLY_PERSISTENT
            fired.append(("theorem8", "pbar*_1 > 0 and qbar*_2 < 0", pbar[0]))
        else:
            labels[name] = INDETERMINATE
    return RegimeReport(ex1.inf, ex2.inf, pbar, qbar, labels, fired,
                        extremes_exact={"p1": ex1.exact, "p2": ex2.exact},
                        horizon=horizon, tol=tol)


@dataclass(eq=False)
class EnsembleStats:
    """Cross-sectional statistics of an ensemble on the recorded grid.

    Per-time arrays have shape ``(n_t, 2)`` (prey, predator) unless noted.
    ``log_paths`` keeps ``ln x`` of every non-diverged path for the verifiers.
    """

    n_paths: int
    n_diverged: int
    times: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    q01: np.ndarray
    q50: np.ndarray
    q99: np.ndarray
    moments: dict[float, np.ndarray]
    inv_moment: np.ndarray          # (n_t,) mean of x2^-theta
    theta: float
    exceed: np.ndarray              # (n_t,) fraction with |X| > chi
    chi: float
    extinct_frac: np.ndarray
    extinction_threshold: float
    tavg_mean: np.ndarray
    tavg_min: np.ndarray
    tavg_max: np.ndarray
    tavg_median: np.ndarray
    max_log_growth: np.ndarray      # max over paths of ln x_i(t) / t
    log_paths: np.ndarray           # (n_ok, n_t, 2)
    integrals: np.ndarray           # (n_ok, n_t, 2) running int x ds
    meta: dict = field(default_factory=dict)

    @property
    def n_ok(self) -> int:
        return self.log_paths.shape[0]

    def index(self, t: float) -> int:
        """Index of the recorded time closest to ``t``."""
        return int(np.argmin(np.abs(self.times - t)))

    def states_at(self, t: float) -> np.ndarray:
        return np.exp(self.log_paths[:, self.index(t)])

    def path_time_averages(self) -> np.ndarray:
        """Per-path ``(1/T) int_0^T x ds`` at the last recorded time."""
        T = self.times[-1]
        if T == 0:
            return np.exp(self.log_paths[:, 0])
        return self.integrals[:, -1] / T


def _ensemble_stride(config: SolverConfig) -> int:
    if config.record_stride is not None:
        return config.record_stride
    return max(1, math.ceil(config.n_base / 400))


def _simulate_chunk(spec, kp, config, stride, indices, logs, integ, status, backend):
    for i in indices:
        rng = config.rng.with_stream(i)
        schedule = build_schedule(spec, config.horizon, rng)
        grid, base_nodes, ev_nodes = build_grid(config.horizon, config.dt_max, schedule.times)
        rec = _record_nodes(base_nodes, stride)
        dW = _brownian(spec, rng, grid)
        xi, ii, st, _ = run_log_kernel(kp, spec, grid, dW, ev_nodes, schedule, rec, backend)
        logs[i], integ[i], status[i] = xi, ii, st


def run_ensemble(spec: ModelSpec, config: SolverConfig, n_paths: int,
                 estimator: AnalysisConfig | None = None, workers: int = 1,
                 validate: bool = True, allow_degenerate: bool = False,
                 backend: str | None = None) -> EnsembleStats:
    """Simulate ``n_paths`` trajectories (stream id = path index) and
    aggregate them.

    Paths are split across ``workers`` threads; results are written by path
    index and reduced in index order, so output does not depend on the
    worker count.  Statistics skip diverged paths.

    Raises
    ------
    DivergenceError
        If every path diverged.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if config.horizon <= 0:
        raise ValueError("ensembles need a positive horizon")
    est = estimator or AnalysisConfig()
    if validate:
        report = validate_assumption1(spec, allow_degenerate=allow_degenerate)
        if not report.passed:
            raise ValidationError(report)
    stride = _ensemble_stride(config)
    n_base = config.n_base
    rec_base = np.union1d(np.arange(0, n_base + 1, stride), [n_base])
    n_t = len(rec_base)
    times = rec_base * config.dt_max
    times[-1] = config.horizon
    logs = np.empty((n_paths, n_t, 2))
    integ = np.empty((n_paths, n_t, 2))
    status = np.zeros(n_paths, dtype=np.int64)
    kp = _backend.pack(spec)
    workers = max(1, int(workers))
    chunks = [range(k, n_paths, workers) for k in range(workers)]
    if workers == 1:
        _simulate_chunk(spec, kp, config, stride, chunks[0], logs, integ, status, backend)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_simulate_chunk, spec, kp, config, stride, c,
                                   logs, integ, status, backend) for c in chunks]
            for f in futures:
                f.result()
    ok = status == 0
    if not ok.any():
        raise DivergenceError(
            f"all {n_paths} paths diverged; reduce dt_max (currently {config.dt_max})")
    return _aggregate(times, logs[ok], integ[ok], n_paths, int((~ok).sum()), est,
                      {"seed": config.rng.seed, "dt_max": config.dt_max,
                       "horizon": config.horizon, "stride": stride,
                       "backend": backend or _backend.BACKEND})


def _aggregate(times, logs, integ, n_paths, n_div, est: AnalysisConfig, meta) -> EnsembleStats:
    x = np.exp(logs)
    n = x.shape[0]
    q01, q50, q99 = np.quantile(x, [0.01, 0.5, 0.99], axis=0)
    moments = {float(p): np.exp(p * logs).mean(axis=0) for p in est.moments}
    inv = np.exp(-est.theta * logs[:, :, 1]).mean(axis=0)
    norm = np.hypot(x[:, :, 0], x[:, :, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        tavg = np.where(times[None, :, None] > 0, integ / times[None, :, None], x)
        growth = np.where(times[None, :, None] > 0, logs / times[None, :, None], np.nan)
    return EnsembleStats(
        n_paths=n_paths, n_diverged=n_div, times=times,
        mean=x.mean(axis=0), var=x.var(axis=0, ddof=1 if n > 1 else 0),
        q01=q01, q50=q50, q99=q99, moments=moments, inv_moment=inv, theta=est.theta,
        exceed=(norm > est.chi).mean(axis=0), chi=est.chi,
        extinct_frac=(x < est.extinction_threshold).mean(axis=0),
        extinction_threshold=est.extinction_threshold,
        tavg_mean=tavg.mean(axis=0), tavg_min=tavg.min(axis=0), tavg_max=tavg.max(axis=0),
        tavg_median=np.median(tavg, axis=0), max_log_growth=growth.max(axis=0),
        log_paths=logs, integrals=integ, meta=meta)


def _late_times(stats: EnsembleStats, est: AnalysisConfig) -> tuple[float, list[float]]:
    """Reference time and later checkpoints, rescaled onto short horizons."""
    T = stats.times[-1]
    checkpoints = [c for c in est.checkpoints if c <= T + 1e-9]
    if len(checkpoints) < 2:
        checkpoints = [0.5 * T, 0.75 * T, T]
    t_ref = est.reference_time if est.reference_time < checkpoints[0] else 0.5 * checkpoints[0]
    return t_ref, checkpoints


def verify_lemma1(stats: EnsembleStats, t: float | None = None, margin: float = 0.05) -> dict:
    """Max over paths of ``ln x_i(t) / t`` against a small positive margin."""
    t = stats.times[-1] if t is None else t
    k = stats.index(t)
    t = float(stats.times[k])
    vals = (stats.log_paths[:, k] / t).max(axis=0)
    passed = [bool(v <= margin) for v in vals]
    return {"t": t, "max_log_growth": vals.tolist(), "margin": margin,
            "late_time": t >= 50, "pass": passed, "passed": all(passed)}


def verify_boundedness(stats: EnsembleStats, eps: float, t_ref: float | None = None,
                       checkpoints=None, chi: float | None = None) -> dict:
    """Empirical ultimate boundedness.

    ``chi`` defaults to the ``(1 - eps)``-quantile of ``|X(t_ref)|``; the
    exceedance frequency at each later checkpoint must stay below
    ``eps + 2 sqrt(eps (1 - eps) / n)``.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    est = AnalysisConfig()
    d_ref, d_cp = _late_times(stats, est)
    t_ref = d_ref if t_ref is None else t_ref
    checkpoints = d_cp if checkpoints is None else list(checkpoints)
    norm_at = lambda t: np.hypot(*stats.states_at(t).T)  # noqa: E731
    if chi is None:
        chi = float(np.quantile(norm_at(t_ref), 1.0 - eps))
    n = stats.n_ok
    bound = eps + 2.0 * math.sqrt(eps * (1.0 - eps) / n)
    exceed = [float(np.mean(norm_at(t) > chi)) for t in checkpoints]
    passed = all(e <= bound for e in exceed)
    return {"chi": chi, "eps": eps, "t_ref": float(stats.times[stats.index(t_ref)]),
            "checkpoints": [float(stats.times[stats.index(t)]) for t in checkpoints],
            "exceedance": exceed, "bound": bound, "passed": passed}


def verify_permanence(stats: EnsembleStats, eps: float, t_ref: float | None = None,
                      checkpoints=None, theta: float | None = None,
                      report: RegimeReport | None = None, species: int = 2,
                      tol: float = 0.0) -> dict:
    """Empirical stochastic permanence of one species (predator by default).

    ``h`` and ``H`` are the ``eps`` and ``1 - eps`` quantiles of ``x`` at
    ``t_ref``; the band must hold with probability at least
    ``1 - 2 eps - tol`` at every later checkpoint.  Chebyshev-type constants
    ``E[x] / eps`` and ``(eps / E[x^-theta])^(1/theta)`` built from the moment
    bounds are reported alongside with their coverage.
    """
    name = SPECIES[species - 1]
    if report is not None and report.labels[name] != PERMANENT:
        return {"applicable": False, "passed": None,
                "reason": f"{name} label is {report.labels[name]}"}
    theta = stats.theta if theta is None else theta
    d_ref, d_cp = _late_times(stats, AnalysisConfig())
    t_ref = d_ref if t_ref is None else t_ref
    checkpoints = [d_cp[0], d_cp[-1]] if checkpoints is None else list(checkpoints)
    x_ref = np.exp(stats.log_paths[:, stats.index(t_ref), species - 1])
    h, H = (float(v) for v in np.quantile(x_ref, [eps, 1.0 - eps]))
    m_hi = float(x_ref.mean() / eps)
    m_lo = float((eps / np.mean(x_ref ** -theta)) ** (1.0 / theta))
    coverage, m_coverage = [], []
    for t in checkpoints:
        x = stats.states_at(t)[:, species - 1]
        coverage.append(float(np.mean((x >= h) & (x <= H))))
        m_coverage.append(float(np.mean((x >= m_lo) & (x <= m_hi))))
    need = 1.0 - 2.0 * eps - tol
    return {"applicable": True, "h": h, "H": H, "eps": eps,
            "t_ref": float(stats.times[stats.index(t_ref)]),
            "checkpoints": [float(stats.times[stats.index(t)]) for t in checkpoints],
            "coverage": coverage, "required": need,
            "moment_band": [m_lo, m_hi], "moment_band_coverage": m_coverage,
            "theta": theta,
            "passed": bool(all(c >= need for c in coverage))}


def verify_extinction(stats: EnsembleStats, threshold: float | None = None) -> list[float]:
    """Fraction of paths per species below ``threshold`` at the final time."""
    threshold = stats.extinction_threshold if threshold is None else threshold
    return (np.exp(stats.log_paths[:, -1]) < threshold).mean(axis=0).tolist()


def verify_mean_persistence(stats: EnsembleStats, np_level: float = 0.01,
                            wp_level: float = 0.05) -> dict:
    """Median over paths of the time-average ``(1/T) int_0^T x_i ds``."""
    tavg = stats.path_time_averages()
    med = np.median(tavg, axis=0)
    return {"T": float(stats.times[-1]), "median_time_average": med.tolist(),
            "min": tavg.min(axis=0).tolist(), "max": tavg.max(axis=0).tolist(),
            "non_persistent": [bool(v < np_level) for v in med],
            "weakly_persistent": [bool(v > wp_level) for v in med],
            "levels": [np_level, wp_level]}


def _stabilised(times, series, t1, t2, rel=0.05) -> tuple[float, float, bool]:
    k1 = int(np.argmin(np.abs(times - t1)))
    k2 = int(np.argmin(np.abs(times - t2)))
    s1 = float(np.max(series[:k1 + 1]))
    s2 = float(np.max(series[:k2 + 1]))
    return s1, s2, bool(s2 <= s1 * (1.0 + rel))


def verify_moment_bounds(stats: EnsembleStats, p: float, theta: float | None = None,
                         p2_inf: float | None = None, t1: float | None = None,
                         t2: float | None = None) -> dict:
    """Running sup of ``E[x_i^p]`` (and of ``E[x2^-theta]`` when ``p2_inf > 0``)
    must grow by less than 5% between two late times."""
    _, cps = _late_times(stats, AnalysisConfig())
    t1 = cps[0] if t1 is None else t1
    t2 = cps[-1] if t2 is None else t2
    mp = np.exp(p * stats.log_paths).mean(axis=0)
    out = {"p": p, "t1": t1, "t2": t2, "moment": []}
    ok = True
    for i in range(2):
        s1, s2, stable = _stabilised(stats.times, mp[:, i], t1, t2)
        out["moment"].append({"sup_t1": s1, "sup_t2": s2, "stable": stable})
        ok &= stable
    if p2_inf is not None and p2_inf > 0:
        theta = stats.theta if theta is None else theta
        inv = np.exp(-theta * stats.log_paths[:, :, 1]).mean(axis=0)
        s1, s2, stable = _stabilised(stats.times, inv, t1, t2)
        out["inverse_moment"] = {"theta": theta, "sup_t1": s1, "sup_t2": s2, "stable": stable}
        ok &= stable
    else:
        out["inverse_moment"] = None
    out["passed"] = bool(ok)
    return out


def _verdict(status: str, value=None, **detail) -> dict:
    return {"status": status, "value": value, **detail}


def theorem_verdicts(stats: EnsembleStats, report: RegimeReport,
                     est: AnalysisConfig | None = None) -> dict:
    """Map each result id to pass / fail / not-applicable with its statistic."""
    est = est or AnalysisConfig()
    low_power = stats.n_ok < 30
    out: dict[str, dict] = {}

    def status(ok) -> str:
        return "pass" if ok else "fail"

    l1 = verify_lemma1(stats, margin=est.lemma1_margin)
    for i, name in enumerate(SPECIES):
        out[f"lemma1.{name}"] = _verdict(status(l1["pass"][i]), l1["max_log_growth"][i])
    for p in est.moments:
        mb = verify_moment_bounds(stats, p, est.theta, report.p2_inf)
        for i, name in enumerate(SPECIES):
            out[f"lemma2.{name}.p{p:g}"] = _verdict(status(mb["moment"][i]["stable"]),
                                                    mb["moment"][i]["sup_t2"])
    if report.p2_inf > report.tol:
        mb = verify_moment_bounds(stats, 1.0, est.theta, report.p2_inf)
        inv = mb["inverse_moment"]
        out["lemma3.predator"] = _verdict(status(inv["stable"]), inv["sup_t2"])
    else:
        out["lemma3.predator"] = _verdict("not-applicable")
    bd = verify_boundedness(stats, est.epsilon)
    out["theorem2"] = _verdict(status(bd["passed"]), max(bd["exceedance"]), chi=bd["chi"])

    if report.labels["predator"] == PERMANENT:
        pm = verify_permanence(stats, est.epsilon, theta=est.theta)
        out["permanence.predator"] = _verdict(status(pm["passed"]), min(pm["coverage"]),
                                              h=pm["h"], H=pm["H"])
    else:
        out["permanence.predator"] = _verdict("not-applicable")
    if report.labels["prey"] == PERMANENT:
        pm = verify_permanence(stats, est.epsilon, theta=est.theta, species=1)
        out["theorem3.prey"] = _verdict(status(pm["passed"]), min(pm["coverage"]),
                                        h=pm["h"], H=pm["H"])
    else:
        out["theorem3.prey"] = _verdict("not-applicable")

    frac = verify_extinction(stats, est.extinction_threshold)
    mp = verify_mean_persistence(stats, est.nonpersistence_level, est.persistence_level)
    for i, name in enumerate(SPECIES):
        label = report.labels[name]
        out[f"theorem5.{name}"] = (
            _verdict(status(frac[i] >= est.extinction_min_fraction), frac[i])
            if label == EXTINCT else _verdict("not-applicable"))
        out[f"theorem6.{name}"] = (
            _verdict(status(mp["non_persistent"][i]), mp["median_time_average"][i])
            if label == NON_PERSISTENT else _verdict("not-applicable"))
    out["theorem7.predator"] = (
        _verdict(status(mp["weakly_persistent"][1]), mp["median_time_average"][1])
        if report.labels["predator"] in (WEAKLY_PERSISTENT, PERMANENT)
        and report.pbar_star[1] > report.tol else _verdict("not-applicable"))
    out["theorem8.prey"] = (
        _verdict(status(mp["weakly_persistent"][0]), mp["median_time_average"][0])
        if report.labels["prey"] == WEAKLY_PERSISTENT else _verdict("not-applicable"))
    for v in out.values():
        v["low_power"] = low_power
    return out


def write_stats_csv(stats: EnsembleStats, path, provenance: str | None = None) -> None:
    """One row per (time, species) with round-trip float formatting."""
    ps = sorted(stats.moments)
    header = (["t", "species", "mean", "var", "q01", "q50", "q99"]
              + [f"moment_p{p:g}" for p in ps]
              + [f"inv_moment_theta{stats.theta:g}", f"exceed_chi{stats.chi:g}",
                 "extinct_frac", "tavg_mean", "tavg_min", "tavg_max", "tavg_median",
                 "max_log_growth"])
    r = lambda v: repr(float(v))  # noqa: E731
    with open(path, "w", newline="") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, t in enumerate(stats.times):
            for i, name in enumerate(SPECIES):
                w.writerow([r(t), name, r(stats.mean[k, i]), r(stats.var[k, i]),
                            r(stats.q01[k, i]), r(stats.q50[k, i]), r(stats.q99[k, i])]
                           + [r(stats.moments[p][k, i]) for p in ps]
                           + [r(stats.inv_moment[k]) if i == 1 else "",
                              r(stats.exceed[k]), r(stats.extinct_frac[k, i]),
                              r(stats.tavg_mean[k, i]), r(stats.tavg_min[k, i]),
                              r(stats.tavg_max[k, i]), r(stats.tavg_median[k, i]),
                              r(stats.max_log_growth[k, i])])
