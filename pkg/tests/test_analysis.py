import math
from dataclasses import replace

import numpy as np
import pytest

from hollingjump import presets
from hollingjump.analysis import (EXTINCT, INDETERMINATE, NON_PERSISTENT, PERMANENT,
                                  WEAKLY_PERSISTENT, classify_regime, run_ensemble,
                                  theorem_verdicts, verify_boundedness, verify_extinction,
                                  verify_lemma1, verify_mean_persistence, verify_moment_bounds,
                                  verify_permanence, write_stats_csv)
from hollingjump.coefficients import JumpKernel, TimeFunction
from hollingjump.config import AnalysisConfig
from hollingjump.errors import DivergenceError, ValidationError
from hollingjump.integrator import SolverConfig, integrate_deterministic, integrate_path
from hollingjump.jumps import RngSpec
from hollingjump.model import ModelSpec, SpeciesParams


def test_extinction_label():
    rep = classify_regime(presets.extinction())
    assert rep.labels["prey"] == EXTINCT
    assert rep.qbar_star[0] == pytest.approx(-0.12, abs=1e-15)
    assert rep.fired_rules[0][0] == "theorem5"


def test_gap_spec_indeterminate():
    rep = classify_regime(presets.baseline())
    assert rep.labels["predator"] == INDETERMINATE
    assert round(rep.qbar_star[1], 7) == 0.0193271
    assert round(rep.p2_inf, 7) == -0.4806729
    assert rep.pbar_star[1] < 0
    assert rep.ultimately_bounded


def test_permanent_predator():
    rep = classify_regime(presets.permanence())
    assert rep.labels["predator"] == PERMANENT
    assert round(rep.p2_inf, 7) == 0.7109302


def test_weakly_persistent_predator():
    rep = classify_regime(presets.weak_persistence())
    assert rep.p2_inf < 0 < rep.pbar_star[1]
    assert rep.labels["predator"] == WEAKLY_PERSISTENT


def test_non_persistent_boundary():
    base = presets.extinction()
    spec = replace(base, prey=replace(base.prey, a=TimeFunction.constant(0.32)))
    rep = classify_regime(spec)
    assert abs(rep.qbar_star[0]) <= 1e-9
    assert rep.labels["prey"] == NON_PERSISTENT


def test_prey_rules():
    base = presets.diffusive(0.2)
    spec = replace(base, predator=replace(base.predator, a=TimeFunction.constant(0.8)))
    rep = classify_regime(spec)
    assert rep.qbar_star[1] < 0 < rep.pbar_star[0]
    assert rep.labels == {"prey": WEAKLY_PERSISTENT, "predator": EXTINCT}
    alone = classify_regime(presets.diffusive(0.2), predator_absent=True)
    assert alone.labels["prey"] == PERMANENT


def test_classify_requires_valid_spec():
    with pytest.raises(ValidationError):
        classify_regime(presets.oracle())
    assert classify_regime(presets.oracle(), allow_degenerate=True).labels


def test_report_serialises():
    d = classify_regime(presets.permanence()).as_dict()
    assert d["labels"]["predator"] == PERMANENT
    assert d["fired_rules"][-1]["theorem"] == "permanence"
    assert "ultimately bounded" in classify_regime(presets.baseline()).table()


def _det(T=100.0, x0=(2.0, 1.0)):
    return presets.logistic_prey(x0=x0), SolverConfig(T, 1e-2, rng=RngSpec(1))


def test_single_path_deterministic_ensemble():
    spec, cfg = _det(x0=(0.5, 1.0))
    st = run_ensemble(spec, cfg, 1, allow_degenerate=True)
    ref = integrate_path(spec, SolverConfig(100.0, 1e-2, record_stride=st.meta["stride"]),
                         allow_degenerate=True)
    assert np.array_equal(st.times, ref.times)
    for q in (st.q01, st.q50, st.q99, st.mean):
        assert np.array_equal(q, ref.states)
    rk4 = integrate_deterministic(spec, SolverConfig(100.0, 1e-3), allow_degenerate=True)
    assert abs(st.mean[-1, 0] - rk4.final[0]) < 1e-6


def test_ensemble_worker_independence():
    cfg = SolverConfig(20.0, 1e-2, rng=RngSpec(99))
    a = run_ensemble(presets.baseline(), cfg, 24, workers=1)
    b = run_ensemble(presets.baseline(), cfg, 24, workers=4)
    for name in ("mean", "var", "q01", "q99", "exceed", "tavg_mean", "max_log_growth",
                 "log_paths", "integrals", "inv_moment"):
        assert np.array_equal(getattr(a, name), getattr(b, name), equal_nan=True), name


def test_ensemble_stat_invariants():
    st = run_ensemble(presets.baseline(), SolverConfig(30.0, 1e-2, rng=RngSpec(3)), 40)
    assert st.n_paths == 40 and st.n_diverged == 0
    for p in (st.exceed, st.extinct_frac):
        assert np.all((p >= 0) & (p <= 1))
    assert np.all(st.q01 <= st.q50) and np.all(st.q50 <= st.q99)
    assert np.all(st.tavg_min <= st.tavg_mean) and np.all(st.tavg_mean <= st.tavg_max)
    assert len(st.times) <= 402


def test_ensemble_all_diverged():
    spec = ModelSpec(SpeciesParams(a=100.0, b=0.0, c=0.0), SpeciesParams(a=0.0, b=0.0, c=0.0),
                     m=1.0)
    with pytest.raises(DivergenceError, match="dt_max"):
        run_ensemble(spec, SolverConfig(10.0, 1e-2), 3, allow_degenerate=True)


def test_ensemble_rejects_bad_inputs():
    with pytest.raises(ValueError):
        run_ensemble(presets.baseline(), SolverConfig(1.0), 0)
    with pytest.raises(ValueError):
        AnalysisConfig(theta=1.0)


def test_pure_jump_martingale_mean_small():
    st = run_ensemble(presets.pure_jump_prey(), SolverConfig(1.0, 1e-3, rng=RngSpec(5)), 4000,
                      allow_degenerate=True)
    x = np.exp(st.log_paths[:, -1, 0])
    se = x.std(ddof=1) / math.sqrt(len(x))
    assert abs(x.mean() - 1.0) < 3 * se


def test_logistic_stationarity_proxy():
    spec = presets.logistic_prey(sigma=0.2)
    st = run_ensemble(spec, SolverConfig(100.0, 1e-2, rng=RngSpec(8)), 10_000,
                      allow_degenerate=True)
    a, b = st.states_at(50.0)[:, 0], st.states_at(100.0)[:, 0]
    pooled = math.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
    assert abs(a.mean() - b.mean()) < 3 * pooled


def test_lemma1_logistic_closed_form():
    spec, cfg = _det()
    st = run_ensemble(spec, cfg, 1, allow_degenerate=True)
    rep = verify_lemma1(st, 100.0)
    assert rep["max_log_growth"][0] == pytest.approx(math.log(2.0) / 100, abs=1e-12)
    assert rep["passed"]


def test_boundedness_guards():
    spec, cfg = _det()
    st = run_ensemble(spec, cfg, 1, allow_degenerate=True)
    assert verify_boundedness(st, 1.0)["passed"]
    rep = verify_boundedness(st, 0.1, chi=3.0)
    assert rep["exceedance"] == [0.0] * len(rep["checkpoints"]) and rep["passed"]


def test_permanence_not_applicable_for_extinct_spec():
    spec, cfg = _det()
    st = run_ensemble(spec, cfg, 1, allow_degenerate=True)
    rep = classify_regime(presets.extinction())
    assert verify_permanence(st, 0.05, report=rep)["applicable"] is False


def test_permanence_single_deterministic_path():
    spec, cfg = _det()
    st = run_ensemble(spec, cfg, 1, allow_degenerate=True)
    rep = verify_permanence(st, 0.05)
    assert rep["h"] == rep["H"] == 1.0
    assert rep["passed"]


def test_extinction_fraction_logistic_zero():
    spec, cfg = _det(x0=(0.5, 1.0))
    st = run_ensemble(spec, cfg, 1, allow_degenerate=True)
    assert verify_extinction(st, 1e-3) == [0.0, 0.0]


def test_constant_path_time_average_exact():
    spec, cfg = _det()
    st = run_ensemble(spec, cfg, 1, allow_degenerate=True)
    rep = verify_mean_persistence(st)
    assert rep["median_time_average"] == [2.0, 1.0]
    assert rep["weakly_persistent"] == [True, True]


def test_moment_bounds_at_equilibrium():
    spec, cfg = _det()
    st = run_ensemble(spec, cfg, 1, allow_degenerate=True)
    rep = verify_moment_bounds(st, 2.0, 0.5, p2_inf=1.0)
    assert rep["passed"] and rep["inverse_moment"]["stable"]


def test_verdicts_low_power_single_path():
    st = run_ensemble(presets.baseline(), SolverConfig(20.0, 1e-2, rng=RngSpec(1)), 1)
    v = theorem_verdicts(st, classify_regime(presets.baseline()))
    assert all(x["low_power"] for x in v.values())
    assert v["theorem5.predator"]["status"] == "not-applicable"
    assert {x["status"] for x in v.values()} <= {"pass", "fail", "not-applicable"}


def test_stats_csv(tmp_path):
    st = run_ensemble(presets.baseline(), SolverConfig(2.0, 1e-2, rng=RngSpec(1)), 3)
    write_stats_csv(st, tmp_path / "s.csv", "seed=1")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "# seed=1"
    assert lines[1].startswith("t,species,mean,var,q01,q50,q99,moment_p1,moment_p2")
    assert len(lines) == 2 + 2 * len(st.times)
