import json
import math
from dataclasses import replace

import numpy as np
import pytest

from hollingjump import presets
from hollingjump.coefficients import JumpKernel, LevyMeasureSpec, MarkDistribution
from hollingjump.errors import KernelDomainError, ValidationError
from hollingjump.integrator import (SolverConfig, apply_jump, build_grid, convergence_study,
                                    integrate_deterministic, integrate_path, step_continuous,
                                    write_metadata_json, write_trajectory_csv)
from hollingjump.jumps import JumpEvent, RngSpec
from hollingjump.model import ModelSpec, SpeciesParams


def _zero_spec():
    z = SpeciesParams(a=0.0, b=0.0, c=0.0)
    return ModelSpec(z, SpeciesParams(a=0.0, b=0.0, c=0.0), m=1.0)


def test_step_identity_flow():
    assert step_continuous(_zero_spec(), 0.0, (0.4, -1.2), 0.1, (0.0, 0.0)) == (0.4, -1.2)


def test_step_logistic_euler():
    xi = step_continuous(presets.logistic_prey(), 0.0, (0.0, 0.0), 0.01, (0.0, 0.0))
    assert xi[0] == pytest.approx(0.005, abs=1e-17)


def test_step_noise_term():
    spec = presets.logistic_prey(sigma=0.3)
    a = step_continuous(spec, 0.0, (0.0, 0.0), 0.01, (0.0, 0.0))
    b = step_continuous(spec, 0.0, (0.0, 0.0), 0.01, (0.2, 0.0))
    assert b[0] - a[0] == pytest.approx(0.06, abs=1e-15)


def test_jump_multiplies_by_one_point_one():
    spec = presets.pure_jump_prey()
    xi = apply_jump(spec, 0.5, (math.log(3.0), 0.0), JumpEvent(0.5, 1, 1.0))
    assert math.exp(xi[0]) == pytest.approx(3.3, rel=1e-15)
    assert xi[1] == 0.0


def test_zero_delta_leaves_state():
    spec = presets.pure_jump_prey()
    assert apply_jump(spec, 0.5, (0.2, 0.3), JumpEvent(0.5, 2, 1.0)) == (0.2, 0.3)


def test_halving_jump():
    spec = replace(presets.baseline(), predator=replace(presets.baseline().predator,
                                                        delta=JumpKernel.constant(-0.5)))
    xi = apply_jump(spec, 0.0, (0.0, math.log(2.0)), JumpEvent(0.0, 2, 1.0))
    assert math.exp(xi[1]) == pytest.approx(1.0, abs=1e-15)


def test_monotone_jump_action():
    spec = presets.baseline()
    up = replace(spec, prey=replace(spec.prey, delta=JumpKernel.constant(0.3)))
    assert apply_jump(up, 0.0, (0.0, 0.0), JumpEvent(0.0, 2, 1.0))[0] > 0.0
    assert apply_jump(spec, 0.0, (0.0, 0.0), JumpEvent(0.0, 2, 1.0))[0] < 0.0


def test_jump_domain_error():
    spec = replace(presets.baseline(), prey=replace(presets.baseline().prey,
                                                    gamma=JumpKernel.constant(-1.0)))
    with pytest.raises(KernelDomainError):
        apply_jump(spec, 0.0, (0.0, 0.0), JumpEvent(0.0, 1, 1.0))
    with pytest.raises(KernelDomainError):
        integrate_path(spec, SolverConfig(5.0, rng=RngSpec(1)), validate=False)


def test_solver_config_contract():
    with pytest.raises(ValueError):
        SolverConfig(1.0, dt_max=2.0)
    with pytest.raises(ValueError):
        SolverConfig(1.0, record_stride=0)
    assert SolverConfig(200.0, 1e-3).stride == 2
    assert SolverConfig(1.0, 1e-3).stride == 1


def test_build_grid_contains_events():
    ev = np.array([0.0105, 0.5, 0.73])
    grid, base, nodes = build_grid(1.0, 0.01, ev)
    assert np.all(np.diff(grid) > 0)
    assert np.array_equal(grid[nodes], ev)
    assert len(base) == 101 and grid[base[-1]] == 1.0


def test_invalid_spec_rejected():
    with pytest.raises(ValidationError):
        integrate_path(presets.oracle(), SolverConfig(1.0))


def test_oracle_equilibrium_stays():
    spec = presets.oracle(x0=presets.ORACLE_EQUILIBRIUM)
    traj = integrate_path(spec, SolverConfig(100.0, 1e-3), allow_degenerate=True)
    assert np.max(np.abs(traj.states - presets.ORACLE_EQUILIBRIUM)) < 1e-6


def test_logistic_rk4_limit():
    traj = integrate_deterministic(presets.logistic_prey(), SolverConfig(50.0, 1e-3),
                                   allow_degenerate=True)
    assert abs(traj.final[0] - 2.0) < 1e-8


def test_oracle_rk4_converges():
    traj = integrate_deterministic(presets.oracle(), SolverConfig(200.0, 1e-3),
                                   allow_degenerate=True)
    assert np.max(np.abs(traj.final - presets.ORACLE_EQUILIBRIUM)) < 1e-6


def test_zero_drift_constant_path():
    spec = replace(_zero_spec(), x0=(0.7, 1.3))
    for fn in (integrate_deterministic, integrate_path):
        traj = fn(spec, SolverConfig(3.0, 1e-2), allow_degenerate=True)
        assert np.all(traj.states == [0.7, 1.3])


def test_rk4_requires_deterministic_spec():
    with pytest.raises(ValueError):
        integrate_deterministic(presets.baseline(), SolverConfig(1.0))


def test_zero_noise_reduction_order_dt():
    spec = presets.deterministic()
    ref = integrate_deterministic(spec, SolverConfig(10.0, 1e-3)).final
    errs = [np.abs(integrate_path(spec, SolverConfig(10.0, dt)).final - ref).max()
            for dt in (4e-3, 2e-3, 1e-3)]
    ratios = [e / dt for e, dt in zip(errs, (4e-3, 2e-3, 1e-3))]
    assert max(ratios) < 2 * min(ratios)
    assert errs[0] > errs[1] > errs[2]


def test_pure_jump_closed_form():
    spec = presets.pure_jump_prey()
    traj = integrate_path(spec, SolverConfig(10.0, 1e-3, record_stride=1, rng=RngSpec(4)),
                          allow_degenerate=True)
    n_jumps = np.searchsorted(traj.events.times, traj.times, side="right")
    closed = 1.1 ** n_jumps * np.exp(-0.2 * traj.times)
    assert np.max(np.abs(traj.states[:, 0] - closed)) < 1e-12
    assert np.all(traj.states[:, 1] == 1.0)


def test_pure_jump_invariant_under_refinement():
    spec = presets.pure_jump_prey()
    a = integrate_path(spec, SolverConfig(10.0, 1e-2, rng=RngSpec(4)), allow_degenerate=True)
    b = integrate_path(spec, SolverConfig(10.0, 1e-3, rng=RngSpec(4)), allow_degenerate=True)
    ta, tb = set(a.events.times), set(b.events.times)
    assert ta == tb
    ia = np.isin(a.times, a.events.times)
    ib = np.isin(b.times, b.events.times)
    assert np.allclose(a.log_states[ia], b.log_states[ib], rtol=0, atol=1e-12)


def test_event_times_recorded_once():
    traj = integrate_path(presets.baseline(), SolverConfig(20.0, 1e-3, rng=RngSpec(5)))
    for t in traj.events.times:
        assert np.count_nonzero(traj.times == t) == 1
    assert np.all(np.diff(traj.times) > 0)


def test_positive_finite_states():
    traj = integrate_path(presets.baseline(), SolverConfig(50.0, 1e-3, rng=RngSpec(6)))
    assert not traj.diverged
    assert np.all(traj.states > 0) and np.all(np.isfinite(traj.states))


def test_same_seed_same_path():
    cfg = SolverConfig(10.0, 1e-3, rng=RngSpec(42))
    a = integrate_path(presets.baseline(), cfg)
    b = integrate_path(presets.baseline(), cfg)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.times, b.times)


def test_zero_horizon():
    traj = integrate_path(presets.baseline(), SolverConfig(0.0))
    assert traj.times.tolist() == [0.0]
    assert traj.states.tolist() == [[1.0, 1.0]]


def test_divergence_flagged():
    spec = ModelSpec(SpeciesParams(a=100.0, b=0.0, c=0.0), SpeciesParams(a=0.0, b=0.0, c=0.0),
                     m=1.0)
    traj = integrate_path(spec, SolverConfig(10.0, 1e-3), allow_degenerate=True)
    assert traj.diverged
    assert traj.meta["diverged_at"] == pytest.approx(7.0, abs=0.01)


def test_time_average_of_constant_path():
    spec = replace(_zero_spec(), x0=(2.0, 2.0))
    traj = integrate_path(spec, SolverConfig(5.0, 1e-2), allow_degenerate=True)
    assert np.all(traj.time_average() == 2.0)


def test_running_integral_matches_closed_form():
    # pure-jump prey: x1 piecewise exponential, integral exact between jumps
    spec = presets.pure_jump_prey()
    traj = integrate_path(spec, SolverConfig(5.0, 1e-4, record_stride=1, rng=RngSpec(2)),
                          allow_degenerate=True)
    ev = np.concatenate([[0.0], traj.events.times, [5.0]])
    exact = sum(1.1 ** k * (np.exp(-0.2 * ev[k]) - np.exp(-0.2 * ev[k + 1])) / 0.2
                for k in range(len(ev) - 1))
    assert traj.integrals[-1, 0] == pytest.approx(exact, rel=1e-8)


def test_convergence_deterministic_order_one():
    rep = convergence_study(presets.deterministic(), [0.04, 0.02, 0.01, 0.005], 1, 5.0)
    assert abs(rep.strong_order - 1.0) < 0.2
    assert all(e > 0 for e in rep.strong_errors)


def test_convergence_pure_jump_exact():
    rep = convergence_study(presets.pure_jump_prey(), [1e-2, 5e-3, 2.5e-3], 20, 2.0)
    assert max(rep.strong_errors) < 1e-13


def test_convergence_needs_three_levels():
    with pytest.raises(ValueError):
        convergence_study(presets.diffusive(), [1e-2, 5e-3], 5, 1.0)


def test_uniform_marks_path_positive():
    spec = replace(presets.baseline(), pi1=LevyMeasureSpec(3.0, MarkDistribution.uniform(0, 1)),
                   prey=replace(presets.baseline().prey, gamma=JumpKernel.identity(-0.9)))
    traj = integrate_path(spec, SolverConfig(20.0, 1e-3, rng=RngSpec(3)))
    assert np.all(traj.states > 0)


def test_trajectory_csv_and_metadata(tmp_path):
    traj = integrate_path(presets.baseline(), SolverConfig(1.0, 0.1, rng=RngSpec(1)))
    write_trajectory_csv(traj, tmp_path / "t.csv", provenance="seed=1")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[:2] == ["# seed=1", "t,x1,x2"]
    row = [float(v) for v in lines[-1].split(",")]
    assert row == [1.0, *traj.final.tolist()]
    write_metadata_json(traj.meta, tmp_path / "m.json")
    meta = json.loads((tmp_path / "m.json").read_text())
    assert meta["seed"] == 1 and len(meta["spec_sha256"]) == 64
