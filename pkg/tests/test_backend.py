import os
import subprocess
import sys

import numpy as np
import pytest

from hollingjump import _backend, presets
from hollingjump.integrator import SolverConfig, integrate_deterministic, integrate_path
from hollingjump.jumps import RngSpec

compiled = pytest.mark.skipif(_backend.BACKEND != "cython", reason="extension not built")


def test_backend_names():
    assert _backend.implementation("python").__name__.endswith("_kernel_py")
    with pytest.raises(ValueError):
        _backend.implementation("fortran")


def test_pack_layout():
    kp = _backend.pack(presets.weak_persistence())
    assert kp.kind.tolist()[1] == 1  # a2 sinusoidal
    assert len(kp.pw_off) == len(_backend.COEFFICIENTS) + 1
    # lambda1 * E[c + d z]; the scale is applied inside the kernel
    assert kp.comp.tolist() == [2.0, 2.0]


@compiled
@pytest.mark.parametrize("seed", range(12))
def test_random_specs_bit_identical(seed):
    spec = presets.random_spec(np.random.default_rng(seed))
    cfg = SolverConfig(3.0, 1e-3, record_stride=7, rng=RngSpec(seed))
    a = integrate_path(spec, cfg, backend="python")
    b = integrate_path(spec, cfg, backend="cython")
    assert np.array_equal(a.log_states, b.log_states, equal_nan=True)
    assert np.array_equal(a.integrals, b.integrals, equal_nan=True)


@compiled
def test_rk4_bit_identical():
    cfg = SolverConfig(5.0, 1e-3)
    a = integrate_deterministic(presets.oracle(), cfg, allow_degenerate=True, backend="python")
    b = integrate_deterministic(presets.oracle(), cfg, allow_degenerate=True, backend="cython")
    assert np.array_equal(a.states, b.states)


@compiled
def test_divergence_identical():
    from hollingjump.model import ModelSpec, SpeciesParams
    spec = ModelSpec(SpeciesParams(a=100.0, b=0.0, c=0.0), SpeciesParams(a=0.0, b=0.0, c=0.0),
                     m=1.0)
    cfg = SolverConfig(10.0, 1e-3)
    a = integrate_path(spec, cfg, allow_degenerate=True, backend="python")
    b = integrate_path(spec, cfg, allow_degenerate=True, backend="cython")
    assert a.diverged and b.diverged
    assert a.meta["diverged_at"] == b.meta["diverged_at"]


def test_env_forces_fallback():
    env = dict(os.environ, HOLLINGJUMP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import hollingjump; print(hollingjump.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
