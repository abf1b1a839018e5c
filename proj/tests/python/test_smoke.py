"""End-to-end smoke tests for the python bindings.

Run with PYTHONPATH pointing at the built package (the ctest target does
this); DECOH_CLI optionally names the command-line binary.
"""

import math
import os
import subprocess

import pytest

import decoh


def test_version():
    assert decoh.__version__ == "0.1.0"


def test_entropy_primitives():
    assert decoh.entropy_of_delta(1.0) == 0.0
    assert abs(decoh.entropy_of_delta(3.0) - math.log(4.0)) < 1e-12
    coth1 = 1.0 / math.tanh(1.0)
    assert decoh.free_thermal_area(2.0, 1.0) == pytest.approx(coth1, rel=1e-12)
    assert decoh.entropy_of_delta(coth1) == pytest.approx(0.45844874336819036, abs=1e-12)
    assert decoh.phase_space_area(0.5, 0.5) == pytest.approx(1.0, rel=1e-12)


def test_validation_errors_become_value_errors():
    with pytest.raises(ValueError):
        decoh.QftParams(m_phi=-1.0)
    with pytest.raises(ValueError):
        decoh.free_thermal_area(-2.0, 1.0)
    with pytest.raises(ValueError):
        # Coupling strong enough to make the stiffness matrix indefinite.
        decoh.build_model(1.0, [1.0], [1.2], 1.0)


def test_numerical_errors_become_runtime_errors():
    with pytest.raises(RuntimeError):
        decoh.phase_space_area(0.1, 0.1)  # far below the uncertainty bound
    t = [0.1 * i for i in range(200)]
    with pytest.raises(RuntimeError):
        decoh.extract_rate(t, [3.0] * len(t), 3.0, 1.0)  # nothing decays


def test_oscillator_roundtrip():
    model = decoh.build_model(1.0, [1.1, 1.2, 1.3, 1.4], [0.05] * 4, 2.0)
    times = [0.0, 0.5, 1.0, 2.0]
    series = decoh.qm_exact_series(model, times)
    assert series["s_system"][0] <= 1e-12
    total = series["s_total"]
    assert max(total) - min(total) <= 1e-10 * max(1.0, total[0])
    master = decoh.qm_master_series(model, times)
    assert master["entropy"][1] == pytest.approx(series["s_system"][1], abs=0.01)


def test_stationary_small():
    p = decoh.QftParams(m_phi=1.0, h=3.0, beta=0.5, k=1.0)
    sol = decoh.solve_stationary(p, n_grid=1024, lambda_factor=20.0)
    assert not sol.free_limit
    assert sol.delta_ms > decoh.free_thermal_area(p.beta, p.omega())
    assert abs(sol.sum_rule - 1.0) < 1e-3
    assert sol.s_ms == pytest.approx(decoh.entropy_of_delta(sol.delta_ms), rel=1e-12)


def test_run_and_read_series(tmp_path):
    out = decoh.run(
        "qm-run",
        {"n_bath": 4, "t_max": 5.0, "n_out": 11, "coupling": 0.05},
        str(tmp_path),
    )
    assert len(out["outputs"]) == 1
    series = decoh.read_series(out["outputs"][0])
    assert series["mode"] == "qm-run"
    assert len(series["columns"]) == 7
    assert series["columns"][0] == "t"
    assert len(series["data"]["t"]) == 11
    assert series["params"]["n_bath"] == 4
    assert "walltime_s" in series["meta"]
    with pytest.raises(ValueError):
        decoh.run("qm-run", {"bogus_key": 1}, str(tmp_path))


def test_cli_version():
    cli = os.environ.get("DECOH_CLI")
    if not cli:
        pytest.skip("DECOH_CLI not set")
    proc = subprocess.run([cli, "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "0.1.0" in proc.stdout
