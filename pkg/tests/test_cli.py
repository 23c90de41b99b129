import json

import numpy as np
import pytest

from fluctcov.cli import main


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# fluctcov ")
    return lines[1].split(","), [l.split(",") for l in lines[2:]]


def test_shifts_interval(tmp_path, capsys):
    cfg = write(tmp_path, {"interval": [-100.0, -1.0], "adi": {"j": 4}})
    assert main(["shifts", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "shifts.csv")
    assert header == ["j", "alpha_j", "rho_j", "theta_j", "theta_product_j", "bound_j"]
    alphas = [float(r[1]) for r in rows]
    theta = [float(r[3]) for r in rows]
    assert len(alphas) == 4 and all(-100 <= a <= -1 for a in alphas)
    assert all(x > y for x, y in zip(theta, theta[1:]))


def test_shifts_degenerate_interval(tmp_path):
    cfg = write(tmp_path, {"interval": [-3.0, -3.0], "adi": {"j": 2}})
    assert main(["shifts", "--config", cfg, "--out", str(tmp_path), "--format", "json"]) == 0
    d = json.loads((tmp_path / "shifts.json").read_text())
    assert [r[1] for r in d["rows"]] == [-3.0, -3.0]
    assert d["rows"][-1][3] == 0.0


def test_shifts_zero_is_usage_error(tmp_path):
    assert main(["shifts", "-j", "0", "--out", str(tmp_path)]) == 2
    assert main(["nonsense"]) == 2


def test_solve_default(tmp_path):
    assert main(["solve", "--out", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "solve.json").read_text())
    assert s["converged"] and s["final_residual"] <= 1e-10
    Z = np.loadtxt(tmp_path / "Z.csv", delimiter=",", skiprows=2)
    assert Z.shape == (s["N"], s["rank"])


def test_solve_json_writes_binary_factor(tmp_path):
    assert main(["solve", "--out", str(tmp_path), "--format", "json"]) == 0
    assert np.load(tmp_path / "Z.npy").shape[0] == 100


def test_solve_unstable_steady_state(tmp_path):
    cfg = write(tmp_path, {"problem": {"L": 10.0, "nonlinearity": {"name": "cubic", "mu": 1.0}},
                           "discretization": {"N": 30}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 3


def test_missing_config_is_io_error(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == 5


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["shifts", "--out", str(blocker / "sub")]) == 5


def test_solver_failure_exit_code(tmp_path, monkeypatch, capsys):
    import fluctcov.cli as cli
    from fluctcov.errors import SolverError

    def broken(*args, **kwargs):
        raise SolverError("iteration diverged at step 1")

    monkeypatch.setattr(cli, "lr_adi_run", broken)
    assert main(["solve", "--out", str(tmp_path)]) == 4
    assert "iteration diverged" in capsys.readouterr().err


@pytest.mark.parametrize("R", [1, 3])
def test_bounds(tmp_path, R):
    cfg = write(tmp_path, {"problem": {"R": R, "gamma": 1.0}, "discretization": {"N": 40}})
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "decay.csv")
    assert header == ["index", "sigma_i", "sigma_i_rel", "penzl", "sabino"]
    idx = [int(r[0]) for r in rows]
    assert idx[:3] == [R + 1, 2 * R + 1, 3 * R + 1]
    assert all(float(r[2]) <= float(r[4]) + 1e-12 for r in rows)


def test_bounds_size_guard(tmp_path, capsys):
    cfg = write(tmp_path, {"discretization": {"N": 2000}})
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "N <= 1000" in capsys.readouterr().err


def test_validate(tmp_path, capsys):
    cfg = write(tmp_path, {"problem": {"L": 10.0, "nonlinearity": {"name": "cubic", "mu": -1.0}},
                           "discretization": {"N": 12},
                           "sim": {"T": 0.5, "M": 200, "upsilon_sweep": [0.1, 0.01]}})
    assert main(["validate", "--config", cfg, "--out", str(tmp_path), "--seed", "4"]) == 0
    s = json.loads((tmp_path / "validate.json").read_text())
    assert s["sweep"][0]["sup_gap"] > s["sweep"][1]["sup_gap"]
    assert s["fitted_rate"] >= s["decay_rate_spectral"]
    for name in ("gap_0.csv", "gap_1.csv", "ode_vs_mc.csv", "relaxation.csv"):
        assert (tmp_path / name).exists()


def test_ceres(tmp_path, capsys):
    cfg = write(tmp_path, {"problem": {"gamma": 2.0, "R": 4},
                           "discretization": {"N": 25, "levels": [25, 50, 100], "reference": 401},
                           "sim": {"T": 0.05, "init_scale": 1.0}, "adi": {"j": 2}})
    assert main(["ceres", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "budget.csv")
    assert header == ["term", "bound", "measured", "dominant_flag"]
    assert [r[0] for r in rows] == ["err_s1", "err_s2", "err_s3", "err_s4", "total"]
    assert rows[3][3] == "1"
    assert "dominant term: err_s4" in capsys.readouterr().out
