import csv
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from cw_armijo.cli import main
from cw_armijo.experiment import (
    ConfigError,
    load_schema,
    read_trajectory_csv,
    validate_config,
    validate_summary,
)
from cw_armijo.objectives import builtin

ROSEN = ["--function", "rosenbrock", "--x0", "0.55134554", "0.75134554"]


def _summary(out):
    return json.loads((out / "summary.json").read_text())


def test_list_functions(capsys):
    assert main(["list-functions"]) == 0
    text = capsys.readouterr().out
    assert "rosenbrock" in text and "abs_plus_linear(a)" in text


def test_run_backtracking_rosenbrock(tmp_path):
    assert main(["run", *ROSEN, "--method", "backtracking", "--out", str(tmp_path)]) == 0
    s = _summary(tmp_path)
    validate_summary(s)
    assert s["status"] == "ConvergedGradTol"
    assert np.max(np.abs(np.array(s["final_point"]) - 1.0)) < 1e-6
    assert s["hyperparameters"]["method"] == "backtracking"
    assert s["diagnostics"]["descent_audit"]["max_violation"] <= 1e-10


def test_trajectory_header(tmp_path):
    main(["run", *ROSEN, "--max-iter", "5", "--out", str(tmp_path)])
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert header == "iter,z_1,z_2,f,grad_norm,delta_1,delta_2,order"


def test_expected_divergence_exits_zero(tmp_path):
    code = main(["run", "--function", "abs_plus_linear", "--params", '{"a": 2}', "--x0", "0.1", "0",
                 "--order", "y-first", "--diverge-value", "-1000", "--expect-diverge",
                 "--out", str(tmp_path)])
    assert code == 0
    assert _summary(tmp_path)["status"] == "DivergedValue"


def test_divergence_without_flag_is_an_anomaly(tmp_path):
    code = main(["run", "--function", "linear", "--x0", "0", "--diverge-value", "-100",
                 "--out", str(tmp_path)])
    assert code == 2
    assert _summary(tmp_path)["status"] == "DivergedValue"


def test_max_iterations_is_an_anomaly(tmp_path):
    assert main(["run", *ROSEN, "--max-iter", "3", "--out", str(tmp_path)]) == 2


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"function": "quadratic", "params": {"c": [1, 4]}, "z0": [1, 1],
                               "method": "standard", "standard_rate": 0.1}))
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--method", "coordinatewise", "--out", str(out)]) == 0
    s = _summary(out)
    assert s["hyperparameters"]["method"] == "coordinatewise"
    assert s["problem"]["params"] == {"c": [1, 4]}


def test_malformed_json_reports_location(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"function": "rosenbrock",\n "z0": [1, 2],}')
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "line 2, column" in capsys.readouterr().err


@pytest.mark.parametrize("cfg,path", [
    ({"function": "rosenbrock", "z0": [1, "a"]}, "$.z0[1]"),
    ({"function": "rosenbrock", "z0": [1, 2], "alpha": 1.5}, "$.alpha"),
    ({"function": "rosenbrock", "z0": [1, 2], "colour": "red"}, "$"),
    ({"function": "rosenbrock", "expr": "x", "z0": [1, 2]}, "$"),
    ({"function": "rosenbrock"}, "$"),
])
def test_schema_violations_carry_paths(cfg, path):
    with pytest.raises(ConfigError) as info:
        validate_config(cfg)
    assert info.value.path == path


def test_bad_expression_exits_one(tmp_path, capsys):
    assert main(["run", "--expr", "x +* y", "--x0", "1", "2", "--out", str(tmp_path)]) == 1
    assert "position" in capsys.readouterr().err


def test_wrong_start_length_exits_one(tmp_path):
    assert main(["run", "--function", "rosenbrock", "--x0", "1", "--out", str(tmp_path)]) == 1


def test_bad_params_json(tmp_path):
    assert main(["run", "--function", "abs_plus_linear", "--params", "{a: 2}", "--x0", "1", "1",
                 "--out", str(tmp_path)]) == 1


def test_csv_round_trip(tmp_path):
    main(["run", "--function", "cube_sin_2d", "--x0", "0.55134554", "0.75134554",
          "--out", str(tmp_path)])
    data = read_trajectory_csv(tmp_path / "trajectory.csv")
    obj = builtin("cube_sin_2d")
    for z, f in zip(data["z"], data["f"]):
        assert abs(obj.fun(z) - f) <= 1e-12 * max(abs(f), 1e-300)
    assert np.isnan(data["delta"][-1]).all()


def test_expression_run(tmp_path):
    assert main(["run", "--expr", "(x-1)^2 + 10*(y+2)^2", "--x0=-1,3", "--out", str(tmp_path)]) == 0
    s = _summary(tmp_path)
    assert s["problem"]["expr"] == "(x-1)^2 + 10*(y+2)^2"
    np.testing.assert_allclose(s["final_point"], [1.0, -2.0], atol=1e-6)


def test_summary_schema_is_valid_schema():
    jsonschema.Draft202012Validator.check_schema(load_schema("summary.schema.json"))
    jsonschema.Draft202012Validator.check_schema(load_schema("config.schema.json"))


def test_non_finite_summary_serializes(tmp_path):
    code = main(["run", "--function", "quartic_1d", "--x0", "10", "--method", "standard",
                 "--standard-rate", "1", "--diverge-norm", "1e300", "--out", str(tmp_path)])
    assert code == 2
    s = _summary(tmp_path)
    validate_summary(s)
    assert s["status"] == "NumericalOverflow" and s["final_f"] is None


def test_compare(tmp_path, capsys):
    assert main(["compare", *ROSEN, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "compare.csv").read_text().splitlines()
    assert rows[0] == "method,status,iterations,final_f,final_grad_norm"
    table = {r.split(",")[0]: r.split(",")[1] for r in rows[1:]}
    assert table["standard"] in ("NumericalOverflow", "DivergedNorm")
    assert table["coordinatewise(x-first)"] == table["coordinatewise(y-first)"] == "ConvergedGradTol"
    assert "backtracking" in capsys.readouterr().out


def test_compare_quadratic_all_converge(tmp_path):
    main(["compare", "--function", "quadratic", "--x0", "1", "-2", "--standard-rate", "0.5",
          "--out", str(tmp_path)])
    rows = (tmp_path / "compare.csv").read_text().splitlines()[1:]
    assert all(",ConvergedGradTol," in r for r in rows)


def test_sweep_small_and_deterministic(tmp_path, monkeypatch):
    args = ["sweep", "--function", "quadratic", "--params", '{"c": [1, 30]}', "--x0", "1", "1",
            "--alphas", "0.5,0.25", "--betas", "0.5", "--delta0s", "1,2"]
    monkeypatch.setenv("CW_ARMIJO_THREADS", "2")
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("CW_ARMIJO_THREADS", "1")
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    lines = a.decode().splitlines()
    assert len(lines) == 1 + 4 * 3
    assert lines[1].startswith("0.25,0.5,1.0,backtracking,-,")


def test_sweep_empty_grid(tmp_path):
    assert main(["sweep", *ROSEN, "--alphas", "", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "sweep.csv").read_text() == \
        "alpha,beta,delta0,method,order,status,iterations,final_f,final_grad_norm\n"


def test_sweep_rejects_bad_grid(tmp_path):
    assert main(["sweep", *ROSEN, "--alphas", "1.5", "--out", str(tmp_path)]) == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cw_armijo", "list-functions"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "cube_sin_1d" in proc.stdout


@pytest.mark.parametrize("argv", [[], ["run", "--method", "newton"], ["frobnicate"]])
def test_usage_errors_exit_one(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 1


def test_reproduce_report(tmp_path):
    assert main(["reproduce-paper", "--no-sweep", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "report.md").read_text()
    rows = list(csv.DictReader((tmp_path / "report.csv").open()))
    assert {r["label"] for r in rows} <= {"matched-quantitatively", "matched-qualitatively",
                                          "not-matched"}
    limit = next(r for r in rows if r["quantity"] == "backtracking: limit")
    assert 0.2 <= float(limit["observed"].split()[0]) <= 0.3
    assert any("DivergedValue" in r["observed"] and "coordinate-wise" in r["quantity"] for r in rows)
    assert any(r["quantity"].startswith("standard GD rate") and "Rosenbrock" in r["experiment"]
               and r["observed"].startswith(("DivergedNorm", "NumericalOverflow")) for r in rows)
    for reported in ["381", "0.24520926", "2e-09", "2433", "13342", "4553", "overflow",
                     "divergence to (0, -inf)"]:
        assert reported in text
