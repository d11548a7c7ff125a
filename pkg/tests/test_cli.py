"""Command-line interface: exit codes, artifacts, determinism."""

import json
import math
from pathlib import Path

import pytest

from ricplan.cli import main


def write_json(path, payload):
    path.write_text(json.dumps(payload, indent=2))
    return str(path)


def low_load_doc(**overrides):
    doc = {
        "classes": [{"id": "A", "msg_size": 100.0, "msg_period": 1.0}],
        "servers": [
            {"id": "s1", "optional": False, "cpu_cap": 128.0,
             "mem_cap": 125.0, "disk_cap": 250.0},
            {"id": "s2", "optional": True, "cpu_cap": 128.0,
             "mem_cap": 125.0, "disk_cap": 250.0},
            {"id": "s3", "optional": True, "cpu_cap": 128.0,
             "mem_cap": 125.0, "disk_cap": 250.0},
            {"id": "s4", "optional": True, "cpu_cap": 128.0,
             "mem_cap": 125.0, "disk_cap": 250.0},
        ],
        "initial_counts": {"A": [3, 3, 2, 2]},
        "params": {"state_size": 1.0e6, "strategy": "sm-mr"},
    }
    doc.update(overrides)
    return doc


def sweep_doc(**overrides):
    doc = {
        "classes": [{"id": "A", "msg_size": 100.0, "msg_period": 1.0}],
        "dominant_class": "A",
        "count_range": [4, 10],
        "rho_list_mb": [1.0],
        "nu_list_s": [1.0],
        "strategies": ["sm-mr"],
    }
    doc.update(overrides)
    return doc


@pytest.fixture
def scenario(tmp_path):
    return write_json(tmp_path / "scenario.json", low_load_doc())


def test_plan_writes_artifacts(tmp_path, scenario, capsys):
    out = tmp_path / "out"
    rc = main(["plan", "--scenario", scenario, "--out", str(out)])
    assert rc == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("status=optimal")
    assert "activation_ratio=0.25" in line

    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "optimal"
    assert math.isclose(report["objective_j"], 566277.0, rel_tol=1e-6)
    assert math.isclose(report["energy_gain"], 0.694149, rel_tol=1e-6)
    assert report["runtime_s"] is None

    plan = json.loads((out / "plan.json").read_text())
    assert plan["mu"] == [1, 0, 0, 0]
    assert sum(sum(r) for r in plan["x"]["A"]) == 10


def test_plan_infeasible_exits_2(tmp_path, capsys):
    doc = low_load_doc(initial_counts={"A": [16, 15, 15, 15]},
                       params={"state_size": 1.0e6, "strategy": "sdl"})
    scenario = write_json(tmp_path / "s.json", doc)
    out = tmp_path / "out"
    rc = main(["plan", "--scenario", scenario, "--out", str(out)])
    assert rc == 2
    assert "status=infeasible" in capsys.readouterr().out
    report = json.loads((out / "report.json").read_text())
    assert report["objective_j"] is None
    assert not (out / "plan.json").exists()


def test_plan_time_limit_exits_0(tmp_path, capsys):
    doc = low_load_doc(limits={"time_limit": 0.0})
    scenario = write_json(tmp_path / "s.json", doc)
    out = tmp_path / "out"
    rc = main(["plan", "--scenario", scenario, "--out", str(out)])
    assert rc == 0
    assert "status=time_limit" in capsys.readouterr().out
    assert (out / "plan.json").exists()


def test_plan_strategy_override(tmp_path, capsys):
    doc = low_load_doc()
    del doc["params"]["strategy"]
    scenario = write_json(tmp_path / "s.json", doc)
    out = tmp_path / "out"
    rc = main(["plan", "--scenario", scenario, "--out", str(out)])
    assert rc == 1
    assert "params.strategy" in capsys.readouterr().err
    rc = main(["plan", "--scenario", scenario, "--strategy", "sm-mr",
               "--out", str(out)])
    assert rc == 0


def test_plan_deterministic_bytes(tmp_path, scenario):
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["plan", "--scenario", scenario, "--out", str(out1)]) == 0
    assert main(["plan", "--scenario", scenario, "--out", str(out2)]) == 0
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    assert (out1 / "plan.json").read_bytes() == (out2 / "plan.json").read_bytes()


def test_plan_emit_runtime(tmp_path, scenario):
    out = tmp_path / "out"
    rc = main(["plan", "--scenario", scenario, "--out", str(out),
               "--emit-runtime"])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert isinstance(report["runtime_s"], float)


def test_scenario_errors_exit_1(tmp_path, capsys):
    bad = write_json(tmp_path / "bad.json", low_load_doc(bogus=1))
    assert main(["plan", "--scenario", bad, "--out", str(tmp_path)]) == 1
    assert "bogus" in capsys.readouterr().err

    doc = low_load_doc(initial_counts={"A": [3, 3]})
    mismatched = write_json(tmp_path / "dim.json", doc)
    assert main(["plan", "--scenario", mismatched, "--out", str(tmp_path)]) == 1
    assert "initial_counts" in capsys.readouterr().err

    assert main(["plan", "--scenario", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path)]) == 1
    assert "cannot read" in capsys.readouterr().err


def test_usage_error_exits_1():
    with pytest.raises(SystemExit) as exc:
        main(["plan"])  # missing required --scenario/--out
    assert exc.value.code == 1


def test_feasibility_csv_and_summary(tmp_path, scenario, capsys):
    sweep = write_json(tmp_path / "grid.json",
                       sweep_doc(count_range=list(range(0, 71)),
                                 strategies=["sdl", "sm-md"]))
    out = tmp_path / "out"
    rc = main(["feasibility", "--scenario", scenario, "--sweep", sweep,
               "--out", str(out)])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert "sdl rho_mb=1 nu_s=1 max_feasible=60" in lines
    assert "sm-md rho_mb=1 nu_s=1 max_feasible=52" in lines

    csv_lines = (out / "feasibility.csv").read_text().splitlines()
    assert csv_lines[0] == ("strategy,class,rho_mb,nu_s,n_total,feasible,"
                            "energy_gain,activation_ratio,mip_gap,runtime_s")
    assert len(csv_lines) == 1 + 2 * 71
    row61 = next(l for l in csv_lines if l.startswith("sdl,A,1,1,61,"))
    assert row61.split(",")[5] == "false"


def test_feasibility_empty_range_header_only(tmp_path, scenario):
    sweep = write_json(tmp_path / "grid.json", sweep_doc(count_range=[]))
    out = tmp_path / "out"
    rc = main(["feasibility", "--scenario", scenario, "--sweep", sweep,
               "--out", str(out)])
    assert rc == 0
    csv_lines = (out / "feasibility.csv").read_text().splitlines()
    assert len(csv_lines) == 1


def test_sweep_rows(tmp_path, scenario, capsys):
    sweep = write_json(tmp_path / "grid.json", sweep_doc())
    out = tmp_path / "out"
    rc = main(["sweep", "--scenario", scenario, "--sweep", sweep,
               "--out", str(out), "--solver", "bnb"])
    assert rc == 0
    assert "wrote 2 rows" in capsys.readouterr().out
    csv_lines = (out / "sweep.csv").read_text().splitlines()
    assert len(csv_lines) == 3
    # runtime column stays blank for byte-stable output
    assert all(l.endswith(",") for l in csv_lines[1:])


def test_sweep_deterministic_bytes(tmp_path, scenario):
    sweep = write_json(tmp_path / "grid.json", sweep_doc())
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    for out in (out1, out2):
        assert main(["sweep", "--scenario", scenario, "--sweep", sweep,
                     "--out", str(out), "--solver", "greedy"]) == 0
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()


def test_validate_round_trip(tmp_path, scenario, capsys):
    out = tmp_path / "out"
    assert main(["plan", "--scenario", scenario, "--out", str(out)]) == 0
    capsys.readouterr()
    rc = main(["validate", "--scenario", scenario,
               "--plan", str(out / "plan.json")])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "valid"


def test_validate_hand_edit_exits_3(tmp_path, scenario, capsys):
    out = tmp_path / "out"
    assert main(["plan", "--scenario", scenario, "--out", str(out)]) == 0
    capsys.readouterr()
    doc = json.loads((out / "plan.json").read_text())
    # reroute one migration onto a server the plan powers down
    doc["x"]["A"][1][0] -= 1
    doc["x"]["A"][1][1] += 1
    edited = write_json(tmp_path / "edited.json", doc)
    rc = main(["validate", "--scenario", scenario, "--plan", edited])
    assert rc == 3
    assert "violated (17)" in capsys.readouterr().out


def test_validate_unreadable_plan_exits_1(tmp_path, scenario, capsys):
    missing = tmp_path / "nope.json"
    rc = main(["validate", "--scenario", scenario, "--plan", str(missing)])
    assert rc == 1
    assert "cannot read plan" in capsys.readouterr().err


def test_fit_exact_line(tmp_path, capsys):
    csv_path = tmp_path / "m.csv"
    csv_path.write_text("predictor,response\n0,0\n10,105.5\n20,211.0\n")
    rc = main(["fit", "--measurements", str(csv_path),
               "--label", "kpi.sm-mr.1.0.d"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["slope"] == 10.55
    assert abs(doc["intercept"]) < 1e-9
    assert abs(doc["rms"]) < 1e-9
    assert doc["fragment"]["kpi"]["sm-mr"]["1.0"]["delta_d"] == 10.55


def test_fit_sigma_label(tmp_path, capsys):
    csv_path = tmp_path / "m.csv"
    csv_path.write_text("predictor,response\n0,0\n1,16.62\n2,33.24\n")
    rc = main(["fit", "--measurements", str(csv_path),
               "--label", "sigma.A.1.0.1.0"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert math.isclose(doc["slope"], 16.62, rel_tol=1e-9)


def test_fit_single_row_exits_2(tmp_path, capsys):
    csv_path = tmp_path / "m.csv"
    csv_path.write_text("predictor,response\n1,2\n")
    rc = main(["fit", "--measurements", str(csv_path),
               "--label", "kpi.sm-mr.1.0.d"])
    assert rc == 2
    assert "degenerate" in capsys.readouterr().err.lower()


def test_fit_duplicate_predictors_exit_2(tmp_path):
    csv_path = tmp_path / "m.csv"
    csv_path.write_text("predictor,response\n1,2\n1,3\n")
    rc = main(["fit", "--measurements", str(csv_path),
               "--label", "kpi.sm-mr.1.0.d"])
    assert rc == 2


def test_fit_bad_label_exits_1(tmp_path, capsys):
    csv_path = tmp_path / "m.csv"
    csv_path.write_text("predictor,response\n0,0\n1,1\n")
    rc = main(["fit", "--measurements", str(csv_path), "--label", "nonsense"])
    assert rc == 1
    assert "label" in capsys.readouterr().err


def test_fit_fragment_loads_back(tmp_path, capsys):
    from ricplan import load_calibration
    from ricplan.calibration import lookup
    csv_path = tmp_path / "m.csv"
    csv_path.write_text("predictor,response\n0,1\n10,2\n20,4\n")
    rc = main(["fit", "--measurements", str(csv_path),
               "--label", "sdl_linear.A.E"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    merged = load_calibration(doc["fragment"])
    assert lookup(merged, "sdl_linear", cls="A", metric="E",
                  coeff="delta") == doc["slope"]
