import csv
import subprocess
import sys

import pytest

from qeraser.cli import fmt, parse_config, run_command


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summary(out):
    return {(r["claim"], r["quantity"]): float(r["value"]) for r in read_csv(out / "summary.csv")}


def test_mzi_montecarlo_contract(tmp_path):
    code = run_command(["--model", "mzi", "--order", "delayed", "--wwd-basis", "x",
                        "--mode", "montecarlo", "--trials", "1000", "--seed", "7",
                        "--out-dir", str(tmp_path)])
    assert code == 0
    rows = read_csv(tmp_path / "trials.csv")
    assert len(rows) == 1000
    assert list(rows[0]) == ["trial_id", "order", "first_label", "second_label", "seed"]
    assert {(r["first_label"], r["second_label"]) for r in rows} <= {("D1", "plus"), ("D2", "minus")}
    assert all(r["seed"] == "7" and r["order"] == "delayed" for r in rows)


def test_mzi_without_detector(tmp_path):
    assert run_command(["--model", "mzi", "--wwd", "off", "--mode", "analytic",
                        "--out-dir", str(tmp_path)]) == 0
    s = summary(tmp_path)
    assert s[("mzi_bright_d1", "P(D1)")] == pytest.approx(1, abs=1e-12)
    assert s[("mzi_bright_d1", "P(D2)")] == pytest.approx(0, abs=1e-12)


def test_bad_order_is_usage_error(capsys):
    assert run_command(["--model", "mzi", "--order", "sideways"]) == 2
    assert "usage:" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["--mode", "montecarlo"],
    ["--mode", "montecarlo", "--trials", "-5"],
    ["--seed", "-1"],
    ["--model", "twoslit", "--wwd", "off"],
    ["--wwd", "off", "--wwd-basis", "x"],
    ["--eta", "0"],
    ["--model", "spins", "--predict"],
])
def test_usage_errors(argv, capsys):
    assert run_command(argv) == 2
    assert "usage:" in capsys.readouterr().err


def test_bad_geometry_is_usage_error(tmp_path, capsys):
    code = run_command(["--model", "twoslit", "--width", "1", "--out-dir", str(tmp_path)])
    assert code == 2
    assert "usage:" in capsys.readouterr().err


def test_runtime_error_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run_command(["--out-dir", str(blocker / "sub")]) == 1


def test_twoslit_fringes_schema(tmp_path):
    assert run_command(["--model", "twoslit", "--order", "delayed", "--wwd-basis", "x",
                        "--mode", "montecarlo", "--trials", "20000", "--seed", "3",
                        "--out-dir", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "fringes.csv")
    assert list(rows[0]) == ["bin_center", "count_total", "count_plus", "count_minus"]
    assert len(rows) == 201
    assert all(int(r["count_plus"]) + int(r["count_minus"]) == int(r["count_total"]) for r in rows)


def test_twoslit_analytic_plot_data(tmp_path):
    assert run_command(["--model", "twoslit", "--out-dir", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "fringes.csv")
    assert list(rows[0]) == ["bin_center", "pdf_none", "pdf_plus", "pdf_minus"]
    s = summary(tmp_path)
    assert s[("fringe_decomposition", "max |p/2 + m/2 - none|")] <= 1e-12
    assert s[("fringe_complementarity", "plus peaks == minus troughs")] == 1


def test_spins_summary(tmp_path):
    assert run_command(["--model", "spins", "--out-dir", str(tmp_path)]) == 0
    s = summary(tmp_path)
    assert s[("spin_z_correlation", "P(z1 = z2)")] == pytest.approx(1, abs=1e-12)
    assert s[("spin_x_correlation", "P(x1 = x2)")] == pytest.approx(1, abs=1e-12)
    assert s[("spin_cross_basis_null", "P(x2=plus|z1=down)")] == pytest.approx(0.5, abs=1e-12)


def test_every_summary_row_is_tagged(tmp_path):
    for model in ("mzi", "twoslit", "spins"):
        out = tmp_path / model
        assert run_command(["--model", model, "--mode", "montecarlo", "--trials", "500",
                            "--out-dir", str(out)]) == 0
        rows = read_csv(out / "summary.csv")
        assert rows and all(r["claim"] for r in rows)


@pytest.mark.parametrize("model", ["mzi", "twoslit"])
def test_outputs_are_byte_identical(tmp_path, model):
    args = ["--model", model, "--mode", "montecarlo", "--trials", "3000", "--seed", "11", "--predict"]
    assert run_command(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert run_command(args + ["--out-dir", str(tmp_path / "b")]) == 0
    for name in ("trials.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_predict_columns(tmp_path):
    assert run_command(["--mode", "montecarlo", "--trials", "200", "--predict",
                        "--out-dir", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "trials.csv")
    assert list(rows[0])[-2:] == ["predicted", "prediction_match"]
    assert all(r["prediction_match"] == "1" for r in rows)
    assert summary(tmp_path)[("prediction", "match frequency")] == 1


def test_no_temp_files_left(tmp_path):
    run_command(["--out-dir", str(tmp_path)])
    assert sorted(p.name for p in tmp_path.iterdir()) == ["summary.csv"]


def test_zero_trials(tmp_path):
    assert run_command(["--mode", "montecarlo", "--trials", "0", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "trials.csv").read_text() == "trial_id,order,first_label,second_label,seed\n"


def test_number_format():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(1e-20) == "1e-20"
    assert fmt(True) == "1"


def test_defaults():
    cfg = parse_config([])
    assert (cfg.model, cfg.order, cfg.wwd_basis, cfg.bins) == ("mzi", "delayed", "x", 201)
    assert parse_config(["--wwd", "off"]).wwd_basis == "none"


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "qeraser.cli", "--model", "spins",
                          "--out-dir", str(tmp_path)], capture_output=True)
    assert res.returncode == 0
    assert (tmp_path / "summary.csv").exists()
