import json
import math
import subprocess
import sys

import pytest

from prevci.cli import RunReport, main, read_results_csv


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_cp_json(capsys):
    code, out, _ = run(["ci", "--method", "cp", "--x", "0", "--n", "10"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["schema_version"] == 1
    assert rep["lower"] == 0.0
    assert rep["upper"] == pytest.approx(1 - 0.025 ** 0.1, abs=1e-9)
    assert rep["mc_samples"] is None and rep["seed"] is None
    assert rep["input_digest"].startswith("sha256:")


def test_report_round_trip(capsys):
    code, out, _ = run(
        ["ci", "--method", "meld-srs", "--x", "5", "--n", "100", "--spec-x", "3", "--spec-n", "300",
         "--sens-x", "57", "--sens-n", "60", "--seed", "1", "--mc", "5000"],
        capsys,
    )
    assert code == 0
    line = out.strip()
    rep = RunReport.from_json(line)
    assert rep.to_json() == line
    assert rep.seed == 1 and rep.mc_samples == 5000
    assert rep.corrected == pytest.approx(0.04 / 0.94)


def test_text_format(capsys):
    code, out, _ = run(["ci", "--method", "cp", "--x", "0", "--n", "10", "--format", "text"], capsys)
    assert code == 0
    assert out.strip() == "cp: 0.00% to 30.85% (95% CI); apparent 0.00%, corrected 0.00%"


def test_lr_with_strata_rejected(tmp_path, capsys):
    f = tmp_path / "s.csv"
    f.write_text("stratum,weight,n,x\na,0.5,10,1\nb,0.5,10,0\n")
    code, _, err = run(
        ["ci", "--method", "lr", "--stratum-file", str(f), "--spec-x", "3", "--spec-n", "300",
         "--sens-x", "57", "--sens-n", "60"],
        capsys,
    )
    assert code == 2
    assert "Lang-Reiczigel requires a simple random sample (one stratum)" in err


def test_seed_required_for_mc(capsys):
    code, _, err = run(
        ["ci", "--method", "meld-srs", "--x", "5", "--n", "100", "--spec-x", "3", "--spec-n", "300",
         "--sens-x", "57", "--sens-n", "60"],
        capsys,
    )
    assert code == 2 and "--seed" in err


def test_missing_calibration(capsys):
    code, _, err = run(["ci", "--method", "lr", "--x", "5", "--n", "100"], capsys)
    assert code == 2 and "calibration" in err


def test_degenerate_assay_exit_3(capsys):
    code, _, _ = run(
        ["ci", "--method", "lr", "--x", "5", "--n", "100", "--spec-x", "10", "--spec-n", "10",
         "--sens-x", "0", "--sens-n", "10"],
        capsys,
    )
    assert code == 3


def test_stratum_renormalization_warning(tmp_path, capsys):
    f = tmp_path / "s.csv"
    f.write_text("stratum,weight,n,x\na,0.5,100,3\nb,0.5000005,100,1\n")
    code, out, _ = run(["ci", "--method", "wspoisson", "--stratum-file", str(f)], capsys)
    assert code == 0
    rep = json.loads(out)
    assert any("renormalized" in w for w in rep["warnings"])


def test_stratum_bad_sum_rejected(tmp_path, capsys):
    f = tmp_path / "s.csv"
    f.write_text("stratum,weight,n,x\na,0.5,100,3\nb,0.6,100,1\n")
    code, _, _ = run(["ci", "--method", "kg", "--stratum-file", str(f)], capsys)
    assert code == 2


@pytest.mark.parametrize(
    "body, where",
    [
        ("stratum,weight,n,x\na,0.5,100,3\nb,zero,100,1\n", ":3:"),
        ("stratum,weight,n,x\na,0.5,100,300\nb,0.5,100,1\n", ":2:"),
        ("stratum,weight,n,x\na,0.5,100,3\na,0.5,100,1\n", ":3:"),
        ("stratum,w,n,x\na,1,100,3\n", ":1:"),
    ],
)
def test_stratum_file_errors_report_line(tmp_path, capsys, body, where):
    f = tmp_path / "s.csv"
    f.write_text(body)
    code, _, err = run(["ci", "--method", "kg", "--stratum-file", str(f)], capsys)
    assert code == 2 and where in err


def test_individual_file(tmp_path, capsys):
    f = tmp_path / "i.csv"
    f.write_text("weight,positive\n2,1\n1,0\n1,0\n")
    code, out, _ = run(["ci", "--method", "wspoisson", "--individual-file", str(f)], capsys)
    assert code == 0
    assert json.loads(out)["estimate"]["apparent"] == pytest.approx(0.5)


def test_missing_input_file_exit_4(tmp_path, capsys):
    code, _, _ = run(["ci", "--method", "kg", "--stratum-file", str(tmp_path / "nope.csv")], capsys)
    assert code == 4


def test_exactly_one_input_mode(tmp_path, capsys):
    code, _, _ = run(["ci", "--method", "cp"], capsys)
    assert code == 2


def write_scenario(tmp_path, **kw):
    d = dict(prevalence=0.02, n_strata=6, stratum_size=40, cv_target=1.0, replicates=40,
             methods=["wspoisson", "kg"], weight_sets=2, seed=5)
    d.update(kw)
    p = tmp_path / "scn.json"
    p.write_text(json.dumps(d))
    return p


def test_simulate_csv_round_trip(tmp_path, capsys):
    out = tmp_path / "o.csv"
    code, _, _ = run(["simulate", str(write_scenario(tmp_path)), "--out", str(out)], capsys)
    assert code == 0
    rows = read_results_csv(out)
    assert len(rows) == 4
    for r in rows:
        assert r["coverage"] + r["lower_error"] + r["upper_error"] == pytest.approx(1)
        assert r["seed"] == 5
    assert rows[0]["cv_actual"] == 0.0


def test_simulate_infeasible_exit_3(tmp_path, capsys):
    p = write_scenario(tmp_path, n_strata=2, cv_target=3.0)
    code, _, _ = run(["simulate", str(p), "--out", str(tmp_path / "o.csv")], capsys)
    assert code == 3


def test_simulate_unknown_key_exit_2(tmp_path, capsys):
    p = write_scenario(tmp_path, colour="blue")
    code, _, err = run(["simulate", str(p), "--out", str(tmp_path / "o.csv")], capsys)
    assert code == 2 and "colour" in err


def test_simulate_unwritable_output_exit_4(tmp_path, capsys):
    p = write_scenario(tmp_path)
    code, _, _ = run(["simulate", str(p), "--out", str(tmp_path / "missing" / "o.csv")], capsys)
    assert code == 4


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "prevci", "ci", "--method", "cp", "--x", "1", "--n", "4"],
                       capture_output=True, text=True, check=True)
    rep = json.loads(r.stdout)
    assert 0 < rep["lower"] < 0.25 < rep["upper"] < 1
    assert math.isfinite(rep["upper"])
