import csv
import io
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import pytest

from cvrealign.cli import main, read_config, run_sweep

GOLDEN = Path(__file__).parent / "golden"
FIELDS = ["command", "inputs", "value", "threshold", "entangled", "branch", "lower_bound_only", "notes"]

# name -> (argv, expected exit code); outputs pinned in tests/golden/<name>.jsonl
CASES = {
    "gaussian_vacuum": (["gaussian", "--b0", "0.5", "--c1", "0", "--c2", "0"], 3),
    "gaussian_tmsv": (["gaussian", "--b0", "0.8333333", "--c1", "-0.6666667", "--c2", "0"], 2),
    "gaussian_separable": (["gaussian", "--b0", "1.5", "--c1", "0.5", "--c2", "0.1"], 0),
    "gaussian_nonsymmetric": (["gaussian", "--b1", "0.9", "--b2", "0.8", "--c1", "-0.6"], 2),
    "photon_add": (["photon", "--lambda", "0.5", "--op", "add"], 2),
    "photon_kernel_m2": (["photon", "--b0", "1.2", "--c1", "-0.8", "--c2", "0.25", "--m", "2"], 2),
    "evolve_sub": (["evolve", "--state", "sub", "--lambda", "0.5", "--gammat", "0.3", "--nbar", "0.5"], 2),
    "evolve_tmsv_rate": (["evolve", "--state", "tmsv", "--lambda", "0.5", "--rate", "0.5", "--time", "2"], 2),
    "critical_time_add": (
        ["critical-time", "--state", "sub", "--lambda", "0.5", "--nbar", "0.5", "--criterion", "second-moment-add"],
        0,
    ),
    "critical_time_none": (
        ["critical-time", "--state", "add", "--lambda", "0.5", "--criterion", "second-moment"],
        0,
    ),
    "mixture": (["mixture", "--w1", "-0.3", "--w2", "0.2", "--p", "0.5"], 2),
}


def run(argv, env=None):
    out = io.StringIO()
    if env:
        old = {k: os.environ.get(k) for k in env}
        os.environ.update(env)
    try:
        code = main(argv, out)
    finally:
        if env:
            for k, v in old.items():
                if v is None:
                    os.environ.pop(k, None)
                else:
                    os.environ[k] = v
    return code, out.getvalue()


def records(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def assert_close(a, b, path="$"):
    if isinstance(a, float) or isinstance(b, float):
        assert isinstance(a, (int, float)) and isinstance(b, (int, float)), path
        assert a == pytest.approx(b, rel=1e-9, abs=1e-12), path
    elif isinstance(a, dict):
        assert set(a) == set(b), path
        for k in a:
            assert_close(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            assert_close(x, y, f"{path}[{i}]")
    else:
        assert a == b, path


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden_output(name):
    argv, expected_code = CASES[name]
    code, text = run(argv)
    assert code == expected_code
    path = GOLDEN / f"{name}.jsonl"
    if os.environ.get("CVREAL_REGEN_GOLDEN"):
        path.write_text(text)
    got = records(text)
    for rec in got:
        assert list(rec) == FIELDS
    assert_close(got, records(path.read_text()))


def test_spec_examples():
    assert records(run(CASES["gaussian_vacuum"][0])[1])[0]["value"] == 1.0
    rec = records(run(CASES["gaussian_tmsv"][0])[1])[0]
    assert rec["value"] == pytest.approx(3.0, abs=1e-5) and rec["entangled"]
    rec = records(run(CASES["critical_time_add"][0])[1])[0]
    assert rec["value"] == pytest.approx(math.log(1.4), abs=1e-9)
    assert records(run(CASES["critical_time_none"][0])[1])[0]["value"] is None


def test_unphysical_input_is_flagged():
    code, text = run(["gaussian", "--b0", "0.6", "--c1", "0.5"])
    assert "unphysical" in records(text)[0]["notes"]["detail"]


@pytest.mark.parametrize(
    "argv",
    [
        ["gaussian", "--b0", "abc"],
        ["gaussian", "--b1", "1.0"],
        ["nosuchcommand"],
        ["evolve", "--state", "sub"],
        ["evolve", "--lambda", "0.5", "--rate", "1.0"],
        ["evolve", "--lambda", "0.5", "--gammat", "1", "--rate", "1", "--time", "1"],
        ["evolve", "--state", "tmsv", "--lambda", "0.5", "--criterion", "second-moment"],
        ["evolve", "--lambda", "1.5"],
        ["critical-time", "--lambda", "0.5", "--criterion", "entropy"],
        ["photon", "--lambda", "0.5", "--m", "0"],
        ["sweep", "--param", "lambda", "--from", "0.5", "--to", "0.1", "--steps", "3"],
        ["sweep", "--param", "lambda", "--from", "0.1", "--to", "0.5", "--steps", "1"],
        ["sweep", "--param", "gammat", "--from", "0", "--to", "1", "--steps", "3"],
        ["sweep", "--param", "p", "--from", "0", "--to", "1", "--steps", "3", "--w1", "-0.2"],
    ],
)
def test_usage_errors_exit_one(argv, capsys):
    try:
        code = main(argv, io.StringIO())
    except SystemExit as exc:
        code = exc.code
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_console_script_exit_codes():
    exe = [sys.executable, "-m", "cvrealign"]
    res = subprocess.run(exe + ["gaussian", "--b0", "0.5"], capture_output=True, text=True)
    assert res.returncode == 3 and json.loads(res.stdout)["value"] == 1.0
    res = subprocess.run(exe + ["gaussian", "--b0", "oops"], capture_output=True, text=True)
    assert res.returncode == 1 and res.stdout == "" and "invalid float" in res.stderr


def test_oracle_command():
    code, text = run(["oracle", "--state", "tmsv", "--lambda", "0.5", "--cutoff", "40"])
    rec = records(text)[0]
    assert code == 0
    assert rec["value"] == pytest.approx(3.0)
    assert rec["notes"]["abs_deviation"] < 1e-6 and rec["notes"]["converged"]
    for key in ("oracle_trace_norm", "rel_deviation", "final_cutoff"):
        assert key in rec["notes"]


def test_oracle_cutoff_from_environment(tmp_path):
    dump = tmp_path / "rho.cvro"
    code, text = run(
        ["oracle", "--state", "sub", "--lambda", "0.3", "--no-converge", "--dump", str(dump)],
        env={"CVREAL_CUTOFF": "10"},
    )
    rec = records(text)[0]
    assert rec["inputs"]["cutoff"] == 10 and rec["notes"]["converged"] is None
    assert dump.read_bytes()[:4] == b"CVRO"


# --- sweeps ------------------------------------------------------------------


def test_sweep_csv_to_stdout():
    code, text = run(["sweep", "--param", "gammat", "--from", "0", "--to", "1", "--steps", "3",
                      "--state", "add", "--lambda", "0.5", "--nbar", "0.5"])
    assert code == 0
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["gammat", "realignment", "second_moment"]
    assert rows[1] == ["0", "5.4", "0.8"]
    assert [r[0] for r in rows[1:]] == ["0", "0.5", "1"]
    assert all(len(v.replace("-", "").replace(".", "").lstrip("0")) <= 12 for r in rows[1:] for v in r)


def test_sweep_critical_time_columns(tmp_path):
    out = tmp_path / "cmp.csv"
    code, text = run(["sweep", "--param", "lambda", "--from", "0.3", "--to", "0.6", "--steps", "4",
                      "--state", "sub", "--nbar", "0.5", "--out", str(out)])
    rec = records(text)[0]
    assert code == 0 and rec["notes"]["rows"] == 4
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["lambda", "realignment_critical_time", "second_moment_critical_time"]
    assert len(rows) == 5
    for r in rows[1:]:
        assert float(r[1]) > 0.0 and float(r[2]) > 0.0


@pytest.mark.parametrize(
    "param, fixed, state, columns",
    [
        ("p", {"w1": -0.3, "w2": 0.2}, "sub", ["second_moment", "fock", "realignment"]),
        ("c1", {"b0": 1.2, "c2": 0.25}, "sub", ["realignment", "photon_sub", "photon_add"]),
        ("nbar", {"lambda": 0.5, "gammat": 0.3}, "tmsv", ["realignment"]),
    ],
)
def test_sweep_columns(param, fixed, state, columns):
    full = {"lambda": None, "gammat": None, "nbar": 0.0, "p": None, "w1": None, "w2": None,
            "b0": None, "c1": 0.0, "c2": 0.0}
    full.update(fixed)
    full.pop(param)
    grid, cols, rows = run_sweep(param, 0.0 if param != "c1" else -1.0, 1.0, 5, state, full)
    assert cols == columns
    assert len(rows) == 5 and all(len(r) == len(columns) for r in rows)


def test_sweep_order_independent_of_workers():
    argv = ["sweep", "--param", "gammat", "--from", "0", "--to", "3", "--steps", "40",
            "--state", "sub", "--lambda", "0.5", "--nbar", "0.5"]
    _, serial = run(argv)
    _, parallel = run(argv + ["--workers", "3"])
    assert serial == parallel


# --- configuration files ------------------------------------------------------


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# evolved subtracted state\nlambda = 0.5\ngammat=0.3  # dimensionless\nnbar=0.5\n")
    code, text = run(["--config", str(cfg), "evolve", "--state", "sub"])
    assert code == 2
    assert records(text)[0]["value"] == pytest.approx(1.529738743301, rel=1e-9)
    # command-line flags win over the file
    code, text = run(["--config", str(cfg), "evolve", "--state", "sub", "--nbar", "0"])
    assert records(text)[0]["value"] == pytest.approx(2.549553538901, rel=1e-9)


def test_config_boolean_and_errors(tmp_path):
    cfg = tmp_path / "o.cfg"
    cfg.write_text("no_converge = true\ncutoff = 10\n")
    code, text = run(["--config", str(cfg), "oracle", "--lambda", "0.3"])
    assert records(text)[0]["notes"]["converged"] is None
    assert records(text)[0]["inputs"]["cutoff"] == 10
    for body in ("colour = red\n", "just words\n", "no_converge = maybe\n"):
        cfg.write_text(body)
        assert run(["--config", str(cfg), "oracle", "--lambda", "0.3"])[0] == 1
    assert run(["--config", str(tmp_path / "missing.cfg"), "gaussian", "--b0", "1"])[0] == 1


def test_read_config_maps_lambda(tmp_path):
    cfg = tmp_path / "k.cfg"
    cfg.write_text("--lambda=0.4\nrate = 2\n\n")
    assert read_config(cfg) == {"lam": "0.4", "rate": "2"}
