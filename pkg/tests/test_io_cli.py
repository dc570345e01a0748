import io
import json
from pathlib import Path

import numpy as np
import pytest

from bandchain import stationary_prefix
from bandchain.cli import main
from bandchain.errors import ChainSpecError, MissingBoundaryRow, NonStochasticRow
from bandchain.io import (
    SWEEP_HEADER,
    dumps_report,
    fmt,
    load_chain_spec,
    parse_chain_spec,
    write_stationary_csv,
    write_sweep_csv,
)
from bandchain.truncation import TruncationResult

from conftest import E1_ALPHA0

SPECS = Path(__file__).resolve().parents[1] / "specs"


def strip_wall(csv_text):
    rows = [line.split(",") for line in csv_text.strip().splitlines()]
    col = rows[0].index("wall_ms")
    return [r[:col] + r[col + 1:] for r in rows]


def test_load_specs(e1, e2):
    assert load_chain_spec(SPECS / "e1.json") == e1
    assert load_chain_spec(SPECS / "e2.json") == e2
    tw = load_chain_spec(SPECS / "two_well.json")
    assert (tw.i0, tw.N) == (10, 1)
    assert tw.row(5) == {4: 0.3, 6: 0.7}


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_chain_spec(tmp_path / "nope.json")


def test_band_tail_rows():
    text = json.dumps({
        "type": "band", "i0": 1, "N": 1, "boundary_rows": [{"0": 0.5, "1": 0.5}],
        "tail_rows": [{"-1": 0.6, "1": 0.4}],
        "increments": {"-1": 0.75, "1": 0.25},
        "limit_increments": {"-1": 0.75, "1": 0.25},
    })
    k = parse_chain_spec(text)
    assert not k.homogeneous
    assert k.row(1) == {0: 0.6, 2: 0.4}
    assert k.row(2) == {1: 0.75, 3: 0.25}


def test_bad_json_line():
    with pytest.raises(ChainSpecError) as exc:
        parse_chain_spec('{\n "type": "band",\n "i0": ,\n}')
    assert exc.value.line == 3


def test_bad_field_reported():
    text = '{\n  "type": "homogeneous_rw",\n  "g": 1,\n  "d": "one",\n  "increments": {}\n}'
    with pytest.raises(ChainSpecError) as exc:
        parse_chain_spec(text)
    assert exc.value.field == "d" and exc.value.line == 4
    assert "line 4" in str(exc.value)


@pytest.mark.parametrize("doc, err", [
    ({"type": "homogeneous_rw", "g": 1, "d": 1, "increments": {"-1": 0.6, "1": 0.5},
      "boundary_rows": [[1.0]]}, NonStochasticRow),
    ({"type": "homogeneous_rw", "g": 2, "d": 1, "increments": {"-2": 0.5, "1": 0.5},
      "boundary_rows": [[1.0]]}, MissingBoundaryRow),
    ({"type": "homogeneous_rw", "g": 1, "d": 1, "i0": 3, "increments": {"-1": 0.6, "1": 0.4},
      "boundary_rows": [[1.0]]}, ChainSpecError),
    ({"type": "band", "i0": 1, "boundary_rows": [[1.0]], "increments": {"-1": 0.6, "1": 0.4},
      "limit_increments": {"-1": 0.5, "1": 0.5}}, ChainSpecError),
    ({"type": "walk"}, ChainSpecError),
    ({"type": "homogeneous_rw", "g": 1, "d": 1, "increments": [0.5, 0.5]}, ChainSpecError),
])
def test_spec_errors(doc, err):
    with pytest.raises(err):
        parse_chain_spec(json.dumps(doc))


def test_fmt():
    assert fmt(None) == "" and fmt(float("nan")) == ""
    assert fmt(3) == "3"
    assert float(fmt(0.1 + 0.2)) == 0.1 + 0.2


def test_sweep_csv_error_column():
    good = TruncationResult(5, None, 0.5, 1, 1e-16, 1.0)
    bad = TruncationResult(2, None, None, None, None, 1.0, error="ValueError: boom")
    buf = io.StringIO()
    write_sweep_csv([good], buf)
    assert buf.getvalue().splitlines()[0] == ",".join(SWEEP_HEADER)
    buf = io.StringIO()
    write_sweep_csv([bad, good], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].endswith(",error")
    assert lines[1].startswith("2,,,,") and lines[1].endswith("ValueError: boom")


def test_stationary_csv(e1):
    buf = io.StringIO()
    write_stationary_csv(stationary_prefix(e1, 30), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "i,pi,ratio"
    assert len(lines) == 32
    i, p, r = lines[11].split(",")
    assert float(r) == pytest.approx(1 / 3, abs=1e-12)
    assert lines[-1].endswith(",")


def test_dumps_report_roundtrip():
    x = 0.8660254037844386
    text = dumps_report({"a": np.float64(x), "b": float("inf"), "c": np.arange(2), "d": (1,)})
    back = json.loads(text)
    assert back["a"] == x and back["b"] is None and back["c"] == [0, 1]


def test_cli_sweep(capsys):
    args = ["sweep", "--spec", str(SPECS / "e1.json"), "--k-grid", "25,50,100"]
    assert main(args) == 0
    first = capsys.readouterr().out
    lines = first.strip().splitlines()
    assert lines[0] == "k,rho_k,unit_count,backward_error,wall_ms"
    assert len(lines) == 4
    assert main(args) == 0
    assert strip_wall(capsys.readouterr().out) == strip_wall(first)


def test_cli_sweep_files(tmp_path, capsys):
    args = ["sweep", "--spec", str(SPECS / "e2.json"), "--k-grid", "10,20",
            "--out", str(tmp_path), "--figures"]
    assert main(args) == 0
    assert (tmp_path / "sweep.csv").read_text() == capsys.readouterr().out
    assert (tmp_path / "sweep.png").stat().st_size > 0


def test_cli_bad_grid(capsys):
    assert main(["sweep", "--spec", str(SPECS / "e2.json"), "--k-grid", "2,20"]) == 1
    assert "k_grid" in capsys.readouterr().err


@pytest.fixture(scope="module")
def e1_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("e1")
    code = main(["analyze", "--spec", str(SPECS / "e1.json"), "--out", str(out), "--figures"])
    return code, out, json.loads((out / "report.json").read_text())


def test_cli_analyze_e1(e1_report):
    code, out, rep = e1_report
    assert code == 0
    assert rep["spectral"]["alpha0_closed"] == pytest.approx(E1_ALPHA0, abs=1e-12)
    assert rep["rate"]["case"] == "CaseA_bound"
    assert rep["rate"]["rho2"] == pytest.approx(E1_ALPHA0, abs=1e-12)
    assert rep["reversible"] is True
    assert rep["oracle"]["passed"]
    assert rep["metadata"]["augmentation"] == "last-column"
    assert rep["structure"]["irreducible"] and rep["structure"]["aperiodic"]


def test_cli_analyze_outputs(e1_report):
    _, out, rep = e1_report
    names = {p.name for p in out.iterdir()}
    assert {"report.json", "sweep.csv", "stationary.csv"} <= names
    assert {"sweep.png", "spectrum.png", "stationary.png", "decay.png"} <= names
    assert all(Path(p).exists() for p in rep["figures"])


def test_cli_analyze_case_b(tmp_path, capsys):
    code = main(["analyze", "--spec", str(SPECS / "two_well.json"), "--out", str(tmp_path)])
    rep = json.loads(capsys.readouterr().out)
    assert code == 0
    assert rep["rate"]["case"] == "CaseB_value"
    assert rep["rate"]["rho2"] > rep["spectral"]["alpha0_closed"] + 0.1
    assert rep["rate"]["cauchy_gap"] < 1e-3
    assert not (tmp_path / "sweep.png").exists()


def test_cli_analyze_deterministic(tmp_path, capsys):
    spec = str(SPECS / "e2.json")
    reports = []
    for _ in range(2):
        assert main(["analyze", "--spec", spec, "--k-grid", "25,50,100,150"]) == 0
        rep = json.loads(capsys.readouterr().out)
        rep["metadata"].pop("wall_s")
        for r in rep["sweep"]:
            r.pop("wall_ms", None)
        reports.append(rep)
    assert reports[0] == reports[1]
    assert reports[0]["reversible"] is False


def test_cli_zero_mean(capsys):
    assert main(["analyze", "--spec", str(SPECS / "zero_mean.json")]) == 1
    assert "NoSubunitRoot" in capsys.readouterr().err


def test_cli_missing_file(capsys, tmp_path):
    assert main(["analyze", "--spec", str(tmp_path / "missing.json")]) == 1
    err = capsys.readouterr().err
    assert "FileNotFoundError" in err and "missing.json" in err


def test_cli_verify(capsys):
    spec = str(SPECS / "e1.json")
    assert main(["verify", "--spec", spec]) == 0
    a = json.loads(capsys.readouterr().out)["oracle"]
    assert main(["verify", "--spec", spec, "--seed", "7"]) == 0
    b = json.loads(capsys.readouterr().out)["oracle"]
    assert a["passed"] and b["passed"]
    assert a["lemma1"]["max_violation"] != b["lemma1"]["max_violation"]


def test_cli_verify_bad_unit_tol(capsys):
    assert main(["verify", "--spec", str(SPECS / "e1.json"), "--unit-tol", "0.5"]) == 3
    rep = json.loads(capsys.readouterr().out)
    assert not rep["oracle"]["passed"]
    assert not all(d["passed"] for d in rep["oracle"]["decay"])


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "bandchain", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "analyze" in r.stdout
