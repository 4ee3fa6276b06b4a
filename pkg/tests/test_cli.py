import csv
import json
import subprocess
import sys

import pytest

from dimdrop.cli import main
from dimdrop.serialize import hom_from_json
from dimdrop.regularity import InductiveSystem


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_derive_prints_worked_example(capsys):
    code, out, _ = _run(["derive", "--src", "2,3", "--tgt", "19,23", "--eps", "1"], capsys)
    assert code == 0
    assert out.startswith("a=1 b=1 k=72 n00=15 n01=11 n10=6 n11=9")
    assert out.strip().endswith("bullets=ok")


def test_derive_json_envelope(tmp_path, capsys):
    path = tmp_path / "d.json"
    code, _, _ = _run(["derive", "--src", "2,3", "--tgt", "19,23", "--eps", "1", "-o", str(path)], capsys)
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["schema_version"] == 1 and doc["command"] == "derive"
    assert doc["inputs"]["seed"] == 0
    assert (tmp_path / "d.csv").exists()


def test_usage_errors_exit_one(capsys):
    code, _, err = _run(["derive", "--src", "2,4", "--tgt", "8,27", "--eps", "1"], capsys)
    assert code == 1 and "invalid" in err
    code, _, _ = _run(["check", "--system", "/nonexistent.json"], capsys)
    assert code == 1


def test_error_json_written(tmp_path, capsys):
    path = tmp_path / "e.json"
    code, _, _ = _run(["embed", "--src", "2,3", "--tgt", "7,9", "--eps", "1", "-o", str(path)], capsys)
    assert code == 1
    doc = json.loads(path.read_text())
    assert doc["error"]["type"] == "TargetTooSmall"


def test_embed_round_trip(tmp_path, capsys):
    path = tmp_path / "h.json"
    code, _, _ = _run(["embed", "--src", "1,2", "--tgt", "7,9", "--eps", "1", "--verify", "--grid", "21", "-o", str(path)], capsys)
    assert code == 0
    doc = json.loads(path.read_text())
    h = hom_from_json(doc["hom"])
    assert (h.src.p, h.src.q, h.tgt.p, h.tgt.q) == (1, 2, 7, 9)
    assert doc["summary"]["verification"]["passed"]


def test_identity_system_check_fails(tmp_path, capsys):
    sys_path = tmp_path / "id.json"
    code, _, _ = _run(["gen-system", "--start", "2,3", "--stages", "4", "--growth", "identity", "-o", str(sys_path)], capsys)
    assert code == 0
    InductiveSystem.from_json(json.loads(sys_path.read_text())["system"])
    out = tmp_path / "c.json"
    code, stdout, _ = _run(["check", "--system", str(sys_path), "--which", "all", "--y-grid", "11", "-o", str(out)], capsys)
    assert code == 2
    rows = list(csv.DictReader((tmp_path / "c.csv").open()))
    assert {r["check"] for r in rows} >= {"variation", "simplicity", "monotrace"}


def test_entry_point_subprocess():
    res = subprocess.run(
        [sys.executable, "-m", "dimdrop.cli", "derive", "--src", "1,1", "--tgt", "2,3", "--eps", "1/2"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert res.returncode == 0, res.stderr
    assert res.stdout.startswith("a=")


@pytest.mark.parametrize("argv", [["--version"], ["derive", "--help"]])
def test_help_and_version_exit_zero(argv, capsys):
    assert main(argv) == 0
