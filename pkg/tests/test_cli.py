import json
import subprocess
import sys

import pytest

from rcldpc.cli import main, parse_ebn0
from rcldpc.construction import read_qc
from rcldpc.protomatrix import embedded_family, format_protomatrix, member, read_protomatrix

from reference_values import THRESHOLD_DB as TABLE_THRESHOLDS


def test_parse_ebn0():
    assert parse_ebn0("1,1.5") == [1.0, 1.5]
    assert parse_ebn0("1:2:0.5") == [1.0, 1.5, 2.0]


def test_bad_ebn0_is_usage_error(tmp_path, capsys):
    assert main(["simulate", "--member", "0", "--ebn0", "x", "--out",
                 str(tmp_path / "s.csv")]) == 2


def test_analyze_family(capsys):
    assert main(["analyze", "--family", "embedded", "--format", "csv"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()[1:]
    assert len(rows) == 15
    for line, ref in zip(rows, TABLE_THRESHOLDS):
        assert abs(float(line.split(",")[1]) - ref) <= 0.05


def test_analyze_proto(tmp_path, capsys):
    path = tmp_path / "m.pm"
    path.write_text(format_protomatrix(member(embedded_family(), 0)))
    out = tmp_path / "r.csv"
    assert main(["analyze", "--proto", str(path), "--out", str(out)]) == 0
    text = capsys.readouterr().out.strip().splitlines()
    assert len(text) == 2
    lines = out.read_text().splitlines()
    assert json.loads(lines[0][2:])["source"] == str(path)
    assert len(lines) == 3


def test_analyze_malformed(tmp_path, capsys):
    path = tmp_path / "bad.pm"
    path.write_text("2 3\n1 1 1\n1 q 1\n")
    assert main(["analyze", "--proto", str(path)]) == 3
    assert "line 3" in capsys.readouterr().err


def test_build_member14(tmp_path, capsys):
    out = tmp_path / "c.qc"
    assert main(["build", "--member", "14", "--Z", "32", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "n: 3200" in text and "k: 1024" in text and "girth: 6" in text
    code = read_qc(out)
    assert code.n == 3200 and code.k == 1024


def test_build_member0(tmp_path, capsys):
    assert main(["build", "--member", "0", "--out", str(tmp_path / "c.qc")]) == 0
    text = capsys.readouterr().out
    assert "k: 1024" in text and "rate: 4/5" in text


def test_build_range_error(tmp_path, capsys):
    assert main(["build", "--member", "20", "--out", str(tmp_path / "c.qc")]) == 3
    assert "outside 0..14" in capsys.readouterr().err


def test_simulate_smoke_and_resume(tmp_path, capsys):
    out = tmp_path / "s.csv"
    args = ["simulate", "--rate", "4/5", "--ebn0", "3.0", "--min-errors", "5",
            "--max-frames", "40", "--quantize", "8bit", "--workers", "1", "--out", str(out)]
    assert main(args) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3
    assert json.loads(lines[0][2:])["quantize"] == "8bit"
    assert main(args) == 0
    assert out.read_text().splitlines() == lines


def test_simulate_unknown_rate(tmp_path):
    assert main(["simulate", "--rate", "3/4", "--ebn0", "1", "--out",
                 str(tmp_path / "s.csv")]) == 3


def test_out_dir_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("RCLDPC_OUT_DIR", str(tmp_path))
    assert main(["build", "--member", "1"]) == 0
    assert (tmp_path / "member_01_Z32.qc").exists()


def test_family_export(tmp_path, capsys):
    assert main(["family", "--out-dir", str(tmp_path)]) == 0
    files = sorted(tmp_path.glob("member_*.pm"))
    assert len(files) == 15
    fam = embedded_family()
    for n, f in enumerate(files):
        assert read_protomatrix(f) == member(fam, n)


def test_search_cli(tmp_path, capsys):
    out = tmp_path / "s.json"
    assert main(["search", "--member", "0", "--budget", "4", "--M", "2", "--frames", "32",
                 "--max-iters", "30", "--workers", "1", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert len(rep["ranked"]) == 2 and rep["config"]["member"] == 0


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "rcldpc.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
