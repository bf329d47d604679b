from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import pytest

from wallx import cli

TARGETS = Path(__file__).resolve().parent.parent / "targets"


@pytest.fixture(autouse=True)
def cache_dir(tmp_path, monkeypatch):
    d = tmp_path / "cache"
    monkeypatch.setenv("WALLX_CACHE", str(d))
    monkeypatch.delenv("WALLX_THREADS", raising=False)
    return d


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_ifun_has_top_coefficient(capsys):
    code, out, _ = run(capsys, "ifun", "--target", str(TARGETS / "p2.toml"), "--order", "3")
    assert code == 0
    doc = json.loads(out)
    assert any(t["beta"] == [3] for t in doc["series"]["terms"])


def test_equivariant_ifun(capsys):
    code, out, _ = run(capsys, "ifun", "--target", str(TARGETS / "p1.toml"), "--order", "1", "--equivariant")
    assert code == 0
    assert json.loads(out)["mode"] == "fixed-point"


def test_check_unitarity_exit_zero(capsys):
    code, out, _ = run(capsys, "check", "--suite", "unitarity", "--target", str(TARGETS / "p1.toml"), "--order", "1")
    assert code == 0
    assert json.loads(out)["report"]["ok"] is True


def test_gw_quintic(capsys):
    code, out, _ = run(capsys, "gw", "--target", str(TARGETS / "quintic.toml"), "--degree", "1",
                       "--insertions", "H,H,H", "--non-equivariant")
    assert code == 0
    assert json.loads(out)["value"] == "2875/1"


@pytest.mark.parametrize("argv", [
    ["ifun", "--target", "does-not-exist.toml", "--order", "2"],
    ["frobnicate"],
    ["ifun", "--order", "2"],
    ["ifun", "--target", "x.toml", "--order", "two"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 64
    assert "usage error" in err


def test_validation_error(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[target]\nweights = [[1, 1]]\ntheta = [-1]\n")
    code, _, err = run(capsys, "ifun", "--target", str(bad), "--order", "1")
    assert code == 1
    assert "error" in err


def test_unsupported_is_validation_error(capsys):
    code, _, _ = run(capsys, "yukawa", "--target", str(TARGETS / "p2.toml"), "--order", "2", "--bmodel", "1")
    assert code == 1


def test_threads_env(monkeypatch, capsys):
    monkeypatch.setenv("WALLX_THREADS", "many")
    code, _, _ = run(capsys, "ifun", "--target", str(TARGETS / "p1.toml"), "--order", "1")
    assert code == 64


def test_cache_roundtrip(capsys, cache_dir, monkeypatch):
    argv = ["oracle-j", "--target", str(TARGETS / "p2.toml"), "--dmax", "1"]
    code1, out1, _ = run(capsys, *argv)
    assert code1 == 0 and list(cache_dir.glob("*.out"))

    def boom(args):
        raise AssertionError("cache was not used")
    monkeypatch.setitem(cli.COMMANDS, "oracle-j", boom)
    code2, out2, _ = run(capsys, *argv)
    assert code2 == 0 and out2 == out1
    monkeypatch.undo()
    monkeypatch.setenv("WALLX_CACHE", str(cache_dir))
    code3, out3, _ = run(capsys, *argv, "--no-cache")
    assert out3 == out1


def test_corrupted_cache_entry(capsys, cache_dir):
    argv = ["ifun", "--target", str(TARGETS / "p1.toml"), "--order", "2"]
    _, out1, _ = run(capsys, *argv)
    for f in cache_dir.glob("*.out"):
        f.write_text("garbage")
    code, out2, err = run(capsys, *argv)
    assert code == 0 and out2 == out1
    assert "corrupted cache entry" in err


def test_version_bump_changes_key(monkeypatch):
    req = cli.Request.build("ifun", {"order": 2})
    k1 = req.key()
    monkeypatch.setattr(cli, "__version__", "9.9.9")
    assert req.key() != k1


def test_request_canonical_form_is_order_independent():
    a = cli.Request.build("gw", {"degree": "1", "insertions": "pt"})
    b = cli.Request.build("gw", {"insertions": "pt", "degree": "1"})
    assert a.canonical() == b.canonical()


def test_csv_and_json_agree(capsys):
    base = ["oracle-j", "--target", str(TARGETS / "p2.toml"), "--dmax", "1"]
    _, js, _ = run(capsys, *base)
    _, cs, _ = run(capsys, *base, "--format", "csv")
    doc = json.loads(js)["series"]
    rows = list(csv.reader(io.StringIO(cs)))
    assert rows[0][:3] == ["beta", "t_exp", "z_exp"]
    assert len(rows) - 1 == len(doc["terms"])
    for row, term in zip(rows[1:], doc["terms"]):
        assert row[3:] == term["value"]["class"]


def test_output_file(tmp_path, capsys):
    out = tmp_path / "i.json"
    code, stdout, _ = run(capsys, "ifun", "--target", str(TARGETS / "p1.toml"), "--order", "1", "--out", str(out))
    assert code == 0 and stdout == ""
    assert json.loads(out.read_text())["command"] == "ifun"


def test_verify_single_criterion(capsys):
    code, out, err = run(capsys, "verify", "--suite", "A1")
    assert code == 0
    assert "A1: PASS" in err
    assert json.loads(out)["results"][0]["passed"] is True


def test_birkhoff_cli(capsys):
    code, out, _ = run(capsys, "birkhoff", "--target", str(TARGETS / "quintic.toml"), "--order", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["agrees"] is True
