from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import sys

import pytest

from powers_lab.cli import main


def run(capsys, *argv) -> tuple[int, str]:
    code = main(list(argv))
    return code, capsys.readouterr().out


def run_json(capsys, *argv) -> dict:
    code, out = run(capsys, *argv)
    assert code == 0
    return json.loads(out)


def run_csv(capsys, *argv) -> list[dict]:
    code, out = run(capsys, *argv, "--format", "csv")
    assert code == 0
    return list(csv.DictReader(io.StringIO(out)))


def subprocess_run(*argv):
    return subprocess.run([sys.executable, "-m", "powers_lab", *argv], capture_output=True, text=True)


class TestNorm:
    def test_isometry(self, capsys):
        out = run_json(capsys, "norm", "--elem", "u[a]", "--norm", "lp:2", "--norm", "lp:3")
        assert out["mode"] == "operator"
        for r in out["results"]:
            assert (r["bracket"]["lower"], r["bracket"]["upper"]) == (1.0, 1.0)

    def test_vector_lorentz(self, capsys):
        out = run_json(capsys, "norm", "--group", "Z", "--elem", "d[4]", "--norm", "lorentz:p=2,r=1.5")
        assert out["mode"] == "vector"
        assert out["results"][0]["bracket"]["lower"] == pytest.approx((2 / 1.5) ** (1 / 1.5), rel=1e-14)

    def test_vector_lp(self, capsys):
        out = run_json(capsys, "norm", "--group", "Z", "--elem", "3*d[0] + 4*d[7]", "--norm", "lp:2")
        assert out["results"][0]["bracket"]["upper"] == 5.0

    def test_element_file(self, capsys, tmp_path):
        path = tmp_path / "elem.txt"
        path.write_text("u[1] + u[-1]\n")
        out = run_json(capsys, "norm", "--group", "Z", "--elem", f"@{path}")
        br = out["results"][0]["bracket"]
        assert br["lower"] <= 2.0 <= br["upper"]

    def test_out_file(self, capsys, tmp_path):
        path = tmp_path / "out.json"
        code, out = run(capsys, "norm", "--elem", "u[b]", "--out", str(path))
        assert code == 0 and out == ""
        assert json.loads(path.read_text())["command"] == "norm"


class TestDecay:
    def test_free_family(self, capsys):
        rows = run_csv(capsys, "decay", "--n", "1,2,4")
        assert [int(r["n"]) for r in rows] == [1, 2, 4]
        assert float(rows[0]["lower"]) == float(rows[0]["upper"]) == 1.0
        for r in rows[1:]:
            n = int(r["n"])
            assert float(r["lower"]) <= 2 * math.sqrt(n - 1) / n <= float(r["upper"])

    def test_lp_column_interpolates(self, capsys):
        rows = run_csv(capsys, "decay", "--n", "4", "--norm", "lp:2", "--norm", "lp:4/3")
        row = rows[0]
        assert abs(float(row["ratio_estimate"]) - 2 * math.sqrt(3) / 4) <= 0.1 * 2 * math.sqrt(3) / 4
        lam = 2 * (1 - 3 / 4)
        assert float(row["lp:4/3_lower"]) <= float(row["lp:4/3_upper"]) <= float(row["upper"]) ** lam + 1e-12

    def test_abelian_stays_one(self, capsys):
        rows = run_csv(capsys, "decay", "--group", "Z", "--elem", "u[1]", "--n", "1", "--n", "3", "--n", "6")
        for r in rows:
            assert float(r["lower"]) == float(r["upper"]) == float(r["ratio_estimate"]) == 1.0

    def test_random_schedule_seeded(self, capsys):
        a = run_json(capsys, "decay", "--n", "3", "--schedule", "random", "--seed", "7")
        b = run_json(capsys, "decay", "--n", "3", "--schedule", "random", "--seed", "7")
        assert a == b


class TestOrliczBuild:
    def test_report(self, capsys, tmp_path):
        anchors = tmp_path / "anchors.csv"
        out = run_json(capsys, "orlicz-build", "--depth", "12", "--p", "2", "--anchors", str(anchors))
        report = out["report"]
        assert 0 < report["theta"] < 1
        assert len(report["eta_bits"]) == 12
        lines = anchors.read_text().strip().splitlines()
        assert lines[0] == "n,t,psi,eta,phi0" and len(lines) == 14

    def test_failure_exit_code(self):
        proc = subprocess_run("orlicz-build", "--norm", "orlicz:power:1")
        assert proc.returncode == 4


class TestInterpCheck:
    def test_passes_on_z(self, capsys):
        out = run_json(capsys, "interp-check", "--group", "Z", "--elem", "u[1]", "--p", "4/3")
        assert out["passed"]

    def test_corrupted_upper_exits_4(self):
        proc = subprocess_run("interp-check", "--group", "Z", "--elem", "u[1]", "--p", "3", "--corrupt-upper", "0.5")
        assert proc.returncode == 4


class TestLorentzCheck:
    def test_passes(self, capsys):
        out = run_json(capsys, "lorentz-check", "--max-support", "10")
        assert out["passed"]
        assert {r["norm"] for r in out["rows"]} == {"lorentz:p=2,r=1.5", "lorentz:p=3,r=2", "lorentz:p=4,r=1.1"}


class TestBpstar:
    def test_isometry(self, capsys):
        out = run_json(capsys, "bpstar", "--elem", "u[b]", "--norm", "lp:3")
        br = out["results"][0]["bracket"]
        assert (br["lower"], br["upper"]) == (1.0, 1.0)

    def test_csv(self, capsys):
        rows = run_csv(capsys, "bpstar", "--elem", "u[a] + 0.5*u[b]", "--norm", "lp:3", "--strategy", "l1")
        assert float(rows[0]["upper"]) == pytest.approx(1.5)


class TestExitCodes:
    def test_bad_element(self, capsys):
        code, _ = run(capsys, "norm", "--elem", "u[z]")
        assert code == 2

    def test_bad_norm(self, capsys):
        code, _ = run(capsys, "norm", "--elem", "u[a]", "--norm", "lp:0.5")
        assert code == 2

    def test_budget(self, monkeypatch, capsys):
        monkeypatch.setenv("POWERS_LAB_BUDGET", "50")
        code, _ = run(capsys, "norm", "--elem", "u[a] + u[b] + u[a b]")
        assert code == 3

    def test_missing_required(self):
        proc = subprocess_run("norm")
        assert proc.returncode == 2


def test_byte_identical_runs():
    argv = ("decay", "--n", "2,3", "--norm", "lp:3", "--format", "csv")
    first, second = subprocess_run(*argv), subprocess_run(*argv)
    assert first.returncode == 0
    assert first.stdout == second.stdout
