import json
import subprocess
import sys

import pytest

from pulledsaw.cli import main
from pulledsaw.tableio import read_manifest, read_table


def run(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def tables10(tmp_path_factory):
    root = tmp_path_factory.mktemp("t10")
    specs = [(2, "positive"), (2, "positive-unfolded"), (2, "full-lattice"), (1, "plane")]
    for d, cls in specs:
        assert main(["enumerate", "--dim", str(d), "--nmax", "10", "--class", cls, "--no-cache",
                     "--workers", "1", "--out", str(root / f"{cls}-d{d}.csv")]) == 0
    return root


@pytest.fixture(scope="module")
def tables16(tmp_path_factory):
    root = tmp_path_factory.mktemp("t16")
    for d, cls in [(2, "positive"), (2, "positive-unfolded"), (2, "full-lattice"), (1, "plane")]:
        assert main(["enumerate", "--dim", str(d), "--nmax", "16", "--class", cls, "--no-cache",
                     "--workers", "1", "--out", str(root / f"{cls}-d{d}.csv")]) == 0
    return root


def test_enumerate_hand_table(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, stdout, _ = run(["enumerate", "--dim", 2, "--nmax", 2, "--class", "positive",
                           "--cache-dir", tmp_path / "cache", "--out", out], capsys)
    assert code == 0
    rec = json.loads(stdout)
    t = read_table(out)
    assert t[2] == {(2, 0): 2, (1, 1): 2, (0, 1): 2, (0, 2): 1}
    assert rec["checksum"] == read_manifest(out).checksum
    # second run is served from the cache with the same checksum
    code, again, _ = run(["enumerate", "--dim", 2, "--nmax", 2, "--class", "positive",
                          "--cache-dir", tmp_path / "cache", "--out", tmp_path / "u.csv"], capsys)
    assert json.loads(again)["checksum"] == rec["checksum"]


def test_check_passes_on_small_tables(tables10, capsys):
    code, out, err = run(["check", "--tables", tables10], capsys)
    assert code == 0, out + err
    rec = json.loads(out)
    names = {r["check"] for r in rec["results"]}
    assert {"checksum", "oracle", "determinism", "midpoint-convexity",
            "loop-tail-convolution-upper-bound"} <= names


def test_check_flags_tampered_table(tables10, tmp_path, capsys):
    import shutil
    root = tmp_path / "bad"
    shutil.copytree(tables10, root)
    p = root / "positive-d2.csv"
    p.write_text(p.read_text().replace("positive,2,2,0,2,1", "positive,2,2,0,2,3"))
    # keep the manifest consistent so the oracle, not the checksum, catches it
    from pulledsaw.tableio import manifest_path, checksum
    man = json.loads(manifest_path(p).read_text())
    man["checksum"] = checksum(read_table(p, verify=False))
    manifest_path(p).write_text(json.dumps(man))
    code, out, _ = run(["check", "--tables", root], capsys)
    assert code == 1
    bad = [r for r in json.loads(out)["results"] if not r["pass"]]
    assert bad[0]["check"] == "oracle" and bad[0]["n"] == 2


def test_thermo_outputs(tables10, tmp_path, capsys):
    out = tmp_path / "th.tsv"
    code, _, err = run(["thermo", "--table", tables10 / "positive-d2.csv", "--a-grid", "-1:0.5:1",
                        "--y-grid", "1,2", "--out", out], capsys)
    assert code == 0, err
    lines = out.read_text().splitlines()
    assert lines[0].split("\t")[:3] == ["n", "a", "y"]
    assert len(lines) == 1 + 10 * 5 * 2
    assert len(out.with_suffix(".limits.tsv").read_text().splitlines()) == 1 + 10


def test_phase_and_force(tables16, tmp_path, capsys):
    out = tmp_path / "phase.tsv"
    code, _, err = run(["phase", "--tables", tables16, "--out", out], capsys)
    assert code == 0, err
    rows = [line.split("\t") for line in out.read_text().splitlines()[1:]]
    ys = [float(r[1]) for r in rows]
    assert len(ys) == 6 and all(q > p for p, q in zip(ys, ys[1:]))
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["monotone"] and side["bounds"]
    code, fout, err = run(["force", "--tables", tables16, "--epsilon", "-1", "--out",
                           tmp_path / "force.tsv"], capsys)
    assert code == 0, err
    assert abs(json.loads(fout)["slope_at_low_T"]) < 0.1


def test_analyze_report(tables16, tmp_path, capsys):
    out = tmp_path / "an.json"
    code, _, err = run(["analyze", "--tables", tables16, "--out", out], capsys)
    assert code == 0, err
    rep = json.loads(out.read_text())
    assert all(r["pass"] for r in rep["exact"])
    assert [e["n"] for e in rep["legendre"]] == [8, 12, 16]


def test_usage_error_record(capsys):
    code, _, err = run(["enumerate", "--dim", 2], capsys)
    rec = json.loads(err.strip().splitlines()[-1])
    assert code == 2 and rec["error"] == "usage"


def test_missing_tables_record(tmp_path, capsys):
    code, _, err = run(["phase", "--tables", tmp_path / "nowhere", "--out", tmp_path / "p.tsv"], capsys)
    rec = json.loads(err.strip().splitlines()[-1])
    assert code == 1 and rec["error"] == "runtime" and rec["type"] == "FileNotFoundError"


def test_bad_grid_record(tables10, tmp_path, capsys):
    code, _, err = run(["thermo", "--table", tables10 / "positive-d2.csv", "--a-grid", "3:1:1",
                        "--out", tmp_path / "x.tsv"], capsys)
    assert code == 1 and json.loads(err)["type"] == "ValueError"


def test_mc_checksum_independent_of_workers(tmp_path, capsys):
    sums = []
    for w in (1, 2):
        code, out, _ = run(["mc", "--dim", 2, "--nmax", 6, "--tours", 40000, "--seed", 3,
                            "--workers", w, "--out", tmp_path / f"mc{w}.csv"], capsys)
        assert code == 0
        sums.append(json.loads(out)["checksum"])
    assert sums[0] == sums[1]


def test_console_script_runs(tmp_path):
    out = subprocess.run([sys.executable, "-m", "pulledsaw.cli", "--version"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and out.stdout.strip()
