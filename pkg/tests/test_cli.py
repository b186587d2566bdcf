import json
import re
import subprocess
import sys

import pytest

from specpoly.cli import EXIT_FAIL, EXIT_OK, EXIT_SCENE, main
from specpoly.render import read_ppm, read_sidecar


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_mirror(capsys, fixture_path):
    code, out, _ = run(capsys, "solve", "--scene", str(fixture_path("mirror.yaml")), "--chain", "R")
    assert code == EXIT_OK
    assert out.startswith("1 admissible chain(s)")
    assert "bc=(0.500000000000, 0.333333333333)" in out
    assert "time_per_tuple_us  Poly.  Det.  Sol.v1  Sol.u1  Total" in out
    assert "audit ok" in out


def test_solve_overrides_separators(capsys, fixture_path):
    code, out, _ = run(capsys, "solve", "--scene", str(fixture_path("mirror.yaml")), "--x-end", "0,1,1")
    assert code == EXIT_OK
    pos = re.search(r"pos=\(([^)]*)\)", out).group(1)
    assert [float(x) for x in pos.split(",")] == pytest.approx([0.0, 0.5, 0.0], abs=1e-9)


def test_exit_codes(capsys, fixture_path, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("camera: [\n")
    assert run(capsys, "solve", "--scene", str(bad))[0] == EXIT_SCENE
    assert run(capsys, "solve", "--scene", str(tmp_path / "nope.yaml"))[0] == EXIT_SCENE
    code, _, err = run(capsys, "solve", "--scene", str(fixture_path("mirror.yaml")), "--chain", "RT")
    assert code == EXIT_FAIL and "--experimental-chains" in err
    code, _, _ = run(capsys, "solve", "--scene", str(fixture_path("mirror.yaml")), "--tuple", "3")
    assert code == EXIT_SCENE
    with pytest.raises(SystemExit):
        main(["solve"])


def test_render_writes_outputs(capsys, fixture_path, tmp_path):
    out = tmp_path / "c.ppm"
    code, text, _ = run(capsys, "render", "--scene", str(fixture_path("caustic_line.yaml")), "--out", str(out),
                        "--resolution", "24x16", "--threads", "2")
    assert code == EXIT_OK and "lit pixels" in text
    assert read_ppm(out).shape == (16, 24, 3)
    assert read_sidecar(out.with_suffix(".f64")).shape == (16, 24, 3)


def test_verify_emits_json(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "poly", "oracle-R", "--cases", "5")
    lines = [json.loads(x) for x in out.splitlines()]
    assert code == EXIT_OK
    assert [x.get("suite") for x in lines[:2]] == ["poly", "oracle-R"]
    assert lines[-1]["summary"]["passed"] is True
    assert run(capsys, "verify", "--suite", "nosuch")[0] == EXIT_FAIL


def test_bench_table(capsys):
    code, out, _ = run(capsys, "bench", "--chain", "R,T", "--repetitions", "20")
    rows = out.splitlines()
    assert code == EXIT_OK
    assert rows[1].split() == ["chain", "Poly.", "Det.", "Sol.", "v1", "Sol.", "u1", "Total", "Path"]
    assert [r.split()[0] for r in rows[2:]] == ["R", "T"]


def test_corpus_and_sqrt_fit(capsys, tmp_path):
    code, out, _ = run(capsys, "corpus", "--out", str(tmp_path), "--seeds", "2", "--kinds", "R")
    assert code == EXIT_OK and (tmp_path / "corpus_R.txt").exists()
    code, out, _ = run(capsys, "sqrt-fit", "--out", str(tmp_path / "sq.txt"))
    assert code == EXIT_OK and "certified max error" in out


def test_console_script_entry_point(fixture_path):
    proc = subprocess.run([sys.executable, "-m", "specpoly.cli", "solve", "--scene",
                           str(fixture_path("periscope.yaml")), "--chain", "RR"],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0 and proc.stdout.startswith("1 admissible chain(s)")
