import io
import json
import subprocess
import sys

import numpy as np
import pytest

from rdquant.cli import main
from rdquant.codec import gradient_from_bytes, gradient_to_bytes, to_bytes, encode_scaled_sign
from rdquant.curves import read_csv


def run(argv):
    buf = io.StringIO()
    code = main(argv, buf)
    return code, buf.getvalue()


def rows(text):
    return read_csv(text)


def test_curve_scaled_sign():
    code, text = run(["curve", "scaled-sign"])
    assert code == 0
    (row,) = rows(text)
    assert row.rate == 1.0 and row.distortion == pytest.approx(0.3634, abs=1e-4)


def test_curve_shannon_and_topk():
    _, text = run(["curve", "shannon", "--d", "0.25"])
    assert rows(text)[0].rate == 1.0
    _, text = run(["curve", "topk-bbit", "--b", "8", "--beta", "2.5758"])
    (row,) = rows(text)
    assert row.rate == pytest.approx(0.1608, abs=1e-3)
    assert row.distortion == pytest.approx(0.9155, abs=1e-3)
    _, text = run(["curve", "lloyd-max", "--levels", "3", "--lambda", "0.2", "0"])
    got = rows(text)
    assert [r.param for r in got] == [0.0, 0.2]
    assert got[0].rate == pytest.approx(1.536, abs=1e-3)


def test_curve_byte_identical():
    assert run(["curve", "topk-ternary"])[1] == run(["curve", "topk-ternary"])[1]
    assert run(["curve", "lloyd-max"])[1] == run(["curve", "lloyd-max"])[1]


@pytest.mark.parametrize("argv", [
    ["curve", "qsgd"],
    ["nosuch"],
    [],
    ["clg", "--n", "2"],
    ["--sigma", "0", "curve", "shannon"],
])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as err:
        main(argv, io.StringIO())
    assert err.value.code == 2


def test_runtime_errors_exit_1(tmp_path, capsys):
    assert run(["curve", "shannon", "--d", "0"])[0] == 1
    assert run(["curve", "topk-ternary", "--beta", "-1"])[0] == 1
    assert run(["encode", "--scheme", "topk", str(tmp_path / "missing"), str(tmp_path / "o")])[0] == 1
    assert "cannot read" in capsys.readouterr().err


def test_design(tmp_path):
    path = tmp_path / "m3.json"
    code, _ = run(["design", "--levels", "3", "--out", str(path)])
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["thresholds"] == pytest.approx([-0.612, 0.612], abs=1e-3)
    assert doc["distortion"] == pytest.approx(0.190, abs=1e-3)


def test_clg_outputs(tmp_path):
    cb_path = tmp_path / "cb.json"
    asg = tmp_path / "cells.csv"
    code, text = run(["clg", "--n", "2", "--m", "9", "--lambda", "0.8", "--samples", "100000",
                      "--seed", "7", "--out", str(cb_path), "--assignments", str(asg)])
    assert code == 0
    doc = json.loads(cb_path.read_text())
    assert {"n", "lambda", "points", "probs"} <= set(doc)
    assert doc["n"] == 2 and doc["lambda"] == 0.8 and len(doc["points"]) == 9
    assert 0.947 <= max(doc["probs"]) <= 0.967
    assert sum(p == 0 for p in doc["probs"]) >= 3
    assert text.startswith("rate=") and "empty_cells=" in text
    lines = asg.read_text().splitlines()
    assert lines[0] == "sample,cell" and len(lines) == 100_001


def test_clg_scaled_sign():
    code, text = run(["clg", "--n", "1", "--m", "2", "--samples", "200000", "--seed", "3"])
    fields = dict(kv.split("=") for kv in text.split())
    assert float(fields["rate"]) == pytest.approx(1.0, abs=1e-3)
    assert float(fields["distortion"]) == pytest.approx(0.3634, abs=0.006)


def test_clg_runtime_error():
    assert run(["clg", "--n", "2", "--m", "9", "--samples", "5"])[0] == 1


def test_encode_decode_identity(tmp_path):
    src, enc, dst = tmp_path / "u.grdv", tmp_path / "u.grdq", tmp_path / "v.grdv"
    assert run(["sample", "--d", "1000", "--seed", "1", str(src)])[0] == 0
    assert run(["encode", "--scheme", "topk", "--k", "1000", "--b", "32", str(src), str(enc)])[0] == 0
    assert run(["decode", str(enc), str(dst)])[0] == 0
    assert dst.read_bytes()[13:] == src.read_bytes()[13:]


def test_encode_scaled_sign_million(tmp_path, capsys):
    src, enc = tmp_path / "u.grdv", tmp_path / "u.grdq"
    run(["sample", "--d", "1000000", "--seed", "2", str(src)])
    assert run(["encode", "--scheme", "scaled-sign", str(src), str(enc)])[0] == 0
    err = capsys.readouterr().err
    dist = float(err.split("distortion=")[1].split()[0])
    assert dist == pytest.approx(0.3634, abs=0.002)


def test_encode_beta_uses_sigma(tmp_path):
    src, enc = tmp_path / "u.grdv", tmp_path / "u.grdq"
    run(["--sigma", "3", "sample", "--d", "200000", "--seed", "4", str(src)])
    u = gradient_from_bytes(src.read_bytes())
    assert u.std() == pytest.approx(3, rel=0.01)
    run(["--sigma", "3", "encode", "--scheme", "threshold", "--beta", "2.5758", "--b", "8", str(src), str(enc)])
    from rdquant.codec import from_bytes
    assert from_bytes(enc.read_bytes()).K / u.size == pytest.approx(0.01, abs=0.001)
    assert run(["encode", "--scheme", "ternary", str(src), str(enc)])[0] == 1


def test_truncated_grdq(tmp_path, capsys):
    bad = tmp_path / "bad.grdq"
    bad.write_bytes(to_bytes(encode_scaled_sign(np.ones(100)))[:15])
    assert run(["decode", str(bad), str(tmp_path / "o")])[0] == 1
    err = capsys.readouterr().err
    assert "offset 14" in err


def test_figure_fig1_deterministic():
    a = run(["figure", "fig1"])[1]
    assert a == run(["figure", "fig1"])[1]
    schemes = {r.scheme for r in rows(a)}
    assert {"shannon", "scaled-sign", "asym-binary", "topk-8bit", "topk-ternary", "lloyd-max-3"} <= schemes


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "rdquant", "curve", "shannon", "--d", "0.25"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.splitlines()[0].startswith("scheme,")
    res = subprocess.run([sys.executable, "-m", "rdquant", "curve", "bogus"], capture_output=True)
    assert res.returncode == 2


def test_gradient_bytes_helper_matches_sample(tmp_path):
    src = tmp_path / "u.grdv"
    run(["sample", "--d", "10", "--seed", "9", str(src)])
    u = np.random.default_rng(9).standard_normal(10)
    assert src.read_bytes() == gradient_to_bytes(u)
