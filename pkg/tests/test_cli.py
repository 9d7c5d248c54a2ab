import json

import numpy as np
import pytest

from approxrate.cli import main, read_raw_array, write_raw_array
from approxrate.nnet import network_from_json


def run(argv):
    return main(argv)


def test_bspline_rows(capsys, tmp_path):
    assert run(["bspline", "--m", "3", "--samples", "10", "--out", "-"]) == 0
    out = capsys.readouterr().out
    rows = [r for r in out.strip().splitlines() if r]
    assert len(rows) == 10
    x, v = rows[3].split(",")
    assert float(v) >= 0.0


def test_unknown_flag_exits_2(capsys):
    assert run(["bspline", "--m", "3", "--bogus"]) == 2
    assert run(["frobnicate"]) == 2


def test_build_writes_net_and_certificate(tmp_path):
    net_path = tmp_path / "net.json"
    cert_path = tmp_path / "cert.json"
    rc = run(["build", "--target", "bspline", "--k", "1", "--m", "2",
              "--eps", "0.01", "--D", "3", "--out", str(net_path),
              "--cert", str(cert_path)])
    assert rc == 0
    net = network_from_json(net_path.read_text())
    assert net.input_dim == 1
    cert = json.loads(cert_path.read_text())
    assert cert["measured_error"] <= 1.05 * cert["claimed_eps"]
    assert cert["connectivity"] <= cert["claimed_connectivity_bound"]


def test_quantize_roundtrip(tmp_path):
    net_path = tmp_path / "net.json"
    run(["build", "--target", "relu", "--k", "2", "--eps", "0.05",
         "--D", "1", "--out", str(net_path)])
    q_path = tmp_path / "q.json"
    rc = run(["quantize", "--net", str(net_path), "--eta", "0.1", "--auto",
              "--D", "1", "--out", str(q_path)])
    assert rc == 0
    report = json.loads((tmp_path / "q.json.report.json").read_text())
    assert report["measured_sup_error"] <= report["eta"]
    assert report["total_bits"] == report["bits_per_weight"] * report["connectivity"]


def test_star_raw_output(tmp_path):
    path = tmp_path / "disc.raw"
    rc = run(["star", "--kind", "disc", "--n", "64", "--out", "raw",
              "--path", str(path)])
    assert rc == 0
    arr = read_raw_array(str(path))
    assert arr.shape == (64, 64)
    assert arr.mean() == pytest.approx(np.pi / 16, abs=5e-3)


def test_star_pgm_output(tmp_path):
    path = tmp_path / "disc.pgm"
    rc = run(["star", "--kind", "petals", "--delta", "0.0625", "--n", "64",
              "--out", "pgm", "--path", str(path)])
    assert rc == 0
    data = path.read_bytes()
    assert data.startswith(b"P5\n64 64\n255\n")
    assert len(data) == len(b"P5\n64 64\n255\n") + 64 * 64


def test_wedge_encode_decode_roundtrip(tmp_path):
    raw = tmp_path / "disc.raw"
    run(["star", "--kind", "disc", "--n", "64", "--out", "raw",
         "--path", str(raw)])
    wdgl = tmp_path / "disc.wdgl"
    rc = run(["wedge", "encode", "--in", str(raw), "--J", "6", "--K", "6",
              "--Mcap", "32", "--target-eps", "0.05", "--out", str(wdgl)])
    assert rc == 0
    out = tmp_path / "rec.raw"
    assert run(["wedge", "decode", "--in", str(wdgl), "--out", str(out)]) == 0
    f = read_raw_array(str(raw))
    rec = read_raw_array(str(out))
    assert float(np.sqrt(np.mean((f - rec) ** 2))) <= 0.05


def test_wedge_unreachable_target_exits_1(tmp_path):
    raw = tmp_path / "disc.raw"
    run(["star", "--kind", "disc", "--n", "32", "--out", "raw",
         "--path", str(raw)])
    rc = run(["wedge", "encode", "--in", str(raw), "--J", "5", "--K", "5",
              "--Mcap", "16", "--target-eps", "1e-9",
              "--out", str(tmp_path / "x.wdgl")])
    assert rc == 1


def test_star_xi_length_mismatch_exits_1(tmp_path):
    rc = run(["star", "--kind", "petals", "--delta", "0.0625", "--xi", "101",
              "--n", "32", "--out", "raw", "--path", str(tmp_path / "x.raw")])
    assert rc == 1


def test_rates_csv(tmp_path):
    out = tmp_path / "report.csv"
    rc = run(["rates", "--experiment", "quantize", "--out", str(out)])
    assert rc == 0
    rows = out.read_text().strip().splitlines()
    assert rows[0] == "knob,size_bits_or_connectivity,error,runtime_ms"
    assert len(rows) == 5


def test_manifest_written(tmp_path):
    man = tmp_path / "man.json"
    run(["bspline", "--m", "2", "--samples", "5",
         "--out", str(tmp_path / "b.csv"), "--manifest", str(man)])
    doc = json.loads(man.read_text())
    assert doc["command"] == "bspline"
    assert doc["config"]["m"] == 2
    assert "versions" in doc


def test_reruns_byte_identical(tmp_path):
    a, b = tmp_path / "a.raw", tmp_path / "b.raw"
    for path in (a, b):
        run(["star", "--kind", "petals", "--delta", "0.0625", "--n", "32",
             "--out", "raw", "--path", str(path), "--seed", "5"])
    assert a.read_bytes() == b.read_bytes()


def test_raw_array_helpers(tmp_path):
    arr = np.arange(12.0).reshape(3, 4)
    path = tmp_path / "x.raw"
    write_raw_array(str(path), arr)
    assert np.array_equal(read_raw_array(str(path)), arr)
