from __future__ import annotations

import json

import numpy as np
import pytest

from sparseca.cli import RunManifest, main, parse_init, parse_transform
from sparseca.fileio import read_pnm, read_trajectory
from sparseca.errors import SparseCAError
from sparseca.programs import XOR


def test_parse_roundtrip(tmp_path, capsys):
    f = tmp_path / "x.ca"
    f.write_text(XOR)
    assert main(["parse", str(f)]) == 0
    assert capsys.readouterr().out.strip() == XOR.strip()


def test_check_costs(capsys):
    assert main(["check", "--builtin", "xor", "--costs"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("ok K=1") and "costs time=" in out


def test_run_sparse_and_render(tmp_path):
    out, pbm = tmp_path / "t.traj", tmp_path / "t.pbm"
    assert main(["run", "--builtin", "xor", "--transform", "sparsify:2", "--init", "10110",
                 "--steps", "10", "--boundary", "periodic", "--out", str(out),
                 "--render", str(pbm)]) == 0
    rows, K, _ = read_trajectory(out)
    assert rows.shape == (11, 25) and K > 1
    magic, img = read_pnm(pbm.read_text())
    assert magic == "P1" and np.array_equal(img, (rows != 0).astype(int))


def test_manifest_roundtrip(tmp_path):
    m = RunManifest(builtin="xor", init="1", steps=3)
    f = tmp_path / "m.json"
    f.write_text(m.dump())
    assert RunManifest.load(f) == m
    f.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(SparseCAError):
        RunManifest.load(f)


def test_transform_trailing_file(tmp_path, capsys):
    f = tmp_path / "x.ca"
    f.write_text(XOR)
    assert main(["transform", "sparsify", "--n", "3", str(f)]) == 0
    assert "num param N = 3" in capsys.readouterr().out


def test_audits_pass_and_overlap_fixture(tmp_path, capsys):
    traj = tmp_path / "t.traj"
    main(["run", "--builtin", "xor", "--transform", "sparsify:1", "--init", "1101",
          "--steps", "11", "--boundary", "periodic", "--mode", "tilde", "--blank-prob", "0.1",
          "--seed", "3", "--out", str(traj)])
    for kind in ("rigidity", "sparsity", "overlap"):
        assert main(["audit", kind, "--trajectory", str(traj), "--builtin", "xor",
                     "--transform", "sparsify:1", "--boundary", "periodic"]) == 0
    anchors = tmp_path / "a.txt"
    anchors.write_text("0 0\n2 5\n")
    capsys.readouterr()
    assert main(["audit", "overlap", "--anchors", str(anchors), "--dims", "4:30"]) == 1
    assert "VIOLATION" in capsys.readouterr().out


def test_density_csv(tmp_path, capsys):
    traj, csv = tmp_path / "t.traj", tmp_path / "d.csv"
    main(["run", "--builtin", "identity", "--init", "101", "--steps", "3", "--out", str(traj)])
    assert main(["density", "--trajectory", str(traj), "--column", "1", "--csv", str(csv)]) == 0
    assert "blank_fraction=1.000000" in capsys.readouterr().out
    assert csv.read_text().splitlines()[0] == "horizon,blank_fraction"


def test_universal_and_amplify(tmp_path, capsys):
    assert main(["universal", "--builtin", "xor", "--Q", "4", "--U", "30"]) == 0
    assert "num param CSize = 4" in capsys.readouterr().out
    assert main(["amplify", "--horizon", "1", "--constants", "131072,1,1048576,1",
                 "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "p1.ca").exists() and (tmp_path / "certificate.txt").exists()


def test_errors_exit_2(capsys):
    assert main(["run", "--builtin", "algorithm1", "--init", "1", "--steps", "1"]) == 2
    assert "error:" in capsys.readouterr().err


def test_helpers():
    assert parse_transform("g2:8") == ("g2", 8)
    assert list(parse_init("0b11, 2", 2)) == [3, 2]
    with pytest.raises(SparseCAError):
        parse_init("9", 2)
