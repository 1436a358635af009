import subprocess
import sys

import numpy as np
import pytest

from protcc.cli import main
from protcc.serialize import PccBundle, save_params
from protcc.structure_io import emit_pdb
from protcc.synthetic import glycine_chain, ideal_helix
from protcc.tcpnet import ModelConfig, init_params


@pytest.fixture()
def workdir(tmp_path):
    (tmp_path / "helix.pdb").write_text(emit_pdb(ideal_helix(20)))
    (tmp_path / "gly.pdb").write_text(emit_pdb(glycine_chain(8)))
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_featurize_and_inspect_helix(workdir, capsys):
    code, out, _ = run(capsys, "featurize", workdir / "helix.pdb", "-o", workdir)
    assert code == 0 and "nodes=20" in out
    code, out, _ = run(capsys, "inspect", workdir / "helix.pcc")
    assert code == 0
    assert "2-cells: 1 (H×1)" in out.splitlines()
    assert "widths: scalars 70 17 38 47 | vectors 3 1 14 23" in out


def test_knn_flag(workdir, capsys):
    assert run(capsys, "featurize", "--knn", 4, workdir / "gly.pdb", "-o", workdir)[0] == 0
    assert PccBundle.read(workdir / "gly.pcc").header["counts"][1] == 32


def test_partial_batch(workdir, capsys):
    code, out, err = run(capsys, "featurize", workdir / "helix.pdb", workdir / "missing.pdb",
                         workdir / "gly.pdb", "-o", workdir)
    assert code == 2
    assert sorted(p.name for p in workdir.glob("*.pcc")) == ["gly.pcc", "helix.pcc"]
    assert "missing.pdb" in err


def test_bad_structure_is_per_file(workdir, capsys):
    (workdir / "bad.pdb").write_text("ATOM      1  CA  GLY A   1       abc   0.000   0.000  1.00  0.00\n")
    code, _, err = run(capsys, "featurize", workdir / "bad.pdb", workdir / "gly.pdb", "-o", workdir)
    assert code == 2 and "MalformedRecord" in err and "line 1" in err


def test_no_sequence_and_annotations(workdir, capsys):
    (workdir / "sse.txt").write_text("C" + "H" * 18 + "C\n")
    (workdir / "tdi.txt").write_text("\n".join("D" * 20) + "\n")
    code, _, _ = run(capsys, "featurize", workdir / "helix.pdb", "-o", workdir, "--no-sequence",
                     "--sse-from", workdir / "sse.txt", "--3di-from", workdir / "tdi.txt")
    assert code == 0
    b = PccBundle.read(workdir / "helix.pcc")
    assert b.header["sequence_withheld"] and b.header["sse_source"] == "file"
    s0 = b.features[0].scalars
    assert (s0[:, :23] == 0).all() and (s0[:, 23:44].sum(1) == 1).all()
    code, _, _ = run(capsys, "featurize", workdir / "helix.pdb", workdir / "gly.pdb",
                     "--sse-from", workdir / "sse.txt", "-o", workdir)
    assert code == 64


def test_forward_outputs(workdir, capsys):
    run(capsys, "featurize", workdir / "helix.pdb", "-o", workdir)
    run(capsys, "init-params", "-o", workdir / "p.tcpn", "--seed", 3)
    code, out, _ = run(capsys, "forward", workdir / "helix.pcc", "--params", workdir / "p.tcpn")
    assert code == 0 and "width=128" in out
    text = (workdir / "helix.emb.txt").read_bytes()
    binary = (workdir / "helix.emb.bin").read_bytes()
    lines = text.decode().splitlines()
    assert lines[0] == "readout mean 128"
    assert all(len(np.format_float_scientific(float(x))) > 0 for x in lines[1:129])
    run(capsys, "forward", workdir / "helix.pcc", "--params", workdir / "p.tcpn")
    assert (workdir / "helix.emb.txt").read_bytes() == text
    assert (workdir / "helix.emb.bin").read_bytes() == binary


def test_forward_shape_mismatch(workdir, capsys):
    run(capsys, "featurize", workdir / "helix.pdb", "-o", workdir)
    other = init_params(ModelConfig(input_scalar_dims=(70, 17, 28, 47), num_layers=1))
    save_params(other, workdir / "bad.tcpn")
    code, _, err = run(capsys, "forward", workdir / "helix.pcc", "--params", workdir / "bad.tcpn")
    assert code == 65
    assert "ShapeMismatch" in err and "rank 2" in err and "38" in err and "28" in err


def test_f32_pipeline(workdir, capsys):
    run(capsys, "featurize", "--f32", workdir / "gly.pdb", "-o", workdir)
    assert PccBundle.read(workdir / "gly.pcc").features[0].scalars.dtype == np.float32
    code, out, _ = run(capsys, "forward", "--f32", "--readout", "protein", workdir / "gly.pcc")
    assert code == 0 and "width=128" in out


def test_corrupt_bundle(workdir, capsys):
    (workdir / "junk.pcc").write_bytes(b"PCC1\x01\x00\x00\x00garbage")
    code, _, err = run(capsys, "inspect", workdir / "junk.pcc")
    assert code == 65 and "CorruptBlob" in err


def test_check_algebra(capsys):
    code, out, _ = run(capsys, "check", "--suite", "algebra", "--trials", 100, "--seed", 4)
    lines = out.splitlines()
    assert code == 0
    assert lines[0].startswith("suite=algebra seed=4")
    assert all("trials=100" in ln and "status=pass" in ln for ln in lines if ln.startswith("check="))
    assert lines[-1] == "summary checks=7 failed=0 seed=4"


def test_check_equivariance_reports_reflection(capsys):
    code, out, _ = run(capsys, "check", "--suite", "equivariance", "--trials", 1)
    assert code == 0
    line = next(ln for ln in out.splitlines() if "reflection_sensitivity" in ln)
    value = float(line.split("value=")[1].split()[0])
    assert value > 1e-4


def test_usage_errors(capsys):
    assert run(capsys, "check", "--suite", "nope")[0] == 64
    assert run(capsys)[0] == 64
    assert run(capsys, "featurize", "--knn", "0", "x.pdb")[0] == 64


def test_bench_table(capsys):
    code, out, _ = run(capsys, "bench", "--sizes", 16, 24, "--repeats", 1, "--layers", 1)
    rows = out.splitlines()
    assert code == 0 and len(rows) == 5
    assert rows[0].split() == ["size", "stage", "median_s", "min_s"]
    assert len({len(r) for r in rows}) == 1  # right-aligned columns
    assert [r.split()[1] for r in rows[1:]] == ["featurize", "forward"] * 2


def test_threads_env(workdir, capsys, monkeypatch):
    monkeypatch.setenv("PCC_THREADS", "2")
    code, _, _ = run(capsys, "featurize", workdir / "helix.pdb", workdir / "gly.pdb", "-o", workdir)
    assert code == 0
    monkeypatch.setenv("PCC_THREADS", "many")
    assert run(capsys, "featurize", workdir / "gly.pdb", "-o", workdir)[0] == 64


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "protcc.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "featurize" in res.stdout
