import json

import numpy as np
import pytest

from qecopt.channels import load_kraus, validate
from qecopt.cli import main
from qecopt.codes import known_code
from qecopt.qec import load_code, save_code

BF = ["--family", "bitflip_independent", "--qubits", "3", "--p", "0.25"]
BF_FULL = ["--family", "bitflip_full", "--qubits", "3", "--p", "0.25"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_optimize_then_certify(tmp_path, capsys):
    out = tmp_path / "code.json"
    code, stdout, _ = run(capsys, "optimize", *BF, "--d", "2", "--starts", "3", "--out", str(out))
    assert code == 0
    rep = json.loads(stdout)
    assert abs(rep["J"] - 4) < 1e-6 and len(rep["all_J"]) == 3
    assert json.loads((tmp_path / "code.report.json").read_text()) == rep
    assert load_code(out).U.shape == (8, 2)
    code, stdout, _ = run(capsys, "certify", *BF, "--code", str(out))
    assert code == 0 and json.loads(stdout)["correctable"]


def test_certify_not_correctable(capsys):
    code, stdout, _ = run(capsys, "certify", *BF_FULL, "--fixture", "repetition3")
    rep = json.loads(stdout)
    assert code == 1 and not rep["correctable"]
    assert 0 <= rep["fidelity_with_petz"] <= 1 + 1e-9


def test_certify_five_qubit(capsys):
    code, _, _ = run(capsys, "certify", "--family", "depolarizing_independent", "--qubits", "5", "--p", "0.2", "--fixture", "laflamme5")
    assert code == 0


def test_noise_file(tmp_path, capsys):
    (tmp_path / "n.json").write_text(json.dumps({"family": "bitflip_independent", "qubits": 3, "p": 0.1}))
    code, _, _ = run(capsys, "certify", "--noise", str(tmp_path / "n.json"), "--fixture", "repetition3")
    assert code == 0


def test_config_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["optimize", *BF, "--out", str(tmp_path / "c.json")])
    assert exc.value.code == 2
    (tmp_path / "bad.json").write_text("{broken")
    code, _, err = run(capsys, "certify", *BF, "--code", str(tmp_path / "bad.json"))
    assert code == 2 and "error" in err
    code, _, _ = run(capsys, "certify", *BF, "--code", str(tmp_path / "missing.json"))
    assert code == 2
    code, _, _ = run(capsys, "certify", "--fixture", "repetition3")
    assert code == 2
    code, _, _ = run(capsys, "optimize", *BF, "--d", "9", "--out", str(tmp_path / "c.json"))
    assert code == 2
    code, _, _ = run(capsys, "sweep", str(tmp_path / "nothing.json"))
    assert code == 2


def test_numeric_failure_exit(tmp_path, capsys):
    # a code living entirely in the kernel of the channel
    (tmp_path / "k.json").write_text(json.dumps({"n": 2, "kraus": [[[[1, 0], [0, 0]], [[0, 0], [0, 0]]]]}))
    (tmp_path / "c.json").write_text(json.dumps({"n": 2, "d": 1, "columns": [[[0, 0], [1, 0]]]}))
    with pytest.warns(UserWarning):
        code, _, err = run(capsys, "certify", "--noise", str(tmp_path / "k.json"), "--code", str(tmp_path / "c.json"))
    assert code == 3 and "numerical" in err


def test_recover_opt(tmp_path, capsys):
    out = tmp_path / "rec.json"
    code, stdout, _ = run(capsys, "recover-opt", *BF_FULL, "--fixture", "repetition3", "--out", str(out))
    rep = json.loads(stdout)
    assert code == 0 and rep["fidelity_optimized"] >= rep["fidelity_petz"]
    assert validate(load_kraus(out)).tp_deviation < 1e-8


def test_sweep_reproducible(tmp_path, capsys):
    save_code(known_code("repetition3").frame, tmp_path / "rep.json")
    cfg = {
        "experiment": "t",
        "noise": {"family": "bitflip_full", "qubits": 3, "p": 0.25},
        "sweep": {"var": "p", "grid": [0.1, 0.3]},
        "codes": [{"file": str(tmp_path / "rep.json")}, {"optimize": {"p": 0.25}}, {"baseline": "uncorrected"}],
        "optimizer": {"n_starts": 2, "max_iters": 50},
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    outs = []
    for name in ("a.csv", "b.csv"):
        code, _, _ = run(capsys, "sweep", str(tmp_path / "cfg.json"), "--out", str(tmp_path / name), "--no-timing")
        assert code == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    assert len(lines) == 1 + 6
    fid = [float(line.split(",")[8]) for line in lines[1:]]
    assert all(0 <= f <= 1 + 1e-9 for f in fid)


def test_sparse_report(tmp_path, capsys):
    code, stdout, _ = run(capsys, "optimize", *BF, "--d", "2", "--starts", "2", "--lambda", "0.1", "--out", str(tmp_path / "s.json"))
    rep = json.loads(stdout)
    assert code == 0 and all(len(col) <= 3 for col in rep["sparsity"])
    U = load_code(tmp_path / "s.json").U
    assert np.linalg.norm(U.conj().T @ U - np.eye(2)) < 1e-9
