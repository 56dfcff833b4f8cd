import os

import numpy as np
import pytest

from supmin.cli import main
from supmin.config import config_hash, parse_config

SYMMETRIC_CFG = """
# 1D least-peak-acceleration benchmark (coarse)
domain.dim = 1
domain.nodes = 51
field.components = 1
tensor.kind = identity
supremand.q = 2
supremand.alpha = 1
bc.kind = symmetric_velocity
schedule.p_max = 256
seed = 0
"""

AFFINE_CFG = """
domain.dim = 1
domain.nodes = 51
bc.kind = affine
schedule.p_max = 256
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_report(out_dir):
    entries = {}
    rows = []
    for line in (out_dir / "report.txt").read_text().splitlines():
        key, _, value = line.partition(" = ")
        if key == "p_row":
            rows.append([float(v) for v in value.split()])
        else:
            entries[key] = value
    return entries, rows


def test_run_produces_verified_report(tmp_path):
    cfg = write(tmp_path, "sym.cfg", SYMMETRIC_CFG)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    entries, rows = read_report(out)
    assert entries["status"] == "ok"
    assert float(entries["e_inf_estimate"]) == pytest.approx(16.0, rel=0.1)
    assert float(entries["oracle.a"]) == pytest.approx(4.0)
    assert float(entries["oracle.s"]) == pytest.approx(0.5)
    assert float(entries["oracle.e_inf"]) == pytest.approx(16.0)
    # monotone energies and bracket containment in the emitted table
    energies = [r[1] for r in rows]
    peaks = [r[2] for r in rows]
    e_inf = float(entries["e_inf_estimate"])
    assert all(b >= a - 1e-8 for a, b in zip(energies, energies[1:]))
    assert all(e - 1e-8 <= e_inf <= m + 1e-8 for e, m in zip(energies, peaks))
    assert (out / "oracle.txt").exists()

    fields = np.loadtxt(out / "fields.dat")
    assert fields.shape == (51, 5)  # x, u, Lu, F, f


def test_run_is_bit_reproducible(tmp_path):
    cfg = write(tmp_path, "sym.cfg", SYMMETRIC_CFG)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["run", "--config", cfg, "--out", str(out_b)]) == 0
    for name in ("report.txt", "fields.dat", "oracle.txt"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_run_zero_energy_branch(tmp_path):
    cfg = write(tmp_path, "affine.cfg", AFFINE_CFG)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    entries, rows = read_report(out)
    assert entries["degenerate"] == "true"
    assert float(entries["e_inf_estimate"]) <= 1e-6


def test_invalid_exponent_rejected(tmp_path):
    cfg = write(tmp_path, "bad.cfg", "supremand.q = 0.5\nbc.kind = affine\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_unknown_key_rejected(tmp_path):
    cfg = write(tmp_path, "bad.cfg", "domain.dim = 1\nnot.a.key = 3\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_verification_threshold_failure(tmp_path):
    text = SYMMETRIC_CFG + "check.r_harmonic = 1e-30\n"
    cfg = write(tmp_path, "strict.cfg", text)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 4


def test_override_flags_change_hash(tmp_path):
    cfg_path = write(tmp_path, "sym.cfg", SYMMETRIC_CFG)
    base = parse_config(SYMMETRIC_CFG)
    out = tmp_path / "o"
    assert main(["run", "--config", cfg_path, "--out", str(out),
                 "--nodes", "41", "--p-max", "64", "--seed", "7"]) == 0
    entries, rows = read_report(out)
    assert entries["nodes"] == "41"
    assert entries["seed"] == "7"
    assert rows[-1][0] <= 64.0
    assert entries["config_hash"] != config_hash(base)


def test_sweep_runs_all_and_aggregates(tmp_path):
    cfg_a = write(tmp_path, "a.cfg", SYMMETRIC_CFG)
    cfg_b = write(tmp_path, "b.cfg", AFFINE_CFG)
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", cfg_a, "--config", cfg_b, "--out", str(out)]) == 0
    summary = (out / "sweep.txt").read_text()
    assert summary.count(": ok") == 2
    subdirs = [d for d in os.listdir(out) if (out / d).is_dir()]
    assert len(subdirs) == 2
    for sub in subdirs:
        assert (out / sub / "report.txt").exists()


def test_sweep_empty_rejected(tmp_path):
    assert main(["sweep", "--out", str(tmp_path / "o")]) == 2


def test_sweep_propagates_failures(tmp_path):
    good = write(tmp_path, "good.cfg", AFFINE_CFG)
    strict = write(tmp_path, "strict.cfg", SYMMETRIC_CFG + "check.r_harmonic = 1e-30\n")
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", good, "--config", strict, "--out", str(out)]) == 4
    assert "verify-failure" in (out / "sweep.txt").read_text()


def test_refinement_sweep_converges_toward_oracle(tmp_path):
    outs = {}
    cfg = write(tmp_path, "sym.cfg", SYMMETRIC_CFG)
    for nodes in (26, 51, 101):
        out = tmp_path / f"n{nodes}"
        assert main(["run", "--config", cfg, "--out", str(out), "--nodes", str(nodes)]) == 0
        entries, _ = read_report(out)
        outs[nodes] = abs(float(entries["e_inf_estimate"]) - 16.0)
    assert outs[26] > outs[51] > outs[101]


def test_p_max_sweep_shrinks_bracket(tmp_path):
    widths = []
    # low p_max runs are legitimately uncertified; relax the residual check
    cfg = write(tmp_path, "sym.cfg", SYMMETRIC_CFG + "tol.bracket_stop = 1e-9\ncheck.r_system = 0.5\n")
    for p_max in (16, 64, 256):
        out = tmp_path / f"p{p_max}"
        assert main(["run", "--config", cfg, "--out", str(out), "--p-max", str(p_max)]) == 0
        entries, _ = read_report(out)
        widths.append(float(entries["bracket_high"]) - float(entries["bracket_low"]))
    assert widths[0] > widths[1] > widths[2]


def test_oracle_direct_endpoint_data(capsys):
    assert main(["oracle", "--bc", "0,1,0,1"]) == 0
    text = capsys.readouterr().out
    values = dict(line.split(" = ") for line in text.strip().splitlines())
    assert float(values["a"]) == pytest.approx(4.0)
    assert float(values["s"]) == pytest.approx(0.5)
    assert int(values["sigma"]) == -1
    assert float(values["e_inf"]) == pytest.approx(16.0)


def test_oracle_from_config(tmp_path, capsys):
    cfg = write(tmp_path, "sym.cfg", SYMMETRIC_CFG)
    assert main(["oracle", "--config", cfg]) == 0
    assert "a = 4.0" in capsys.readouterr().out


def test_oracle_not_applicable(tmp_path):
    cfg = write(tmp_path, "vec.cfg", "domain.dim = 2\ndomain.nodes = 11,11\nbc.kind = sinusoidal\n")
    assert main(["oracle", "--config", cfg]) == 2


def test_check_tensor_det_coupled(tmp_path, capsys):
    text = (
        "domain.dim = 2\ndomain.nodes = 11,11\nfield.components = 2\n"
        "tensor.kind = det_coupled\ntensor.gamma = 3\ntensor.lambda = 1\n"
        "bc.kind = sinusoidal\n"
    )
    cfg = write(tmp_path, "det.cfg", text)
    assert main(["check-tensor", "--config", cfg]) == 0
    out = capsys.readouterr().out
    values = dict(line.split(" = ") for line in out.strip().splitlines())
    assert float(values["legendre_min"]) == pytest.approx(-0.5, abs=1e-8)
    assert float(values["legendre_hadamard_min"]) == pytest.approx(1.0, abs=1e-6)


def test_boundary_file_round_trip(tmp_path):
    t = np.linspace(0.0, 1.0, 31)
    table = (2 * t**3 - 3 * t**2 + t).reshape(-1, 1)
    data_path = tmp_path / "boundary.dat"
    np.savetxt(data_path, table)
    text = (
        "domain.dim = 1\ndomain.nodes = 31\nbc.kind = file\n"
        f"bc.file = {data_path}\nschedule.p_max = 128\n"
    )
    cfg = write(tmp_path, "file.cfg", text)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    entries, _ = read_report(out)
    assert float(entries["e_inf_estimate"]) == pytest.approx(16.0, rel=0.1)
