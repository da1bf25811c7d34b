"""Command-line interface: run/diagnose/spectrum/sweep/validate and the
exit-code contract (0 ok, 1 validation, 2 divergence, 3 I/O)."""

import json
import subprocess
import sys

import numpy as np
import pytest

from npflow.cli import main
from npflow.snapshots import read_snapshot
from npflow.timeseries import read_table

NPD_DOC = """\
model: NPD
n: 16
seed: 3
cadence: 2
stepper: {dt: 0.01, t_end: 0.05}
T0: 1.0
species:
  - z: 1.0
    D: 0.5
    initial:
      kind: bumps
      base: 1.0
      bumps: [{center: [3.0, 3.0], width: 0.8, amplitude: 0.5}]
  - z: -1.0
    D: 1.0
    initial:
      kind: bumps
      base: 1.0
      bumps: [{center: [3.5, 2.5], width: 0.9, amplitude: 0.5}]
"""

NPE_DOC = """\
model: NPE
n: 16
seed: 7
cadence: 2
stepper: {dt: 0.01, t_end: 0.04}
tau0: 0.5
species:
  - {z: 1.0, D: 0.5, initial: {kind: constant, value: 1.0}}
  - {z: -1.0, D: 1.0, initial: {kind: constant, value: 1.0}}
vorticity: {kind: random_band, k_min: 1, k_max: 4, amplitude: 0.4}
"""


def write_config(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def run_files(outdir):
    return sorted(p.name for p in outdir.iterdir())


def test_validate_ok_and_bad(tmp_path, capsys):
    good = write_config(tmp_path, NPD_DOC)
    assert main(["validate", "--config", str(good)]) == 0
    bad = write_config(tmp_path, NPD_DOC.replace("model: NPD", "model: x"),
                       "bad.yaml")
    assert main(["validate", "--config", str(bad)]) == 1
    assert "model" in capsys.readouterr().err


def test_missing_config_exits_3(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "ghost.yaml")]) == 3
    assert main(["run", "--config", str(tmp_path / "ghost.yaml"),
                 "--out", str(tmp_path / "o")]) == 3


def test_run_writes_the_documented_layout(tmp_path):
    cfg = write_config(tmp_path, NPD_DOC)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0

    names = run_files(out)
    # dt = 0.01 to t = 0.05 at cadence 2 samples steps 0, 2, 4, 5
    assert names == ["invariants.csv", "radius.csv", "resolved.yaml",
                     "snapshot_00000000.bin", "snapshot_00000002.bin",
                     "snapshot_00000004.bin", "snapshot_00000005.bin",
                     "status.json"]

    status = json.loads((out / "status.json").read_text())
    assert status["status"] == "complete"
    assert status["steps"] == 5
    assert status["final_time"] == pytest.approx(0.05)

    inv = read_table(out / "invariants.csv")
    assert inv["time"][0] == 0.0
    assert inv["time"][-1] == pytest.approx(0.05)
    assert len(inv["time"]) == 4
    # two-species mass columns stay put to 1e-10 relative
    for col in ("mass_c1", "mass_c2"):
        drift = np.abs(inv[col] - inv[col][0]) / np.abs(inv[col][0])
        assert np.max(drift) < 1e-10

    rad = read_table(out / "radius.csv")
    assert rad["tau_theory"][-1] == pytest.approx(0.5 * 0.5 * 0.05)

    final = read_snapshot(out / "snapshot_00000005.bin")
    assert final.time == pytest.approx(0.05)


def test_rerun_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, NPE_DOC)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg), "--out", str(out1)]) == 0
    first = {name: (out1 / name).read_bytes() for name in run_files(out1)}
    # rerunning in place reproduces every file byte for byte
    assert main(["run", "--config", str(cfg), "--out", str(out1)]) == 0
    assert {name: (out1 / name).read_bytes()
            for name in run_files(out1)} == first
    # a second directory matches too, apart from the recorded output_dir
    assert main(["run", "--config", str(cfg), "--out", str(out2)]) == 0
    assert run_files(out2) == sorted(first)
    for name in first:
        if name != "resolved.yaml":
            assert (out2 / name).read_bytes() == first[name], name


def test_run_resume_skips_completed(tmp_path, capsys):
    cfg = write_config(tmp_path, NPD_DOC)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    marker = out / "invariants.csv"
    before = marker.stat().st_mtime_ns
    assert main(["run", "--config", str(cfg), "--out", str(out),
                 "--resume"]) == 0
    assert marker.stat().st_mtime_ns == before  # untouched
    assert "complete" in capsys.readouterr().out


def test_diagnose_reproduces_run_series(tmp_path):
    cfg = write_config(tmp_path, NPD_DOC)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["diagnose", str(out)]) == 0

    run_inv = read_table(out / "invariants.csv")
    dia_inv = read_table(out / "diagnose_invariants.csv")
    for col in run_inv:
        assert np.array_equal(run_inv[col], dia_inv[col]), col
    run_rad = read_table(out / "radius.csv")
    dia_rad = read_table(out / "diagnose_radius.csv")
    # the offline ledger must agree bitwise with the online tracker
    assert np.array_equal(run_rad["tau_theory"], dia_rad["tau_theory"])

    ledger = json.loads((out / "gronwall.json").read_text())
    assert ledger["model"] == "NPD"
    assert min(ledger["margin"]) >= 0.0


def test_diagnose_on_npe_run(tmp_path):
    cfg = write_config(tmp_path, NPE_DOC)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["diagnose", str(out)]) == 0
    run_rad = read_table(out / "radius.csv")
    dia_rad = read_table(out / "diagnose_radius.csv")
    assert np.array_equal(run_rad["tau_theory"], dia_rad["tau_theory"])
    assert json.loads((out / "gronwall.json").read_text())["model"] == "NPE"


def test_diagnose_emits_gevrey_probe_series(tmp_path):
    doc = NPD_DOC + "gevrey_probes: [{tau: 0.05, m: 3}, {tau: 0.1, m: 2}]\n"
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["diagnose", str(out)]) == 0
    table = read_table(out / "diagnose_gevrey.csv")
    assert tuple(table) == ("time", "y_tau0.05_m3", "y_tau0.1_m2")
    assert len(table["time"]) == 4
    assert np.all(table["y_tau0.05_m3"] > 0)


def test_diagnose_without_run_dir_exits_3(tmp_path):
    assert main(["diagnose", str(tmp_path / "missing")]) == 3


def test_spectrum_emits_per_field_and_combined_rows(tmp_path):
    cfg = write_config(tmp_path, NPE_DOC)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["spectrum", str(out)]) == 0
    spectra = sorted(out.glob("spectrum_*.csv"))
    assert [p.name for p in spectra] == [
        "spectrum_00000000.csv", "spectrum_00000002.csv",
        "spectrum_00000004.csv"]
    lines = spectra[0].read_text().splitlines()
    assert lines[0] == "field,shell,k_at_max,amplitude"
    fields = {row.split(",")[0] for row in lines[1:]}
    assert fields == {"c1", "c2", "omega", "combined"}
    # combined row carries the max over fields, shell by shell
    rows = [row.split(",") for row in lines[1:]]
    by_field = {}
    for name, shell, _, amp in rows:
        by_field.setdefault(name, {})[int(shell)] = float(amp)
    for shell, amp in by_field["combined"].items():
        parts = [by_field[f].get(shell, 0.0) for f in ("c1", "c2", "omega")]
        assert amp == max(parts)


def test_divergent_run_exits_2(tmp_path, capsys):
    doc = NPD_DOC.replace("dt: 0.01, t_end: 0.05", "dt: 10.0, t_end: 40.0")
    doc = doc.replace("amplitude: 0.5", "amplitude: 40.0")
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 2
    assert "diverged" in capsys.readouterr().err
    status = json.loads((out / "status.json").read_text())
    assert status["status"] == "diverged"
    assert status["divergence_step"] is not None


def test_sweep_runs_grid_and_resumes(tmp_path, capsys):
    doc = NPD_DOC + """\
sweep:
  seed: [3, 4]
  species.0.D: [0.5, 0.75]
"""
    cfg = write_config(tmp_path, doc, "sweep.yaml")
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfg), "--out", str(out),
                 "--workers", "2"]) == 0

    manifest_path = out / "sweep_manifest.jsonl"
    entries = [json.loads(line)
               for line in manifest_path.read_text().splitlines()]
    assert len(entries) == 4
    assert all(e["status"] == "complete" for e in entries)
    dirs = sorted(e["dir"] for e in entries)
    assert len(set(dirs)) == 4
    for d in dirs:
        assert (out / d / "status.json").exists()
        assert "seed:" in (out / d / "resolved.yaml").read_text()

    # point directories encode the overridden values
    assert any("seed=4" in d for d in dirs)
    assert any("D=0.75" in d for d in dirs)

    before = manifest_path.read_text()
    assert main(["sweep", "--config", str(cfg), "--out", str(out),
                 "--resume"]) == 0
    assert manifest_path.read_text() == before  # nothing re-run
    assert "skip" in capsys.readouterr().out.lower()


def test_sweep_propagates_worst_exit_code(tmp_path):
    doc = NPD_DOC + """\
sweep:
  species.0.initial.bumps.0.amplitude: [0.5, 1000000.0]
"""
    cfg = write_config(tmp_path, doc, "sweep.yaml")
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 2
    entries = [json.loads(line) for line
               in (out / "sweep_manifest.jsonl").read_text().splitlines()]
    statuses = sorted(e["status"] for e in entries)
    assert statuses == ["complete", "diverged"]


def test_sweep_validate_expands_points(tmp_path, capsys):
    doc = NPD_DOC + "sweep: {seed: [1, 2, 3]}\n"
    cfg = write_config(tmp_path, doc, "sweep.yaml")
    assert main(["validate", "--config", str(cfg)]) == 0
    assert "3" in capsys.readouterr().out


def test_cli_entry_point_subprocess(tmp_path):
    cfg = write_config(tmp_path, NPD_DOC)
    proc = subprocess.run(
        [sys.executable, "-m", "npflow.cli", "validate",
         "--config", str(cfg)],
        capture_output=True, text=True)
    assert proc.returncode == 0
