import csv
import subprocess
import sys

import numpy as np
import pytest

from srsp import cli, spectral
from srsp.io import read_diagnostics, snapshot_read
from srsp.spectral import DomainSpec

SMALL = """
[domain]
N = 16
[physics]
K = 3
[integration]
dt = 0.005
steps = {steps}
cadence = 10
[output]
directory = out
"""


def config(tmp_path, body=None, steps=50, extra=""):
    p = tmp_path / "run.ini"
    p.write_text((body if body is not None else SMALL.format(steps=steps)) + extra)
    return p


def test_run_writes_csv(tmp_path, capsys):
    assert cli.main(["run", str(config(tmp_path))]) == 0
    recs = read_diagnostics(tmp_path / "out" / "diagnostics.csv")
    assert [round(r.t, 9) for r in recs] == [round(0.05 * i, 9) for i in range(6)]
    out = capsys.readouterr().out
    assert "drift[mass]" in out and "conserved energy variant" in out
    assert max(r.mass for r in recs) - min(r.mass for r in recs) <= 1e-12


def test_free_run_constant_mass(tmp_path):
    p = config(tmp_path, body=SMALL.format(steps=40).replace("K = 3", "K = 3\ncoupling = off"))
    assert cli.main(["run", str(p)]) == 0
    recs = read_diagnostics(tmp_path / "out" / "diagnostics.csv")
    mass = [r.mass for r in recs]
    assert max(mass) - min(mass) <= 1e-13
    energies = [r.energy_Tm for r in recs]
    assert max(energies) - min(energies) <= 1e-12 * abs(energies[0])


def test_zero_steps_single_row(tmp_path):
    assert cli.main(["run", str(config(tmp_path, steps=0))]) == 0
    with open(tmp_path / "out" / "diagnostics.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 2 and float(rows[1][0]) == 0.0


def test_plots_and_snapshots(tmp_path):
    p = config(tmp_path, extra="plot = on\nsnapshot_cadence = 25\n")
    assert cli.main(["run", str(p)]) == 0
    out = tmp_path / "out"
    for name in ("mass.svg", "energy.svg", "gram_defect.svg", "snapshot_00000025.srsp",
                 "snapshot_00000050.srsp", "final.srsp"):
        assert (out / name).is_file(), name
    dom = DomainSpec((1.0,), (16,), 2)
    final = snapshot_read(out / "final.srsp", dom)
    mid = snapshot_read(out / "snapshot_00000050.srsp", dom)
    np.testing.assert_array_equal(final.psi, mid.psi)


def test_restart_from_snapshot(tmp_path):
    first = config(tmp_path, extra="snapshot_cadence = 50\n")
    assert cli.main(["run", str(first)]) == 0
    rec_a = read_diagnostics(tmp_path / "out" / "diagnostics.csv")
    second = tmp_path / "restart.ini"
    second.write_text(SMALL.format(steps=0).replace("directory = out", "directory = again")
                      + "[initial]\nsnapshot = out/final.srsp\n")
    assert cli.main(["run", str(second)]) == 0
    rec_b = read_diagnostics(tmp_path / "again" / "diagnostics.csv")
    assert rec_b[0].mass == rec_a[-1].mass
    assert rec_b[0].energy_Tm == rec_a[-1].energy_Tm


def test_verify_passes(tmp_path, capsys):
    assert cli.main(["verify", str(config(tmp_path)), "--trials", "20"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    for name in ("eigenvalue_table", "synthesis_vs_direct_sum", "poisson_fd_order", "norm_equivalence",
                 "kinetic_bound_m=0.1", "kinetic_bound_m=10", "lipschitz_scaling"):
        assert f"PASS {name}" in out


def test_verify_detects_tampered_eigenvalues(tmp_path, monkeypatch, capsys):
    original = spectral.eigenvalue_table
    monkeypatch.setattr(spectral, "eigenvalue_table", lambda L, extent: original(L, extent) * (1 + 1e-9))
    assert cli.main(["verify", str(config(tmp_path)), "--trials", "5"]) == cli.EXIT_VERIFY
    captured = capsys.readouterr()
    assert "FAIL eigenvalue_table" in captured.out
    assert captured.err.startswith("error[E_VERIFY]:")


def test_verify_zero_trials(tmp_path, capsys):
    assert cli.main(["verify", str(config(tmp_path)), "--trials", "0"]) == cli.EXIT_USAGE
    assert capsys.readouterr().err.startswith("error[E_USAGE]:")


def test_converge(tmp_path, capsys):
    body = SMALL.format(steps=0) + "[converge]\nt_final = 0.1\ndt0 = 0.02\ndt_levels = 4\nn_levels = 3\n"
    assert cli.main(["converge", str(config(tmp_path, body=body))]) == 0
    with open(tmp_path / "out" / "convergence.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["ladder", "level", "dt", "N", "error", "observed_order", "tail_norm"]
    dt_rows = [r for r in rows if r["ladder"] == "dt"]
    assert len(dt_rows) == 4 and len([r for r in rows if r["ladder"] == "N"]) == 3
    orders = [float(r["observed_order"]) for r in dt_rows[1:]]
    assert all(abs(o - 2) <= 0.2 for o in orders)
    assert "dt slope estimate" in capsys.readouterr().out


def test_converge_free_reports_roundoff(tmp_path, capsys):
    body = (SMALL.format(steps=0).replace("K = 3", "K = 3\ncoupling = off")
            + "[converge]\nt_final = 0.1\ndt_levels = 4\n")
    assert cli.main(["converge", str(config(tmp_path, body=body))]) == 0
    assert "n/a (errors at roundoff)" in capsys.readouterr().out


def test_blowup_exit(tmp_path, capsys):
    body = SMALL.format(steps=20).replace("dt = 0.005", "dt = 0.5\nguard_factor = 1.000000001")
    assert cli.main(["run", str(config(tmp_path, body=body))]) == cli.EXIT_BLOWUP
    captured = capsys.readouterr()
    assert "final record:" in captured.out
    assert captured.err.startswith("error[E_BLOWUP]:")
    assert len(read_diagnostics(tmp_path / "out" / "diagnostics.csv")) >= 2


@pytest.mark.parametrize("argv, code, prefix", [
    (["run"], cli.EXIT_USAGE, "error[E_USAGE]:"),
    (["dance", "x.ini"], cli.EXIT_USAGE, "error[E_USAGE]:"),
    (["run", "/nonexistent/run.ini"], cli.EXIT_IO, "error[E_IO]:"),
])
def test_usage_errors(argv, code, prefix, capsys):
    assert cli.main(argv) == code
    err = capsys.readouterr().err
    assert err.startswith(prefix) and err.count("\n") == 1


def test_config_error_single_line(tmp_path, capsys):
    p = config(tmp_path, body="[physics]\nK = 2\nweights = 0 1\n")
    assert cli.main(["run", str(p)]) == cli.EXIT_USAGE
    err = capsys.readouterr().err
    assert err.startswith("error[E_CONFIG]:") and err.count("\n") == 1
    assert "positivity rule" in err and ":3:" in err


def test_bad_snapshot_exit(tmp_path, capsys):
    (tmp_path / "bad.srsp").write_bytes(b"nope")
    p = config(tmp_path, extra="[initial]\nsnapshot = bad.srsp\n")
    assert cli.main(["run", str(p)]) == cli.EXIT_SNAPSHOT
    assert capsys.readouterr().err.startswith("error[E_SNAPSHOT]:")


def test_console_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "srsp.cli", "run", str(config(tmp_path, steps=10))],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "wrote 2 records" in proc.stdout
