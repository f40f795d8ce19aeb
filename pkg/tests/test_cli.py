"""Command-line interface: exit codes, error prefixes, end-to-end runs."""

import numpy as np
import pytest

from surfns.cli import main
from surfns.output import CONVERGENCE_HEADER, DIAGNOSTICS_HEADER, read_vtk_structure

TRANSLATING_SPHERE = """
[mesh]
kind = sphere
level = 1

[physics]
alpha = 0.0

[time]
tau = 1e-3
T = 5e-3

[initial]
velocity = constant
vector = 1.0 0.0 0.0

[output]
directory = {out_dir}
formats = csv vtk
stride = 1
"""


class TestUsageErrors:
    def test_no_subcommand(self, capsys):
        assert main([]) == 2
        assert capsys.readouterr().out.startswith("ERROR:")

    def test_unknown_flag(self, capsys):
        assert main(["converge", "--wat"]) == 2
        assert "ERROR:" in capsys.readouterr().out

    def test_missing_config_file(self, capsys):
        assert main(["run", "/no/such/file.cfg"]) == 2
        out = capsys.readouterr().out
        assert out.startswith("ERROR:") and "file.cfg" in out

    def test_bad_config_contents(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[time]\ntau = sometimes\n")
        assert main(["run", str(cfg)]) == 2
        out = capsys.readouterr().out
        assert out.startswith("ERROR:") and "line 2" in out

    def test_converge_level_floor(self, capsys):
        assert main(["converge", "--levels", "1"]) == 2
        assert "ERROR:" in capsys.readouterr().out

    def test_version_and_help_exit_zero(self, capsys):
        assert main(["--version"]) == 0
        capsys.readouterr()
        assert main(["--help"]) == 0


class TestRun:
    def test_translating_sphere_end_to_end(self, tmp_path, capsys):
        out_dir = tmp_path / "out"
        cfg = tmp_path / "run.cfg"
        cfg.write_text(TRANSLATING_SPHERE.format(out_dir=out_dir))
        assert main(["run", str(cfg)]) == 0
        stdout = capsys.readouterr().out
        assert "completed 5 steps" in stdout

        diag_lines = (out_dir / "diagnostics.csv").read_text().splitlines()
        assert diag_lines[0] == DIAGNOSTICS_HEADER
        assert len(diag_lines) == 1 + 6  # initial record plus five steps

        snaps = sorted(out_dir.glob("surface_*.vtk"))
        assert len(snaps) == 6
        first = read_vtk_structure(snaps[0])
        last = read_vtk_structure(snaps[-1])
        # pure translation: every node moved by exactly T b0
        shift = last["points"] - first["points"]
        assert np.allclose(shift, [5e-3, 0.0, 0.0], atol=1e-9)
        assert np.abs(last["point_data"]["pressure"]).max() <= 1e-9

    def test_steps_override_and_stride(self, tmp_path):
        out_dir = tmp_path / "out"
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            TRANSLATING_SPHERE.format(out_dir=out_dir).replace(
                "stride = 1", "stride = 2"
            )
        )
        assert main(["run", str(cfg), "--steps", "4"]) == 0
        assert len(list(out_dir.glob("surface_*.vtk"))) == 3  # steps 0, 2, 4
        lines = (out_dir / "diagnostics.csv").read_text().splitlines()
        assert len(lines) == 1 + 5

    def test_numerical_failure_exits_one(self, tmp_path, capsys):
        # the quasi-static limit makes the implicit system singular, which
        # must surface as a numerical error, not a crash or a usage error
        out_dir = tmp_path / "out"
        cfg = tmp_path / "sing.cfg"
        cfg.write_text(
            f"[mesh]\nkind = sphere\nlevel = 1\n"
            f"[physics]\nrho = 0.0\n"
            f"[time]\ntau = 1e-3\nT = 2e-3\n"
            f"[output]\ndirectory = {out_dir}\n"
        )
        assert main(["run", str(cfg)]) == 1
        assert capsys.readouterr().out.startswith("ERROR:")


class TestConverge:
    def test_two_cheap_levels_csv(self, tmp_path, capsys):
        out = tmp_path / "conv.csv"
        code = main(
            [
                "converge",
                "--levels",
                "2",
                "--start-level",
                "1",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        stdout = capsys.readouterr().out
        lines = [ln for ln in stdout.splitlines() if ln]
        assert lines[0] == CONVERGENCE_HEADER
        assert lines[3].startswith("# pressure interpretation:")
        header_and_rows = out.read_text().splitlines()
        assert header_and_rows[0] == CONVERGENCE_HEADER
        assert len(header_and_rows) == 3
        level, num_elements = header_and_rows[2].split(",")[:2]
        assert level == "2" and num_elements == "128"
        # errors decreased across the pair
        first_err = float(header_and_rows[1].split(",")[4])
        second_err = float(header_and_rows[2].split(",")[4])
        assert second_err < first_err

    def test_gentle_profile_flag(self, capsys):
        assert main(
            ["converge", "--levels", "2", "--start-level", "1",
             "--profile", "gentle", "--T", "0.5"]
        ) == 0
        stdout = capsys.readouterr().out
        assert stdout.splitlines()[0] == CONVERGENCE_HEADER


class TestVerify:
    def test_verify_passes_on_fresh_checkout(self, capsys):
        assert main(["verify"]) == 0
        out = capsys.readouterr().out
        lines = [ln for ln in out.splitlines() if ln.startswith(("PASS", "FAIL"))]
        assert len(lines) >= 8
        assert all(ln.startswith("PASS") for ln in lines)
