"""Test the command line interface"""

import json

import pytest
from typer.testing import CliRunner

from pyiongate.cli import app
from pyiongate.config import load_config

runner = CliRunner()


def _invoke(*args):
    return runner.invoke(app, [str(arg) for arg in args])


class TestTrap:
    def test_derived_parameters(self, compact_config_file, tmp_path):
        result = _invoke("trap", "--config", compact_config_file(), "--out", tmp_path / "out")
        assert result.exit_code == 0, result.output
        assert len(list((tmp_path / "out").glob("trap-*.manifest.json"))) == 1

    def test_malformed_config(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"trap": ')
        assert _invoke("trap", "-c", path).exit_code == 2

    def test_unstable_trap(self, compact_config_file):
        result = _invoke("trap", "-c", compact_config_file(trap={"ac_voltage_v": 2.0}))
        assert result.exit_code == 3

    def test_seedless_is_reserved(self, compact_config_file):
        assert _invoke("trap", "-c", compact_config_file(), "--seedless").exit_code == 2


class TestModes:
    def test_csv(self, compact_config_file, tmp_path):
        out = tmp_path / "out"
        result = _invoke("modes", "-c", compact_config_file(), "-o", out)
        assert result.exit_code == 0, result.output
        (path,) = out.glob("modes-*.csv")
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# manifest: modes-")
        assert lines[1] == "t_over_Tz,re_v_cm,im_v_cm,re_v_r,im_v_r,eta_mm"
        # 0.5 T_z in steps of 0.01 T_z
        assert len(lines) == 2 + 51
        assert float(lines[2].split(",")[0]) == 0.0
        assert float(lines[-1].split(",")[0]) == pytest.approx(0.5)


class TestDesign:
    def test_single_segment(self, compact_config_file, tmp_path):
        out = tmp_path / "out"
        config_path = compact_config_file()
        result = _invoke("design", "-c", config_path, "-o", out)
        assert result.exit_code == 0, result.output
        stem = f"design-{load_config(config_path).digest[:12]}"
        document = json.loads((out / f"{stem}.json").read_text())
        assert document["manifest"] == f"{stem}.manifest.json"
        assert (out / document["manifest"]).is_file()
        assert 0.0 <= document["report"]["fidelity"]["fidelity"] <= 1.0
        waveform = out / f"{stem}.waveform.csv"
        assert waveform.read_text().splitlines()[1] == "segment,t_start_over_Tz,t_end_over_Tz,omega_rad_s"

    def test_static_design_to_stdout(self, compact_config_file):
        result = _invoke("design", "-c", compact_config_file(), "--static")
        assert result.exit_code == 0, result.output
        assert '"report"' in result.stdout

    def test_infeasible(self, compact_config_file):
        path = compact_config_file(design={"mode": "segments", "segments": 8})
        assert _invoke("design", "-c", path).exit_code == 4


class TestScan:
    def test_scan(self, compact_config_file, tmp_path):
        out = tmp_path / "out"
        result = _invoke("scan", "-c", compact_config_file(), "-o", out)
        assert result.exit_code == 0, result.output
        assert len(list(out.glob("scan-*.csv"))) == 1
        assert "best:" in result.stdout

    def test_every_point_infeasible(self, compact_config_file, tmp_path):
        path = compact_config_file(design={"mode": "segments", "segments": 1})
        assert _invoke("scan", "-c", path, "-o", tmp_path / "out").exit_code == 5
