import hashlib
import json
import os

import pytest

from chanmc.cli import main


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


MINIMAL = """
[beam]
n_protons = 10
[propagation]
steps = 64
[analysis]
bins = 16
sigma = Gx, X
"""


def test_minimal_simulate(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    out = tmp_path / "out"
    assert main(["simulate", cfg, "--out", str(out)]) == 0
    rows = (out / "records.csv").read_text().splitlines()
    assert len(rows) == 11 and rows[0].startswith("index,x_nm")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["counts"]["protons"] == 10
    assert manifest["seed"] == 0 and manifest["version"]
    assert manifest["wall_time_s"] >= 0
    for item in manifest["artifacts"]:
        data = (out / item["file"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == item["sha256"]
    assert {"records.csv", "hist_angular.csv", "sigma_X.csv", "invariants.csv", "fwhm.csv"} <= {
        a["file"] for a in manifest["artifacts"]}


def test_rerun_from_manifest_reproduces_hashes(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    assert main(["simulate", cfg, "--out", str(tmp_path / "a"), "--seed", "5", "--threads", "2"]) == 0
    first = json.loads((tmp_path / "a" / "manifest.json").read_text())
    again = write(tmp_path, first["config_text"].replace(str(tmp_path / "a"), str(tmp_path / "b")), "again.ini")
    assert main(["simulate", again]) == 0
    second = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert first["artifacts"] == second["artifacts"]
    assert first["seed"] == second["seed"] == 5


def test_zero_area_window_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL + "angular_window = 1, 1, -1, 1\n")
    assert main(["simulate", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "analysis.angular_window" in capsys.readouterr().err
    assert not (tmp_path / "o" / "manifest.json").exists()


def test_missing_config_file(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.ini")]) == 2


def test_scan_lists_required(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL)
    assert main(["scan-tilt", cfg, "--out", str(tmp_path / "o")]) == 2
    assert main(["scan-thickness", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "scan.tilts" in err and "scan.reduced_thicknesses" in err


def test_scan_tilt_single_row(tmp_path):
    cfg = write(tmp_path, MINIMAL + "[scan]\ntilts = 0\n")
    assert main(["scan-tilt", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "scan_tilt.csv").read_text().splitlines()
    assert rows[0] == "tilt_psi_c,central_yield,fwhm_x_nm,fwhm_theta_x_mrad,peaks_theta_x,status"
    assert len(rows) == 2 and rows[1].endswith(",ok")
    assert (tmp_path / "o" / "tilt_0.0000" / "records.csv").exists()


def test_scan_thickness_rows(tmp_path):
    cfg = write(tmp_path, MINIMAL + "[scan]\nreduced_thicknesses = 0.1, 0.25\n")
    assert main(["scan-thickness", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "scan_thickness.csv").read_text().splitlines()
    assert len(rows) == 3
    assert float(rows[2].split(",")[0]) == pytest.approx(0.25, abs=0.01)


def test_analyze_round_trip(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    assert main(["simulate", cfg, "--out", str(tmp_path / "sim")]) == 0
    cfg2 = write(tmp_path, MINIMAL + "input = sim/records.csv\npotential_map = yes\nmap_points = 8\n", "an.ini")
    assert main(["analyze", cfg2, "--out", str(tmp_path / "an")]) == 0
    assert (tmp_path / "an" / "hist_angular.csv").read_bytes() == (tmp_path / "sim" / "hist_angular.csv").read_bytes()
    assert len((tmp_path / "an" / "potential_map.csv").read_text().splitlines()) == 65


def test_analyze_needs_input(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL)
    assert main(["analyze", cfg, "--out", str(tmp_path / "an")]) == 2
    assert "analysis.input" in capsys.readouterr().err


def test_spin_levels(tmp_path):
    cfg = write(tmp_path, "[spin]\nomega_s = 1\nomega_l = 0.1\na_hyper = 0.01\n"
                          "sweep_parameter = b_hyper\nsweep_start = 0\nsweep_stop = 0.2\nsweep_count = 3\n")
    assert main(["spin", cfg, "--out", str(tmp_path / "s")]) == 0
    rows = (tmp_path / "s" / "spin_levels.csv").read_text().splitlines()
    assert rows[0] == "b_hyper_MHz,E0_MHz,E1_MHz,E2_MHz,E3_MHz,J_MHz"
    assert [float(v) for v in rows[1].split(",")[1:5]] == pytest.approx([-0.5475, -0.4525, 0.4475, 0.5525])


def test_runtime_failure_exit_code(tmp_path, monkeypatch):
    cfg = write(tmp_path, MINIMAL)

    def boom(*a, **k):
        raise RuntimeError("kernel crashed")

    monkeypatch.setattr("chanmc.cli.run_ensemble", boom)
    assert main(["simulate", cfg, "--out", str(tmp_path / "o")]) == 3
    assert not os.path.exists(tmp_path / "o" / "manifest.json")


def test_failed_scan_point_is_recorded(tmp_path, monkeypatch):
    import chanmc.cli as cli

    real = cli.run_ensemble

    def flaky(beam, *a, **k):
        if beam.tilt_phi > 0:
            raise RuntimeError("bad tilt")
        return real(beam, *a, **k)

    monkeypatch.setattr(cli, "run_ensemble", flaky)
    cfg = write(tmp_path, MINIMAL + "[scan]\ntilts = 0, 0.1\n")
    assert main(["scan-tilt", cfg, "--out", str(tmp_path / "o")]) == 3
    rows = (tmp_path / "o" / "scan_tilt.csv").read_text().splitlines()
    assert rows[1].endswith(",ok") and "error: RuntimeError" in rows[2]
