import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from qpm_noise import __version__
from qpm_noise.cli import PEAK_COLUMNS, run
from qpm_noise.dispersion import data_dir
from qpm_noise.qpm_core import ProcessGeometry
from qpm_noise.solver import ScanWindow, find_peaks
from qpm_noise.spectra import SpectrumTrace, VoigtComponent, write_trace

SUBCOMMANDS = ["predict", "pedestal", "fit-raman", "detect", "assign", "infer-period", "synth"]


def call(*argv):
    """Run the CLI in-process; returns the exit status."""
    try:
        return run(list(map(str, argv)))
    except SystemExit as exc:
        return exc.code


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def error_doc(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_exits_zero(sub, capsys):
    assert call(sub, "--help") == 0
    assert "usage" in capsys.readouterr().out


def test_version(capsys):
    assert call("--version") == 0
    assert __version__ in capsys.readouterr().out


def test_predict_table(tmp_path, cfg):
    out = tmp_path / "peaks.csv"
    assert call("predict", "--window", "1470:1620", "--geometries", "-+,+-", "--orders", "1:50", "--out", out) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == PEAK_COLUMNS
    ref = find_peaks(cfg, ScanWindow(1470, 1620, (ProcessGeometry.CO_COUNTER, ProcessGeometry.COUNTER_CO), (1, 50)))
    assert [(r["geometry"], int(r["m"])) for r in rows] == [(p.geometry.value, p.order) for p in ref]
    assert [float(r["lambda_s_nm"]) for r in rows] == pytest.approx([p.signal_nm for p in ref], abs=1e-5)


def test_manifest_contents(tmp_path):
    out = tmp_path / "peaks.csv"
    cfg_path = data_dir() / "ktp_converter.json"
    assert call("predict", "--config", cfg_path, "--seed", 3, "--out", out) == 0
    man = json.loads((tmp_path / "peaks.csv.manifest.json").read_text())
    assert man["subcommand"] == "predict" and man["seed"] == 3 and man["version"] == __version__
    assert man["config"] == str(cfg_path)
    assert man["outputs"] == {"peaks.csv": sha(out)}
    assert man["inputs"][str(cfg_path)] == sha(cfg_path)
    assert man["parameters"]["window"] == [1470.0, 1620.0]


def test_pedestal_deterministic(tmp_path):
    args = ["pedestal", "--sigma-um", "0.2", "--trials", "16", "--dk-grid", "0:0.5:0.01", "--seed", "42"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert call(*args, "--threads", 1, "--out", a) == 0
    assert call(*args, "--threads", 4, "--out", b) == 0
    assert sha(a) == sha(b)
    first = (tmp_path / "a.csv.manifest.json").read_bytes()
    assert call(*args, "--threads", 1, "--out", a) == 0
    assert (tmp_path / "a.csv.manifest.json").read_bytes() == first
    data = np.loadtxt(a, delimiter=",", skiprows=1)
    assert data.shape == (51, 4)


def test_pedestal_seed_matters(tmp_path):
    args = ["pedestal", "--sigma-um", "0.2", "--trials", "4", "--dk-grid", "0.1:0.2:0.05"]
    assert call(*args, "--seed", 1, "--out", tmp_path / "a.csv") == 0
    assert call(*args, "--seed", 2, "--out", tmp_path / "b.csv") == 0
    assert sha(tmp_path / "a.csv") != sha(tmp_path / "b.csv")


@pytest.mark.parametrize(
    "argv",
    [
        ["pedestal", "--sigma-um", "-1"],
        ["pedestal", "--sigma-um", "0.1", "--trials", "0"],
        ["pedestal", "--sigma-um", "0.1", "--dk-grid", "1:0:0.1"],
        ["pedestal", "--sigma-um", "0.1", "--dk-grid", "0:1"],
        ["pedestal", "--sigma-um", "0.1", "--duty-cycle", "1.5"],
        ["predict", "--window", "1620:1470"],
        ["predict", "--orders", "0:5"],
        ["predict", "--geometries", "-+,x"],
        ["predict", "--threads", "0"],
        ["bogus"],
        [],
    ],
)
def test_invalid_arguments(argv, capsys):
    assert call(*argv) == 2
    assert error_doc(capsys)["error"] == "UsageError"


def test_pedestal_trials_rejected_by_library(capsys):
    assert call("pedestal", "--sigma-um", "0.1", "--trials", "1", "--dk-grid", "0:0.1:0.1") == 1
    assert "2 trials" in error_doc(capsys)["message"]


def test_config_error_json(tmp_path, capsys):
    doc = json.loads((data_dir() / "ktp_converter.json").read_text())
    doc["duty_cycle"] = 1.2
    doc["sellmeier"]["z"] = "gone.json"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert call("predict", "--config", bad) == 1
    err = error_doc(capsys)
    assert err["error"] == "ConfigError"
    assert any(v.startswith("duty_cycle") for v in err["violations"])
    assert any("gone.json" in v for v in err["violations"])


def test_infer_period_conflicting_flags(tmp_path, capsys):
    p = tmp_path / "p.csv"
    p.write_text("center_nm\n1500\n1540\n")
    assert call("infer-period", "--geometry", "-+", "--centers", "1500,1540", "--peaks", p) == 2
    assert "exactly one" in error_doc(capsys)["message"]


def test_stdout_without_out(capsys):
    assert call("predict", "--geometries", "-+", "--orders", "17:17") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split(",") == PEAK_COLUMNS and len(lines) == 2


def test_synth_detect_assign_infer_pipeline(tmp_path):
    trace, peaks, assign = tmp_path / "s.csv", tmp_path / "d.csv", tmp_path / "a.json"
    assert call("synth", "--window", "1470:1620", "--resolution-nm", "0.1", "--duty-cycle", "0.49",
                "--pedestal-level", "1e-7", "--out", trace) == 0
    assert call("detect", "--trace", trace, "--prominence", "2e-7", "--out", peaks) == 0
    assert call("assign", "--peaks", peaks, "--geometries", "-+,+-", "--tolerance-nm", "0.3", "--out", assign) == 0
    labels = {(a["geometry"], a["order"]) for a in json.loads(assign.read_text())["assignments"]}
    assert {("-+", m) for m in range(15, 19)} | {("+-", m) for m in range(36, 40)} <= labels
    man = json.loads((tmp_path / "a.json.manifest.json").read_text())
    assert man["inputs"][str(peaks)] == sha(peaks)

    sel = tmp_path / "sel.csv"
    rows = [r for r in csv.DictReader(peaks.open())]
    with sel.open("w") as fh:
        fh.write("center_nm\n")
        for r in rows:
            c = float(r["center_nm"])
            if any(abs(c - x) < 0.3 for x in (1482.40, 1520.48, 1560.75, 1603.35)):
                fh.write(f"{c}\n")
    out = tmp_path / "period.json"
    assert call("infer-period", "--peaks", sel, "--geometry", "-+", "--out", out) == 0
    assert json.loads(out.read_text())["period_ref_um"] == pytest.approx(15.70, rel=5e-4)


def test_synth_with_pedestal_csv_and_raman(tmp_path):
    ped, voigt, trace = tmp_path / "ped.csv", tmp_path / "v.json", tmp_path / "s.csv"
    assert call("pedestal", "--sigma-um", "0.2", "--trials", "4", "--dk-grid", "0:2:0.01", "--out", ped) == 0
    voigt.write_text(json.dumps({"components": [{"center": 1500.0, "gamma": 0.5, "sigma": 0.5, "amplitude": 1.0}]}))
    assert call("synth", "--window", "1480:1520", "--geometries", "-+", "--pedestal-csv", ped,
                "--raman", voigt, "--calibrate", "110@1500", "--out", trace) == 0
    man = json.loads((tmp_path / "s.csv.manifest.json").read_text())
    assert set(man["inputs"]) >= {str(ped), str(voigt)}


def test_synth_window_past_idler_pole(tmp_path):
    # below ~1243 nm the idler has no index; those peaks are skipped, not an error
    trace = tmp_path / "s.csv"
    assert call("synth", "--window", "1140:1330", "--resolution-nm", "0.5", "--out", trace) == 0
    peaks = tmp_path / "d.csv"
    assert call("detect", "--trace", trace, "--prominence", "1e-9", "--out", peaks) == 0
    centers = [float(r["center_nm"]) for r in csv.DictReader(peaks.open())]
    assert centers and min(centers) > 1242.0


def test_fit_raman(tmp_path):
    x = np.arange(1140, 1260, 0.2)
    comps = [VoigtComponent(c, 0.9, 0.8, 20.0) for c in (1149.4, 1167.2, 1188.5, 1207.9, 1240.8)]
    trace = tmp_path / "r.csv"
    write_trace(SpectrumTrace(x, sum(c(x) for c in comps) + 0.3, 0.8), trace)
    out = tmp_path / "v.json"
    assert call("fit-raman", "--trace", trace, "--components", 5, "--out", out) == 0
    doc = json.loads(out.read_text())
    shifts = [c["raman_shift_cm"] for c in doc["components"]]
    assert shifts[0] == pytest.approx(692, abs=1) and shifts[3] == pytest.approx(1114, abs=1)
    assert doc["pump_nm"] == 1064.661


def test_missing_trace_file(tmp_path, capsys):
    assert call("detect", "--trace", tmp_path / "nope.csv") == 1
    assert error_doc(capsys)["error"] == "FileNotFoundError"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qpm_noise.cli", "infer-period", "--geometry", "-+", "--centers", "1482.40,1520.48,1560.75,1603.35"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["consistent"] is True
