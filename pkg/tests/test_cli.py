"""Command-line interface: exit codes, file outputs, value checks."""

import json

import numpy as np
import pytest

from nanobeam.cli import main
from nanobeam.io import export_results, import_spectrum

from helpers import lorentzian_spectrum, two_mode_trace

MINIMAL_CONFIG = {
    "schema_version": 1,
    "lambda_target": 637.0,
    "stack": {"n_core": 2.0, "n_substrate": 1.45, "n_cladding": 1.0,
              "t": 200.0},
    "designs": {
        "tiny": {"a0": 250.0, "r0": 70.0, "w0": 300.0, "wn": 140.0,
                 "n_taper": 4, "n_mirror": 3}
    },
    "simulation": {"resolution": 10, "record_cycles": 100,
                   "snapshot_cycles": 40, "margin_x": 400.0,
                   "margin_y": 350.0},
}


@pytest.fixture()
def config_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(MINIMAL_CONFIG))
    return p


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--help"])
    assert e.value.code == 0
    out = capsys.readouterr().out
    for sub in ("bands", "mirror", "simulate", "transmit", "fit",
                "invert", "sweep", "compare", "neff", "modevolume"):
        assert sub in out


def test_neff_value(capsys):
    rc = main(["neff", "--n-core", "2.0", "--n-substrate", "1.45",
               "--n-cladding", "1.0", "--thickness", "200",
               "--wavelength", "637"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "1.77076694" in out


def test_neff_config_error():
    rc = main(["neff", "--n-core", "1.2", "--n-substrate", "1.45",
               "--wavelength", "637"])
    assert rc == 2


def test_fit_recovers_q(tmp_path, capsys):
    spec = lorentzian_spectrum(lambda0=637.0, Q=4187.0, noise=0.0)
    src = tmp_path / "spec.csv"
    export_results(spec, src)
    rc = main(["fit", str(src)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "4187" in out


def test_fit_missing_file_is_io_error(tmp_path):
    rc = main(["fit", str(tmp_path / "absent.csv")])
    assert rc == 4


def test_fit_bad_window_is_config_error(tmp_path):
    spec = lorentzian_spectrum()
    src = tmp_path / "spec.csv"
    export_results(spec, src)
    rc = main(["fit", str(src), "--window", "636.9:636.91"])
    assert rc == 2


def test_invert_two_modes(tmp_path, capsys):
    trace = two_mode_trace(q1=1000.0, q2=5000.0, lambda1=620.0,
                          lambda2=660.0)
    src = tmp_path / "trace.csv"
    export_results(trace, src)
    rc = main(["invert", str(src), "--window", "560:700"])
    assert rc == 0
    out = capsys.readouterr().out
    rows = [l.split(",") for l in out.splitlines()
            if l and not l.startswith("#") and not l.startswith("lambda")]
    lams = sorted(float(r[0]) for r in rows)
    qs = sorted(float(r[1]) for r in rows)
    assert len(rows) == 2
    assert lams[0] == pytest.approx(620.0, rel=1e-6)
    assert lams[1] == pytest.approx(660.0, rel=1e-6)
    assert qs[0] == pytest.approx(1000.0, rel=1e-3)
    assert qs[1] == pytest.approx(5000.0, rel=1e-3)


def test_invert_nonuniform_trace_is_numeric_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,field\n0.0,1.0\n1.0,0.5\n3.0,0.2\n")
    rc = main(["invert", str(bad), "--window", "560:700"])
    assert rc == 3


def test_bands_with_explicit_cell(tmp_path, capsys):
    out = tmp_path / "bands.csv"
    rc = main(["bands", "-a", "205", "-r", "60", "-w", "461",
               "--n-core", "2.0", "--n-substrate", "1.45",
               "--n-k", "6", "--out", str(out)])
    assert rc == 0
    text = out.read_text()
    assert text.startswith("# nanobeam")
    assert "BandStructure" in text.splitlines()[0]
    assert "gap_lambda_nm" in text


def test_mirror_scan_text_output(capsys):
    rc = main(["mirror", "--n-core", "2.0", "--n-substrate", "1.45",
               "--wavelength", "637", "-w", "461",
               "--a-scan", "195:215:3", "--r-scan", "60:70:2"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "gamma" in out


def test_unknown_sweep_name(config_path):
    rc = main(["sweep", "ghost", "--config", str(config_path)])
    assert rc == 2


def test_sweep_and_simulate_roundtrip(tmp_path, config_path, capsys):
    # config has no sweeps; add one pointing at the tiny design
    doc = json.loads(config_path.read_text())
    doc["sweeps"] = {"mini": {"kind": "mirror", "design": "tiny",
                              "values": [2, 3]}}
    config_path.write_text(json.dumps(doc))
    out = tmp_path / "mini.csv"
    rc = main(["sweep", "mini", "--config", str(config_path),
               "--out", str(out)])
    assert rc == 0
    lines = [l for l in out.read_text().splitlines() if l]
    assert any("SweepResult" in l for l in lines[:1])
    data = [l for l in lines if not l.startswith("#")
            and not l.startswith("n_mirror")]
    assert len(data) == 2

    rc = main(["simulate", "--design", "tiny", "--config",
               str(config_path)])
    assert rc == 0
    sim_out = capsys.readouterr().out
    assert "lambda_res" in sim_out


def test_missing_config_and_preset_is_config_error():
    rc = main(["simulate", "--design", "tiny"])
    assert rc == 2


def test_geometry_export(tmp_path, config_path):
    out = tmp_path / "geom.txt"
    rc = main(["geometry", "--design", "tiny", "--config",
               str(config_path), "--out", str(out)])
    assert rc == 0
    assert "holes" in out.read_text()


def test_plot_flag_writes_png(tmp_path):
    spec = lorentzian_spectrum(lambda0=637.0, Q=4187.0, noise=0.01, seed=2)
    src = tmp_path / "spec.csv"
    export_results(spec, src)
    fit_out = tmp_path / "fit.csv"
    rc = main(["fit", str(src), "--out", str(fit_out), "--plot"])
    assert rc == 0
    png = fit_out.with_suffix(".png")
    assert png.exists()
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_plot_without_out_needs_explicit_path(tmp_path):
    spec = lorentzian_spectrum()
    src = tmp_path / "spec.csv"
    export_results(spec, src)
    rc = main(["fit", str(src), "--plot"])
    assert rc == 2
    png = tmp_path / "direct.png"
    rc = main(["fit", str(src), "--plot", str(png)])
    assert rc == 0
    assert png.exists()
