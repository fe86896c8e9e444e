"""Delimited export/import: determinism, round trips, structure."""

import numpy as np
import pytest

from nanobeam import (
    CavityDesign,
    ConfigError,
    IOFailure,
    NumericalError,
    ResonanceResult,
    Spectrum,
    TimeTrace,
)
from nanobeam.geometry import MaterialStack, rasterize
from nanobeam.io import (
    export_geometry,
    export_permittivity,
    export_results,
    import_spectrum,
    import_trace,
    record_hash,
    render_results,
)
from nanobeam.sweeps import SweepPoint, SweepResult

from helpers import PAPER_STACK, lorentzian_spectrum


def test_render_header_and_hash_self_verify():
    spec = lorentzian_spectrum(n=31)
    text = render_results(spec, format="csv")
    lines = text.splitlines()
    assert lines[0].startswith("# nanobeam ")
    assert lines[0].endswith("Spectrum")
    assert lines[1].startswith("# sha256: ")
    # the stamped hash covers every byte below the header
    import hashlib
    body = text.split("\n", 2)[2]
    digest = hashlib.sha256(body.encode()).hexdigest()[:16]
    assert lines[1] == f"# sha256: {digest}"


def test_render_deterministic():
    spec = lorentzian_spectrum(n=31)
    assert render_results(spec, format="csv") == render_results(
        spec, format="csv")
    assert render_results(spec, format="text") == render_results(
        spec, format="text")


def test_spectrum_roundtrip_csv(tmp_path):
    spec = lorentzian_spectrum(n=101, noise=0.02, seed=5)
    p = tmp_path / "spec.csv"
    export_results(spec, p)
    back = import_spectrum(p)
    assert np.allclose(back.wavelengths, spec.wavelengths, rtol=1e-8)
    assert np.allclose(back.values, spec.values, rtol=1e-8)


def test_import_spectrum_reference_column(tmp_path):
    p = tmp_path / "raw.csv"
    p.write_text(
        "# measured ratio\n"
        "wavelength_nm,counts,reference\n"
        "640,2.0,4.0\n"
        "636,1.0,2.0\n"
        "638,3.0,3.0\n")
    sp = import_spectrum(p)
    # sorted by wavelength, divided by the reference column
    assert np.allclose(sp.wavelengths, [636.0, 638.0, 640.0])
    assert np.allclose(sp.values, [0.5, 1.0, 0.5])
    # stays Raw so noisy measured ratios above 1 are not rejected
    assert sp.kind == "Raw"


def test_import_spectrum_rejects_bad_files(tmp_path):
    dup = tmp_path / "dup.csv"
    dup.write_text("wavelength_nm,value\n636,1\n636,2\n")
    with pytest.raises(ConfigError):
        import_spectrum(dup)
    zeros = tmp_path / "zeros.csv"
    zeros.write_text("wavelength_nm,value,reference\n636,1,0\n637,2,1\n")
    with pytest.raises(NumericalError):
        import_spectrum(zeros)
    with pytest.raises(IOFailure):
        import_spectrum(tmp_path / "missing.csv")


def test_trace_roundtrip_and_uniformity(tmp_path):
    tr = TimeTrace(samples=np.sin(np.linspace(0, 20, 200)), dt=3.5,
                   position=(12.0, -4.0), t0=70.0)
    p = tmp_path / "trace.csv"
    export_results(tr, p)
    back = import_trace(p)
    assert back.dt == pytest.approx(3.5, rel=1e-9)
    assert back.t0 == pytest.approx(70.0, rel=1e-9)
    assert np.allclose(back.samples, tr.samples, rtol=1e-8)
    assert back.position == (12.0, -4.0)

    bad = tmp_path / "nonuniform.csv"
    bad.write_text("t,field\n0.0,1.0\n1.0,0.5\n3.0,0.2\n")
    with pytest.raises(NumericalError):
        import_trace(bad)


def test_resonance_list_render():
    rows = [
        ResonanceResult(lambda_res=637.0, Q=4187.0, amplitude=1.0,
                        method="LorentzianFit", sigma_Q=11.0),
        ResonanceResult(lambda_res=620.0, Q=900.0, amplitude=0.4,
                        method="HarmonicInversion", V_m=2.5),
    ]
    text = render_results(rows, format="csv")
    assert "ResonanceList" in text.splitlines()[0]
    assert "lambda_res" in text
    data = [l for l in text.splitlines()
            if l and not l.startswith("#") and not l.startswith("lambda")]
    assert len(data) == 2
    assert data[0].startswith("637,4187,")


def test_sweep_result_render_structure():
    mk = lambda lam, q: ResonanceResult(lambda_res=lam, Q=q, amplitude=1.0,
                                        method="HarmonicInversion")
    sw = SweepResult(
        parameter="n_mirror",
        unit="holes",
        design=CavityDesign(a0=205, r0=60, w0=461, n_taper=2, n_mirror=4),
        points=(
            SweepPoint(value=4.0, result=mk(646.3, 87.7)),
            SweepPoint(value=8.0, result=None, note="no in-gap resonance"),
            SweepPoint(value=12.0, result=mk(646.7, 140.5),
                       extra={"l_h": 70.0}),
        ),
        q_sat=140.68,
    )
    text = render_results(sw, format="csv")
    lines = text.splitlines()
    data = [l for l in lines if l and not l.startswith("#")
            and not l.startswith("n_mirror")]
    assert len(data) == 3
    # missing point keeps its row with empty cells and the note
    assert data[1].startswith("8,,")
    assert "no in-gap resonance" in data[1]
    assert "l_h=70" in data[2]
    assert any("q_sat" in l for l in lines if l.startswith("#"))


def test_nine_digit_float_format():
    sp = Spectrum(wavelengths=np.array([636.123456789, 637.0]),
                  values=np.array([1.0 / 3.0, 0.25]), kind="Raw")
    text = render_results(sp, format="csv")
    assert "636.123457" in text          # %.9g
    assert "0.333333333" in text


def test_record_hash_stable_and_content_sensitive():
    a = lorentzian_spectrum(n=31)
    b = lorentzian_spectrum(n=31)
    c = lorentzian_spectrum(n=33)
    assert record_hash(a) == record_hash(b)
    assert record_hash(a) != record_hash(c)
    assert len(record_hash(a)) == 16


def test_export_creates_parent_dirs(tmp_path):
    p = tmp_path / "deep" / "nested" / "out.csv"
    export_results(lorentzian_spectrum(n=31), p)
    assert p.exists()


def test_export_geometry_and_permittivity(tmp_path):
    d = CavityDesign(a0=205, r0=60, w0=461, n_taper=2, n_mirror=2)
    gp = tmp_path / "geom.txt"
    export_geometry(d, PAPER_STACK, gp)
    text = gp.read_text()
    assert "holes" in text and "205" in text

    eps, x, y = rasterize(d, PAPER_STACK, dx=25.0, margin_x=200.0,
                          margin_y=200.0)
    pp = tmp_path / "eps.csv"
    export_permittivity(eps, 25.0, pp)
    body = [l for l in pp.read_text().splitlines()
            if l and not l.startswith("#")]
    assert len(body) == eps.shape[0]


def test_text_format_is_commented_json():
    import json
    sp = lorentzian_spectrum(n=31)
    text = render_results(sp, format="text")
    payload = "\n".join(l for l in text.splitlines()
                        if not l.startswith("#"))
    doc = json.loads(payload)
    assert doc["data"]["kind"] == "Raw"
    assert len(doc["data"]["wavelength_nm"]) == 31
