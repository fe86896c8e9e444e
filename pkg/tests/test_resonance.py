"""Resonance extraction: matrix pencil, Lorentzian fit, mode volume."""

import warnings

import numpy as np
import pytest

from nanobeam import ConfigError, LeakageWarning, NumericalError
from nanobeam.fdtd import Snapshot, Spectrum, TimeTrace
from nanobeam.resonance import (
    LorentzianModel,
    harmonic_inversion,
    lorentzian_fit,
    mode_volume,
    purcell_factor,
)

from helpers import lorentzian_spectrum, two_mode_trace


def test_two_mode_pencil_noiseless():
    # synthetic trace where the truth is known by construction
    trace = two_mode_trace(q1=1000.0, q2=5000.0, lambda1=620.0,
                          lambda2=660.0)
    modes = harmonic_inversion(trace, band=(1 / 700.0, 1 / 560.0))
    assert len(modes) == 2
    by_lam = sorted(modes, key=lambda m: m.lambda_res)
    assert by_lam[0].lambda_res == pytest.approx(620.0, rel=1e-7)
    assert by_lam[0].Q == pytest.approx(1000.0, rel=1e-6)
    assert by_lam[1].lambda_res == pytest.approx(660.0, rel=1e-7)
    assert by_lam[1].Q == pytest.approx(5000.0, rel=1e-6)
    # amplitudes sorted descending, the 620 nm mode dominates
    assert modes[0].lambda_res == pytest.approx(620.0, rel=1e-7)
    assert modes[0].method == "HarmonicInversion"


def test_pencil_band_filter():
    trace = two_mode_trace(q1=1000.0, q2=5000.0, lambda1=620.0,
                          lambda2=660.0)
    modes = harmonic_inversion(trace, band=(1 / 700.0, 1 / 640.0))
    assert len(modes) == 1
    assert modes[0].lambda_res == pytest.approx(660.0, rel=1e-6)


def test_pencil_decimation_equivalence():
    trace = two_mode_trace(n=12000)
    full = harmonic_inversion(trace, band=(1 / 700.0, 1 / 560.0))
    deci = harmonic_inversion(trace, band=(1 / 700.0, 1 / 560.0),
                              decimate=4)
    for a, b in zip(sorted(m.lambda_res for m in full),
                    sorted(m.lambda_res for m in deci)):
        assert a == pytest.approx(b, rel=1e-6)


def test_pencil_input_validation():
    trace = two_mode_trace(n=100)
    with pytest.raises(ConfigError):
        harmonic_inversion(trace, band=(0.01, 0.001))
    with pytest.raises(ConfigError):
        harmonic_inversion(trace, band=(0.001, 0.01), decimate=0)
    # band above Nyquist of the decimated trace
    with pytest.raises(ConfigError):
        harmonic_inversion(two_mode_trace(n=4000, dt=0.5),
                           band=(0.1, 1.5))
    bad = TimeTrace(samples=np.array([1.0, np.nan] * 40), dt=0.5,
                    position=(0.0, 0.0))
    with pytest.raises(NumericalError):
        harmonic_inversion(bad, band=(0.001, 0.01))


def test_lorentzian_fit_noiseless_exact():
    spec = lorentzian_spectrum(lambda0=637.0, Q=4187.0, baseline=0.1)
    res = lorentzian_fit(spec)
    assert res.lambda_res == pytest.approx(637.0, rel=1e-10)
    assert res.Q == pytest.approx(4187.0, rel=1e-8)
    assert res.method == "LorentzianFit"
    assert res.sigma_Q is not None and res.sigma_Q < 1.0
    assert not res.notes


def test_lorentzian_fit_window_and_initial():
    spec = lorentzian_spectrum(lambda0=637.0, Q=4187.0)
    gamma = 637.0 / 4187.0
    res = lorentzian_fit(spec, window=(637.0 - 3 * gamma, 637.0 + 3 * gamma))
    assert res.Q == pytest.approx(4187.0, rel=1e-6)
    guess = LorentzianModel(lambda0=636.9, gamma=2 * gamma, amplitude=0.5)
    res = lorentzian_fit(spec, initial=guess)
    assert res.Q == pytest.approx(4187.0, rel=1e-6)


def test_lorentzian_fit_rejects_degenerate_windows():
    spec = lorentzian_spectrum()
    with pytest.raises(ConfigError):
        lorentzian_fit(spec, window=(636.9, 636.91))
    # peak on the window edge: no interior maximum
    ramp = Spectrum(wavelengths=np.linspace(600.0, 640.0, 50),
                    values=np.linspace(0.0, 1.0, 50), kind="Raw")
    with pytest.raises(ConfigError):
        lorentzian_fit(ramp)


def test_lorentzian_fit_noisy_sigma_sane():
    spec = lorentzian_spectrum(noise=0.01, seed=3)
    res = lorentzian_fit(spec)
    assert res.Q == pytest.approx(4187.0, rel=0.05)
    assert res.sigma_Q is not None and 0.0 < res.sigma_Q < 0.1 * res.Q


def _gaussian_snapshot(sigma_x=400.0, sigma_y=300.0, dx=10.0, n=321,
                       edge_level=0.0):
    x = (np.arange(n) - (n - 1) / 2) * dx
    X, Y = np.meshgrid(x, x, indexing="ij")
    ey = np.exp(-(X**2) / (2 * sigma_x**2) - (Y**2) / (2 * sigma_y**2))
    return Snapshot(ex=np.zeros_like(ey), ey=ey.astype(complex),
                    eps=np.ones_like(ey), dx=dx, frequency=1 / 637.0,
                    edge_level=edge_level)


def test_mode_volume_gaussian_closed_form():
    # |E|^2 of a separable Gaussian integrates to pi sx sy, so
    # A_m = pi sx sy and V_m = A_m t / (lambda/n)^3
    snap = _gaussian_snapshot()
    vm = mode_volume(snap, lambda_res=637.0, n_core=2.0, t_eff=200.0)
    expect = np.pi * 400.0 * 300.0 * 200.0 / (637.0 / 2.0) ** 3
    assert vm == pytest.approx(expect, rel=1e-3)


def test_mode_volume_leakage_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        mode_volume(_gaussian_snapshot(edge_level=1e-5), 637.0, 2.0)
    with pytest.warns(LeakageWarning):
        mode_volume(_gaussian_snapshot(edge_level=0.01), 637.0, 2.0)


def test_mode_volume_validation():
    snap = _gaussian_snapshot()
    with pytest.raises(ConfigError):
        mode_volume(snap, -637.0, 2.0)
    zero = Snapshot(ex=np.zeros((8, 8)), ey=np.zeros((8, 8)),
                    eps=np.ones((8, 8)), dx=10.0, frequency=1 / 637.0,
                    edge_level=0.0)
    with pytest.raises(NumericalError):
        mode_volume(zero, 637.0, 2.0)


def test_purcell_factor_closed_form():
    # F_p = 3 Q / (4 pi^2 V_m)
    assert purcell_factor(4187.0, 0.087) == pytest.approx(
        3.0 * 4187.0 / (4.0 * np.pi**2 * 0.087), rel=1e-12)
    assert purcell_factor(4187.0, 0.087) == pytest.approx(3.66e3, rel=1e-2)
    with pytest.raises(ConfigError):
        purcell_factor(-1.0, 0.087)


def test_resonance_result_validation():
    from nanobeam.resonance import ResonanceResult
    with pytest.raises(NumericalError):
        ResonanceResult(lambda_res=637.0, Q=-5.0, amplitude=1.0,
                        method="LorentzianFit")
    with pytest.raises(NumericalError):
        ResonanceResult(lambda_res=637.0, Q=100.0, amplitude=1.0,
                        method="LorentzianFit", V_m=-0.1)
