"""FDTD engine: stability, conservation, boundaries, transmission."""

import numpy as np
import pytest

from nanobeam import ConfigError, NumericalError
from nanobeam.fdtd import (
    Simulation,
    SimulationSpec,
    SourceSpec,
    Spectrum,
    courant_dt,
    gaussian_pulse,
    run_ringdown,
    run_transmission,
    transfer_matrix_transmission,
)


def test_courant_dt():
    # dt = S dx / sqrt(2) with the default S = 0.99 / sqrt(2), so the
    # default step is 0.495 dx
    assert courant_dt(10.0) == pytest.approx(4.95, rel=1e-12)
    assert courant_dt(10.0, courant=0.5) == pytest.approx(
        5.0 / np.sqrt(2.0), rel=1e-12)
    with pytest.raises(ConfigError):
        courant_dt(10.0, courant=0.8)


def test_gaussian_pulse_shape():
    f0, bw = 1.0 / 600.0, 0.3
    t = np.linspace(0.0, 20000.0, 20001)
    s = gaussian_pulse(f0, bw, t)
    # starts and ends near zero (windowed), peaks in between
    assert abs(s[0]) < 1e-6 * np.abs(s).max()
    assert abs(s[-1]) < 1e-6 * np.abs(s).max()
    # spectral peak lands on f0
    spec = np.abs(np.fft.rfft(s))
    f = np.fft.rfftfreq(len(t), t[1] - t[0])
    assert f[np.argmax(spec)] == pytest.approx(f0, rel=0.05)


def test_record_validation():
    with pytest.raises(ConfigError):
        Spectrum(wavelengths=np.array([600.0, 600.0]), values=np.zeros(2))
    with pytest.raises(ConfigError):
        Spectrum(wavelengths=np.array([600.0, 610.0]), values=np.zeros(2),
                 kind="Weird")
    with pytest.raises(NumericalError):
        Spectrum(wavelengths=np.array([600.0, 610.0]),
                 values=np.array([0.5, 2.0]), kind="Normalized")
    # raw spectra are unconstrained in value
    Spectrum(wavelengths=np.array([600.0, 610.0]),
             values=np.array([0.5, 2.0]), kind="Raw")


def _closed_box_sim():
    eps = np.full((64, 64), 2.25)
    src = SourceSpec(position=(0.0, 15.0), f0=1 / 600.0,
                     fractional_bandwidth=0.3)
    return Simulation(SimulationSpec(eps=eps, dx=10.0, pml_axes="",
                                     sources=(src,)))


def test_energy_conserved_in_closed_box():
    # lossless update in a PEC box: after the source switches off the
    # total field energy is a constant of the motion
    sim = _closed_box_sim()
    n_off = int(np.ceil(sim.spec.sources[0].t_off / sim.dt)) + 2
    sim.run(n_off)
    u0 = sim.energy()
    drift = 0.0
    for _ in range(8):
        sim.run(500)
        drift = max(drift, abs(sim.energy() - u0) / u0)
    assert drift < 1e-12


def test_deterministic_stepping():
    a = _closed_box_sim()
    b = _closed_box_sim()
    a.run(700)
    b.run(700)
    ea, _ = a.cell_center_fields()
    eb, _ = b.cell_center_fields()
    assert np.array_equal(ea, eb)


def pml_reflection_ratio(pml_thickness=10, n_steps=3400):
    """Amplitude reflection of the x PML for a normally incident pulse.

    Runs the same y-invariant pulse on the test grid and on a grid
    extended far enough that nothing returns from the far boundary in
    the time window; the difference at the probe is the reflected
    field.  Probe and source sit at the same physical coordinates in
    both runs.
    """
    ny, dx = 8, 10.0
    nx_a, nx_b = 1200, 2400
    src_x, probe_x = -2000.0, 5800.0

    def probe_trace(nx):
        eps = np.ones((nx, ny))
        # keep the left edge and all physics identical: anchor physical
        # coordinates to the grid center of the SHORT grid by offsetting
        # the long grid's source/probe positions
        shift = (nx - nx_a) * dx / 2.0
        src = SourceSpec(position=(src_x - shift, 0.0), f0=1 / 600.0,
                         fractional_bandwidth=0.3, kind="line", width=1e5)
        spec = SimulationSpec(eps=eps, dx=dx, pml_axes="x",
                              pml_thickness=pml_thickness, sources=(src,))
        sim = Simulation(spec)
        ix = int(round((probe_x - shift) / dx + nx / 2 - 0.5))
        out = np.empty(n_steps)
        for n in range(n_steps):
            sim.step()
            out[n] = sim.ey[ix, ny // 2]
        return out

    a = probe_trace(nx_a)
    b = probe_trace(nx_b)
    return np.abs(a - b).max() / np.abs(b).max()


def test_pml_reflection_small():
    assert pml_reflection_ratio() < 1e-3


def test_transfer_matrix_single_interface():
    # Fresnel: T = 4 n1 n2 / (n1 + n2)^2 = 8/9 for n 1 -> 2.  An
    # index-matched spacer before the interface only adds phase.
    sp = transfer_matrix_transmission([(1.0, 123.0)],
                                      np.array([600.0, 700.0]),
                                      n_in=1.0, n_out=2.0)
    assert np.allclose(sp.values, 8.0 / 9.0, rtol=1e-12)


def test_transfer_matrix_quarter_wave_closed_form():
    # N-period quarter-wave mirror at its design wavelength:
    # T = 1 - r^2 with r = (1 - rho)/(1 + rho), rho = (nH/nL)^(2N)
    lam0 = 637.0
    for n_per, expect in ((2, 0.221453287), (4, 0.0155036412)):
        layers = [(2.0, lam0 / 8.0), (1.0, lam0 / 4.0)] * n_per
        sp = transfer_matrix_transmission(layers, np.array([lam0]))
        assert sp.values[0] == pytest.approx(expect, rel=1e-8)


def test_transfer_matrix_no_contrast_and_empty():
    sp = transfer_matrix_transmission([(1.0, 500.0)], np.array([637.0]))
    assert sp.values[0] == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ConfigError):
        transfer_matrix_transmission([], np.array([637.0]))


def test_run_transmission_identity_device():
    # device identical to the reference: normalized T = 1 in-band
    nx, ny = 420, 8
    eps = np.ones((nx, ny))
    wl = np.linspace(580.0, 700.0, 7)
    Lx = nx * 10.0
    sp = run_transmission(eps_device=eps, eps_reference=eps.copy(), dx=10.0,
                          wavelengths=wl, source_x=-Lx / 2 + 300.0,
                          monitor_x=Lx / 2 - 300.0, n_steps=4000,
                          beam_width=1e5, pml_axes="x")
    assert sp.kind == "Normalized"
    assert np.allclose(sp.values, 1.0, atol=5e-3)


def test_run_ringdown_traces_and_decay():
    # a lossy open box: probe amplitude must decay between the start
    # and the end of the recorded window
    eps = np.full((80, 60), 4.0)
    eps[30:50, 20:40] = 1.0
    out = run_ringdown(eps, dx=10.0, f0=1 / 600.0, fractional_bandwidth=0.2,
                       source_pos=(10.0, 10.0), probes=[(10.0, 10.0),
                                                        (-30.0, 0.0)],
                       t_settle_steps=2600, t_record_steps=1200)
    assert len(out.traces) == 2
    n = len(out.traces[0].samples)
    assert n == 1200
    head = np.abs(out.traces[0].samples[:300]).max()
    tail = np.abs(out.traces[0].samples[-300:]).max()
    assert tail < head
    assert out.traces[0].dt == out.dt
    # t0 accounts for the settle window
    assert out.traces[0].t0 == pytest.approx(2600 * out.dt, rel=1e-12)


def test_simulation_rejects_bad_inputs():
    with pytest.raises(ConfigError):
        SimulationSpec(eps=np.ones((64, 64)) * 0.5, dx=10.0).validate()
    with pytest.raises(ConfigError):
        SimulationSpec(eps=np.ones((64, 64)), dx=-1.0).validate()
    with pytest.raises(ConfigError):
        SimulationSpec(eps=np.ones((64, 64)), dx=10.0,
                       pml_thickness=4).validate()
