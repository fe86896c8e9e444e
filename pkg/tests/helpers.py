"""Shared builders for the test suite."""

import numpy as np

from nanobeam import LorentzianModel, MaterialStack, Spectrum, TimeTrace

PAPER_STACK = MaterialStack(n_core=2.0, n_substrate=1.45, n_cladding=1.0, t=200.0)
FREE_STACK = MaterialStack(n_core=2.0, n_substrate=1.0, n_cladding=1.0, t=200.0)


def lorentzian_spectrum(lambda0=637.0, Q=4187.0, amplitude=1.0, baseline=0.0,
                        half_widths=6.0, n=481, noise=0.0, seed=0):
    """Symmetric sampling of a Lorentzian transmission peak.

    The grid spans lambda0 +- half_widths * Gamma with Gamma the FWHM,
    dense enough that the fit is limited by noise, not sampling.
    """
    gamma = lambda0 / Q
    wl = np.linspace(lambda0 - half_widths * gamma,
                     lambda0 + half_widths * gamma, n)
    model = LorentzianModel(lambda0=lambda0, gamma=gamma,
                            amplitude=amplitude, baseline=baseline)
    vals = model(wl)
    if noise:
        rng = np.random.default_rng(seed)
        vals = vals + noise * rng.standard_normal(n)
    return Spectrum(wavelengths=wl, values=vals, kind="Raw")


def two_mode_trace(q1=1000.0, q2=5000.0, lambda1=620.0, lambda2=660.0,
                   a1=1.0, a2=0.7, n=6000, dt=0.5, noise=0.0, seed=0,
                   phi1=0.3, phi2=-1.1):
    """Superposition of two damped cosines as a ringdown probe trace.

    Frequencies are 1/lambda (c = 1 units, lengths in nm) and the decay
    rate follows from Q = omega tau / 2.
    """
    t = np.arange(n) * dt
    out = np.zeros(n)
    for q, lam, amp, phi in ((q1, lambda1, a1, phi1), (q2, lambda2, a2, phi2)):
        w = 2.0 * np.pi / lam
        out = out + amp * np.exp(-w * t / (2.0 * q)) * np.cos(w * t + phi)
    if noise:
        rng = np.random.default_rng(seed)
        out = out + noise * np.abs(out).max() * rng.standard_normal(n)
    return TimeTrace(samples=out, dt=dt, position=(0.0, 0.0))
