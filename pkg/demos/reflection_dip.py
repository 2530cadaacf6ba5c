"""Saturable reflection dip of the waveguide-coupled emitter.

Sweeps a probe across the 0-1 transition at several drive strengths.  At
weak drive the emitter reflects fully with a pi phase flip (r = -1); at the
magic power, Omega = Gamma/sqrt(2), the directly reflected and re-scattered
fields cancel and |r| dips to zero on resonance.  A resonance fit on a
noisy trace recovers the line center and width.
"""

import numpy as np

from qpscope import EmitterParams, fit_resonance, magic_power, rabi_rate_from_power, reflection_coefficient

from _common import plt, save_figure

TWO_PI = 2 * np.pi
emitter = EmitterParams(gamma_r=TWO_PI * 13e6, w01=TWO_PI * 4.724e9)
gamma = emitter.gamma_r

p_magic = magic_power(emitter)
print(f"magic power = {p_magic:.3e} W = {10 * np.log10(p_magic / 1e-3):.1f} dBm")
print(f"rabi rate there: {rabi_rate_from_power(p_magic, emitter) / gamma:.4f} Gamma")

detunings = np.linspace(-4, 4, 401) * gamma
drives = [0.1, 2**-0.5, 1.5]
curves = {x: np.abs(reflection_coefficient(detunings, x * gamma, emitter)) for x in drives}
for x, mags in curves.items():
    print(f"x = {x:.3f}: |r| on resonance = {mags[200]:.4f}")

# fit a noisy magnitude trace at the magic power
rng = np.random.default_rng(1)
freqs = emitter.w01 + np.linspace(-3, 3, 101) * gamma
clean = reflection_coefficient(freqs - emitter.w01, gamma * 2**-0.5, emitter)
noisy = np.abs(clean + 0.04 * (rng.standard_normal(101) + 1j * rng.standard_normal(101)))
fit = fit_resonance(freqs, noisy, gamma * 2**-0.5)
print(f"fit: f0 = {fit.w0 / TWO_PI / 1e9:.6f} GHz (true 4.724000),", end=" ")
print(f"Gamma/2pi = {fit.gamma_r / TWO_PI / 1e6:.2f} MHz (true 13.00)")

if plt is not None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for x, mags in curves.items():
        ax.plot(detunings / gamma, mags, label=f"$\\Omega/\\Gamma$ = {x:.2f}")
    ax.plot((freqs - emitter.w01) / gamma, noisy, ".", ms=3, alpha=0.5, label="noisy data")
    ax.set_xlabel("detuning (units of $\\Gamma$)")
    ax.set_ylabel("|r|")
    ax.legend()
    save_figure(fig, "reflection_dip.png")
