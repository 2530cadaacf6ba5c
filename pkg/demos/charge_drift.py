"""Slow offset-charge drift and the data-quality rejection gate.

The offset charge wanders between metastable configurations (modeled as a
single-fluctuator telegraph with a 0.2 mHz corner), dragging the two parity
branches in opposite directions.  When the branch gap falls to 10 MHz or
below, parity classification is refused; the drift statistics themselves
are recovered from a Lorentzian fit to the splitting PSD.
"""

import numpy as np

from qpscope import DriftModel, calibrate_ec, drift_trajectory, fit_lorentzian, splitting_from_ng, welch_psd
from qpscope.analysis import rejection_mask
from qpscope.synth import branch_frequencies_from_ng

from _common import plt, save_figure

device = calibrate_ec(14.5, 4.724e9)
drift = DriftModel(ng0=0.2, delta_ng=0.15, corner_freq_hz=2e-4)
print(f"drift: levels ng = {drift.ng0 - drift.delta_ng / 2} / {drift.ng0 + drift.delta_ng / 2},")
print(f"mean dwell = {1 / drift.switch_rate:.0f} s")

path = drift_trajectory(drift, total_time=1e6, seed=515)
print(f"{path.times.size - 1} configuration switches over {path.total_time:.0f} s")

sample_t = np.arange(0.0, 1e6, 10.0)
ng_t = path.sample(sample_t)
split_t = splitting_from_ng(ng_t, device)
print(f"splitting levels: {np.unique(split_t) / 1e6} MHz")

psd = welch_psd(split_t, 10.0)
fit = fit_lorentzian(psd)
print(f"splitting PSD corner = {fit.corner_hz * 1e3:.3f} mHz (drift model: 0.200 mHz)")

mask, fraction = rejection_mask(split_t)
print(f"fraction of time below the 10 MHz gate: {fraction:.1%} (rejected, not analyzed)")

if plt is not None:
    fig, axes = plt.subplots(1, 3, figsize=(13, 3.6))
    f_plus, f_minus = branch_frequencies_from_ng(ng_t, device)
    sl = slice(0, 20000)  # first 2e5 s
    axes[0].plot(sample_t[sl] / 3600, f_plus[sl] / 1e9, lw=0.8, label="$f_{01}^+$")
    axes[0].plot(sample_t[sl] / 3600, f_minus[sl] / 1e9, lw=0.8, label="$f_{01}^-$")
    axes[0].set_xlabel("time (h)")
    axes[0].set_ylabel("branch frequency (GHz)")
    axes[0].legend()

    axes[1].plot(sample_t[sl] / 3600, split_t[sl] / 1e6, lw=0.8, color="teal")
    axes[1].axhline(10, ls=":", color="r", label="rejection gate")
    axes[1].set_xlabel("time (h)")
    axes[1].set_ylabel("splitting (MHz)")
    axes[1].legend()

    model_curve = fit.plateau / (1 + (psd.freqs / fit.corner_hz) ** 2) + fit.floor
    axes[2].loglog(psd.freqs, psd.power, ".", ms=2, color="teal")
    axes[2].loglog(psd.freqs, model_curve, "-", lw=2, color="orange")
    axes[2].set_xlabel("frequency (Hz)")
    axes[2].set_ylabel("splitting PSD (Hz$^2$/Hz)")
    save_figure(fig, "charge_drift.png")
