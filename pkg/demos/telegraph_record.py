"""Two-minute dual-tone telegraph record and the rate estimators.

Both parity branches are probed at the magic power; every quasiparticle
tunneling event swaps which tone sits on resonance, so the two demodulated
records form an anticorrelated telegraph.  The switch rate is recovered
three ways: transition counting, per-direction dwell times, and the corner
frequency of the PSD of the classified sequence.
"""

import numpy as np

from qpscope import (
    Calibration,
    DriveTone,
    EmitterParams,
    NoiseModel,
    RateModel,
    analyze_trace,
    classify_parity,
    fit_lorentzian,
    histogram2d,
    sample_parity_trajectory,
    synthesize_traces,
    welch_psd,
)
from qpscope.dynamics import gamma_p_steady, parity_exit_rates
from qpscope.synth import Detector, calibrate_sigma_1us

from _common import plt, save_figure

TWO_PI = 2 * np.pi
GAMMA = TWO_PI * 13e6
MAGIC = GAMMA / np.sqrt(2)

detector = Detector(
    emitter=EmitterParams(gamma_r=GAMMA, w01=TWO_PI * 4.724e9), splitting=TWO_PI * 20e6
)
tones = [DriveTone(detector.w01_plus, MAGIC), DriveTone(detector.w01_minus, MAGIC)]

# rates chosen so the telegraph switches ~3 times per second at this drive
model = RateModel(
    gamma0=0.6, gamma1=9.18, gamma=GAMMA, omega=MAGIC, delta=TWO_PI * 20e6, drive_mode="dual"
)
rate_p, rate_m = parity_exit_rates(model)
print(f"model switch rate: {gamma_p_steady(model):.3f} 1/s, exits ({rate_p:.3f}, {rate_m:.3f})")

separation = abs(
    detector.reflection(detector.w01_plus, MAGIC, +1)
    - detector.reflection(detector.w01_plus, MAGIC, -1)
)
noise = NoiseModel(sigma_1us=calibrate_sigma_1us(separation), bin_time=1e-3)
print(f"blob separation {separation:.3f} -> sigma_1us = {noise.sigma_1us:.3f} (SNR=2 at 10 us)")

trajectory = sample_parity_trajectory(model, 120.0, seed=2024)
trace = synthesize_traces(trajectory, detector, tones, noise)

report = analyze_trace(trace)
print(f"transitions: {report.n_transitions}")
print(f"gamma_p (events) = {report.gamma_p_events:.3f} 1/s")
print(f"gamma_p (dwell)  = {report.gamma_p_dwell:.3f} 1/s")
print(f"gamma_p (PSD)    = {report.gamma_p_psd:.3f} 1/s  (corner {report.f_c:.3f} Hz)")
print(f"mean parity = {report.mean_parity:+.3f}, SNR(1 ms) = {report.snr:.1f}")

if plt is not None:
    fig, axes = plt.subplots(1, 3, figsize=(13, 3.6))
    t = np.arange(trace.n_bins) * trace.bin_time
    sl = slice(0, 1000)  # first second of the record
    axes[0].plot(t[sl], trace.r_plus.real[sl], lw=0.7, label="Re $r^+$")
    axes[0].plot(t[sl], trace.r_minus.real[sl], lw=0.7, label="Re $r^-$")
    axes[0].set_xlabel("time (s)")
    axes[0].legend(loc="center right")

    counts, xe, ye = histogram2d(trace, bins=48)
    axes[1].pcolormesh(xe, ye, np.log1p(counts.T), cmap="viridis")
    axes[1].set_xlabel("$I^+$")
    axes[1].set_ylabel("$I^-$")

    seq = classify_parity(trace, Calibration.from_trace_meta(trace))
    labels = seq.labels.astype(float)
    labels[labels == 0] = 1.0
    psd = welch_psd(labels, trace.bin_time)
    fit = fit_lorentzian(psd)
    model_curve = fit.plateau / (1 + (psd.freqs / fit.corner_hz) ** 2) + fit.floor
    axes[2].loglog(psd.freqs, psd.power, ".", ms=2)
    axes[2].loglog(psd.freqs, model_curve, "-", lw=2)
    axes[2].set_xlabel("frequency (Hz)")
    axes[2].set_ylabel("PSD (1/Hz)")
    save_figure(fig, "telegraph_record.png")
