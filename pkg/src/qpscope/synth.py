"""Synthesis of binned dual-tone IQ measurement records.

A parity trajectory plus the saturable reflection model yields the ideal
per-bin reflection value for each probe tone; bins that contain a parity
switch take the time-weighted average of the two parity values (the "arch"
between the histogram blobs).  Calibrated white noise is then added per bin
and per quadrature.

Noise is counter-based (Philox keyed by the seed, four 64-bit words per
bin), so synthesizing a record in segments and concatenating gives exactly
the same bytes as one pass.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator as NpGenerator, Philox

from . import cpb as cpb_mod
from .errors import ConfigError, ValidationError
from .scattering import EmitterParams, reflection_coefficient

TWO_PI = 2.0 * np.pi

#: words of Philox output consumed per bin (two complex channels)
_WORDS_PER_BIN = 4

#: default calibration target: SNR = 2 at 10 us integration
SNR_REFERENCE = 2.0
SNR_REFERENCE_TIME = 10e-6


@dataclass(frozen=True)
class Detector:
    """Physical bundle of one parity detector.

    ``emitter.w01`` holds the mean transition frequency; the two parity
    branches sit at ``w01 +- splitting/2`` (all angular, rad/s).
    """

    emitter: EmitterParams
    splitting: float
    cpb: cpb_mod.CpbParams | None = None

    @property
    def w01_plus(self):
        return self.emitter.w01 + 0.5 * self.splitting

    @property
    def w01_minus(self):
        return self.emitter.w01 - 0.5 * self.splitting

    def w01_of_parity(self, parity):
        return self.w01_plus if parity > 0 else self.w01_minus

    @classmethod
    def from_cpb(cls, cpb_params, gamma_r, gamma_nr=0.0, gamma_phi=0.0, ng=None):
        """Derive the parity branches from the charge-dispersion model."""
        if ng is None:
            ng = cpb_params.ng
        f_plus = cpb_mod.w01(cpb_params, ng)
        f_minus = cpb_mod.w01(cpb_params, ng + 0.5)
        emitter = EmitterParams(
            gamma_r=gamma_r,
            gamma_nr=gamma_nr,
            gamma_phi=gamma_phi,
            w01=TWO_PI * 0.5 * (f_plus + f_minus),
        )
        return cls(emitter=emitter, splitting=TWO_PI * (f_plus - f_minus), cpb=cpb_params)

    def reflection(self, tone_frequency, omega, parity):
        """Ideal reflection seen by a tone when the detector has ``parity``."""
        detuning = tone_frequency - self.w01_of_parity(parity)
        return reflection_coefficient(detuning, omega, self.emitter)


@dataclass(frozen=True)
class NoiseModel:
    """Measurement noise of the amplification chain.

    ``sigma_1us`` is the per-quadrature standard deviation of r at 1 us
    integration; white-noise integration scales it as ``1/sqrt(bin_time)``.
    ``eta``/``n_add`` describe the chain (related by ``n_add = (1/eta - 1)/2``)
    and are carried as metadata.
    """

    sigma_1us: float
    bin_time: float
    eta: float = 0.04
    n_add: float = 12.0

    def __post_init__(self):
        if self.sigma_1us < 0:
            raise ValidationError("sigma_1us must be >= 0")
        if self.bin_time <= 0:
            raise ValidationError("bin_time must be > 0")
        if not 0 < self.eta <= 1:
            raise ValidationError("quantum efficiency must be in (0, 1]")

    def sigma(self, bin_time=None):
        """Per-quadrature noise std at the given integration time."""
        bt = self.bin_time if bin_time is None else bin_time
        return self.sigma_1us * np.sqrt(1e-6 / bt)


def added_photons_from_eta(eta):
    return (1.0 / eta - 1.0) / 2.0


def calibrate_sigma_1us(separation, snr=SNR_REFERENCE, integration_time=SNR_REFERENCE_TIME):
    """sigma_1us such that ``SNR(tau) = |mu+ - mu-| / (2 sigma(tau))`` hits
    the target at the reference integration time."""
    if separation <= 0:
        raise ValidationError("blob separation must be > 0")
    return separation / (2.0 * snr) * np.sqrt(integration_time / 1e-6)


@dataclass(frozen=True)
class TraceTruth:
    """Per-bin ground truth carried alongside synthetic records."""

    parity: np.ndarray = field(repr=False)  # majority parity, +1/-1
    plus_fraction: np.ndarray = field(repr=False)  # time fraction spent in +


@dataclass(frozen=True)
class IQTrace:
    """Binned complex reflection records, one series per probe tone.

    ``r_minus`` is None for single-tone records.  ``meta`` carries
    calibration values (ideal centroids, per-bin noise sigma, splitting,
    model switch rate) used downstream for classification and reporting.
    """

    bin_time: float
    r_plus: np.ndarray = field(repr=False)
    r_minus: np.ndarray | None = field(repr=False, default=None)
    truth: TraceTruth | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.bin_time <= 0:
            raise ValidationError("bin_time must be > 0")
        if self.r_minus is not None and self.r_minus.size != self.r_plus.size:
            raise ValidationError("channel series must have equal length")
        if self.truth is not None and self.truth.parity.size != self.r_plus.size:
            raise ValidationError("truth series must align 1:1 with bins")

    @property
    def n_bins(self):
        return self.r_plus.size

    @property
    def channels(self):
        return 1 if self.r_minus is None else 2

    def quadratures(self):
        """Real-valued view (n_bins, 2*channels): I+, Q+ [, I-, Q-]."""
        cols = [self.r_plus.real, self.r_plus.imag]
        if self.r_minus is not None:
            cols += [self.r_minus.real, self.r_minus.imag]
        return np.column_stack(cols)


def noise_normals(seed, start_bin, n_bins):
    """Standard-normal noise block, shape (n_bins, 4), counter-based.

    Bin k always consumes Philox words [4k, 4k+4) of the stream keyed by
    ``seed``, turned into normals by Box-Muller; segment boundaries therefore
    do not change the values.
    """
    bg = Philox(key=int(seed))
    if start_bin:
        bg.advance(int(start_bin))  # one advance step = 4 output words
    u = NpGenerator(bg).random((int(n_bins), _WORDS_PER_BIN))
    radius = np.sqrt(-2.0 * np.log1p(-u[:, 0::2]))  # 1-u in (0,1]: log finite
    angle = TWO_PI * u[:, 1::2]
    out = np.empty((int(n_bins), _WORDS_PER_BIN))
    out[:, 0::2] = radius * np.cos(angle)
    out[:, 1::2] = radius * np.sin(angle)
    return out


def _plus_fraction(trajectory, n_bins, bin_time):
    """Fraction of each bin spent in parity +, exact for the jump record."""
    par = trajectory.state_parities().astype(float)
    t = np.concatenate([trajectory.times, [trajectory.total_time]])
    # cumulative time spent in parity + at interval boundaries
    plus_dt = np.diff(t) * (par > 0)
    cum = np.concatenate([[0.0], np.cumsum(plus_dt)])

    edges = np.arange(n_bins + 1) * bin_time
    idx = np.searchsorted(t, edges, side="right") - 1
    idx = np.clip(idx, 0, par.size - 1)
    cum_at_edges = cum[idx] + (edges - t[idx]) * (par[idx] > 0)
    return np.clip(np.diff(cum_at_edges) / bin_time, 0.0, 1.0)


def synthesize_traces(trajectory, detector, tones, noise, seed=None, include_truth=True):
    """Turn a parity trajectory into binned, noisy reflection records.

    Parameters
    ----------
    trajectory : Trajectory
        Any trajectory exposing parity per interval (four-state or reduced).
    detector : Detector
    tones : sequence of DriveTone
        One or two tones; each must sit within ``10*gamma`` of a parity
        branch, which also decides the channel it is recorded on.
    noise : NoiseModel
        Per-bin noise std follows ``noise.sigma(noise.bin_time)``.
    seed : int, optional
        Noise stream key; defaults to ``trajectory.seed + 1``.
    include_truth : bool
        Attach the per-bin true parity and +-fraction.

    Returns
    -------
    IQTrace
    """
    if len(tones) not in (1, 2):
        raise ValidationError("need one or two probe tones")
    if trajectory.total_time < noise.bin_time:
        raise ValidationError("trajectory shorter than one bin")
    gamma = detector.emitter.gamma_r

    by_parity = {}
    for tone in tones:
        det_p = abs(tone.frequency - detector.w01_plus)
        det_m = abs(tone.frequency - detector.w01_minus)
        parity = +1 if det_p <= det_m else -1
        if min(det_p, det_m) > 10.0 * gamma:
            raise ConfigError(
                f"tone at {tone.frequency / TWO_PI:.6g} Hz is more than 10*gamma "
                "away from both parity branches",
                kind="tone-mismatch",
            )
        if parity in by_parity:
            raise ConfigError("two tones address the same parity branch", kind="tone-mismatch")
        by_parity[parity] = tone
    if +1 not in by_parity:
        raise ConfigError("a tone addressing the + branch is required", kind="tone-mismatch")

    n_bins = int(np.floor(trajectory.total_time / noise.bin_time + 1e-9))
    frac = _plus_fraction(trajectory, n_bins, noise.bin_time)

    if seed is None:
        seed = trajectory.seed + 1
    sigma = noise.sigma()
    normals = noise_normals(seed, 0, n_bins)

    series = {}
    centroids = {}
    for k, parity_slot in enumerate((+1, -1)):
        tone = by_parity.get(parity_slot)
        if tone is None:
            continue
        r_when_plus = detector.reflection(tone.frequency, tone.omega, +1)
        r_when_minus = detector.reflection(tone.frequency, tone.omega, -1)
        ideal = frac * r_when_plus + (1.0 - frac) * r_when_minus
        noisy = ideal + sigma * (normals[:, 2 * k] + 1j * normals[:, 2 * k + 1])
        series[parity_slot] = noisy
        centroids[parity_slot] = (r_when_plus, r_when_minus)

    truth = None
    if include_truth:
        truth = TraceTruth(
            parity=np.where(frac >= 0.5, 1, -1).astype(np.int8),
            plus_fraction=frac,
        )

    meta = {
        "seed": int(seed),
        "sigma_bin": float(sigma),
        "sigma_1us": float(noise.sigma_1us),
        "splitting_hz": float(detector.splitting / TWO_PI),
        # ideal blob centroids per channel: value in parity +, value in parity -
        "centroid_plus": [centroids[p][0] for p in (+1, -1) if p in centroids],
        "centroid_minus": [centroids[p][1] for p in (+1, -1) if p in centroids],
    }
    return IQTrace(
        bin_time=noise.bin_time,
        r_plus=series[+1],
        r_minus=series.get(-1),
        truth=truth,
        meta=meta,
    )


@dataclass(frozen=True)
class DriftModel:
    """Slow offset-charge drift: single-fluctuator telegraph in ng.

    ``ng(t)`` switches between ``ng0 +- delta_ng/2`` with per-direction rate
    ``pi * corner_freq_hz``, so the power spectrum of any function of ng(t)
    is Lorentzian with the given corner frequency.
    """

    ng0: float
    delta_ng: float
    corner_freq_hz: float

    def __post_init__(self):
        if self.corner_freq_hz <= 0:
            raise ValidationError("corner frequency must be > 0")
        if self.delta_ng < 0:
            raise ValidationError("drift amplitude must be >= 0")

    @property
    def switch_rate(self):
        return np.pi * self.corner_freq_hz


@dataclass(frozen=True)
class NgPath:
    """Piecewise-constant offset-charge record."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    total_time: float
    seed: int

    def sample(self, sample_times):
        idx = np.searchsorted(self.times, sample_times, side="right") - 1
        return self.values[np.clip(idx, 0, self.values.size - 1)]


def drift_trajectory(model, total_time, seed):
    """Sample the offset-charge telegraph over ``total_time`` seconds."""
    if total_time <= 0:
        raise ValidationError("total_time must be > 0")
    levels = (model.ng0 + 0.5 * model.delta_ng, model.ng0 - 0.5 * model.delta_ng)
    rng = np.random.default_rng(seed)
    first = int(rng.random() < 0.5)
    if model.delta_ng == 0:
        return NgPath(
            times=np.array([0.0]),
            values=np.array([model.ng0]),
            total_time=float(total_time),
            seed=int(seed),
        )

    rate = model.switch_rate
    times = [np.array([0.0])]
    t = 0.0
    while True:
        jumps = t + np.cumsum(rng.exponential(1.0 / rate, size=256))
        keep = jumps < total_time
        times.append(jumps[keep])
        if not keep.all():
            break
        t = jumps[-1]
    jump_times = np.concatenate(times)
    values = np.array(levels)[(np.arange(jump_times.size) + first) % 2]
    return NgPath(jump_times, values, float(total_time), int(seed))


def splitting_from_ng(ng_values, cpb_params):
    """Parity splitting |w01(ng) - w01(ng+1/2)| in Hz for each ng value.

    Distinct ng values are diagonalized once and reused, so long piecewise
    records with few levels are cheap.
    """
    ng_values = np.asarray(ng_values, dtype=float)
    unique, inverse = np.unique(ng_values, return_inverse=True)
    table = np.array([cpb_mod.splitting_at(cpb_params, g) for g in unique])
    return table[inverse].reshape(ng_values.shape)


def branch_frequencies_from_ng(ng_values, cpb_params):
    """Both parity branches w01(ng), w01(ng+1/2) in Hz (anticorrelated)."""
    ng_values = np.asarray(ng_values, dtype=float)
    unique, inverse = np.unique(ng_values, return_inverse=True)
    plus = np.array([cpb_mod.w01(cpb_params, g) for g in unique])
    minus = np.array([cpb_mod.w01(cpb_params, g + 0.5) for g in unique])
    return plus[inverse], minus[inverse]


# ---------------------------------------------------------------------------
# trace serialization: JSON header line + little-endian float64 records

_TRACE_FORMAT = "qpscope-trace"
_TRACE_VERSION = 1


def write_trace(path, trace, extra_header=None):
    """Write a trace file: one JSON header line, then raw '<f8' records
    (I+, Q+[, I-, Q-]) and, if present, one int8 truth parity per bin."""
    header = {
        "format": _TRACE_FORMAT,
        "version": _TRACE_VERSION,
        "bin_time_s": trace.bin_time,
        "length": int(trace.n_bins),
        "channels": trace.channels,
        "has_truth": trace.truth is not None,
    }
    for key, value in trace.meta.items():
        if key in ("centroid_plus", "centroid_minus"):
            header[key] = [[complex(c).real, complex(c).imag] for c in value]
        else:
            header[key] = value
    if extra_header:
        header.update(extra_header)

    records = trace.quadratures().astype("<f8")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(records.tobytes())
        if trace.truth is not None:
            fh.write(trace.truth.parity.astype(np.int8).tobytes())
            fh.write(trace.truth.plus_fraction.astype("<f8").tobytes())


def read_trace(path):
    """Read a trace file written by :func:`write_trace`.

    Returns
    -------
    IQTrace
        The header (minus structural fields) is restored into ``meta``.
    """
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("format") != _TRACE_FORMAT:
            raise ValidationError(f"{path} is not a {_TRACE_FORMAT} file")
        n = int(header["length"])
        channels = int(header["channels"])
        data = np.frombuffer(fh.read(8 * n * 2 * channels), dtype="<f8")
        data = data.reshape(n, 2 * channels)
        truth = None
        if header.get("has_truth"):
            parity = np.frombuffer(fh.read(n), dtype=np.int8)
            frac = np.frombuffer(fh.read(8 * n), dtype="<f8")
            truth = TraceTruth(parity=parity.copy(), plus_fraction=frac.copy())

    meta = {
        k: v
        for k, v in header.items()
        if k not in ("format", "version", "bin_time_s", "length", "channels", "has_truth")
    }
    for key in ("centroid_plus", "centroid_minus"):
        if key in meta:
            meta[key] = [complex(re, im) for re, im in meta[key]]
    r_plus = data[:, 0] + 1j * data[:, 1]
    r_minus = data[:, 2] + 1j * data[:, 3] if channels == 2 else None
    return IQTrace(
        bin_time=float(header["bin_time_s"]),
        r_plus=r_plus,
        r_minus=r_minus,
        truth=truth,
        meta=meta,
    )


def write_trace_csv(path, trace):
    """CSV mirror of the binary format: t_s, i_plus, q_plus[, i_minus, q_minus]."""
    cols = ["t_s", "i_plus", "q_plus"] + (
        ["i_minus", "q_minus"] if trace.channels == 2 else []
    )
    t = np.arange(trace.n_bins) * trace.bin_time
    rows = np.column_stack([t, trace.quadratures()])
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
