"""Recovery of parity sequences and switch rates from IQ traces.

The chain is: rebin -> project onto the blob axis -> threshold with
hysteresis -> (a) dwell-time rates and (b) power spectral density with a
Lorentzian corner fit.  For a two-state telegraph with per-direction rates
(g+, g-) the PSD corner sits at ``f_c = (g+ + g-)/(2 pi)``, so the corner
estimate ``pi * f_c`` reports the arithmetic mean of the two rates; the
transition count per unit time estimates the average switch rate
``2 g+ g- / (g+ + g-)``.  The two agree for symmetric telegraphs.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import welch as _scipy_welch

from .errors import (
    FitError,
    InsufficientStatisticsError,
    RejectionError,
    ValidationError,
)
from .fitting import damped_gauss_newton
from .synth import IQTrace, TraceTruth

#: minimum usable parity splitting; smaller gaps are rejected, not analyzed
SPLITTING_REJECT_HZ = 10e6

#: Welch defaults
DEFAULT_SEGMENT_LENGTH = 2**14
DEFAULT_OVERLAP = 0.5
DEFAULT_WINDOW = "hann"


def rebin(trace, new_bin):
    """Block-average a trace onto a coarser bin time.

    ``new_bin`` must be an integer multiple of the trace bin time; a partial
    trailing block is dropped.  White noise shrinks by sqrt(ratio).
    """
    ratio_f = new_bin / trace.bin_time
    ratio = int(round(ratio_f))
    if ratio < 1 or abs(ratio_f - ratio) > 1e-9 * ratio:
        raise ValidationError(
            f"new bin {new_bin} is not an integer multiple of {trace.bin_time}"
        )
    if ratio == 1:
        return trace
    n = (trace.n_bins // ratio) * ratio

    def block(x):
        return x[:n].reshape(-1, ratio).mean(axis=1)

    truth = None
    if trace.truth is not None:
        frac = block(trace.truth.plus_fraction)
        truth = TraceTruth(
            parity=np.where(frac >= 0.5, 1, -1).astype(np.int8), plus_fraction=frac
        )
    return IQTrace(
        bin_time=trace.bin_time * ratio,
        r_plus=block(trace.r_plus),
        r_minus=None if trace.r_minus is None else block(trace.r_minus),
        truth=truth,
        meta=dict(trace.meta),
    )


@dataclass(frozen=True)
class Calibration:
    """Blob centroids and noise scale used by the classifier.

    ``centroid_plus``/``centroid_minus`` hold one complex value per channel:
    the ideal trace value when the detector parity is +1 / -1.
    ``sigma_1us`` is the per-quadrature noise at 1 us; the classifier scales
    it to whatever bin time the trace carries.
    """

    centroid_plus: tuple
    centroid_minus: tuple
    sigma_1us: float
    splitting_hz: float | None = None
    hysteresis: float = 1.0

    @classmethod
    def from_trace_meta(cls, trace, hysteresis=1.0):
        meta = trace.meta
        if "centroid_plus" not in meta or "sigma_1us" not in meta:
            raise ValidationError("trace metadata carries no calibration")
        return cls(
            centroid_plus=tuple(meta["centroid_plus"]),
            centroid_minus=tuple(meta["centroid_minus"]),
            sigma_1us=float(meta["sigma_1us"]),
            splitting_hz=meta.get("splitting_hz"),
            hysteresis=hysteresis,
        )

    def sigma_at(self, bin_time):
        return self.sigma_1us * np.sqrt(1e-6 / bin_time)

    def axis_points(self):
        mu_p = np.concatenate([[complex(c).real, complex(c).imag] for c in self.centroid_plus])
        mu_m = np.concatenate([[complex(c).real, complex(c).imag] for c in self.centroid_minus])
        return mu_p, mu_m


@dataclass(frozen=True)
class ParitySequence:
    """Classified parity labels per bin: +1, -1, or 0 for unclassified."""

    bin_time: float
    labels: np.ndarray = field(repr=False)

    @property
    def transition_count(self):
        lab = self.labels[self.labels != 0]
        return int(np.count_nonzero(lab[1:] != lab[:-1]))

    @property
    def n_unclassified(self):
        return int(np.count_nonzero(self.labels == 0))


def classify_parity(trace, calibration, sigma_proj=None):
    """Threshold the joint quadrature record into a parity sequence.

    Each bin is projected onto the axis joining the two blob centroids in
    the joint quadrature space (2 or 4 dimensional).  A label switches only
    when the projection crosses beyond the midpoint by ``hysteresis *
    sigma_proj`` toward the other blob; bins inside the dead band keep the
    previous label.  Leading bins before the first unambiguous one are
    left unclassified (0).

    Raises
    ------
    RejectionError
        If the calibration splitting is at or below 10 MHz, or the blob
        separation is below ``2 * sigma_proj``.
    """
    if calibration.splitting_hz is not None and (
        abs(calibration.splitting_hz) <= SPLITTING_REJECT_HZ
    ):
        raise RejectionError(
            f"parity splitting {calibration.splitting_hz / 1e6:.3g} MHz is at or "
            f"below the {SPLITTING_REJECT_HZ / 1e6:.0f} MHz rejection threshold"
        )
    mu_p, mu_m = calibration.axis_points()
    if sigma_proj is None:
        sigma_proj = calibration.sigma_at(trace.bin_time)
    separation = float(np.linalg.norm(mu_p - mu_m))
    if separation < 2.0 * sigma_proj:
        raise RejectionError(
            f"blob separation {separation:.3g} below 2 sigma ({2 * sigma_proj:.3g}); "
            "insufficient SNR for classification"
        )

    axis = (mu_p - mu_m) / separation
    mid = 0.5 * (mu_p + mu_m)
    v = trace.quadratures()[:, : mu_p.size]
    proj = (v - mid) @ axis  # >0 toward parity +

    band = calibration.hysteresis * sigma_proj
    labels = np.zeros(proj.size, dtype=np.int8)
    state = 0
    for i, value in enumerate(proj):
        if state == 0:
            if abs(value) > band:
                state = 1 if value > 0 else -1
        elif state == 1 and value < -band:
            state = -1
        elif state == -1 and value > band:
            state = 1
        labels[i] = state
    return ParitySequence(bin_time=trace.bin_time, labels=labels)


def histogram2d(trace, axes=("i_plus", "i_minus"), bins=64):
    """Occupancy histogram of two chosen quadratures.

    Returns ``(counts, x_edges, y_edges)``; total counts equal the series
    length.
    """
    if bins < 16:
        raise ValidationError("use at least 16 bins per axis")
    names = ["i_plus", "q_plus", "i_minus", "q_minus"][: 2 * trace.channels]
    q = trace.quadratures()
    try:
        ix, iy = names.index(axes[0]), names.index(axes[1])
    except ValueError as exc:
        raise ValidationError(f"unknown axis; choose from {names}") from exc
    return np.histogram2d(q[:, ix], q[:, iy], bins=bins)


@dataclass(frozen=True)
class PsdEstimate:
    """One-sided power spectral density (density convention, DC bin dropped)."""

    freqs: np.ndarray = field(repr=False)
    power: np.ndarray = field(repr=False)
    segment_length: int
    overlap: float
    window: str


def welch_psd(
    series,
    bin_time,
    segment_length=DEFAULT_SEGMENT_LENGTH,
    overlap=DEFAULT_OVERLAP,
    window=DEFAULT_WINDOW,
):
    """Averaged-periodogram PSD of a real-valued series.

    One-sided density normalization: white noise of variance ``s**2`` per
    sample comes out flat at ``2 s**2 bin_time``; the integral of the PSD
    over frequency recovers the series variance (Parseval).
    """
    series = np.asarray(series, dtype=float)
    if series.size < 2 * segment_length:
        raise ValidationError(
            f"series length {series.size} < 2 * segment length {segment_length}"
        )
    freqs, power = _scipy_welch(
        series,
        fs=1.0 / bin_time,
        window=window,
        nperseg=segment_length,
        noverlap=int(round(overlap * segment_length)),
        detrend="constant",
        scaling="density",
        return_onesided=True,
    )
    return PsdEstimate(
        freqs=freqs[1:],
        power=power[1:],
        segment_length=segment_length,
        overlap=overlap,
        window=window,
    )


@dataclass(frozen=True)
class LorentzianFit:
    """Fit of ``S(f) = A / (1 + (f/f_c)^2) + B``."""

    plateau: float
    corner_hz: float
    floor: float
    covariance: np.ndarray = field(repr=False)
    rms_residual: float
    n_iter: int

    @property
    def gamma_p(self):
        """Switch rate under the symmetric-telegraph convention, pi * f_c."""
        return np.pi * self.corner_hz


def _log_cells(freqs, power, points_per_decade):
    """Assign frequencies to log-spaced cells for per-decade weighting.

    Returns the raw (freqs, log power) plus the cell index of every point
    and the per-cell counts; both data and model are averaged over the same
    cells, so an exact model input leaves a zero residual.
    """
    good = power > 0
    freqs, power = freqs[good], power[good]
    decades = np.log10(freqs[-1] / freqs[0])
    n_cells = max(int(np.ceil(decades * points_per_decade)), 8)
    edges = np.geomspace(freqs[0], freqs[-1] * (1 + 1e-12), n_cells + 1)
    idx = np.clip(np.searchsorted(edges, freqs, side="right") - 1, 0, n_cells - 1)
    count = np.bincount(idx, minlength=n_cells)
    filled = np.nonzero(count > 0)[0]
    remap = np.full(n_cells, -1)
    remap[filled] = np.arange(filled.size)
    return freqs, np.log(power), remap[idx], count[filled].astype(float)


def _cell_mean(values, cells, counts):
    return np.bincount(cells, weights=values, minlength=counts.size) / counts


def fit_lorentzian(psd, points_per_decade=24, max_iter=200):
    """Extract (plateau, corner, floor) from a PSD estimate.

    Damped Gauss-Newton on log-amplitude residuals over a log-resampled
    frequency grid; parameters are optimized as logs, which keeps them
    positive.  Initial guesses: floor = median of the top decade, plateau =
    median of the bottom decade minus floor, corner at the half-plateau
    crossing.

    Raises
    ------
    FitError
        No convergence, or data without a plateau/corner structure.
    """
    freqs, log_power, cells, counts = _log_cells(psd.freqs, psd.power, points_per_decade)
    data = _cell_mean(log_power, cells, counts)
    f_cell = np.exp(_cell_mean(np.log(freqs), cells, counts))
    if f_cell.size < 20:
        warnings.warn(
            f"only {f_cell.size} resampled PSD points; corner fit may be "
            "poorly constrained",
            stacklevel=2,
        )
    span = f_cell[-1] / f_cell[0]
    s_cell = np.exp(data)  # geometric-mean power per cell

    floor0 = float(np.median(s_cell[f_cell > f_cell[-1] / 10.0]))
    low = s_cell[f_cell < f_cell[0] * 10.0]
    plateau0 = max(float(np.median(low)) - floor0, 1e-3 * floor0)
    half = floor0 + 0.5 * plateau0
    below = np.nonzero(s_cell < half)[0]
    corner0 = f_cell[below[0]] if below.size else float(np.sqrt(f_cell[0] * f_cell[-1]))
    if not (f_cell[0] * 10.0 < corner0 < f_cell[-1] / 10.0):
        warnings.warn(
            "PSD span does not cover a decade on both sides of the estimated "
            f"corner ({corner0:.3g} Hz)",
            stacklevel=2,
        )

    def residual(theta):
        a, fc, b = np.exp(theta)
        model = a / (1.0 + (freqs / fc) ** 2) + b
        return _cell_mean(np.log(model), cells, counts) - data

    res = damped_gauss_newton(
        residual, np.log([plateau0, corner0, floor0]), max_iter=max_iter
    )
    a, fc, b = np.exp(res.x)
    if not np.isfinite(fc) or fc <= f_cell[0] / span or fc >= f_cell[-1] * span:
        raise FitError("corner frequency escaped the data range", last_iterate=res.x)
    jac_t = np.diag([a, fc, b])  # delta method back from log parameters
    return LorentzianFit(
        plateau=float(a),
        corner_hz=float(fc),
        floor=float(b),
        covariance=jac_t @ res.covariance @ jac_t.T,
        rms_residual=res.rms_residual,
        n_iter=res.n_iter,
    )


@dataclass(frozen=True)
class DwellRates:
    """Per-direction exit rates and occupancy asymmetry of a label sequence."""

    rate_plus_to_minus: float
    rate_minus_to_plus: float
    mean_parity: float
    n_transitions: int
    time_plus: float
    time_minus: float

    @property
    def gamma_p_dwell(self):
        """Arithmetic mean of the two rates (cross-check for the PSD corner)."""
        return 0.5 * (self.rate_plus_to_minus + self.rate_minus_to_plus)

    @property
    def gamma_p_events(self):
        """Transitions per unit classified time: the average switch rate,
        ``2 g+ g- / (g+ + g-)`` for a telegraph."""
        return self.n_transitions / (self.time_plus + self.time_minus)


def dwell_time_rates(seq, min_transitions=10):
    """Estimate telegraph rates from a classified parity sequence.

    Rate out of a state is (#exits)/(time spent there); unclassified bins
    contribute neither time nor transitions.  No dead-time correction is
    applied for switches shorter than a bin; the bias is below 10% while
    ``gamma_p * bin_time < 1e-2``.

    Raises
    ------
    InsufficientStatisticsError
        Fewer than ``min_transitions`` transitions.
    """
    lab = seq.labels[seq.labels != 0]
    if lab.size == 0:
        raise InsufficientStatisticsError("no classified bins", counts={"bins": 0})
    switches = lab[1:] != lab[:-1]
    n_trans = int(np.count_nonzero(switches))
    exits_plus = int(np.count_nonzero(switches & (lab[:-1] == 1)))
    exits_minus = n_trans - exits_plus
    t_plus = float(np.count_nonzero(lab == 1)) * seq.bin_time
    t_minus = float(np.count_nonzero(lab == -1)) * seq.bin_time
    if n_trans < min_transitions:
        raise InsufficientStatisticsError(
            f"{n_trans} transitions < {min_transitions} required",
            counts={"transitions": n_trans, "exits_plus": exits_plus, "exits_minus": exits_minus},
        )
    return DwellRates(
        rate_plus_to_minus=exits_plus / t_plus if t_plus > 0 else np.inf,
        rate_minus_to_plus=exits_minus / t_minus if t_minus > 0 else np.inf,
        mean_parity=(t_plus - t_minus) / (t_plus + t_minus),
        n_transitions=n_trans,
        time_plus=t_plus,
        time_minus=t_minus,
    )


def measured_snr(trace, labels=None):
    """Blob separation over summed per-blob std along the separation axis.

    Measured in one tone's complex plane (the + channel), matching the
    per-axis SNR the noise model is calibrated to.  Uses truth labels when
    available, otherwise the supplied classified labels; bins containing
    switches (fractional truth) are excluded.
    """
    if labels is None:
        if trace.truth is None:
            raise ValidationError("need labels or trace truth to measure SNR")
        labels = trace.truth.parity
        frac = trace.truth.plus_fraction
        pure = (frac < 1e-9) | (frac > 1.0 - 1e-9)  # exclude bins containing jumps
    else:
        pure = np.ones(trace.n_bins, dtype=bool)
    v = trace.quadratures()[:, :2]
    sel_p = pure & (labels == 1)
    sel_m = pure & (labels == -1)
    if sel_p.sum() < 2 or sel_m.sum() < 2:
        raise InsufficientStatisticsError("need both blobs populated to measure SNR")
    mu_p = v[sel_p].mean(axis=0)
    mu_m = v[sel_m].mean(axis=0)
    axis = mu_p - mu_m
    separation = float(np.linalg.norm(axis))
    axis /= separation
    sig_p = float(np.std(v[sel_p] @ axis, ddof=1))
    sig_m = float(np.std(v[sel_m] @ axis, ddof=1))
    return separation / (sig_p + sig_m)


@dataclass
class AnalysisReport:
    """Composite result of :func:`analyze_trace`; fields mirror the JSON report."""

    gamma_p_psd: float | None = None
    gamma_p_dwell: float | None = None
    gamma_p_events: float | None = None
    mean_parity: float | None = None
    f_c: float | None = None
    snr: float | None = None
    n_transitions: int | None = None
    rejected: bool = False
    reason: str | None = None

    def to_dict(self):
        return {
            "gamma_p_psd": self.gamma_p_psd,
            "gamma_p_dwell": self.gamma_p_dwell,
            "gamma_p_events": self.gamma_p_events,
            "mean_parity": self.mean_parity,
            "f_c": self.f_c,
            "snr": self.snr,
            "n_transitions": self.n_transitions,
            "rejected": self.rejected,
            "reason": self.reason,
        }


def _label_series(seq):
    """Labels as +-1 floats with unclassified bins carried forward."""
    lab = seq.labels.astype(float)
    if lab[0] == 0:
        classified = np.nonzero(lab != 0)[0]
        if classified.size == 0:
            raise InsufficientStatisticsError("no classified bins for PSD")
        lab[: classified[0]] = lab[classified[0]]
    if np.any(lab == 0):  # only leading bins are ever unclassified here
        for i in range(1, lab.size):
            if lab[i] == 0:
                lab[i] = lab[i - 1]
    return lab


def analyze_trace(trace, calibration=None, psd_on="labels", segment_length=None):
    """Full estimation chain on one trace: classify, dwell rates, PSD corner.

    Parameters
    ----------
    trace : IQTrace
    calibration : Calibration, optional
        Defaults to the calibration embedded in the trace metadata.
    psd_on : str
        ``"labels"``: PSD of the classified +-1 sequence (default, robust to
        blob geometry).  ``"projection"``: PSD of the raw projected
        quadrature record.
    segment_length : int, optional
        Welch segment; defaults to 2**14, shrunk to the largest power of two
        that fits half the record.

    Returns
    -------
    AnalysisReport
        With ``rejected=True`` and a reason instead of estimates when the
        trace fails a quality gate.
    """
    if calibration is None:
        calibration = Calibration.from_trace_meta(trace)
    try:
        seq = classify_parity(trace, calibration)
    except RejectionError as exc:
        return AnalysisReport(rejected=True, reason=str(exc))

    report = AnalysisReport()
    try:
        report.snr = measured_snr(trace, labels=None if trace.truth else seq.labels)
    except (InsufficientStatisticsError, ValidationError):
        report.snr = None

    dwell = dwell_time_rates(seq)
    report.gamma_p_dwell = dwell.gamma_p_dwell
    report.gamma_p_events = dwell.gamma_p_events
    report.mean_parity = dwell.mean_parity
    report.n_transitions = dwell.n_transitions

    if psd_on == "labels":
        series = _label_series(seq)
    elif psd_on == "projection":
        mu_p, mu_m = calibration.axis_points()
        axis = (mu_p - mu_m) / np.linalg.norm(mu_p - mu_m)
        series = (trace.quadratures()[:, : mu_p.size] - 0.5 * (mu_p + mu_m)) @ axis
    else:
        raise ValidationError(f"unknown psd_on choice {psd_on!r}")

    if segment_length is None:
        segment_length = min(
            DEFAULT_SEGMENT_LENGTH, 2 ** int(np.floor(np.log2(max(series.size // 2, 2))))
        )
    psd = welch_psd(series, trace.bin_time, segment_length=segment_length)
    lor = fit_lorentzian(psd)
    report.f_c = lor.corner_hz
    report.gamma_p_psd = lor.gamma_p
    return report


def rejection_mask(splitting_hz, threshold_hz=SPLITTING_REJECT_HZ):
    """Boolean mask of samples whose parity splitting is at or below the
    rejection threshold, plus the rejected fraction."""
    s = np.abs(np.asarray(splitting_hz, dtype=float))
    mask = s <= threshold_hz
    return mask, float(mask.mean())
