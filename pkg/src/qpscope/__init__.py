"""qpscope: simulate and analyze quasiparticle parity-switch detection with a
charge-sensitive transmon coupled to a waveguide.

The package covers the full chain: charge-dispersed qubit spectrum, saturable
waveguide reflection, the four-state parity/qubit rate model, synthesis of
noisy dual-tone telegraph records, and the estimators that recover switch
rates and physical parameters from them.
"""

__version__ = "0.1.0"

from .cpb import (
    CpbParams,
    ParitySpectrum,
    asymptotic_dispersion,
    calibrate_ec,
    diagonalize_cpb,
    parity_spectrum,
)
from .dynamics import (
    Generator,
    RateModel,
    Trajectory,
    build_generator,
    gamma_p_closed_form,
    gamma_p_steady,
    mean_parity,
    parity_exit_rates,
    sample_parity_trajectory,
    sample_trajectory,
    steady_state,
)
from .scattering import (
    DriveTone,
    EmitterParams,
    fit_resonance,
    magic_power,
    power_from_rabi,
    rabi_rate_from_power,
    reflection_coefficient,
)
from .synth import (
    Detector,
    DriftModel,
    IQTrace,
    NoiseModel,
    calibrate_sigma_1us,
    drift_trajectory,
    read_trace,
    splitting_from_ng,
    synthesize_traces,
    write_trace,
)
from .analysis import (
    Calibration,
    LorentzianFit,
    ParitySequence,
    PsdEstimate,
    analyze_trace,
    classify_parity,
    dwell_time_rates,
    fit_lorentzian,
    histogram2d,
    rebin,
    welch_psd,
)
from .inference import (
    RateFit,
    SweepPoint,
    arrhenius_temperature,
    fit_rates,
    predict_parity_curve,
)
from .config import ExperimentConfig
