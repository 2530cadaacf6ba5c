"""Command-line entry point.

Subcommands: spectrum, resonance-fit, steady-state, gamma-p, trajectory,
simulate, analyze, sweep, fit-rates, reproduce-fig4.  Every output artifact
embeds the config hash, seed and toolkit version; identical inputs give
bit-identical files.

Exit codes: 0 success, 2 config error, 3 fit/convergence error, 4 rejection,
5 I/O error.
"""

import argparse
import json
import sys

import numpy as np

from . import __version__
from . import cpb as cpb_mod
from .analysis import (
    Calibration,
    analyze_trace,
    histogram2d,
    rebin,
    welch_psd,
)
from .config import ExperimentConfig, TWO_PI
from .dynamics import (
    build_generator,
    gamma_p_closed_form,
    gamma_p_steady,
    mean_parity,
    parity_exit_rates,
    sample_parity_trajectory,
    sample_trajectory,
    steady_state,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DegenerateModelError,
    FitError,
    InsufficientStatisticsError,
    QpscopeError,
    RejectionError,
    SolverError,
    ValidationError,
)
from .inference import SweepPoint, arrhenius_temperature, fit_rates, predict_parity_curve
from .pipeline import MAGIC_X, run_sweep, simulate_trace
from .scattering import fit_resonance, assign_parity_branch
from .synth import read_trace, write_trace, write_trace_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FIT = 3
EXIT_REJECTED = 4
EXIT_IO = 5

#: canned configuration for the reproduce-fig4 drive-amplitude sweep preset
FIG4_PRESET = {
    "schema_version": 1,
    "detector": {
        "f01_mean_hz": 4.724e9,
        "splitting_hz": 20e6,
        "gamma_hz": 13e6,
        "anharmonicity_hz": -450e6,
    },
    "rates": {"gamma0": 0.85, "gamma1": 13.0},
    "drive": {"mode": "single", "x": MAGIC_X},
    "noise": {"snr_10us": 2.0, "eta": 0.04, "bin_time_s": 1e-3},
    "run": {"duration_s": 300.0, "seed": 20240},
    "sweep": {"x_values": [0.1, 0.3, 0.5, MAGIC_X, 1.0, 1.5, 2.5, 4.0]},
}


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _dump_json(obj, path=None):
    text = json.dumps(_jsonify(obj), sort_keys=True, indent=2) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_csv(path, header, rows, meta=None):
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, bool):
            return "1" if v else "0"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return repr(float(v))

    lines = []
    if meta:
        lines.append("# " + " ".join(f"{k}={v}" for k, v in meta.items()))
    lines.append(",".join(header))
    lines += [",".join(fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _artifact_meta(cfg):
    return {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "toolkit_version": __version__,
    }


def _load_config(args):
    if not getattr(args, "config", None):
        raise ConfigError("--config is required for this subcommand", kind="config-missing")
    cfg = ExperimentConfig.from_file(args.config)
    return _apply_overrides(cfg, args)


def _apply_overrides(cfg, args):
    raw = json.loads(json.dumps(cfg.raw))  # deep copy
    if getattr(args, "seed", None) is not None:
        raw["run"]["seed"] = args.seed
    if getattr(args, "duration", None) is not None:
        raw["run"]["duration_s"] = args.duration
    if getattr(args, "bin", None) is not None:
        raw["noise"]["bin_time_s"] = args.bin
    return ExperimentConfig.from_dict(raw)


# -- subcommand implementations ---------------------------------------------


def cmd_spectrum(args):
    cfg = _load_config(args)
    params = cfg.cpb_params()
    grid = np.linspace(0.0, 0.5, cfg.ng_points)
    spec = cpb_mod.parity_spectrum(params, grid)
    rows = zip(spec.ng_grid, spec.w01_plus, spec.w01_minus, spec.splitting)
    _write_csv(
        args.out,
        ["ng", "f01_plus_hz", "f01_minus_hz", "splitting_hz"],
        rows,
        meta=_artifact_meta(cfg),
    )
    _dump_json(
        {
            "config_hash": cfg.config_hash(),
            "toolkit_version": __version__,
            "ej_hz": params.ej_hz,
            "ec_hz": params.ec_hz,
            "max_splitting_hz": spec.max_splitting,
            "argmax_ng": spec.argmax_ng,
            "rows": int(spec.ng_grid.size),
            "out": args.out,
        }
    )
    return EXIT_OK


def _read_resonance_csv(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                continue  # header line
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValidationError(f"{path}: expected uniform rows (freq_hz, re_r, im_r) or (freq_hz, abs_r)")
    data = np.asarray(rows)
    freqs = TWO_PI * data[:, 0]
    values = data[:, 1] + 1j * data[:, 2] if data.shape[1] >= 3 else data[:, 1]
    return freqs, values


def cmd_resonance_fit(args):
    freqs, values = _read_resonance_csv(args.input)
    if args.rabi_hz is not None:
        omega = TWO_PI * args.rabi_hz
        cfg = ExperimentConfig.from_file(args.config) if args.config else None
    else:
        cfg = _load_config(args)
        omega = cfg.drive_x * cfg.detector().emitter.gamma_r
    fit = fit_resonance(freqs, values, omega, complex_fit=args.complex_fit)
    report = {
        "f0_hz": fit.w0 / TWO_PI,
        "gamma_hz": fit.gamma_r / TWO_PI,
        "scale": fit.scale,
        "offset": fit.offset,
        "rms_residual": fit.rms_residual,
        "n_iter": fit.n_iter,
        "toolkit_version": __version__,
    }
    if cfg is not None:
        det = cfg.detector()
        report["parity_branch"] = assign_parity_branch(fit.w0, det.w01_plus, det.w01_minus)
        report["config_hash"] = cfg.config_hash()
    _dump_json(report, args.out)
    return EXIT_OK


def cmd_steady_state(args):
    cfg = _load_config(args)
    model = cfg.rate_model(args.x)
    p = steady_state(build_generator(model))
    _dump_json(
        {
            "config_hash": cfg.config_hash(),
            "toolkit_version": __version__,
            "x": model.x,
            "drive_mode": model.drive_mode,
            "populations": {"0+": p[0], "1+": p[1], "0-": p[2], "1-": p[3]},
            "mean_parity": mean_parity(p),
            "gamma_p": gamma_p_steady(model),
        },
        args.out,
    )
    return EXIT_OK


def cmd_gamma_p(args):
    cfg = _load_config(args)
    model = cfg.rate_model(args.x)
    rate_p, rate_m = parity_exit_rates(model)
    out = {
        "config_hash": cfg.config_hash(),
        "toolkit_version": __version__,
        "x": model.x,
        "drive_mode": model.drive_mode,
        "gamma_p_steady": gamma_p_steady(model),
        "parity_exit_rates": [rate_p, rate_m],
    }
    if model.drive_mode == "single":
        out["gamma_p_closed_form"] = gamma_p_closed_form(
            model.gamma0, model.gamma1, model.gamma, model.delta, model.x
        )
    _dump_json(out, args.out)
    return EXIT_OK


def cmd_trajectory(args):
    cfg = _load_config(args)
    model = cfg.rate_model(args.x)
    if args.kind == "four-state":
        traj = sample_trajectory(
            build_generator(model), cfg.duration_s, cfg.seed, max_jumps=args.max_jumps
        )
    else:
        traj = sample_parity_trajectory(model, cfg.duration_s, cfg.seed)
    _write_csv(
        args.out, ["t_s", "state_index"], zip(traj.times, traj.states), meta=_artifact_meta(cfg)
    )
    _dump_json(
        {
            "config_hash": cfg.config_hash(),
            "toolkit_version": __version__,
            "kind": args.kind,
            "n_jumps": traj.n_jumps,
            "ended_early": traj.ended_early,
            "seed": traj.seed,
            "out": args.out,
        }
    )
    return EXIT_OK


def cmd_simulate(args):
    cfg = _load_config(args)
    trace = simulate_trace(cfg)
    if not args.out:
        raise ConfigError("--out is required for simulate", kind="config-missing")
    if args.format == "csv":
        write_trace_csv(args.out, trace)
    else:
        write_trace(args.out, trace)
    _dump_json(
        {
            "config_hash": cfg.config_hash(),
            "toolkit_version": __version__,
            "out": args.out,
            "n_bins": trace.n_bins,
            "bin_time_s": trace.bin_time,
            "truth_gamma_p": trace.meta["truth_gamma_p"],
            "seed": cfg.seed,
        }
    )
    return EXIT_OK


def cmd_analyze(args):
    trace = read_trace(args.input)
    if args.bin is not None:
        trace = rebin(trace, args.bin)
    report = analyze_trace(trace, Calibration.from_trace_meta(trace))
    out = report.to_dict()
    out["toolkit_version"] = __version__
    for key in ("config_hash", "truth_gamma_p", "x"):
        if key in trace.meta:
            out[key] = trace.meta[key]
    if args.psd_out and not report.rejected:
        seq_psd = welch_psd(
            _projection_series(trace),
            trace.bin_time,
            segment_length=min(2**14, 2 ** int(np.floor(np.log2(max(trace.n_bins // 2, 2))))),
        )
        _write_csv(args.psd_out, ["freq_hz", "power"], zip(seq_psd.freqs, seq_psd.power))
    if args.hist_out:
        counts, xe, ye = histogram2d(trace, bins=64)
        rows = [
            (xe[i], ye[j], counts[i, j])
            for i in range(counts.shape[0])
            for j in range(counts.shape[1])
        ]
        _write_csv(args.hist_out, ["i_plus_edge", "i_minus_edge", "count"], rows)
    _dump_json(out, args.out)
    return EXIT_REJECTED if report.rejected else EXIT_OK


def _projection_series(trace):
    cal = Calibration.from_trace_meta(trace)
    mu_p, mu_m = cal.axis_points()
    axis = (mu_p - mu_m) / np.linalg.norm(mu_p - mu_m)
    return (trace.quadratures()[:, : mu_p.size] - 0.5 * (mu_p + mu_m)) @ axis


def cmd_sweep(args):
    cfg = _load_config(args)
    result = run_sweep(cfg, jobs=args.jobs)
    header = [
        "x",
        "gamma_p",
        "gamma_p_err",
        "mean_parity",
        "mean_parity_err",
        "truth_gamma_p",
        "at_magic_power",
        "rejected",
    ]
    rows = [[r.get(k) for k in header] for r in result["points"]]
    if args.out:
        _write_csv(args.out, header, rows, meta=_artifact_meta(cfg))
        result["sweep_csv"] = args.out
    _dump_json(result, args.report_out)
    return EXIT_OK


def _read_sweep_csv(path):
    points = []
    with open(path) as fh:
        header = fh.readline().strip()
        while header.startswith("#"):
            header = fh.readline().strip()
        header = header.split(",")
        idx = {name: header.index(name) for name in header}
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")

            def get(name):
                if name not in idx:
                    return None
                v = parts[idx[name]]
                return float(v) if v not in ("", "None") else None

            if "rejected" in idx and parts[idx["rejected"]] == "1":
                continue
            points.append(
                SweepPoint(
                    x=get("x"),
                    gamma_p=get("gamma_p"),
                    gamma_p_err=get("gamma_p_err"),
                    mean_parity=get("mean_parity"),
                    mean_parity_err=get("mean_parity_err"),
                )
            )
    return points


def cmd_fit_rates(args):
    cfg = _load_config(args)
    points = _read_sweep_csv(args.input)
    model = cfg.rate_model(0.0)
    fit = fit_rates(points, model.gamma, model.delta)
    xs = [p.x for p in points]
    curve_x = np.linspace(0.05, max(xs), 200)
    curve = predict_parity_curve(fit.gamma0, fit.gamma1, model.gamma, model.delta, curve_x)
    out = {
        "config_hash": cfg.config_hash(),
        "toolkit_version": __version__,
        "gamma0": fit.gamma0,
        "gamma1": fit.gamma1,
        "covariance": fit.covariance,
        "chi2_dof": fit.chi2_dof,
        "parity_curve": {"x": curve_x, "mean_parity": curve},
        "parity_curve_min": float(curve.min()),
        "predicted_parity_at_points": predict_parity_curve(
            fit.gamma0, fit.gamma1, model.gamma, model.delta, xs
        ),
    }
    f_q = float(cfg.raw["detector"]["f01_mean_hz"])
    out["arrhenius_temperature_k"] = (
        arrhenius_temperature(fit.gamma0, fit.gamma1, f_q) if fit.gamma1 > fit.gamma0 else None
    )
    _dump_json(out, args.out)
    return EXIT_OK


def cmd_reproduce_fig4(args):
    cfg = _apply_overrides(ExperimentConfig.from_dict(FIG4_PRESET), args)
    result = run_sweep(cfg, jobs=args.jobs)
    header = [
        "x",
        "gamma_p",
        "gamma_p_err",
        "mean_parity",
        "mean_parity_err",
        "truth_gamma_p",
        "at_magic_power",
        "rejected",
    ]
    rows = [[r.get(k) for k in header] for r in result["points"]]
    if args.out:
        _write_csv(args.out, header, rows, meta=_artifact_meta(cfg))
        result["sweep_csv"] = args.out
    _dump_json(result, args.report_out)
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------


def _add_common(sub, config_required=True):
    sub.add_argument("--config", help="path to the experiment config JSON")
    sub.add_argument("--seed", type=int, help="override run.seed")
    sub.add_argument("--out", help="output file path (default: stdout for JSON)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qpscope",
        description="Simulate and analyze quasiparticle parity-switch records "
        "from a waveguide-coupled charge-sensitive transmon.",
    )
    parser.add_argument("--version", action="version", version=f"qpscope {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("spectrum", help="charge-dispersed parity spectrum as CSV")
    _add_common(s)
    s.set_defaults(func=cmd_spectrum)

    s = subs.add_parser("resonance-fit", help="fit a reflection dip from CSV data")
    _add_common(s)
    s.add_argument("--input", required=True, help="CSV: freq_hz,re_r,im_r or freq_hz,abs_r")
    s.add_argument("--rabi-hz", type=float, help="probe Rabi rate in Hz (else from config)")
    s.add_argument("--complex-fit", action="store_true", help="fit complex r instead of |r|")
    s.set_defaults(func=cmd_resonance_fit)

    s = subs.add_parser("steady-state", help="stationary populations of the rate model")
    _add_common(s)
    s.add_argument("--x", type=float, help="drive strength Omega/Gamma override")
    s.set_defaults(func=cmd_steady_state)

    s = subs.add_parser("gamma-p", help="model parity-switch rate at the configured drive")
    _add_common(s)
    s.add_argument("--x", type=float, help="drive strength Omega/Gamma override")
    s.set_defaults(func=cmd_gamma_p)

    s = subs.add_parser("trajectory", help="sample a stochastic trajectory as CSV")
    _add_common(s)
    s.add_argument("--x", type=float, help="drive strength Omega/Gamma override")
    s.add_argument("--duration", type=float, help="override run.duration_s")
    s.add_argument(
        "--kind",
        choices=["parity", "four-state"],
        default="parity",
        help="parity telegraph (fast) or exact four-state record",
    )
    s.add_argument("--max-jumps", type=int, default=2_000_000)
    s.set_defaults(func=cmd_trajectory)

    s = subs.add_parser("simulate", help="synthesize a measurement record")
    _add_common(s)
    s.add_argument("--duration", type=float, help="override run.duration_s")
    s.add_argument("--bin", type=float, help="override noise.bin_time_s")
    s.add_argument("--format", choices=["bin", "csv"], default="bin")
    s.set_defaults(func=cmd_simulate)

    s = subs.add_parser("analyze", help="estimate rates from a recorded trace")
    _add_common(s)
    s.add_argument("--input", required=True, help="trace file from simulate")
    s.add_argument("--bin", type=float, help="rebin to this bin time before analysis")
    s.add_argument("--psd-out", help="write the PSD as CSV")
    s.add_argument("--hist-out", help="write the 2-d histogram as CSV")
    s.set_defaults(func=cmd_analyze)

    s = subs.add_parser("sweep", help="drive-amplitude sweep: simulate, analyze, fit")
    _add_common(s)
    s.add_argument("--duration", type=float, help="override run.duration_s")
    s.add_argument("--jobs", type=int, default=1, help="concurrent sweep points")
    s.add_argument("--report-out", help="write the JSON report here instead of stdout")
    s.set_defaults(func=cmd_sweep)

    s = subs.add_parser("fit-rates", help="fit (gamma0, gamma1) to a sweep CSV")
    _add_common(s)
    s.add_argument("--input", required=True, help="sweep CSV")
    s.set_defaults(func=cmd_fit_rates)

    s = subs.add_parser("reproduce-fig4", help="canned drive-amplitude sweep preset")
    _add_common(s, config_required=False)
    s.add_argument("--duration", type=float, help="record length per point (s)")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--report-out", help="write the JSON report here instead of stdout")
    s.set_defaults(func=cmd_reproduce_fig4)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _dump_json({"error": exc.kind, "message": str(exc)})
        return EXIT_CONFIG
    except ValidationError as exc:
        _dump_json({"error": "validation", "message": str(exc)})
        return EXIT_CONFIG
    except RejectionError as exc:
        _dump_json({"error": "rejected", "message": str(exc)})
        return EXIT_REJECTED
    except (FitError, CalibrationError, SolverError, DegenerateModelError, InsufficientStatisticsError) as exc:
        _dump_json({"error": "fit-or-convergence", "message": str(exc)})
        return EXIT_FIT
    except OSError as exc:
        _dump_json({"error": "io", "message": str(exc), "path": getattr(exc, "filename", None)})
        return EXIT_IO
    except QpscopeError as exc:
        _dump_json({"error": "toolkit", "message": str(exc)})
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
