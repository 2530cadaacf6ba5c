import json

import numpy as np
import pytest

from qpscope.cli import main
from qpscope.config import ExperimentConfig
from qpscope.errors import ConfigError

from conftest import base_config_dict

TWO_PI = 2 * np.pi


class TestConfigSchema:
    def test_valid_config(self):
        cfg = ExperimentConfig.from_dict(base_config_dict())
        assert cfg.seed == 11
        assert cfg.drive_mode == "dual"

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(base_config_dict(extra={"a": 1}))

    def test_unknown_key_rejected(self):
        d = base_config_dict()
        d["detector"]["color"] = "blue"
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_dict(d)
        assert info.value.kind == "unknown-key"

    def test_missing_section(self):
        d = base_config_dict()
        del d["rates"]
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)

    def test_missing_key(self):
        d = base_config_dict()
        del d["detector"]["gamma_hz"]
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)

    def test_wrong_type(self):
        d = base_config_dict()
        d["run"]["seed"] = "eleven"
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)

    def test_bool_is_not_a_number(self):
        d = base_config_dict()
        d["rates"]["gamma0"] = True
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)

    def test_schema_version_required(self):
        d = base_config_dict()
        d["schema_version"] = 2
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)

    def test_noise_needs_exactly_one_spec(self):
        d = base_config_dict()
        d["noise"]["sigma_1us"] = 0.5
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)
        del d["noise"]["snr_10us"]
        ExperimentConfig.from_dict(d)

    def test_drive_mode_values(self):
        d = base_config_dict()
        d["drive"]["mode"] = "triple"
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)

    def test_hash_insensitive_to_key_order(self):
        d1 = base_config_dict()
        d2 = json.loads(json.dumps(d1))
        d2["detector"] = dict(reversed(list(d2["detector"].items())))
        assert ExperimentConfig.from_dict(d1).config_hash() == ExperimentConfig.from_dict(d2).config_hash()

    def test_hash_sensitive_to_values(self):
        d = base_config_dict()
        h1 = ExperimentConfig.from_dict(d).config_hash()
        d["run"]["seed"] = 12
        assert ExperimentConfig.from_dict(d).config_hash() != h1

    def test_builders_convert_units(self):
        cfg = ExperimentConfig.from_dict(base_config_dict())
        assert cfg.emitter().gamma_r == pytest.approx(TWO_PI * 13e6)
        assert cfg.detector().splitting == pytest.approx(TWO_PI * 20e6)
        model = cfg.rate_model(1.0)
        assert model.omega == pytest.approx(TWO_PI * 13e6)
        tones = cfg.tones(1.0)
        assert len(tones) == 2
        assert tones[0].frequency == pytest.approx(TWO_PI * (4.724e9 + 10e6))

    def test_noise_calibration_snr(self):
        cfg = ExperimentConfig.from_dict(base_config_dict())
        noise = cfg.noise_model()
        assert noise.sigma_1us == pytest.approx(0.778, abs=0.01)

    def test_cpb_requires_section(self):
        cfg = ExperimentConfig.from_dict(base_config_dict())
        with pytest.raises(ConfigError):
            cfg.cpb_params()

    def test_drive_strength_warning(self):
        d = base_config_dict(drive={"mode": "single", "x": 8.0})
        d["detector"]["anharmonicity_hz"] = -450e6
        cfg = ExperimentConfig.from_dict(d)
        with pytest.warns(UserWarning):
            cfg.tones()
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            ExperimentConfig.from_dict(base_config_dict()).tones()  # no alpha given


def write_config(tmp_path, **overrides):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(base_config_dict(**overrides)))
    return str(path)


class TestCliSpectrum:
    def test_csv_and_determinism(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path, cpb={"ej_ec_ratio": 14.5, "ng": 0.0, "ng_points": 51}
        )
        out1 = tmp_path / "spec1.csv"
        out2 = tmp_path / "spec2.csv"
        assert main(["spectrum", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["spectrum", "--config", cfg, "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        lines = out1.read_text().splitlines()
        assert lines[0].startswith("# config_hash=")
        assert lines[1] == "ng,f01_plus_hz,f01_minus_hz,splitting_hz"
        assert len(lines) == 53

    def test_default_grid_is_201(self, tmp_path, capsys):
        cfg = write_config(tmp_path, cpb={"ej_ec_ratio": 14.5})
        out = tmp_path / "spec.csv"
        assert main(["spectrum", "--config", cfg, "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 203

    def test_missing_config_file(self, tmp_path, capsys):
        rc = main(["spectrum", "--config", str(tmp_path / "nope.json"), "--out", "x.csv"])
        assert rc == 2
        err = json.loads(capsys.readouterr().out)
        assert err["error"] == "config-not-found"


class TestCliModelCommands:
    def test_steady_state_output(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["steady-state", "--config", cfg, "--x", "1.0"]) == 0
        out = json.loads(capsys.readouterr().out)
        p = out["populations"]
        assert sum(p.values()) == pytest.approx(1.0, abs=1e-12)
        assert out["mean_parity"] == pytest.approx(0.0, abs=1e-6)  # dual tone

    def test_gamma_p_single_tone(self, tmp_path, capsys):
        cfg = write_config(tmp_path, drive={"mode": "single", "x": 2**-0.5})
        assert main(["gamma-p", "--config", cfg]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["gamma_p_closed_form"] == pytest.approx(2.1059, rel=1e-3)
        assert out["gamma_p_steady"] == pytest.approx(out["gamma_p_closed_form"], rel=1e-6)

    def test_trajectory_deterministic(self, tmp_path, capsys):
        cfg = write_config(tmp_path, run={"duration_s": 30.0, "seed": 5})
        t1, t2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
        assert main(["trajectory", "--config", cfg, "--out", str(t1)]) == 0
        assert main(["trajectory", "--config", cfg, "--out", str(t2)]) == 0
        assert t1.read_bytes() == t2.read_bytes()
        assert t1.read_text().splitlines()[1] == "t_s,state_index"

    def test_trajectory_four_state(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            detector={"f01_mean_hz": 4.724e9, "splitting_hz": 3.0, "gamma_hz": 2.0},
            rates={"gamma0": 1.0, "gamma1": 5.0},
            run={"duration_s": 2.0, "seed": 5},
        )
        out = tmp_path / "t4.csv"
        rc = main(["trajectory", "--config", cfg, "--kind", "four-state", "--out", str(out)])
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert report["kind"] == "four-state"


class TestCliSimulateAnalyze:
    def test_simulate_then_analyze(self, tmp_path, capsys):
        cfg = write_config(tmp_path, run={"duration_s": 60.0, "seed": 9})
        trace_path = tmp_path / "trace.qpt"
        assert main(["simulate", "--config", cfg, "--out", str(trace_path)]) == 0
        sim_out = json.loads(capsys.readouterr().out)
        assert sim_out["n_bins"] == 60_000

        report_path = tmp_path / "report.json"
        rc = main(["analyze", "--input", str(trace_path), "--out", str(report_path)])
        assert rc == 0
        report = json.loads(report_path.read_text())
        assert not report["rejected"]
        assert report["gamma_p_events"] == pytest.approx(report["truth_gamma_p"], rel=0.25)
        assert {"gamma_p_psd", "gamma_p_dwell", "mean_parity", "f_c", "snr", "reason"} <= set(report)

    def test_simulate_deterministic(self, tmp_path, capsys):
        cfg = write_config(tmp_path, run={"duration_s": 5.0, "seed": 4})
        p1, p2 = tmp_path / "a.qpt", tmp_path / "b.qpt"
        assert main(["simulate", "--config", cfg, "--out", str(p1)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(p2)]) == 0
        assert p1.read_bytes() == p2.read_bytes()

    def test_one_second_record_has_1000_bins(self, tmp_path, capsys):
        cfg = write_config(tmp_path, run={"duration_s": 1.0, "seed": 4})
        out = tmp_path / "short.qpt"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert json.loads(capsys.readouterr().out)["n_bins"] == 1000

    def test_analyze_rejects_low_splitting(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            detector={"f01_mean_hz": 4.724e9, "splitting_hz": 8e6, "gamma_hz": 13e6},
            run={"duration_s": 5.0, "seed": 4},
        )
        trace_path = tmp_path / "trace.qpt"
        assert main(["simulate", "--config", cfg, "--out", str(trace_path)]) == 0
        capsys.readouterr()
        rc = main(["analyze", "--input", str(trace_path)])
        assert rc == 4
        report = json.loads(capsys.readouterr().out)
        assert report["rejected"] is True

    def test_analyze_insufficient_transitions(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            rates={"gamma0": 0.05, "gamma1": 0.5},
            run={"duration_s": 5.0, "seed": 4},
        )
        trace_path = tmp_path / "trace.qpt"
        assert main(["simulate", "--config", cfg, "--out", str(trace_path)]) == 0
        capsys.readouterr()
        rc = main(["analyze", "--input", str(trace_path)])
        assert rc == 3

    def test_psd_and_hist_outputs(self, tmp_path, capsys):
        cfg = write_config(tmp_path, run={"duration_s": 60.0, "seed": 10})
        trace_path = tmp_path / "trace.qpt"
        main(["simulate", "--config", cfg, "--out", str(trace_path)])
        psd_path, hist_path = tmp_path / "psd.csv", tmp_path / "hist.csv"
        rc = main(
            [
                "analyze",
                "--input",
                str(trace_path),
                "--psd-out",
                str(psd_path),
                "--hist-out",
                str(hist_path),
            ]
        )
        assert rc == 0
        assert psd_path.read_text().splitlines()[0] == "freq_hz,power"
        assert hist_path.read_text().splitlines()[0] == "i_plus_edge,i_minus_edge,count"


class TestCliSweep:
    def test_sweep_and_composition(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            drive={"mode": "single", "x": 1.0},
            run={"duration_s": 60.0, "seed": 3},
            sweep={"x_values": [0.3, 2**-0.5, 1.5, 3.0]},
        )
        sweep_csv = tmp_path / "sweep.csv"
        report_path = tmp_path / "sweep.json"
        rc = main(
            ["sweep", "--config", cfg, "--out", str(sweep_csv), "--report-out", str(report_path)]
        )
        assert rc == 0
        report = json.loads(report_path.read_text())
        assert len(report["points"]) == 4
        magic_flags = [p["at_magic_power"] for p in report["points"]]
        assert magic_flags == [False, True, False, False]

        # composing simulate | analyze | fit-rates through files reproduces
        # the sweep's internal numbers: re-run point 1 standalone with the
        # sweep's per-point seed (seed + 2 i) and compare exactly
        point = report["points"][1]
        d = base_config_dict(
            drive={"mode": "single", "x": point["x"]},
            run={"duration_s": 60.0, "seed": 3 + 2 * 1},
        )
        cfg_point = tmp_path / "point.json"
        cfg_point.write_text(json.dumps(d))
        trace_path = tmp_path / "point.qpt"
        assert main(["simulate", "--config", str(cfg_point), "--out", str(trace_path)]) == 0
        capsys.readouterr()
        assert main(["analyze", "--input", str(trace_path)]) == 0
        analyzed = json.loads(capsys.readouterr().out)
        assert analyzed["gamma_p_events"] == point["gamma_p"]
        assert analyzed["mean_parity"] == point["mean_parity"]

        rc = main(["fit-rates", "--config", cfg, "--input", str(sweep_csv)])
        assert rc == 0
        fit = json.loads(capsys.readouterr().out)
        assert fit["gamma0"] == pytest.approx(report["fit"]["gamma0"], rel=1e-12, abs=1e-15)
        assert fit["gamma1"] == pytest.approx(report["fit"]["gamma1"], rel=1e-12, abs=1e-15)

    def test_sweep_jobs_deterministic(self, tmp_path):
        cfg = write_config(
            tmp_path,
            drive={"mode": "single", "x": 1.0},
            run={"duration_s": 30.0, "seed": 3},
            sweep={"x_values": [0.3, 0.8, 1.5, 3.0]},
        )
        outs = []
        for jobs, name in ((1, "s1"), (2, "s2")):
            csv_path = tmp_path / f"{name}.csv"
            rc = main(
                ["sweep", "--config", cfg, "--out", str(csv_path), "--jobs", str(jobs),
                 "--report-out", str(tmp_path / f"{name}.json")]
            )
            assert rc == 0
            outs.append(csv_path.read_bytes())
        assert outs[0] == outs[1]

    def test_dual_tone_sweep_rejected_as_config_error(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            drive={"mode": "dual", "x": 1.0},
            run={"duration_s": 10.0, "seed": 3},
            sweep={"x_values": [0.3, 0.8, 1.5, 3.0]},
        )
        rc = main(["sweep", "--config", cfg, "--out", str(tmp_path / "s.csv")])
        assert rc == 2
        assert json.loads(capsys.readouterr().out)["error"] == "drive-mode"

    def test_all_points_rejected_exits_4(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            detector={"f01_mean_hz": 4.724e9, "splitting_hz": 8e6, "gamma_hz": 13e6},
            drive={"mode": "single", "x": 1.0},
            run={"duration_s": 10.0, "seed": 3},
            sweep={"x_values": [0.3, 0.8, 1.5, 3.0]},
        )
        rc = main(["sweep", "--config", cfg, "--out", str(tmp_path / "s.csv")])
        assert rc == 4
        err = json.loads(capsys.readouterr().out)
        assert err["error"] == "rejected"

    def test_reproduce_fig4_preset(self, tmp_path, capsys):
        out_csv = tmp_path / "fig4.csv"
        report = tmp_path / "fig4.json"
        rc = main(
            ["reproduce-fig4", "--duration", "20", "--out", str(out_csv), "--report-out", str(report)]
        )
        assert rc == 0
        data = json.loads(report.read_text())
        assert len(data["points"]) == 8
        assert data["fit"]["gamma0"] > 0 and data["fit"]["gamma1"] > 0
        assert any(p["at_magic_power"] for p in data["points"])


class TestCliResonanceFit:
    def test_fit_from_csv(self, tmp_path, capsys):
        from qpscope.scattering import EmitterParams, reflection_coefficient

        gamma = TWO_PI * 13e6
        w01 = TWO_PI * 4.724e9
        em = EmitterParams(gamma_r=gamma, w01=w01)
        omega = gamma / np.sqrt(2)
        freqs = w01 + np.linspace(-2.5, 2.5, 81) * gamma
        r = reflection_coefficient(freqs - w01, omega, em)
        csv_path = tmp_path / "res.csv"
        lines = ["freq_hz,re_r,im_r"] + [
            f"{float(f / TWO_PI)!r},{float(v.real)!r},{float(v.imag)!r}" for f, v in zip(freqs, r)
        ]
        csv_path.write_text("\n".join(lines) + "\n")

        rc = main(["resonance-fit", "--input", str(csv_path), "--rabi-hz", repr(float(omega / TWO_PI))])
        assert rc == 0
        fit = json.loads(capsys.readouterr().out)
        assert fit["f0_hz"] == pytest.approx(4.724e9, abs=1e3)
        assert fit["gamma_hz"] == pytest.approx(13e6, rel=1e-3)

    def test_magnitude_only_csv(self, tmp_path, capsys):
        from qpscope.scattering import EmitterParams, reflection_coefficient

        gamma = TWO_PI * 13e6
        w01 = TWO_PI * 4.724e9
        em = EmitterParams(gamma_r=gamma, w01=w01)
        omega = 0.4 * gamma
        freqs = w01 + np.linspace(-3, 3, 61) * gamma
        mags = np.abs(reflection_coefficient(freqs - w01, omega, em))
        csv_path = tmp_path / "res.csv"
        csv_path.write_text(
            "freq_hz,abs_r\n" + "\n".join(f"{float(f / TWO_PI)!r},{float(m)!r}" for f, m in zip(freqs, mags))
        )
        rc = main(["resonance-fit", "--input", str(csv_path), "--rabi-hz", repr(float(omega / TWO_PI))])
        assert rc == 0
        fit = json.loads(capsys.readouterr().out)
        assert fit["f0_hz"] == pytest.approx(4.724e9, abs=2e3)
