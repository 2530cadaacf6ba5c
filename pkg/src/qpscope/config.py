"""Experiment configuration: versioned JSON schema, strict validation,
deterministic hashing.

All frequencies in a config file are plain cycles (Hz); conversion to the
angular units used internally happens in the builder methods here.  Unknown
keys are rejected so that a config hash always pins down the full behaviour.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import cpb as cpb_mod
from .dynamics import DUAL_TONE, RateModel, SINGLE_TONE
from .errors import ConfigError
from .scattering import DriveTone, EmitterParams, check_drive_strength
from .synth import Detector, NoiseModel, DriftModel, calibrate_sigma_1us

TWO_PI = 2.0 * np.pi

SCHEMA_VERSION = 1

# section -> {key: (required, type-check)}
_NUMBER = (int, float)
_SCHEMA = {
    "detector": {
        "f01_mean_hz": (True, _NUMBER),
        "splitting_hz": (True, _NUMBER),
        "gamma_hz": (True, _NUMBER),
        "gamma_nr_hz": (False, _NUMBER),
        "gamma_phi_hz": (False, _NUMBER),
        "anharmonicity_hz": (False, _NUMBER),
    },
    "cpb": {
        "ej_ec_ratio": (False, _NUMBER),
        "ej_hz": (False, _NUMBER),
        "ec_hz": (False, _NUMBER),
        "ng": (False, _NUMBER),
        "n_cutoff": (False, int),
        "ng_points": (False, int),
    },
    "rates": {
        "gamma0": (True, _NUMBER),
        "gamma1": (True, _NUMBER),
    },
    "drive": {
        "mode": (True, str),
        "x": (True, _NUMBER),
    },
    "noise": {
        "sigma_1us": (False, _NUMBER),
        "snr_10us": (False, _NUMBER),
        "eta": (False, _NUMBER),
        "n_add": (False, _NUMBER),
        "bin_time_s": (True, _NUMBER),
    },
    "run": {
        "duration_s": (True, _NUMBER),
        "seed": (True, int),
    },
    "sweep": {
        "x_values": (True, list),
    },
    "drift": {
        "ng0": (True, _NUMBER),
        "delta_ng": (True, _NUMBER),
        "corner_freq_hz": (True, _NUMBER),
    },
}
_OPTIONAL_SECTIONS = {"cpb", "sweep", "drift"}


def _validate_section(name, data):
    spec = _SCHEMA[name]
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    unknown = set(data) - set(spec)
    if unknown:
        raise ConfigError(
            f"unknown keys in section {name!r}: {sorted(unknown)}", kind="unknown-key"
        )
    for key, (required, typ) in spec.items():
        if key in data:
            if not isinstance(data[key], typ) or isinstance(data[key], bool):
                raise ConfigError(f"{name}.{key} has wrong type", kind="bad-type")
        elif required:
            raise ConfigError(f"missing required key {name}.{key}", kind="missing-key")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration; construct via :meth:`from_dict` or
    :meth:`from_file`."""

    raw: dict

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(
                f"schema_version must be {SCHEMA_VERSION}, got {version!r}",
                kind="schema-version",
            )
        unknown = set(data) - set(_SCHEMA) - {"schema_version"}
        if unknown:
            raise ConfigError(f"unknown sections: {sorted(unknown)}", kind="unknown-key")
        for name in _SCHEMA:
            if name in data:
                _validate_section(name, data[name])
            elif name not in _OPTIONAL_SECTIONS:
                raise ConfigError(f"missing required section {name!r}", kind="missing-key")

        drive = data["drive"]
        if drive["mode"] not in (SINGLE_TONE, DUAL_TONE):
            raise ConfigError(f"drive.mode must be 'single' or 'dual', got {drive['mode']!r}")
        noise = data["noise"]
        if ("sigma_1us" in noise) == ("snr_10us" in noise):
            raise ConfigError("noise needs exactly one of sigma_1us or snr_10us")
        if "sweep" in data:
            xs = data["sweep"]["x_values"]
            if len(xs) < 2 or not all(
                isinstance(v, _NUMBER) and not isinstance(v, bool) for v in xs
            ):
                raise ConfigError("sweep.x_values must hold >= 2 numbers")
        if "cpb" in data:
            c = data["cpb"]
            if ("ej_ec_ratio" in c) == ("ej_hz" in c and "ec_hz" in c):
                raise ConfigError("cpb needs either ej_ec_ratio or both ej_hz and ec_hz")
        return cls(raw=data)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}", kind="config-not-found")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}", kind="config-parse")
        return cls.from_dict(data)

    # -- derived objects ----------------------------------------------------

    def config_hash(self):
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    @property
    def seed(self):
        return int(self.raw["run"]["seed"])

    @property
    def duration_s(self):
        return float(self.raw["run"]["duration_s"])

    @property
    def bin_time_s(self):
        return float(self.raw["noise"]["bin_time_s"])

    @property
    def drive_mode(self):
        return self.raw["drive"]["mode"]

    @property
    def drive_x(self):
        return float(self.raw["drive"]["x"])

    def emitter(self):
        d = self.raw["detector"]
        return EmitterParams(
            gamma_r=TWO_PI * d["gamma_hz"],
            gamma_nr=TWO_PI * d.get("gamma_nr_hz", 0.0),
            gamma_phi=TWO_PI * d.get("gamma_phi_hz", 0.0),
            w01=TWO_PI * d["f01_mean_hz"],
        )

    def detector(self):
        d = self.raw["detector"]
        return Detector(emitter=self.emitter(), splitting=TWO_PI * d["splitting_hz"])

    def rate_model(self, x=None):
        d = self.raw["detector"]
        r = self.raw["rates"]
        if x is None:
            x = self.drive_x
        gamma = TWO_PI * d["gamma_hz"]
        return RateModel(
            gamma0=float(r["gamma0"]),
            gamma1=float(r["gamma1"]),
            gamma=gamma,
            omega=float(x) * gamma,
            delta=TWO_PI * d["splitting_hz"],
            drive_mode=self.drive_mode,
        )

    def tones(self, x=None):
        det = self.detector()
        if x is None:
            x = self.drive_x
        omega = float(x) * det.emitter.gamma_r
        alpha_hz = self.raw["detector"].get("anharmonicity_hz")
        if alpha_hz is not None:
            check_drive_strength(omega, TWO_PI * alpha_hz)
        tones = [DriveTone(frequency=det.w01_plus, omega=omega)]
        if self.drive_mode == DUAL_TONE:
            tones.append(DriveTone(frequency=det.w01_minus, omega=omega))
        return tones

    def noise_model(self, x=None, bin_time=None):
        n = self.raw["noise"]
        if bin_time is None:
            bin_time = float(n["bin_time_s"])
        if "sigma_1us" in n:
            sigma = float(n["sigma_1us"])
        else:
            # calibrate to the target SNR at 10 us using the single-channel
            # blob separation at the configured drive
            det = self.detector()
            tone = self.tones(x)[0]
            sep = abs(
                det.reflection(tone.frequency, tone.omega, +1)
                - det.reflection(tone.frequency, tone.omega, -1)
            )
            sigma = calibrate_sigma_1us(sep, snr=float(n["snr_10us"]))
        kwargs = {}
        if "eta" in n:
            kwargs["eta"] = float(n["eta"])
        if "n_add" in n:
            kwargs["n_add"] = float(n["n_add"])
        return NoiseModel(sigma_1us=sigma, bin_time=bin_time, **kwargs)

    def cpb_params(self):
        if "cpb" not in self.raw:
            raise ConfigError("config has no cpb section", kind="missing-key")
        c = self.raw["cpb"]
        n_cutoff = int(c.get("n_cutoff", cpb_mod.DEFAULT_CUTOFF))
        if "ej_ec_ratio" in c:
            target = float(self.raw["detector"]["f01_mean_hz"])
            params = cpb_mod.calibrate_ec(float(c["ej_ec_ratio"]), target, n_cutoff)
        else:
            params = cpb_mod.CpbParams(float(c["ej_hz"]), float(c["ec_hz"]), 0.0, n_cutoff)
        return params.with_ng(float(c.get("ng", 0.0)))

    @property
    def ng_points(self):
        return int(self.raw.get("cpb", {}).get("ng_points", 201))

    def sweep_x_values(self):
        if "sweep" not in self.raw:
            raise ConfigError("config has no sweep section", kind="missing-key")
        return [float(v) for v in self.raw["sweep"]["x_values"]]

    def drift_model(self):
        if "drift" not in self.raw:
            raise ConfigError("config has no drift section", kind="missing-key")
        d = self.raw["drift"]
        return DriftModel(
            ng0=float(d["ng0"]),
            delta_ng=float(d["delta_ng"]),
            corner_freq_hz=float(d["corner_freq_hz"]),
        )
