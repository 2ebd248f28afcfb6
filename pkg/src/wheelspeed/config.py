"""Strict JSON experiment configuration with defaults, hashing and seed override."""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import fields
from pathlib import Path

from .baselines import PSOConfig
from .drivetrain import DrivetrainParams
from .errors import ConfigError, WheelSpeedError
from .hpo import AshaConfig
from .nn.model import ModelSpec
from .nn.train import TrainConfig
from .sensors import REF_ENCODER, SP_ENCODER, EncoderConfig

SEED_ENV = "VW_SEED"
ARCHS = ("GRU", "LSTM", "TCN")


def _train_defaults():
    d = TrainConfig(lr_max=5e-3).to_dict()
    d.update(hidden_size=32, tcn_layers=5, kernel_size=3)
    return d


def _asha_defaults():
    return AshaConfig().to_dict()


DEFAULTS = {
    "sim": {
        "params": DrivetrainParams().to_dict(),
        "seed": 0,
        "duration_s": 3600.0,
        "n_maneuvers": None,
        "dt": 0.001,
        "asphalt_noise": 5.0,
        "gravel_noise": 80.0,
    },
    "sensors": {
        "sp": SP_ENCODER.to_dict(),
        "ref": REF_ENCODER.to_dict(),
        "motor_noise_std": 0.05,
        "seed": 1,
    },
    "split": {"fractions": [0.7, 0.2, 0.1], "seed": 0},
    "filters": {
        "order_range": [1, 8],
        "cutoff_range": [0.5, 24.0],
        "shift_range": [-10, 10],
        "pso": {"particles": 30, "iterations": 100, "seed": 0, "workers": 1},
    },
    "train": {arch: _train_defaults() for arch in ARCHS},
    "hpo": _asha_defaults(),
    "eval": {
        "timeseries": [],
        "sweep_sizes": [16, 32, 48, 64, 96, 128, 160],
        "sweep_repeats": 5,
        "sweep_arch": "GRU",
        "sweep_seed": 0,
        "sweep_epochs": 300,
    },
}

# JSON pointers of every seed, rewritten by the VW_SEED override
SEED_PATHS = ["/sim/seed", "/sensors/seed", "/split/seed", "/filters/pso/seed", "/hpo/seed", "/eval/sweep_seed"] + [
    f"/train/{a}/seed" for a in ARCHS]

# defaults equal to None accept a value of this type
_NULLABLE = {"/sim/n_maneuvers": int, "/sensors/sp/quantize_output": float, "/sensors/ref/quantize_output": float,
             "/train/GRU/clip_norm": float, "/train/LSTM/clip_norm": float, "/train/TCN/clip_norm": float}


def _type_ok(default, value, pointer):
    if value is None and pointer in _NULLABLE:
        return True
    if default is None:
        want = _NULLABLE.get(pointer)
        return value is None or (want is not None and _type_ok(want(), value, pointer))
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    if isinstance(default, list):
        return isinstance(value, list)
    return isinstance(value, type(default))


def _merge(default, user, pointer=""):
    if not isinstance(user, dict):
        raise ConfigError("invalid-type", f"{pointer or '/'} must be an object")
    out = copy.deepcopy(default)
    for key, value in user.items():
        p = f"{pointer}/{key}"
        if key not in default:
            raise ConfigError("unknown-key", p)
        if isinstance(default[key], dict):
            out[key] = _merge(default[key], value, p)
        elif not _type_ok(default[key], value, p):
            raise ConfigError("invalid-type", f"{p}: got {json.dumps(value)}")
        else:
            out[key] = float(value) if isinstance(default[key], float) else value
    return out


def _set(doc, pointer, value):
    *head, last = pointer.strip("/").split("/")
    for k in head:
        doc = doc[k]
    doc[last] = value


class ExperimentConfig:
    """Resolved configuration; ``data`` holds the full JSON document."""

    def __init__(self, data=None, env=None):
        env = os.environ if env is None else env
        self.data = _merge(DEFAULTS, data or {})
        seed = env.get(SEED_ENV)
        if seed not in (None, ""):
            try:
                seed = int(seed)
            except ValueError:
                raise ConfigError("invalid-env", f"{SEED_ENV}={seed!r} is not an integer") from None
            for p in SEED_PATHS:
                _set(self.data, p, seed)
        self._validate()

    @classmethod
    def load(cls, path=None, env=None):
        if path is None:
            return cls({}, env)
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError("missing-config", str(path)) from None
        except json.JSONDecodeError as exc:
            raise ConfigError("invalid-json", f"{path}: {exc}") from None
        return cls(doc, env)

    def _validate(self):
        # build every object once so invalid values fail with a pointer up front
        checks = [("/sim/params", self.drivetrain_params), ("/sensors/sp", lambda: self.encoder("sp")),
                  ("/sensors/ref", lambda: self.encoder("ref")), ("/filters", self.pso_config),
                  ("/hpo", self.asha_config)]
        checks += [(f"/train/{a}", lambda a=a: (self.model_spec(a), self.train_config(a))) for a in ARCHS]
        for pointer, build in checks:
            try:
                build()
            except ConfigError:
                raise
            except (WheelSpeedError, TypeError) as exc:
                raise ConfigError("invalid-value", f"{pointer}: {exc}") from None
        fr = self.data["split"]["fractions"]
        if len(fr) != 3 or abs(sum(fr) - 1.0) > 1e-9 or min(fr) < 0:
            raise ConfigError("invalid-value", "/split/fractions must be 3 non-negative numbers summing to 1")
        if self.data["eval"]["sweep_arch"].upper() not in ARCHS:
            raise ConfigError("invalid-value", "/eval/sweep_arch")

    def section(self, name):
        return self.data[name]

    def drivetrain_params(self):
        return DrivetrainParams(**self.data["sim"]["params"])

    def encoder(self, which):
        return EncoderConfig(**self.data["sensors"][which])

    def pso_config(self):
        f = self.data["filters"]
        return PSOConfig(order_range=tuple(f["order_range"]), cutoff_range=tuple(f["cutoff_range"]),
                         shift_range=tuple(f["shift_range"]), **f["pso"])

    def model_spec(self, arch):
        t = self.data["train"][arch.upper()]
        return ModelSpec(arch.upper(), hidden_size=t["hidden_size"], tcn_layers=t["tcn_layers"],
                         kernel_size=t["kernel_size"], seed=t["seed"])

    def train_config(self, arch):
        t = self.data["train"][arch.upper()]
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in t.items() if k in names})

    def asha_config(self):
        return AshaConfig(**self.data["hpo"])

    @property
    def seeds(self):
        out = {}
        for p in SEED_PATHS:
            d = self.data
            for k in p.strip("/").split("/"):
                d = d[k]
            out[p] = d
        return out

    def canonical_json(self):
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:16]

    def header_comments(self, command, **extra):
        """Provenance lines for output CSV headers."""
        lines = [f"command={command}", f"config_hash={self.hash}",
                 "seeds=" + json.dumps({k.strip('/'): v for k, v in self.seeds.items()}, sort_keys=True)]
        lines += [f"{k}={v}" for k, v in sorted(extra.items())]
        return lines
