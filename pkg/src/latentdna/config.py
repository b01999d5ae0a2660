"""Flat ``key = value`` run configuration with section prefixes.

Values are layered: preset defaults, then a config file, then ``DDK_``
environment variables (``vae.lr`` -> ``DDK_VAE_LR``), then explicit
overrides. Unknown keys are rejected.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Mapping

from .latentdiff import NoiseSchedule, UnetConfig, build_schedule
from .vae import VaeConfig

ENV_PREFIX = "DDK_"


class ConfigError(ValueError):
    pass


def _ints(text: str) -> tuple[int, ...]:
    text = text.strip()
    return tuple(int(v) for v in text.split(",") if v.strip()) if text else ()


def _fmt_ints(v) -> str:
    return ",".join(str(int(x)) for x in v)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


@dataclass(frozen=True)
class _Field:
    parse: Callable[[str], object]
    fmt: Callable[[object], str] = str


_INT = _Field(int)
_FLOAT = _Field(float, repr)
_STR = _Field(str.strip)
_INTS = _Field(_ints, _fmt_ints)

FIELDS: dict[str, _Field] = {
    "preset": _STR,
    "seed": _INT,
    "threads": _INT,
    "precision": _STR,
    "data.window": _INT,
    "data.val_fraction": _FLOAT,
    "vae.length": _INT,
    "vae.ladder": _INTS,
    "vae.kernels": _INTS,
    "vae.conv2d_channels": _INTS,
    "vae.latent_channels": _INT,
    "vae.latent_height": _INT,
    "vae.latent_width": _INT,
    "vae.kl_weight": _FLOAT,
    "vae.lr": _FLOAT,
    "vae.lr_schedule": _STR,
    "vae.batch": _INT,
    "vae.epochs": _INT,
    "vae.recon": _STR,
    "vae.slope": _FLOAT,
    "vae.stamps": _INTS,
    "diff.ladder": _INTS,
    "diff.resnets": _INT,
    "diff.attention_down": _INTS,
    "diff.attention_up": _INTS,
    "diff.heads": _INT,
    "diff.head_dim": _INT,
    "diff.time_dim": _Field(_opt_int, lambda v: "auto" if v is None else str(v)),
    "diff.groups": _INT,
    "diff.T": _INT,
    "diff.schedule": _STR,
    "diff.beta_start": _FLOAT,
    "diff.beta_end": _FLOAT,
    "diff.variance": _STR,
    "diff.lr": _FLOAT,
    "diff.batch": _INT,
    "diff.epochs": _INT,
    "diff.warmup": _Field(lambda s: None if s.strip().lower() in ("", "auto", "none") else float(s),
                          lambda v: "auto" if v is None else repr(v)),
    "diff.stamps": _INTS,
    "gen.batch": _INT,
    "eval.pattern": _STR,
    "eval.bin_width": _INT,
}

_VAE_KEYS = {
    "vae.length": "sequence_length", "vae.ladder": "ladder", "vae.kernels": "kernel_sizes",
    "vae.conv2d_channels": "conv2d_channels", "vae.latent_channels": "latent_channels",
    "vae.latent_height": "latent_height", "vae.latent_width": "latent_width", "vae.kl_weight": "kl_weight",
    "vae.lr": "learning_rate", "vae.lr_schedule": "lr_schedule", "vae.batch": "batch_size", "vae.recon": "recon_reduction", "vae.slope": "slope",
}
_UNET_KEYS = {
    "diff.ladder": "ladder", "diff.resnets": "resnets", "diff.attention_down": "attention_down",
    "diff.attention_up": "attention_up", "diff.heads": "heads", "diff.head_dim": "head_dim",
    "diff.time_dim": "time_dim", "diff.groups": "groups",
}


def preset_values(name: str) -> dict[str, object]:
    if name == "desk":
        vae, unet = VaeConfig.desk(), UnetConfig.desk()
        common = {"vae.epochs": 60, "diff.epochs": 200, "diff.lr": 1e-3, "diff.batch": 64,
                  "vae.stamps": (), "diff.stamps": (), "data.window": 256}
    elif name == "paper":
        vae, unet = VaeConfig.paper(), UnetConfig.paper()
        common = {"vae.epochs": 3000, "diff.epochs": 3000, "diff.lr": 5e-5, "diff.batch": 256,
                  "vae.stamps": (0, 200, 1000, 3000), "diff.stamps": (0, 200, 1000, 3000), "data.window": 2048}
    else:
        raise ConfigError(f"unknown preset {name!r} (choose desk or paper)")
    values: dict[str, object] = {
        "preset": name, "seed": 0, "threads": 1, "precision": "float32", "data.val_fraction": 0.2,
        "diff.T": 1000, "diff.schedule": "linear", "diff.beta_start": 1e-4, "diff.beta_end": 0.02,
        "diff.variance": "large", "diff.warmup": None, "gen.batch": 256, "eval.pattern": "TATAWAW",
        "eval.bin_width": 10,
    }
    for key, attr in _VAE_KEYS.items():
        values[key] = getattr(vae, attr)
    values["vae.epochs"] = common.pop("vae.epochs")
    for key, attr in _UNET_KEYS.items():
        values[key] = getattr(unet, attr)
    values.update(common)
    return values


def parse_text(text: str, origin: str = "<config>") -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; later keys win."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected key = value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def env_name(key: str) -> str:
    return ENV_PREFIX + key.upper().replace(".", "_")


class RunConfig:
    """Typed view over the flat key space."""

    def __init__(self, values: Mapping[str, object]):
        self.values = dict(values)

    @classmethod
    def build(cls, config_text: str | None = None, overrides: Mapping[str, str] | None = None,
              environ: Mapping[str, str] | None = None, origin: str = "<config>") -> "RunConfig":
        layers: list[tuple[str, dict[str, str]]] = []
        if config_text:
            layers.append((origin, parse_text(config_text, origin)))
        environ = os.environ if environ is None else environ
        env = {key: environ[env_name(key)] for key in FIELDS if env_name(key) in environ}
        if env:
            layers.append(("environment", env))
        if overrides:
            layers.append(("override", dict(overrides)))
        preset = "desk"
        for _, layer in layers:
            preset = layer.get("preset", preset)
        values = preset_values(preset.strip())
        for where, layer in layers:
            for key, raw in layer.items():
                if key not in FIELDS:
                    raise ConfigError(f"{where}: unknown config key {key!r}")
                try:
                    values[key] = FIELDS[key].parse(str(raw))
                except ValueError as exc:
                    raise ConfigError(f"{where}: bad value for {key}: {exc}") from exc
        cfg = cls(values)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, overrides=None, environ=None) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.build(fh.read(), overrides, environ, origin=str(path))

    def __getitem__(self, key: str):
        return self.values[key]

    def dumps(self) -> str:
        return "".join(f"{k} = {FIELDS[k].fmt(self.values[k])}\n" for k in sorted(self.values))

    def to_dict(self) -> dict[str, str]:
        return {k: FIELDS[k].fmt(v) for k, v in sorted(self.values.items())}

    @property
    def vae(self) -> VaeConfig:
        return VaeConfig(**{attr: self.values[key] for key, attr in _VAE_KEYS.items()})

    @property
    def unet(self) -> UnetConfig:
        vae = self.vae
        return UnetConfig(channels=vae.latent_channels, height=vae.latent_height, width=vae.latent_width,
                          **{attr: self.values[key] for key, attr in _UNET_KEYS.items()})

    @property
    def schedule(self) -> NoiseSchedule:
        return build_schedule(self["diff.T"], self["diff.schedule"], self["diff.beta_start"], self["diff.beta_end"])

    def validate(self) -> "RunConfig":
        try:
            self.vae.validate()
            self.unet.validate()
            self.schedule
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self["precision"] not in ("float32", "float64"):
            raise ConfigError("precision must be float32 or float64")
        if self["diff.variance"] not in ("large", "small"):
            raise ConfigError("diff.variance must be large or small")
        if not 0 <= self["data.val_fraction"] < 1:
            raise ConfigError("data.val_fraction must lie in [0, 1)")
        for key in ("threads", "vae.batch", "diff.batch", "gen.batch", "eval.bin_width", "data.window"):
            if self[key] < 1:
                raise ConfigError(f"{key} must be >= 1")
        for key in ("vae.epochs", "diff.epochs"):
            if self[key] < 0:
                raise ConfigError(f"{key} must be >= 0")
        return self
