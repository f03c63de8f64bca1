"""Experiment configuration: flat key=value text with one section per subcommand."""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field

from .models import ModelSpec

SUBCOMMANDS = ("generate", "entropy", "sdb", "heatkernel", "corrector", "dimension", "cover", "verify")

# typed defaults; a value's type decides how the text in a config file is parsed
DEFAULTS = {
    "general": {"model": "percolation:d=2,L=64,p=0.7", "replicas": 4, "seed": 0, "threads": 1},
    "generate": {},
    "entropy": {"n_max": 64},
    "sdb": {"n_max": 64, "metric": "graph"},
    "heatkernel": {"n": "64,128,256", "scales": "1,2", "model": "percolation:d=2,L=68,p=0.7"},
    "corrector": {"R": 32, "v": "1,0", "radii": "4,8,16"},
    "dimension": {"n": 8, "eps": 0.25},
    "cover": {"R": 16, "r": 4},
    "verify": {"instances": 200, "n_max": 12, "gradient_triples": 20},
    "tolerances": {"gradient": 1e-12, "reverse_poincare": 1e-9, "lemma_xy": 1e-10,
                   "tv_delta": 1e-12, "stationarity": 1e-10, "dirichlet": 1e-10},
}


class ConfigError(ValueError):
    """A config problem, tagged with the field path ``section.key``."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _cast(path: str, default, text: str):
    try:
        if isinstance(default, bool):
            if text.lower() not in ("true", "false"):
                raise ValueError(text)
            return text.lower() == "true"
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(path, f"expected {type(default).__name__}, got {text!r}") from None
    return text


def int_list(path: str, text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(path, f"expected comma-separated integers, got {text!r}") from None


def float_list(path: str, text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(path, f"expected comma-separated numbers, got {text!r}") from None


@dataclass
class ExperimentConfig:
    sections: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULTS.items()})
    overrides: list = field(default_factory=list)  # "section.key" paths changed from defaults

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError("<file>", str(exc).splitlines()[0]) from None
        cfg = cls()
        for sec in cp.sections():
            if sec not in DEFAULTS:
                raise ConfigError(sec, "unknown section")
            for key, raw in cp.items(sec):
                path = f"{sec}.{key}"
                base = DEFAULTS[sec].get(key, DEFAULTS["general"].get(key))
                if base is None:
                    raise ConfigError(path, "unknown key")
                cfg.set(path, _cast(path, base, raw.strip()))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | None) -> "ExperimentConfig":
        if path is None:
            return cls()
        with open(path) as fh:
            return cls.from_text(fh.read())

    def set(self, path: str, value) -> None:
        sec, key = path.split(".", 1)
        self.sections.setdefault(sec, {})[key] = value
        if path not in self.overrides:
            self.overrides.append(path)

    def get(self, section: str, key: str):
        """Section value, falling back to [general]."""
        if key in self.sections.get(section, {}):
            return self.sections[section][key]
        return self.sections["general"][key]

    def model(self, section: str) -> ModelSpec:
        path = f"{section}.model" if "model" in self.sections.get(section, {}) else "general.model"
        try:
            return ModelSpec.parse(str(self.get(section, "model")))
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None

    def validate(self) -> None:
        for sec in SUBCOMMANDS:
            self.model(sec)
        for sec in ("general", "entropy", "sdb", "heatkernel", "corrector", "dimension", "cover", "verify"):
            for key, value in self.sections[sec].items():
                if isinstance(value, int) and not isinstance(value, bool) and key != "seed" and value < 1:
                    raise ConfigError(f"{sec}.{key}", f"must be positive, got {value}")
        if self.sections["general"]["seed"] < 0 or self.sections["general"]["seed"] >= 2**64:
            raise ConfigError("general.seed", "must be an unsigned 64-bit integer")
        if self.sections["sdb"]["metric"] not in ("graph", "euclidean"):
            raise ConfigError("sdb.metric", "must be graph or euclidean")
        int_list("heatkernel.n", self.sections["heatkernel"]["n"])
        float_list("heatkernel.scales", self.sections["heatkernel"]["scales"])
        float_list("corrector.v", self.sections["corrector"]["v"])
        int_list("corrector.radii", self.sections["corrector"]["radii"])
        if not 0 < self.sections["dimension"]["eps"] <= 1:
            raise ConfigError("dimension.eps", "must lie in (0, 1]")

    def tol(self, key: str) -> float:
        return float(self.sections["tolerances"][key])

    def canonical(self) -> dict:
        """Everything that determines output bytes; the thread count is excluded."""
        out = {k: dict(v) for k, v in self.sections.items()}
        out["general"] = {k: v for k, v in out["general"].items() if k != "threads"}
        return out

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()
