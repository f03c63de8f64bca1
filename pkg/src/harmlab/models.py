"""Model specifications and replica ensembles with stationarity weights."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .environment import (
    RootedEnvironment,
    gen_balanced,
    gen_kesten_tree,
    gen_lattice,
    gen_percolation,
    gen_random_conductance,
    gen_sierpinski,
    gen_torus,
)
from .rng import stream_key

DETERMINISTIC = frozenset({"lattice", "sierpinski", "torus"})


@dataclass(frozen=True)
class ModelSpec:
    """A model name plus generator parameters, e.g. ``percolation:d=2,L=64,p=0.7``."""

    name: str
    params: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        name, _, rest = text.partition(":")
        params = {}
        for item in filter(None, rest.split(",")):
            k, sep, v = item.partition("=")
            if not sep:
                raise ValueError(f"model parameter {item!r} is not key=value")
            params[k.strip()] = _coerce(v.strip())
        spec = cls(name.strip(), params)
        spec.check()
        return spec

    def __str__(self) -> str:
        body = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}:{body}" if body else self.name

    def check(self) -> None:
        p = self.params
        need = {
            "percolation": ("d", "L", "p"),
            "lattice": ("d", "L"),
            "conductance": ("d", "L", "alpha"),
            "balanced": ("d", "L"),
            "sierpinski": ("level",),
            "torus": ("d", "side"),
            "kesten": ("pmf", "depth"),
        }
        if self.name not in need:
            raise ValueError(f"unknown model {self.name!r}")
        for key in need[self.name]:
            if key not in p:
                raise ValueError(f"model {self.name} needs parameter {key!r}")
        if self.name == "percolation" and not 0 < float(p["p"]) <= 1:
            raise ValueError(f"p must lie in (0, 1], got {p['p']}")
        if self.name == "conductance" and not 0 < float(p["alpha"]) < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {p['alpha']}")

    @property
    def deterministic(self) -> bool:
        return self.name in DETERMINISTIC

    def build(self, seed: int) -> RootedEnvironment:
        p = self.params
        if self.name == "percolation":
            return gen_percolation(int(p["d"]), int(p["L"]), float(p["p"]), seed)
        if self.name == "lattice":
            return gen_lattice(int(p["d"]), int(p["L"]), bool(p.get("torus", False)))
        if self.name == "conductance":
            return gen_random_conductance(int(p["d"]), int(p["L"]), float(p["alpha"]), seed)
        if self.name == "balanced":
            return gen_balanced(int(p["d"]), int(p["L"]), seed)
        if self.name == "sierpinski":
            return gen_sierpinski(int(p["level"]))
        if self.name == "torus":
            return gen_torus(int(p["d"]), int(p["side"]))
        if self.name == "kesten":
            pmf = [float(x) for x in str(p["pmf"]).split(";")]
            return gen_kesten_tree(pmf, int(p["depth"]), seed)
        raise ValueError(f"unknown model {self.name!r}")


def _coerce(text: str):
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parallel_map(fn, items, threads: int = 1) -> list:
    """``list(map(fn, items))`` on a thread pool; output order is input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True, eq=False)
class Ensemble:
    spec: ModelSpec
    envs: list
    weights: np.ndarray  # stationarity importance weights, mean 1

    def __len__(self) -> int:
        return len(self.envs)


def replica_seed(master_seed: int, spec: ModelSpec, i: int) -> int:
    return stream_key(master_seed, str(spec), i)


def stationarity_weights(envs) -> np.ndarray:
    """nu(root) / mean nu(root): the reweighting that makes the root law stationary."""
    nu = np.array([env.nu[env.root] for env in envs], dtype=float)
    return nu / nu.mean()


def ensemble(spec: ModelSpec, replicas: int, master_seed: int = 0, threads: int = 1) -> Ensemble:
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    count = 1 if spec.deterministic else replicas
    seeds = [replica_seed(master_seed, spec, i) for i in range(count)]
    envs = parallel_map(spec.build, seeds, threads)
    return Ensemble(spec, envs, stationarity_weights(envs))


def weighted_mean(values, weights) -> tuple[float, float]:
    """Importance-weighted mean and its standard error (self-normalised)."""
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    mean = float(np.sum(w * v))
    if v.size < 2:
        return mean, 0.0
    var = float(np.sum(w**2 * (v - mean) ** 2)) * v.size / (v.size - 1)
    return mean, var**0.5
