"""Experiment configuration files.

A config is a TOML file with the sections below; every key is optional and
falls back to the default experiment (unit cube, 16^3 grid, T = 0.5,
step ladder T*2^-3..T*2^-7, reference T*2^-9, 64 samples, Exact scheme).

.. code-block:: toml

    [domain]
    a1_minus = 0.0
    a1_plus = 1.0          # likewise a2_*, a3_*
    [grid]
    n = [16, 16, 16]
    [time]
    T = 0.5
    ladder = [3, 4, 5, 6, 7]   # tau = T * 2^-e; or give taus = [...]
    ref_exponent = 9
    steps = 64                 # energy study
    divergence_exponent = 3    # divergence study at tau = T * 2^-e
    [scheme]
    kind = "exact"             # exact | implicit-euler | midpoint
    order = [1, 2, 3]
    [noise]
    lambda1 = [1.0, 1.0, 1.0]
    lambda2 = [1.0, 1.0, 1.0]
    decay_r = 3.0
    K = 4
    seed = 20240601
    [mc]
    samples = 64
    [initial]
    preset = "smooth-bump"
    [output]
    dir = "splitmax-out"
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analysis import CoupledSetup
from .errors import ConfigurationError
from .grid import Cuboid, GridSpec
from .noise import NoiseSpec
from .presets import make_initial
from .stepper import SplitOrder
from .subflows import SchemeKind

DEFAULTS = {
    "domain": {
        "a1_minus": 0.0, "a1_plus": 1.0,
        "a2_minus": 0.0, "a2_plus": 1.0,
        "a3_minus": 0.0, "a3_plus": 1.0,
    },
    "grid": {"n": [16, 16, 16]},
    "time": {
        "T": 0.5,
        "ladder": [3, 4, 5, 6, 7],
        "taus": None,
        "ref_exponent": 9,
        "steps": 64,
        "divergence_exponent": 3,
    },
    "scheme": {"kind": "exact", "order": [1, 2, 3]},
    "noise": {
        "lambda1": [1.0, 1.0, 1.0],
        "lambda2": [1.0, 1.0, 1.0],
        "decay_r": 3.0,
        "K": 4,
        "seed": 20240601,
    },
    "mc": {"samples": 64},
    "initial": {"preset": "smooth-bump"},
    "output": {"dir": "splitmax-out"},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for section, values in override.items():
        if section not in out:
            raise ConfigurationError(f"unknown config section [{section}]")
        if not isinstance(values, dict):
            raise ConfigurationError(f"[{section}] must be a table")
        for key, val in values.items():
            if key not in out[section]:
                raise ConfigurationError(f"unknown key {section}.{key}")
            out[section][key] = val
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict

    @classmethod
    def from_dict(cls, data: dict | None = None) -> ExperimentConfig:
        cfg = cls(_merge(DEFAULTS, data or {}))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
        return cls.from_dict(data)

    def replace(self, **sections) -> ExperimentConfig:
        return ExperimentConfig.from_dict(_merge(self.raw, sections))

    def __getitem__(self, section: str) -> dict:
        return self.raw[section]

    @property
    def cuboid(self) -> Cuboid:
        d = self.raw["domain"]
        try:
            return Cuboid(*(float(d[k]) for k in (
                "a1_minus", "a1_plus", "a2_minus", "a2_plus", "a3_minus", "a3_plus")))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None

    @property
    def grid(self) -> GridSpec:
        n = self.raw["grid"]["n"]
        if isinstance(n, int):
            n = [n, n, n]
        if len(n) != 3:
            raise ConfigurationError(f"grid.n needs three counts, got {n!r}")
        try:
            return GridSpec(self.cuboid, *(int(v) for v in n))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None

    @property
    def T(self) -> float:
        return float(self.raw["time"]["T"])

    @property
    def taus(self) -> list[float]:
        t = self.raw["time"]
        if t["taus"] is not None:
            return [float(v) for v in t["taus"]]
        return [self.T * 2.0 ** -int(e) for e in t["ladder"]]

    @property
    def tau_ref(self) -> float:
        return self.T * 2.0 ** -int(self.raw["time"]["ref_exponent"])

    @property
    def steps(self) -> int:
        return int(self.raw["time"]["steps"])

    @property
    def divergence_tau(self) -> float:
        return self.T * 2.0 ** -int(self.raw["time"]["divergence_exponent"])

    @property
    def scheme(self) -> SchemeKind:
        return SchemeKind.parse(self.raw["scheme"]["kind"])

    @property
    def order(self) -> SplitOrder:
        return SplitOrder.parse(self.raw["scheme"]["order"])

    @property
    def noise(self) -> NoiseSpec:
        n = self.raw["noise"]
        return NoiseSpec(n["lambda1"], n["lambda2"], float(n["decay_r"]), int(n["K"]), int(n["seed"]))

    @property
    def samples(self) -> int:
        return int(self.raw["mc"]["samples"])

    @property
    def preset(self) -> str:
        return str(self.raw["initial"]["preset"])

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output"]["dir"])

    def validate(self) -> None:
        grid = self.grid
        if not (self.T > 0):
            raise ConfigurationError("time.T must be positive")
        taus = self.taus
        for a, b in zip(taus, taus[1:]):
            if not b < a:
                raise ConfigurationError("tau ladder must be strictly decreasing")
            q = a / b
            if abs(q - round(q)) > 1e-9 or int(round(q)) & (int(round(q)) - 1):
                raise ConfigurationError("tau ladder must be dyadic")
        if self.samples < 1:
            raise ConfigurationError("mc.samples must be at least 1")
        if self.steps < 1:
            raise ConfigurationError("time.steps must be at least 1")
        self.scheme
        self.order
        spec = self.noise
        if spec.K >= min(grid.counts):
            raise ConfigurationError(f"noise.K={spec.K} needs more than K intervals per axis")
        z0 = make_initial(self.preset, grid)
        if not z0.is_boundary_consistent():
            raise ConfigurationError(f"preset {self.preset!r} violates the PEC traces")

    def setup(self) -> CoupledSetup:
        grid = self.grid
        return CoupledSetup.build(grid, self.noise, make_initial(self.preset, grid), self.T, self.order)

    def canonical(self) -> dict:
        """Semantic content with the output location removed."""
        data = copy.deepcopy(self.raw)
        data.pop("output", None)
        data["time"]["taus"] = self.taus
        data["time"].pop("ladder")
        return data

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"), default=float)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()
