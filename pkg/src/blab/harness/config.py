"""Experiment configuration: plain key=value files, canonical text, hashing.

A run's CSV header embeds the canonical config text and its hash, so any
output file identifies the exact inputs that produced it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class ExperimentConfig:
    command: str = ""
    seed: int = 20240801
    dim: int = 1
    out: str = "out"
    budget: int = 200_000
    plot: bool = False
    grid_file: str = ""
    # dyadic grid parameters (defaults resolved per dimension)
    theta0: float = 0.0
    depth: int = 0
    systems: int = 0
    tent_budget: int = 8192
    tents_per_level: int = 24
    # experiment batteries
    k_list: str = "8,12,16,20"
    k_min: int = 6
    k_max: int = 12
    lambda_min: float = 1e-2
    lambda_max: float = 1e3
    lambda_count: int = 12
    centers: str = "0,0.5,0.9,0.99"
    eps_list: str = "0.5,1"
    koranyi_carleson_c: float = 4.0
    eta: float = 0.2

    def resolved(self) -> "ExperimentConfig":
        """Fill in dimension-dependent grid defaults."""
        cfg = self
        if cfg.theta0 == 0.0:
            cfg = replace(cfg, theta0=1.0 if cfg.dim == 1 else 0.6)
        if cfg.depth == 0:
            cfg = replace(cfg, depth=5 if cfg.dim == 1 else 4)
        if cfg.systems == 0:
            cfg = replace(cfg, systems=max(2, 2 * cfg.dim))
        return cfg

    def ks(self):
        return [int(v) for v in self.k_list.split(",") if v.strip()]

    def center_list(self):
        return [float(v) for v in self.centers.split(",") if v.strip()]

    def eps_values(self):
        return [float(v) for v in self.eps_list.split(",") if v.strip()]

    def lambda_grid(self):
        import numpy as np

        return np.logspace(
            np.log10(self.lambda_min), np.log10(self.lambda_max), self.lambda_count
        )

    def to_text(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            lines.append(f"{f.name}={getattr(self, f.name)}")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def parse_config_file(path: str) -> dict:
    """Parse a plain key=value config file into override values."""
    overrides = {}
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            kind = types[key]
            if kind == "bool":
                overrides[key] = _BOOL[value.lower()]
            elif kind == "int":
                overrides[key] = int(value)
            elif kind == "float":
                overrides[key] = float(value)
            else:
                overrides[key] = value
    return overrides
