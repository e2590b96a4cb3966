"""Model configuration, persisted as a one-section INI file."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Tuple

SECTION = "models"


@dataclass(frozen=True)
class ModelConfig:
    # relationship baseline
    tau_rel: float = 0.55
    ratio: float = 0.8
    ransac_iterations: int = 200
    ransac_seed: int = 42
    inlier_tol: float = 0.03 * 2**0.5
    min_scale: float = 0.25
    max_scale: float = 4.0
    max_features: int = 512
    min_features: int = 8
    match_mirrored: bool = True
    # direction baseline
    w_periodicity: float = 1.0
    w_residual: float = 10.0
    offset_search: bool = False
    quality_sweep: Tuple[int, ...] = field(default_factory=lambda: tuple(range(30, 100, 5)))

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp[SECTION] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            cp[SECTION][f.name] = ",".join(str(x) for x in v) if isinstance(v, tuple) else repr(v)
        lines = [f"[{SECTION}]"] + [f"{k} = {v}" for k, v in cp[SECTION].items()]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_ini(), encoding="utf-8")

    @classmethod
    def from_mapping(cls, values) -> "ModelConfig":
        kw = {}
        known = {f.name: f for f in fields(cls)}
        for key, raw in values.items():
            if key not in known:
                raise ValueError(f"unknown model config key {key!r}")
            default = getattr(cls(), key)
            if isinstance(default, tuple):
                kw[key] = tuple(int(x) for x in str(raw).split(",") if x.strip())
            elif isinstance(default, bool):
                kw[key] = str(raw).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kw[key] = int(raw)
            else:
                kw[key] = float(raw)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ModelConfig":
        cp = configparser.ConfigParser()
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
        if SECTION not in cp:
            raise ValueError(f"config file {path} has no [{SECTION}] section")
        return cls.from_mapping(dict(cp[SECTION]))
