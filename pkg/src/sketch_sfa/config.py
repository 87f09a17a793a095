"""Run configuration: defaults plus optional TOML overrides."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields

from .errors import InvalidInput

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class RunConfig:
    eps_target: float = 0.2
    J: int = 1
    max_pairs_per_class: int = 100
    sketch_budget: int = 1024
    matmul_budget: int = 8192
    verify_seeds: int = 10
    growth_constant: float = 2.0
    chi_square_samples: int = 20000
    extra: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | None) -> "RunConfig":
        cfg = cls()
        if path is None:
            return cfg
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        known = {f.name for f in fields(cls)} - {"extra"}
        for section in data.values() if all(isinstance(v, dict) for v in data.values()) else [data]:
            for key, value in section.items():
                if key in known:
                    setattr(cfg, key, type(getattr(cfg, key))(value))
                else:
                    cfg.extra[key] = value
        if not 0.0 < cfg.eps_target < 1.0:
            raise InvalidInput("eps_target must lie in (0, 1)")
        if cfg.J < 1 or cfg.sketch_budget < 16 or cfg.matmul_budget < 4:
            raise InvalidInput("J, sketch_budget, matmul_budget out of range")
        return cfg
