"""Experiment configuration: a flat key-value TOML file.

Example::

    X = "X.csv"
    Y = "Y.csv"
    lambda = 0.01
    T = 100
    K = 10
    sigma_learn = 0.01
    epsilon = 1.0
    points = [0, 7, 12]

Relative paths resolve against the config file's directory.  A report.json
written by any subcommand embeds the resolved config and is accepted as a
config file too.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import DomainError

_PATH_FIELDS = ("X", "Y", "X_test", "Y_test", "out_dir")


class ConfigError(DomainError):
    pass


@dataclasses.dataclass
class ExperimentConfig:
    X: str
    Y: str
    lam: float
    T: int
    K: int
    sigma_learn: float
    X_test: Optional[str] = None
    Y_test: Optional[str] = None
    append_bias: bool = False
    conservative_m: bool = False
    epsilon: float = 1.0
    delta: Optional[float] = None
    delta_s: Optional[float] = None
    # explicit indices; None selects by `point_strategy`
    points: Optional[list] = None
    point_strategy: str = "all"
    quantiles: list = dataclasses.field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    reference_seed: int = 0
    epsilons: Optional[list] = None
    Ks: Optional[list] = None
    runs: int = 1
    seed: int = 0
    out_dir: str = "out"
    task: str = "auto"
    baseline_C: Optional[float] = None
    overlay_points: list = dataclasses.field(default_factory=list)
    overlay_runs: int = 20

    def __post_init__(self):
        errors = []
        if not self.lam > 0:
            errors.append(f"lambda: must be > 0, got {self.lam}")
        if not isinstance(self.T, int) or self.T < 1:
            errors.append(f"T: must be an integer >= 1, got {self.T}")
        if not isinstance(self.K, int) or self.K < 0:
            errors.append(f"K: must be an integer >= 0, got {self.K}")
        if not self.sigma_learn > 0:
            errors.append(f"sigma_learn: must be > 0, got {self.sigma_learn}")
        if not self.epsilon > 0:
            errors.append(f"epsilon: must be > 0, got {self.epsilon}")
        if self.delta is not None and not 0 < self.delta < 1:
            errors.append(f"delta: must lie in (0, 1), got {self.delta}")
        if self.delta_s is not None and not self.delta_s > 0:
            errors.append(f"delta_s: must be > 0, got {self.delta_s}")
        if self.point_strategy not in ("all", "quantile"):
            errors.append(f"point_strategy: expected 'all' or 'quantile', got {self.point_strategy!r}")
        if self.task not in ("auto", "classification", "regression"):
            errors.append(f"task: expected auto/classification/regression, got {self.task!r}")
        if self.runs < 1:
            errors.append(f"runs: must be >= 1, got {self.runs}")
        if self.baseline_C is not None and not self.baseline_C > 0:
            errors.append(f"baseline_C: must be > 0, got {self.baseline_C}")
        if not 0 <= self.seed < 2**64:
            errors.append(f"seed: must be a 64-bit unsigned integer, got {self.seed}")
        for q in self.quantiles:
            if not 0 <= q <= 1:
                errors.append(f"quantiles: {q} outside [0, 1]")
        if (self.X_test is None) != (self.Y_test is None):
            errors.append("X_test/Y_test: give both or neither")
        if errors:
            raise ConfigError("invalid config:\n  " + "\n  ".join(errors))

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path = Path(".")) -> "ExperimentConfig":
        raw = dict(raw)
        if "lambda" in raw:
            raw["lam"] = raw.pop("lambda")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = [
            f.name for f in dataclasses.fields(cls)
            if f.default is dataclasses.MISSING
            and f.default_factory is dataclasses.MISSING
            and f.name not in raw
        ]
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        for key in _PATH_FIELDS:
            if raw.get(key) is not None:
                raw[key] = str((base_dir / raw[key]).resolve())
        return cls(**raw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix == ".json":
            raw = json.loads(text)
            raw = raw.get("config", raw)
        else:
            try:
                raw = tomllib.loads(text)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(raw, path.parent)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()
