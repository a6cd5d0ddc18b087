"""Campaign configuration: one JSON file plus command-line overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError
from .grid import ConnectedTree, it_class
from .io import load_tree
from .networks import BUILTIN
from .quantizer import QuantizationConfig
from .synth import FIELD_PROFILE, SynthConfig, TrajectoryProfile

BUILTIN_PREFIX = "builtin:"
PROFILES = {"default": TrajectoryProfile(), "field": FIELD_PROFILE}


def resolve_tree(spec: str, base: Path | None = None) -> ConnectedTree:
    """Load `builtin:<name>` or a tree JSON path (relative to `base`)."""
    if spec.startswith(BUILTIN_PREFIX):
        name = spec[len(BUILTIN_PREFIX):]
        if name not in BUILTIN:
            raise ConfigError(f"unknown built-in tree {name!r}; choose from {sorted(BUILTIN)}")
        return BUILTIN[name]()
    path = Path(spec)
    if base is not None and not path.is_absolute():
        path = base / path
    if not path.exists():
        raise ConfigError(f"tree file not found: {path}")
    return load_tree(path)


@dataclass(frozen=True)
class CampaignConfig:
    tree: str = "builtin:replica118"
    n: int = 600
    runs: int = 100
    sigma: float = 0.0003
    it_class: float = 0.6
    rqm_class: float = 0.15
    quantization: QuantizationConfig = QuantizationConfig()
    profile: TrajectoryProfile = TrajectoryProfile()
    seed: int = 0
    output_dir: str = "out"
    resample_re_per_run: bool = False
    noise_reference: float | None = None
    jobs: int = 1
    rqm: dict | None = None
    base_dir: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        if self.n < 8:
            raise ConfigError(f"n must be at least 8, got {self.n}")
        if self.runs < 1:
            raise ConfigError(f"runs must be at least 1, got {self.runs}")
        if not 0 <= self.sigma <= 0.05:
            raise ConfigError(f"sigma must lie in [0, 0.05], got {self.sigma}")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be at least 1, got {self.jobs}")
        it_class(self.it_class)
        it_class(self.rqm_class)
        self.load_tree()

    def load_tree(self) -> ConnectedTree:
        tree = resolve_tree(self.tree, self.base_dir)
        if self.rqm:
            try:
                tree = tree.with_rqm(str(self.rqm["branch"]), str(self.rqm["end"]))
            except KeyError as exc:
                raise ConfigError(f"rqm override is missing {exc}") from None
        return tree

    def synth(self) -> SynthConfig:
        return SynthConfig(n=self.n, sigma=self.sigma, it_class=self.it_class, rqm_class=self.rqm_class,
                           profile=self.profile, quantization=self.quantization,
                           resample_re_per_run=self.resample_re_per_run,
                           noise_reference=self.noise_reference, seed=self.seed)

    def with_(self, **kw) -> "CampaignConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d


_SCALARS = {"tree": str, "n": int, "runs": int, "sigma": float, "it_class": float, "rqm_class": float,
            "seed": int, "output_dir": str, "resample_re_per_run": bool, "noise_reference": float, "jobs": int}


def config_from_dict(data: Mapping[str, Any], base_dir: Path = Path(".")) -> CampaignConfig:
    known = set(_SCALARS) | {"quantization", "profile", "rqm"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    kw: dict[str, Any] = {}
    for key, typ in _SCALARS.items():
        if key in data and data[key] is not None:
            try:
                kw[key] = typ(data[key])
            except (TypeError, ValueError):
                raise ConfigError(f"config key {key!r}: expected {typ.__name__}, got {data[key]!r}") from None
    try:
        if "quantization" in data:
            kw["quantization"] = QuantizationConfig(**data["quantization"])
        if "profile" in data:
            prof = data["profile"]
            if isinstance(prof, str):
                if prof not in PROFILES:
                    raise ConfigError(f"unknown profile {prof!r}; choose from {sorted(PROFILES)}")
                kw["profile"] = PROFILES[prof]
            else:
                prof = dict(prof)
                if "angle_offset_deg" in prof:
                    prof["angle_offset_deg"] = tuple(prof["angle_offset_deg"])
                kw["profile"] = TrajectoryProfile(**prof)
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from None
    if "rqm" in data:
        kw["rqm"] = dict(data["rqm"])
    return CampaignConfig(base_dir=base_dir, **kw)


def load_config(path: str | Path | None, **overrides) -> CampaignConfig:
    data: dict[str, Any] = {}
    base = Path(".")
    if path is not None:
        p = Path(path)
        try:
            data = json.loads(p.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {p}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config file {p}: top level must be an object")
        base = p.parent
    data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(data, base)
