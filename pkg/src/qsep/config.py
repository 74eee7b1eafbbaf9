"""Run configuration (YAML) for the command-line front end.

Schema (unknown keys are rejected)::

    experiment: SG | EPRB
    model: {variant: QuantumSG | QuantumEPRB | CosineK | Quadratic | ScaledCosine | Mixture, ...}
    settings: sg-axes-6 | eprb-axes-9+6 | theta-grid-17 | [ {a: [..], M: [..]} | {a1: [..], a2: [..]} ]
    N: 100000
    seed: 12345
    M: [0, 0, 1]            # optional; SG moment for named designs
    Z: "free text"          # optional
    output_dir: out         # optional
    tolerances: {sep_tol: 0.05, purity_tol: 0.02, psd_tol: 0.02}   # optional
    threshold_sigma: 5      # optional
    k_max: 8                # optional
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import designs
from .simulator import EPRB, KINDS, SG, ConditionRecord, OutcomeModel, model_from_dict

REQUIRED = {"experiment", "model", "settings", "N", "seed"}
OPTIONAL = {"M", "Z", "output_dir", "tolerances", "threshold_sigma", "k_max"}
TOLERANCE_KEYS = {"sep_tol", "purity_tol", "psd_tol"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    model: OutcomeModel
    conditions: tuple[ConditionRecord, ...]
    N: int
    seed: int
    output_dir: str = "out"
    tolerances: dict = field(default_factory=dict)
    threshold_sigma: float = 5.0
    k_max: int = 8
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)

    def setting_seed(self, index: int) -> int:
        return setting_seed(self.seed, index)


def config_hash(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def setting_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for setting ``index`` of a run."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _conditions(raw: dict, kind: str) -> tuple[ConditionRecord, ...]:
    settings = raw["settings"]
    M = raw.get("M", designs.Z_HAT if kind == SG else None)
    Z = str(raw.get("Z", ""))
    if isinstance(settings, str):
        if kind == EPRB and "M" in raw:
            raise ConfigError("M applies to SG runs only")
        return tuple(designs.named_design(settings, kind, M=M, Z=Z))
    if not isinstance(settings, list) or not settings:
        raise ConfigError("settings must be a design name or a non-empty list")
    out = []
    for item in settings:
        if not isinstance(item, dict):
            raise ConfigError(f"setting entries must be mappings, got {item!r}")
        allowed = {"a", "M"} if kind == SG else {"a1", "a2", "M1", "M2"}
        unknown = set(item) - allowed
        if unknown:
            raise ConfigError(f"unknown setting keys {sorted(unknown)}")
        if kind == SG:
            out.append(ConditionRecord.sg(item["a"], item.get("M", M), Z))
        else:
            out.append(ConditionRecord.eprb(item["a1"], item["a2"], item.get("M1"),
                                            item.get("M2"), Z))
    return tuple(out)


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    missing, unknown = REQUIRED - set(raw), set(raw) - REQUIRED - OPTIONAL
    if missing:
        raise ConfigError(f"missing configuration keys: {sorted(missing)}")
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    kind = raw["experiment"]
    if kind not in KINDS:
        raise ConfigError(f"experiment must be one of {KINDS}, got {kind!r}")
    tolerances = raw.get("tolerances", {}) or {}
    if set(tolerances) - TOLERANCE_KEYS:
        raise ConfigError(f"unknown tolerance keys: {sorted(set(tolerances) - TOLERANCE_KEYS)}")
    N, seed = raw["N"], raw["seed"]
    if not isinstance(N, int) or N < 0:
        raise ConfigError(f"N must be a non-negative integer, got {N!r}")
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    try:
        model = model_from_dict(raw["model"])
        conditions = _conditions(raw, kind)
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    return RunConfig(
        experiment=kind, model=model, conditions=conditions, N=N, seed=seed,
        output_dir=str(raw.get("output_dir", "out")),
        tolerances={k: float(v) for k, v in tolerances.items()},
        threshold_sigma=float(raw.get("threshold_sigma", 5.0)),
        k_max=int(raw.get("k_max", 8)), raw=raw,
    )


def load_config(path) -> RunConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    return parse_config(raw)
