"""Event-by-event generation of Stern-Gerlach (SG) and EPRB datasets.

Outcome models are small frozen dataclasses.  Each exposes a single-event
correlation E as a function of the angle theta between the relevant unit
vectors (SG: magnet a and moment M; EPRB: the two magnets a1 and a2):

    SG:    P(x | theta)    = (1 + x E(theta)) / 2
    EPRB:  P(x, y | theta) = (1 + x y E(theta)) / 4     (zero marginals)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import rng

UNIT_TOL = 1e-9
SG = "SG"
EPRB = "EPRB"
KINDS = (SG, EPRB)

# EPRB cell order used by the sampler and by every count table
EPRB_CELLS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
SG_CELLS = (1, -1)


class ModelConditionError(ValueError):
    """An outcome model was paired with a condition it cannot describe."""


def as_unit_vector(v: Sequence[float], name: str = "vector") -> tuple[float, float, float]:
    arr = np.asarray(v, dtype=float).ravel()
    if arr.shape != (3,):
        raise ValueError(f"{name} must have three components, got {arr.shape}")
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > UNIT_TOL:
        raise ValueError(f"{name} must be a unit vector (norm {norm:.12g})")
    return tuple(float(c) for c in arr)


def unit(v: Sequence[float]) -> tuple[float, float, float]:
    """Normalize ``v``; convenience for building settings."""
    arr = np.asarray(v, dtype=float)
    return tuple(float(c) for c in arr / np.linalg.norm(arr))


def cos_between(a: Sequence[float], b: Sequence[float]) -> float:
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


@dataclass(frozen=True)
class ConditionRecord:
    """Fixed experimental conditions for one run.

    ``M1``/``M2`` are stored for EPRB runs but never enter the sampling.
    ``M`` may be omitted for SG runs driven by a :class:`Mixture`, whose
    components carry their own moment directions.
    """

    kind: str
    a: tuple[float, float, float] | None = None
    M: tuple[float, float, float] | None = None
    a1: tuple[float, float, float] | None = None
    a2: tuple[float, float, float] | None = None
    M1: tuple[float, float, float] | None = None
    M2: tuple[float, float, float] | None = None
    Z: str = ""

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        for name in ("a", "M", "a1", "a2", "M1", "M2"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, as_unit_vector(value, name))
        if self.kind == SG:
            if self.a is None:
                raise ValueError("SG condition needs a magnet direction a")
            if any(getattr(self, n) is not None for n in ("a1", "a2", "M1", "M2")):
                raise ValueError("SG condition carries EPRB fields")
        else:
            if self.a1 is None or self.a2 is None:
                raise ValueError("EPRB condition needs both magnet directions a1 and a2")
            if self.a is not None or self.M is not None:
                raise ValueError("EPRB condition carries SG fields")

    @classmethod
    def sg(cls, a, M=None, Z: str = "") -> ConditionRecord:
        return cls(SG, a=a, M=M, Z=Z)

    @classmethod
    def eprb(cls, a1, a2, M1=None, M2=None, Z: str = "") -> ConditionRecord:
        return cls(EPRB, a1=a1, a2=a2, M1=M1, M2=M2, Z=Z)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        for name in ("a", "M", "a1", "a2", "M1", "M2"):
            value = getattr(self, name)
            if value is not None:
                out[name] = list(value)
        out["Z"] = self.Z
        return out

    @classmethod
    def from_dict(cls, d: dict) -> ConditionRecord:
        allowed = {"kind", "a", "M", "a1", "a2", "M1", "M2", "Z"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown condition fields: {sorted(unknown)}")
        return cls(**d)


# --- outcome models -------------------------------------------------------


def _check_correlation_range(model) -> None:
    grid = np.concatenate([np.linspace(-1.0, 1.0, 2001), [-1.0, 0.0, 1.0]])
    values = np.array([model_correlation(model, c) for c in grid])
    if np.any(np.abs(values) > 1 + 1e-12):
        raise ValueError(f"{model} implies probabilities outside [0, 1]")


@dataclass(frozen=True)
class QuantumSG:
    """E = cos(theta) = a . M."""

    kinds = (SG,)


@dataclass(frozen=True)
class QuantumEPRB:
    """E = -cos(theta) = -a1 . a2 (singlet correlations)."""

    kinds = (EPRB,)


@dataclass(frozen=True)
class CosineK:
    """E = cos(K theta + phi)."""

    K: int
    phi: float = 0.0
    kinds = (SG, EPRB)

    def __post_init__(self) -> None:
        if int(self.K) != self.K or self.K < 0:
            raise ValueError(f"K must be a non-negative integer, got {self.K}")
        object.__setattr__(self, "K", int(self.K))


@dataclass(frozen=True)
class Quadratic:
    """E = cos(theta)^2, representable only by the unseparated description."""

    kinds = (SG, EPRB)


@dataclass(frozen=True)
class ScaledCosine:
    """E = lam cos(theta + phi); ``phi = pi`` scales the singlet correlation."""

    lam: float
    phi: float = 0.0
    kinds = (SG, EPRB)

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam}")
        _check_correlation_range(self)


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    M: tuple[float, float, float]
    base: "OutcomeModel" = field(default_factory=QuantumSG)

    def __post_init__(self) -> None:
        object.__setattr__(self, "M", as_unit_vector(self.M, "M"))
        if isinstance(self.base, Mixture):
            raise ValueError("mixture components cannot themselves be mixtures")


@dataclass(frozen=True)
class Mixture:
    """Source emitting moment ``M_k`` with probability ``w_k`` (SG only)."""

    components: tuple[MixtureComponent, ...]
    kinds = (SG,)

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        weights = np.array([c.weight for c in comps], dtype=float)
        if np.any(weights < 0):
            raise ValueError("mixture weights must be non-negative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must sum to 1, got {weights.sum():.15g}")
        for c in comps:
            if SG not in c.base.kinds:
                raise ValueError(f"component model {c.base} cannot describe SG data")
        object.__setattr__(self, "components", comps)

    def mean_moment(self) -> np.ndarray:
        return sum(c.weight * np.asarray(c.M) for c in self.components)


OutcomeModel = Union[QuantumSG, QuantumEPRB, CosineK, Quadratic, ScaledCosine, Mixture]


def model_correlation_theta(model: OutcomeModel, theta: float) -> float:
    """E(theta) for a non-mixture model, theta in radians (any real value)."""
    if isinstance(model, QuantumSG):
        return math.cos(theta)
    if isinstance(model, QuantumEPRB):
        return -math.cos(theta)
    if isinstance(model, CosineK):
        return math.cos(model.K * theta + model.phi)
    if isinstance(model, Quadratic):
        return math.cos(theta) ** 2
    if isinstance(model, ScaledCosine):
        return model.lam * math.cos(theta + model.phi)
    if isinstance(model, Mixture):
        return sum(c.weight * model_correlation_theta(c.base, theta) for c in model.components)
    raise TypeError(f"unknown outcome model {model!r}")


def model_derivative_theta(model: OutcomeModel, theta: float) -> float:
    """dE/dtheta, analytic."""
    if isinstance(model, QuantumSG):
        return -math.sin(theta)
    if isinstance(model, QuantumEPRB):
        return math.sin(theta)
    if isinstance(model, CosineK):
        return -model.K * math.sin(model.K * theta + model.phi)
    if isinstance(model, Quadratic):
        return -2 * math.cos(theta) * math.sin(theta)
    if isinstance(model, ScaledCosine):
        return -model.lam * math.sin(theta + model.phi)
    if isinstance(model, Mixture):
        return sum(c.weight * model_derivative_theta(c.base, theta) for c in model.components)
    raise TypeError(f"unknown outcome model {model!r}")


def model_correlation(model: OutcomeModel, costheta: float) -> float:
    """Single-event correlation E as a function of cos(theta) in [-1, 1].

    For a :class:`Mixture` every component is evaluated at the same
    ``costheta``; use :func:`setting_correlation` for the setting-level value
    where each component sees its own a . M_k.
    """
    if not -1.0 - 1e-12 <= costheta <= 1.0 + 1e-12:
        raise ValueError(f"costheta must lie in [-1, 1], got {costheta}")
    c = min(1.0, max(-1.0, float(costheta)))
    if isinstance(model, QuantumSG):
        return c
    if isinstance(model, QuantumEPRB):
        return -c
    if isinstance(model, Quadratic):
        return c * c
    if isinstance(model, ScaledCosine) and model.phi == 0.0:
        return model.lam * c
    if isinstance(model, Mixture):
        return sum(c_.weight * model_correlation(c_.base, c) for c_ in model.components)
    return model_correlation_theta(model, math.acos(c))


def _check_kind(model: OutcomeModel, condition: ConditionRecord) -> None:
    if condition.kind not in model.kinds:
        raise ModelConditionError(
            f"{type(model).__name__} cannot generate {condition.kind} data"
        )
    if condition.kind == SG and not isinstance(model, Mixture) and condition.M is None:
        raise ModelConditionError(f"{type(model).__name__} needs the moment direction M")


def setting_correlation(model: OutcomeModel, condition: ConditionRecord) -> float:
    """E at a concrete setting (SG: <x>; EPRB: <xy>)."""
    _check_kind(model, condition)
    if condition.kind == EPRB:
        return model_correlation(model, cos_between(condition.a1, condition.a2))
    if isinstance(model, Mixture):
        return sum(
            c.weight * model_correlation(c.base, cos_between(condition.a, c.M))
            for c in model.components
        )
    return model_correlation(model, cos_between(condition.a, condition.M))


def cell_probabilities(model: OutcomeModel, condition: ConditionRecord) -> np.ndarray:
    """Outcome probabilities in ``SG_CELLS`` or ``EPRB_CELLS`` order."""
    e = setting_correlation(model, condition)
    if condition.kind == SG:
        return np.array([(1 + e) / 2, (1 - e) / 2])
    return np.array([(1 + x * y * e) / 4 for x, y in EPRB_CELLS])


def _check_outcome(v: int) -> int:
    if v not in (1, -1):
        raise ValueError(f"outcome must be +1 or -1, got {v}")
    return int(v)


def sg_probability(x: int, a, M) -> float:
    """Quantum SG probability (1 + x a.M)/2."""
    x = _check_outcome(x)
    return (1 + x * cos_between(as_unit_vector(a, "a"), as_unit_vector(M, "M"))) / 2


def eprb_probability(x: int, y: int, a1, a2) -> float:
    """Singlet pair probability (1 - x y a1.a2)/4."""
    x, y = _check_outcome(x), _check_outcome(y)
    c = cos_between(as_unit_vector(a1, "a1"), as_unit_vector(a2, "a2"))
    return (1 - x * y * c) / 4


# --- datasets ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EventDataset:
    """Outcomes of one run: shape (N,) for SG, (N, 2) for EPRB, entries +-1."""

    condition: ConditionRecord
    model: OutcomeModel
    seed: int
    events: np.ndarray

    def __post_init__(self) -> None:
        ev = np.asarray(self.events, dtype=np.int8)
        want_ndim = 1 if self.condition.kind == SG else 2
        if self.condition.kind == EPRB and ev.size == 0:
            ev = ev.reshape(0, 2)
        if ev.ndim != want_ndim or (want_ndim == 2 and ev.shape[1] != 2):
            raise ValueError(f"bad event array shape {ev.shape} for {self.condition.kind}")
        if ev.size and not np.all((ev == 1) | (ev == -1)):
            raise ValueError("every event entry must be exactly +1 or -1")
        ev.setflags(write=False)
        object.__setattr__(self, "events", ev)
        object.__setattr__(self, "seed", rng.check_seed(self.seed))

    @property
    def kind(self) -> str:
        return self.condition.kind

    @property
    def N(self) -> int:
        return int(self.events.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventDataset):
            return NotImplemented
        return (
            self.condition == other.condition
            and self.model == other.model
            and self.seed == other.seed
            and np.array_equal(self.events, other.events)
        )


def simulate_chunk(model, condition, seed: int, start: int, stop: int) -> np.ndarray:
    """Events ``start..stop-1`` of the run; concatenating chunks gives the full run."""
    _check_kind(model, condition)
    u = rng.uniforms(seed, rng.STREAM_OUTCOME, start, stop)
    if condition.kind == EPRB:
        cum = np.cumsum(cell_probabilities(model, condition))[:3]
        cell = np.searchsorted(cum, u, side="right")
        table = np.array(EPRB_CELLS, dtype=np.int8)
        return table[cell]
    if isinstance(model, Mixture):
        weights = np.array([c.weight for c in model.components])
        pick = rng.uniforms(seed, rng.STREAM_COMPONENT, start, stop)
        idx = np.searchsorted(np.cumsum(weights)[:-1], pick, side="right")
        p_up = np.array(
            [(1 + model_correlation(c.base, cos_between(condition.a, c.M))) / 2
             for c in model.components]
        )[idx]
    else:
        p_up = cell_probabilities(model, condition)[0]
    return np.where(u < p_up, 1, -1).astype(np.int8)


def simulate(model: OutcomeModel, condition: ConditionRecord, N: int, seed: int) -> EventDataset:
    """Draw ``N`` i.i.d. events; the result is a pure function of the arguments."""
    if N < 0:
        raise ValueError("N must be non-negative")
    events = simulate_chunk(model, condition, seed, 0, int(N))
    return EventDataset(condition, model, seed, events)


# --- (de)serialization of models ------------------------------------------


def model_to_dict(model: OutcomeModel) -> dict:
    if isinstance(model, (QuantumSG, QuantumEPRB, Quadratic)):
        return {"variant": type(model).__name__}
    if isinstance(model, CosineK):
        return {"variant": "CosineK", "K": model.K, "phi": model.phi}
    if isinstance(model, ScaledCosine):
        return {"variant": "ScaledCosine", "lam": model.lam, "phi": model.phi}
    if isinstance(model, Mixture):
        return {
            "variant": "Mixture",
            "components": [
                {"weight": c.weight, "M": list(c.M), "base": model_to_dict(c.base)}
                for c in model.components
            ],
        }
    raise TypeError(f"unknown outcome model {model!r}")


def _angle(value) -> float:
    if isinstance(value, str):
        table = {"0": 0.0, "pi": math.pi, "-pi": -math.pi}
        if value.strip() not in table:
            raise ValueError(f"unrecognized angle {value!r}")
        return table[value.strip()]
    return float(value)


def model_from_dict(d: dict) -> OutcomeModel:
    d = dict(d)
    variant = d.pop("variant", None)
    simple = {"QuantumSG": QuantumSG, "QuantumEPRB": QuantumEPRB, "Quadratic": Quadratic}
    expected = {
        "CosineK": ({"K"}, {"phi"}),
        "ScaledCosine": ({"lam"}, {"phi"}),
        "Mixture": ({"components"}, set()),
    }
    if variant in simple:
        if d:
            raise ValueError(f"{variant} takes no parameters, got {sorted(d)}")
        return simple[variant]()
    if variant not in expected:
        raise ValueError(f"unknown model variant {variant!r}")
    required, optional = expected[variant]
    missing, unknown = required - set(d), set(d) - required - optional
    if missing or unknown:
        raise ValueError(f"{variant}: missing {sorted(missing)}, unknown {sorted(unknown)}")
    if variant == "CosineK":
        return CosineK(int(d["K"]), _angle(d.get("phi", 0.0)))
    if variant == "ScaledCosine":
        return ScaledCosine(float(d["lam"]), _angle(d.get("phi", 0.0)))
    comps = []
    for c in d["components"]:
        extra = set(c) - {"weight", "M", "base"}
        if extra:
            raise ValueError(f"unknown mixture component fields {sorted(extra)}")
        base = model_from_dict(c["base"]) if "base" in c else QuantumSG()
        comps.append(MixtureComponent(float(c["weight"]), tuple(c["M"]), base))
    return Mixture(tuple(comps))
