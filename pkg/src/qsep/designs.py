"""Named setting designs that make the reconstruction systems full rank."""

from __future__ import annotations

import math

from .simulator import EPRB, SG, ConditionRecord

X_HAT = (1.0, 0.0, 0.0)
Y_HAT = (0.0, 1.0, 0.0)
Z_HAT = (0.0, 0.0, 1.0)
AXES = (X_HAT, Y_HAT, Z_HAT)

DESIGNS = ("sg-axes-6", "eprb-axes-9+6", "theta-grid-17")


def neg(v):
    return tuple(-c for c in v)


def theta_grid_17() -> list[float]:
    """10, 20, ..., 170 degrees, in radians."""
    return [math.radians(d) for d in range(10, 180, 10)]


def direction_at(theta: float) -> tuple[float, float, float]:
    """Unit vector in the x-z plane at angle ``theta`` from z."""
    return (math.sin(theta), 0.0, math.cos(theta))


def sg_axes_6(M=Z_HAT, Z: str = "") -> list[ConditionRecord]:
    dirs = [X_HAT, neg(X_HAT), Y_HAT, neg(Y_HAT), Z_HAT, neg(Z_HAT)]
    return [ConditionRecord.sg(a, M, Z) for a in dirs]


def eprb_axes_9_6(Z: str = "") -> list[ConditionRecord]:
    """The nine axis pairs plus six anti-aligned axis pairs (-e, e) and (e, -e).

    The extra six settings probe each side's marginal at the negative axes.
    """
    pairs = [(a1, a2) for a1 in AXES for a2 in AXES]
    pairs += [(neg(e), e) for e in AXES] + [(e, neg(e)) for e in AXES]
    return [ConditionRecord.eprb(a1, a2, Z=Z) for a1, a2 in pairs]


def theta_grid_conditions(kind: str, thetas=None, M=Z_HAT, Z: str = "") -> list[ConditionRecord]:
    thetas = theta_grid_17() if thetas is None else thetas
    if kind == SG:
        return [ConditionRecord.sg(direction_at(t), M, Z) for t in thetas]
    if kind == EPRB:
        return [ConditionRecord.eprb(Z_HAT, direction_at(t), Z=Z) for t in thetas]
    raise ValueError(f"unknown kind {kind!r}")


def named_design(name: str, kind: str, M=Z_HAT, Z: str = "") -> list[ConditionRecord]:
    if name == "sg-axes-6":
        if kind != SG:
            raise ValueError("sg-axes-6 is an SG design")
        return sg_axes_6(M, Z)
    if name == "eprb-axes-9+6":
        if kind != EPRB:
            raise ValueError("eprb-axes-9+6 is an EPRB design")
        return eprb_axes_9_6(Z)
    if name == "theta-grid-17":
        return theta_grid_conditions(kind, M=M, Z=Z)
    raise ValueError(f"unknown design {name!r}; known: {', '.join(DESIGNS)}")
