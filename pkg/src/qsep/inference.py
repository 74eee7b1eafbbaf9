"""Robustness analysis: evidence, Fisher information, cosine fits, 5-sigma tests.

All functions work on the single-event correlation E(theta), with
P(x|theta) = (1 + x E)/2 for SG data and P(x, y|theta) = (1 + xy E)/4 for
EPRB data.  Both cases share the Fisher information

    I_F(theta) = (dE/dtheta)^2 / (1 - E^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy import optimize
from scipy.stats import norm

from .simulator import (
    EPRB, EPRB_CELLS, SG, SG_CELLS, EventDataset, OutcomeModel, cos_between,
    eprb_probability, model_correlation_theta, model_derivative_theta, sg_probability,
)
from .stats import SummaryStatistics, empirical_E, summarize

SINGULAR_GUARD = 1e-9
ENDPOINT_GUARD = 1e-3
ZERO_PROB = 1e-15
DEGENERATE_P = 1e-12
DEFAULT_K_MAX = 8
MIN_COMPLIANCE_N = 100


class DivergentEvidenceError(ValueError):
    """A cell with nonzero count has zero model probability."""


class SingularFisherError(ValueError):
    """|E| = 1 makes the Fisher information formula singular."""


# --- profiles ---------------------------------------------------------------


@dataclass(frozen=True)
class ProfilePoint:
    theta: float
    E: float
    N: int | None = None


@dataclass(frozen=True)
class ThetaProfile:
    kind: str
    points: tuple[ProfilePoint, ...]

    def __post_init__(self) -> None:
        pts = tuple(self.points)
        thetas = np.array([p.theta for p in pts])
        if np.any(np.diff(thetas) <= 0):
            raise ValueError("profile angles must be strictly increasing")
        if np.any(thetas < -1e-12) or np.any(thetas > math.pi + 1e-12):
            raise ValueError("profile angles must lie in [0, pi]")
        if any(abs(p.E) > 1 + 1e-12 for p in pts):
            raise ValueError("profile correlations must satisfy |E| <= 1")
        object.__setattr__(self, "points", pts)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([p.theta for p in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([p.E for p in self.points])

    @property
    def counts(self) -> list[int | None]:
        return [p.N for p in self.points]

    @classmethod
    def from_function(cls, kind: str, func: Callable[[float], float], thetas) -> ThetaProfile:
        return cls(kind, tuple(ProfilePoint(float(t), float(func(t))) for t in thetas))

    @classmethod
    def from_stats(cls, stats: Sequence[SummaryStatistics]) -> ThetaProfile:
        """Profile of measured E against the setting angle, sorted by angle."""
        stats = list(stats)
        kinds = {s.kind for s in stats}
        if len(kinds) != 1:
            raise ValueError("profile needs statistics of a single kind")
        pts = []
        for s in stats:
            cond = s.condition
            if cond is None:
                raise ValueError("statistics carry no condition record")
            if s.kind == SG:
                if cond.M is None:
                    raise ValueError("SG profile needs the moment direction M")
                c = cos_between(cond.a, cond.M)
            else:
                c = cos_between(cond.a1, cond.a2)
            pts.append(ProfilePoint(math.acos(c), empirical_E(s), s.N))
        pts.sort(key=lambda p: p.theta)
        return cls(kinds.pop(), tuple(pts))

    def to_dict(self) -> dict:
        return {"kind": self.kind,
                "points": [{"theta": p.theta, "E": p.E, "N": p.N} for p in self.points]}

    @classmethod
    def from_dict(cls, d: dict) -> ThetaProfile:
        return cls(d["kind"], tuple(ProfilePoint(float(p["theta"]), float(p["E"]), p.get("N"))
                                    for p in d["points"]))


# --- Fisher information ----------------------------------------------------

Differentiable = Union[OutcomeModel, tuple]


def _e_and_slope(profile: Differentiable, theta: float) -> tuple[float, float]:
    if isinstance(profile, tuple):
        e, de = profile
        return float(e(theta)), float(de(theta))
    return model_correlation_theta(profile, theta), model_derivative_theta(profile, theta)


def fisher_closed_form(profile: Differentiable, theta: float) -> float:
    """I_F at ``theta`` for a built-in model or an ``(E, dE/dtheta)`` pair of callables."""
    e, de = _e_and_slope(profile, theta)
    if abs(e) >= 1 - SINGULAR_GUARD:
        raise SingularFisherError(f"|E(theta)| = {abs(e):.12g} is too close to 1 at theta={theta}")
    return de * de / (1 - e * e)


def _stencil(t_minus: float, t0: float, t_plus: float) -> tuple[float, float, float]:
    """Weights of the 3-point central first-derivative formula on a non-uniform grid."""
    hm, hp = t0 - t_minus, t_plus - t0
    denom = hm * hp * (hm + hp)
    return -hp * hp / denom, (hp * hp - hm * hm) / denom, hm * hm / denom


@dataclass(frozen=True)
class FisherEstimate:
    theta: float
    fisher: float
    se: float
    slope: float


def fisher_empirical(profile: ThetaProfile, endpoint_guard: float = ENDPOINT_GUARD) -> list[FisherEstimate]:
    """Finite-difference I_F at each interior profile point.

    Points whose own |E| exceeds ``1 - endpoint_guard`` are skipped.  The
    standard error propagates the binomial variance (1 - E^2)/N of every
    stencil point; exact profiles (N unknown) get SE 0.
    """
    pts = profile.points
    if len(pts) < 3:
        raise ValueError(f"need at least 3 profile points, got {len(pts)}")
    out = []
    for i in range(1, len(pts) - 1):
        e0 = pts[i].E
        if abs(e0) > 1 - endpoint_guard:
            continue
        w = _stencil(pts[i - 1].theta, pts[i].theta, pts[i + 1].theta)
        es = [pts[i - 1].E, e0, pts[i + 1].E]
        slope = sum(wj * ej for wj, ej in zip(w, es))
        denom = 1 - e0 * e0
        fisher = slope * slope / denom
        var = 0.0
        for j, (wj, pj) in enumerate(zip(w, pts[i - 1:i + 2])):
            if pj.N is None:
                continue
            grad = 2 * slope * wj / denom
            if j == 1:
                grad += 2 * e0 * slope * slope / denom ** 2
            var += grad * grad * max(0.0, 1 - pj.E ** 2) / pj.N
        out.append(FisherEstimate(pts[i].theta, fisher, math.sqrt(var), slope))
    return out


def fisher_spread(estimates: Sequence[FisherEstimate]) -> float:
    """max - min of the estimates; a theta-independent I_F has spread ~ 0."""
    values = [e.fisher for e in estimates]
    return max(values) - min(values) if values else 0.0


# --- evidence ----------------------------------------------------------------


@dataclass(frozen=True)
class EvidenceReport:
    theta: float
    epsilon: float
    N: int
    Ev: float
    predicted_mean_Ev: float | None
    contributions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta, "epsilon": self.epsilon, "N": self.N, "Ev": self.Ev,
            "predicted_mean_Ev": self.predicted_mean_Ev,
            "contributions": {str(k): v for k, v in self.contributions.items()},
        }


def _cell_probs(kind: str, e: float) -> dict:
    if kind == SG:
        return {x: (1 + x * e) / 2 for x in SG_CELLS}
    return {(x, y): (1 + x * y * e) / 4 for x, y in EPRB_CELLS}


def evidence(stats: SummaryStatistics, theta: float, epsilon: float, model: OutcomeModel) -> EvidenceReport:
    """Log ratio of the compound-event probabilities at theta + epsilon and theta.

    Multinomial coefficients cancel in the ratio and are never formed.
    """
    p0 = _cell_probs(stats.kind, model_correlation_theta(model, theta))
    p1 = _cell_probs(stats.kind, model_correlation_theta(model, theta + epsilon))
    contributions = {}
    for cell, n in stats.counts.items():
        if n == 0:
            contributions[cell] = 0.0
            continue
        if p0[cell] <= ZERO_PROB or p1[cell] <= ZERO_PROB:
            raise DivergentEvidenceError(
                f"cell {cell} observed {n} times but has zero model probability"
            )
        contributions[cell] = n * (math.log(p1[cell]) - math.log(p0[cell]))
    if epsilon == 0:
        contributions = {cell: 0.0 for cell in contributions}
    ev = math.fsum(contributions.values())
    try:
        predicted = -stats.N * epsilon ** 2 * fisher_closed_form(model, theta) / 2
    except SingularFisherError:
        predicted = None
    return EvidenceReport(theta, epsilon, stats.N, ev, predicted, contributions)


# --- robust (cosine) fits ----------------------------------------------------


@dataclass(frozen=True)
class RobustFit:
    K: int
    phi: float
    phi_continuous: float
    fisher: float
    rms_error: float
    trivial: bool
    scan: tuple = ()

    def to_dict(self) -> dict:
        return {
            "K": self.K, "phi": self.phi, "phi_continuous": self.phi_continuous,
            "fisher": self.fisher, "rms_error": self.rms_error, "trivial": self.trivial,
            "scan": [{"K": k, "phi": p, "rms": r} for k, p, r in self.scan],
        }


def _profile_weights(profile: ThetaProfile) -> np.ndarray:
    ns = profile.counts
    if any(n is None for n in ns):
        w = np.ones(len(ns))
    else:
        w = np.asarray(ns, dtype=float)
    return w / w.sum()


def _weighted_rms(profile: ThetaProfile, w: np.ndarray, K: int, phi: float) -> float:
    r = profile.values - np.cos(K * profile.thetas + phi)
    return float(np.sqrt(np.sum(w * r * r)))


def _continuous_phase(profile: ThetaProfile, w: np.ndarray, K: int) -> float:
    grid = np.linspace(-math.pi, math.pi, 721)
    rms = [_weighted_rms(profile, w, K, p) for p in grid]
    best = grid[int(np.argmin(rms))]
    step = grid[1] - grid[0]
    res = optimize.minimize_scalar(lambda p: _weighted_rms(profile, w, K, p),
                                   bounds=(best - step, best + step), method="bounded",
                                   options={"xatol": 1e-12})
    return float(math.remainder(res.x, 2 * math.pi))


def fit_robust(profile: ThetaProfile, K_max: int = DEFAULT_K_MAX) -> RobustFit:
    """Best E = cos(K theta + phi) over K in 0..K_max and phi in {0, pi}.

    A K = 0 winner is the constant solution excluded on physical grounds and
    is returned with ``trivial=True``.
    """
    n = len(profile.points)
    if n < 2 * K_max + 1:
        raise ValueError(f"need at least {2 * K_max + 1} points for K_max={K_max}, got {n}")
    span = profile.thetas[-1] - profile.thetas[0]
    if span < math.pi / 2 - 1e-12:
        raise ValueError(f"profile spans {span:.3f} rad; at least pi/2 is required")
    w = _profile_weights(profile)
    values = profile.values
    if np.ptp(values) <= 1e-12:
        phi = 0.0 if values.mean() >= 0 else math.pi
        rms = _weighted_rms(profile, w, 0, phi)
        return RobustFit(0, phi, phi, 0.0, rms, True)
    scan = tuple((K, phi, _weighted_rms(profile, w, K, phi))
                 for K in range(K_max + 1) for phi in (0.0, math.pi))
    K, phi, rms = min(scan, key=lambda item: item[2])
    return RobustFit(K, phi, _continuous_phase(profile, w, K), float(K * K), rms, K == 0, scan)


# --- compliance with the quantum description ---------------------------------


@dataclass(frozen=True)
class CellTest:
    cell: object
    count: int
    p_quantum: float
    z: float
    method: str


@dataclass(frozen=True)
class SettingCompliance:
    condition: object
    N: int
    cells: tuple[CellTest, ...]

    @property
    def max_abs_z(self) -> float:
        return max(abs(c.z) for c in self.cells)


@dataclass(frozen=True)
class ComplianceReport:
    settings: tuple[SettingCompliance, ...]
    max_abs_z: float
    threshold_sigma: float
    passed: bool
    chi2: float
    chi2_dof: int

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "threshold_sigma": self.threshold_sigma,
            "max_abs_z": self.max_abs_z,
            "chi2": self.chi2,
            "chi2_dof": self.chi2_dof,
            "settings": [
                {
                    "condition": s.condition.to_dict(),
                    "N": s.N,
                    "max_abs_z": s.max_abs_z,
                    "cells": [{"cell": str(c.cell), "count": c.count, "p_quantum": c.p_quantum,
                               "z": c.z, "method": c.method} for c in s.cells],
                }
                for s in self.settings
            ],
        }


def quantum_cell_probabilities(condition) -> dict:
    if condition.kind == SG:
        if condition.M is None:
            raise ValueError("quantum SG prediction needs the moment direction M")
        return {x: sg_probability(x, condition.a, condition.M) for x in SG_CELLS}
    return {(x, y): eprb_probability(x, y, condition.a1, condition.a2) for x, y in EPRB_CELLS}


def _cell_test(cell, n: int, N: int, p: float) -> CellTest:
    if p <= DEGENERATE_P or p >= 1 - DEGENERATE_P:
        # the only outcome with nonzero probability is n = N*round(p)
        expected = 0 if p <= DEGENERATE_P else N
        p_value = 1.0 if n == expected else 0.0
        return CellTest(cell, n, p, float(norm.isf(p_value / 2)), "exact-binomial")
    z = (n - N * p) / math.sqrt(N * p * (1 - p))
    return CellTest(cell, n, p, z, "z")


def compliance_test(datasets: Sequence[EventDataset | SummaryStatistics],
                    threshold_sigma: float = 5.0) -> ComplianceReport:
    """Per-cell z-scores of the counts against the quantum probabilities."""
    if not datasets:
        raise ValueError("no datasets to test")
    settings, chi2, dof = [], 0.0, 0
    for d in datasets:
        stats = summarize(d) if isinstance(d, EventDataset) else d
        if stats.N < MIN_COMPLIANCE_N:
            raise ValueError(f"compliance test needs N >= {MIN_COMPLIANCE_N} per setting, got {stats.N}")
        probs = quantum_cell_probabilities(stats.condition)
        cells = tuple(_cell_test(cell, stats.counts[cell], stats.N, p) for cell, p in probs.items())
        for c in cells:
            if c.method == "z":
                chi2 += (c.count - stats.N * c.p_quantum) ** 2 / (stats.N * c.p_quantum)
            elif math.isinf(c.z):
                chi2 = math.inf
        dof += sum(1 for c in cells if c.method == "z") - 1
        settings.append(SettingCompliance(stats.condition, stats.N, cells))
    max_z = max(s.max_abs_z for s in settings)
    return ComplianceReport(tuple(settings), max_z, threshold_sigma, max_z < threshold_sigma,
                            chi2, dof)

