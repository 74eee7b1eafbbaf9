"""Separated (density matrix x setting operator) representation of moment data.

Single spin: fit <x>_k = u0 + rho . a_k over the settings, build
rho_hat = (1 + rho . sigma)/2 with X(a) = a . sigma.  The source vector is
the fitted unknown and the magnet direction is the regressor, never the
reverse.  u0 is fitted rather than assumed to vanish, so its size is a
diagnostic of the data.

Spin pair: rho_hat = 1/4 + rho1.sigma1 (x) 1 + 1 (x) rho2.sigma2
+ sum rho12[a][b] sigma1^a (x) sigma2^b with X = a1.sigma1 (x) 1 and
Y = 1 (x) a2.sigma2, giving the linear system
<x> = 4 rho1.a1, <y> = 4 rho2.a2, <xy> = 4 a1^T rho12 a2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import algebra
from .algebra import HermitianMatrix, PauliCoefficients2, PauliCoefficients4
from .simulator import EPRB, SG, ConditionRecord, as_unit_vector
from .stats import SummaryStatistics

RANK_RCOND = 1e-10
DEFAULT_PURITY_TOL = 0.02
EMPIRICAL_PSD_TOL = 0.02
EXACT_PSD_TOL = 1e-10
MIN_SEP_TOL = 0.02


class Verdict(str, enum.Enum):
    SEPARABLE_PURE = "SeparablePure"
    SEPARABLE_MIXED = "SeparableMixed"
    NOT_SEPARABLE = "NotSeparable"
    INDETERMINATE_RANK = "IndeterminateRank"


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class SettingRecord:
    """Moments measured at one setting; ``N=None`` marks exact (noise-free) input.

    For EPRB records, ``mean_x``, ``mean_y`` or ``corr_xy`` may be ``None`` when
    that moment was not recorded; the corresponding equation is then left out.
    """

    kind: str
    mean_x: float | None
    a: tuple[float, float, float] | None = None
    a1: tuple[float, float, float] | None = None
    a2: tuple[float, float, float] | None = None
    mean_y: float | None = None
    corr_xy: float | None = None
    N: int | None = None

    def __post_init__(self) -> None:
        for name in ("a", "a1", "a2"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, as_unit_vector(value, name))
        if self.kind == SG:
            if self.a is None or self.mean_x is None:
                raise ValueError("SG setting needs a and mean_x")
        elif self.kind == EPRB:
            if self.a1 is None or self.a2 is None:
                raise ValueError("EPRB setting needs a1 and a2")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")
        for name in ("mean_x", "mean_y", "corr_xy"):
            value = getattr(self, name)
            if value is not None and abs(value) > 1 + 1e-12:
                raise ValueError(f"{name}={value} violates |moment| <= 1")
        if self.N is not None and self.N < 1:
            raise ValueError("N must be positive when given")

    @classmethod
    def from_stats(cls, stats: SummaryStatistics) -> SettingRecord:
        cond = stats.condition
        if cond is None:
            raise ValueError("statistics carry no condition record")
        if stats.kind == SG:
            return cls(SG, stats.mean_x, a=cond.a, N=stats.N)
        return cls(EPRB, stats.mean_x, a1=cond.a1, a2=cond.a2, mean_y=stats.mean_y,
                   corr_xy=stats.corr_xy, N=stats.N)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for name in ("a", "a1", "a2"):
            if getattr(self, name) is not None:
                out[name] = list(getattr(self, name))
        for name in ("mean_x", "mean_y", "corr_xy", "N"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out


@dataclass(frozen=True)
class SeparationResult:
    kind: str
    rho: HermitianMatrix
    coefficients: PauliCoefficients2 | PauliCoefficients4
    u0: float | None
    residuals: tuple[float, ...]
    residual_rms: float
    max_residual: float
    purity: float
    eigenvalues: tuple[float, ...]
    min_eigenvalue: float
    verdict: Verdict
    rank: int
    tolerances: dict = field(default_factory=dict)

    @property
    def bloch(self) -> np.ndarray:
        """SG source vector rho (so that rho_hat = (1 + rho . sigma)/2)."""
        if self.kind != SG:
            raise AttributeError("bloch vector is defined for SG results only")
        return 2 * np.asarray(self.coefficients.c)

    def to_dict(self) -> dict:
        c = self.coefficients
        if self.kind == SG:
            coef = {"rho0": 2 * c.c0, "rho": list(self.bloch), "u0": self.u0}
        else:
            coef = {"rho0": c.c0, "rho1": list(c.c1), "rho2": list(c.c2),
                    "rho12": [list(r) for r in c.c12]}
        return {
            "kind": self.kind,
            "verdict": self.verdict.value,
            "coefficients": coef,
            "rho_real": self.rho.entries.real.tolist(),
            "rho_imag": self.rho.entries.imag.tolist(),
            "eigenvalues": list(self.eigenvalues),
            "purity": self.purity,
            "min_eigenvalue": self.min_eigenvalue,
            "residuals": list(self.residuals),
            "residual_rms": self.residual_rms,
            "max_residual": self.max_residual,
            "rank": self.rank,
            "tolerances": dict(self.tolerances),
        }


def _weights(ns: Sequence[int | None], moments: Sequence[float], weighting: str) -> np.ndarray:
    if weighting == "none" or any(n is None for n in ns):
        return np.ones(len(ns))
    n = np.asarray(ns, dtype=float)
    if weighting == "counts":
        return n / n.sum()
    if weighting == "inverse-variance":
        m = np.asarray(moments, dtype=float)
        # one-count floor keeps |E| = 1 rows finite
        var = np.maximum(1.0 - m * m, 1.0 / n) / n
        w = 1.0 / var
        return w / w.sum()
    raise ValueError(f"unknown weighting {weighting!r}")


def _solve(design: np.ndarray, target: np.ndarray, weights: np.ndarray):
    sw = np.sqrt(weights)
    sol, _, rank, _ = np.linalg.lstsq(design * sw[:, None], target * sw, rcond=RANK_RCOND)
    return sol, int(rank)


def _default_tolerances(ns, moments, sep_tol, purity_tol, psd_tol) -> dict:
    exact = any(n is None for n in ns)
    if sep_tol is None:
        if exact:
            sep_tol = MIN_SEP_TOL
        else:
            ses = [math.sqrt(max(0.0, 1 - m * m) / n) for n, m in zip(ns, moments)]
            sep_tol = max(MIN_SEP_TOL, 3 * float(np.median(ses)))
    if psd_tol is None:
        psd_tol = EXACT_PSD_TOL if exact else EMPIRICAL_PSD_TOL
    if purity_tol is None:
        purity_tol = DEFAULT_PURITY_TOL
    return {"sep_tol": float(sep_tol), "purity_tol": float(purity_tol), "psd_tol": float(psd_tol)}


def _verdict(rank, full_rank, residual_rms, purity, min_eig, tol) -> Verdict:
    if rank < full_rank:
        return Verdict.INDETERMINATE_RANK
    if residual_rms > tol["sep_tol"] or min_eig < -tol["psd_tol"]:
        return Verdict.NOT_SEPARABLE
    if purity >= 1 - tol["purity_tol"]:
        return Verdict.SEPARABLE_PURE
    return Verdict.SEPARABLE_MIXED


def _check_settings(settings: Sequence[SettingRecord], kind: str) -> list[SettingRecord]:
    settings = list(settings)
    if len(settings) < 2:
        raise InsufficientDataError(f"need at least 2 settings, got {len(settings)}")
    kinds = {s.kind for s in settings}
    if kinds != {kind}:
        raise ValueError(f"inconsistent setting kinds {sorted(kinds)} for a {kind} fit")
    return settings


def separate_sg(settings: Sequence[SettingRecord], sep_tol: float | None = None,
                purity_tol: float | None = None, psd_tol: float | None = None,
                weighting: str = "counts") -> SeparationResult:
    """Fit the single-spin separated representation to per-setting averages."""
    settings = _check_settings(settings, SG)
    design = np.array([[1.0, *s.a] for s in settings])
    target = np.array([s.mean_x for s in settings])
    ns = [s.N for s in settings]
    sol, rank = _solve(design, target, _weights(ns, target, weighting))
    u0, vec = float(sol[0]), sol[1:]
    rho = algebra.density_from_bloch(vec)
    residuals = design @ sol - target
    tol = _default_tolerances(ns, target, sep_tol, purity_tol, psd_tol)
    return _finish(SG, rho, algebra.pauli_decompose_2(rho), u0, residuals, rank, 4, tol)


def _eprb_system(settings: Sequence[SettingRecord]):
    rows, target, ns = [], [], []
    for s in settings:
        a1, a2 = np.asarray(s.a1), np.asarray(s.a2)
        if s.mean_x is not None:
            row = np.zeros(15)
            row[0:3] = 4 * a1
            rows.append(row), target.append(s.mean_x), ns.append(s.N)
        if s.mean_y is not None:
            row = np.zeros(15)
            row[3:6] = 4 * a2
            rows.append(row), target.append(s.mean_y), ns.append(s.N)
        if s.corr_xy is not None:
            row = np.zeros(15)
            row[6:15] = 4 * np.outer(a1, a2).ravel()
            rows.append(row), target.append(s.corr_xy), ns.append(s.N)
    return np.array(rows), np.array(target), ns


def separate_eprb(settings: Sequence[SettingRecord], sep_tol: float | None = None,
                  purity_tol: float | None = None, psd_tol: float | None = None,
                  weighting: str = "counts") -> SeparationResult:
    """Fit the two-spin separated representation; rho0 = 1/4 by normalization."""
    settings = _check_settings(settings, EPRB)
    design, target, ns = _eprb_system(settings)
    if design.shape[0] == 0:
        raise InsufficientDataError("no moments recorded")
    sol, rank = _solve(design, target, _weights(ns, target, weighting))
    rho1, rho2, rho12 = sol[0:3], sol[3:6], sol[6:15].reshape(3, 3)
    rho = algebra.pauli_matrix_4(0.25, rho1, rho2, rho12)
    residuals = design @ sol - target
    tol = _default_tolerances(ns, target, sep_tol, purity_tol, psd_tol)
    return _finish(EPRB, rho, algebra.pauli_decompose_4(rho), None, residuals, rank, 15, tol)


def _finish(kind, rho, coefficients, u0, residuals, rank, full_rank, tol) -> SeparationResult:
    eig = algebra.eigvalsh(rho)
    rms = float(np.sqrt(np.mean(residuals ** 2)))
    max_res = float(np.max(np.abs(residuals)))
    pur = algebra.purity(rho)
    min_eig = float(eig.min())
    return SeparationResult(
        kind=kind, rho=rho, coefficients=coefficients, u0=u0,
        residuals=tuple(float(r) for r in residuals), residual_rms=rms, max_residual=max_res,
        purity=pur, eigenvalues=tuple(float(e) for e in eig), min_eigenvalue=min_eig,
        verdict=_verdict(rank, full_rank, rms, pur, min_eig, tol), rank=rank, tolerances=tol,
    )


def separate(settings: Sequence[SettingRecord], **kwargs) -> SeparationResult:
    settings = list(settings)
    if not settings:
        raise InsufficientDataError("no settings")
    fit = separate_sg if settings[0].kind == SG else separate_eprb
    return fit(settings, **kwargs)


def predict(result: SeparationResult, condition: ConditionRecord) -> dict[str, float]:
    """Moments implied by the separated representation at any setting."""
    if condition.kind != result.kind:
        raise ValueError(f"cannot predict {condition.kind} moments from a {result.kind} fit")
    if result.kind == SG:
        x_op = HermitianMatrix(algebra.dot_sigma(condition.a))
        return {"mean_x": algebra.expectation(result.rho, x_op)}
    x_op = algebra.side_operator(condition.a1, 1)
    y_op = algebra.side_operator(condition.a2, 2)
    return {
        "mean_x": algebra.expectation(result.rho, x_op),
        "mean_y": algebra.expectation(result.rho, y_op),
        "corr_xy": algebra.expectation(result.rho, x_op @ y_op),
    }
