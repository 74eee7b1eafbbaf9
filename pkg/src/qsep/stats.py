"""Sufficient statistics of event datasets: counts, frequencies and moments.

Counts are exact integers and every moment is derived from them, so the
identities f(x) = (1 + x<x>)/2 and f(x, y) = (1 + x<x> + y<y> + xy<xy>)/4
hold exactly in rational arithmetic (see :meth:`SummaryStatistics.frequencies`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .simulator import EPRB, EPRB_CELLS, SG, SG_CELLS, ConditionRecord, EventDataset


class EmptyDatasetError(ValueError):
    """Averages of zero events are undefined."""


@dataclass(frozen=True)
class SummaryStatistics:
    """Counts of one run, keyed by outcome cell.

    SG counts are keyed by x in (+1, -1); EPRB counts by (x, y) pairs in
    ``EPRB_CELLS`` order.  ``condition`` is carried along so that a set of
    summaries can be fed straight into the separation fit.
    """

    kind: str
    counts: Mapping
    condition: ConditionRecord | None = None

    def __post_init__(self) -> None:
        cells = SG_CELLS if self.kind == SG else EPRB_CELLS
        if self.kind not in (SG, EPRB):
            raise ValueError(f"unknown kind {self.kind!r}")
        counts = {cell: int(self.counts.get(cell, 0)) for cell in cells}
        if set(self.counts) - set(cells):
            raise ValueError(f"unexpected count cells {sorted(set(self.counts) - set(cells))}")
        if any(n < 0 for n in counts.values()):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        if self.condition is not None and self.condition.kind != self.kind:
            raise ValueError("condition kind does not match statistics kind")

    @property
    def N(self) -> int:
        return sum(self.counts.values())

    def _require_events(self) -> int:
        n = self.N
        if n == 0:
            raise EmptyDatasetError("no events: averages are undefined")
        return n

    def exact_moments(self) -> dict[str, Fraction]:
        n = self._require_events()
        c = self.counts
        if self.kind == SG:
            return {"mean_x": Fraction(c[1] - c[-1], n)}
        return {
            "mean_x": Fraction(c[(1, 1)] + c[(1, -1)] - c[(-1, 1)] - c[(-1, -1)], n),
            "mean_y": Fraction(c[(1, 1)] + c[(-1, 1)] - c[(1, -1)] - c[(-1, -1)], n),
            "corr_xy": Fraction(c[(1, 1)] + c[(-1, -1)] - c[(-1, 1)] - c[(1, -1)], n),
        }

    @property
    def mean_x(self) -> float:
        return float(self.exact_moments()["mean_x"])

    @property
    def mean_y(self) -> float:
        self._require_kind(EPRB, "mean_y")
        return float(self.exact_moments()["mean_y"])

    @property
    def corr_xy(self) -> float:
        self._require_kind(EPRB, "corr_xy")
        return float(self.exact_moments()["corr_xy"])

    def _require_kind(self, kind: str, what: str) -> None:
        if self.kind != kind:
            raise AttributeError(f"{what} is only defined for {kind} statistics")

    def frequencies(self, exact: bool = False) -> dict:
        """Cell frequencies rebuilt from the moments (not from the counts)."""
        m = self.exact_moments()
        if self.kind == SG:
            table = {x: (1 + x * m["mean_x"]) / 2 for x in SG_CELLS}
        else:
            table = {
                (x, y): (1 + x * m["mean_x"] + y * m["mean_y"] + x * y * m["corr_xy"]) / 4
                for x, y in EPRB_CELLS
            }
        return table if exact else {k: float(v) for k, v in table.items()}

    def merge(self, other: SummaryStatistics) -> SummaryStatistics:
        """Statistics of the concatenated runs (count addition)."""
        if other.kind != self.kind:
            raise ValueError("cannot merge statistics of different kinds")
        if other.condition != self.condition:
            raise ValueError("cannot merge statistics taken under different conditions")
        merged = {k: self.counts[k] + other.counts[k] for k in self.counts}
        return SummaryStatistics(self.kind, merged, self.condition)

    def moments(self) -> dict[str, float]:
        return {k: float(v) for k, v in self.exact_moments().items()}

    def standard_errors(self) -> dict[str, float]:
        n = self.N
        if n < 2:
            raise ValueError("standard errors need at least two events")
        return {k: math.sqrt(max(0.0, 1.0 - v * v) / n) for k, v in self.moments().items()}

    def to_dict(self) -> dict:
        if self.kind == SG:
            counts = {str(x): self.counts[x] for x in SG_CELLS}
        else:
            counts = {f"{x},{y}": self.counts[(x, y)] for x, y in EPRB_CELLS}
        out = {
            "kind": self.kind,
            "N": self.N,
            "counts": counts,
            "moments": self.moments(),
            "standard_errors": self.standard_errors() if self.N >= 2 else None,
        }
        if self.condition is not None:
            out["condition"] = self.condition.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> SummaryStatistics:
        kind = d["kind"]
        if kind == SG:
            counts = {int(k): v for k, v in d["counts"].items()}
        else:
            counts = {tuple(int(s) for s in k.split(",")): v for k, v in d["counts"].items()}
        condition = ConditionRecord.from_dict(d["condition"]) if d.get("condition") else None
        stats = cls(kind, counts, condition)
        if "N" in d and d["N"] != stats.N:
            raise ValueError(f"record N={d['N']} disagrees with counts total {stats.N}")
        return stats


def count_table(kind: str, events: np.ndarray) -> dict:
    events = np.asarray(events)
    if kind == SG:
        n_up = int(np.count_nonzero(events == 1))
        return {1: n_up, -1: int(events.shape[0]) - n_up}
    # map (x, y) to cell index 0..3 in EPRB_CELLS order
    idx = (1 - events[:, 0]) + (1 - events[:, 1]) // 2
    binc = np.bincount(idx.astype(np.int64), minlength=4)
    return {cell: int(binc[i]) for i, cell in enumerate(EPRB_CELLS)}


def summarize(dataset: EventDataset) -> SummaryStatistics:
    if dataset.N == 0:
        raise EmptyDatasetError("no events: averages are undefined")
    return SummaryStatistics(dataset.kind, count_table(dataset.kind, dataset.events),
                             dataset.condition)


def from_moments(kind: str, N: int, mean_x: float, mean_y: float = 0.0,
                 corr_xy: float = 0.0, condition: ConditionRecord | None = None):
    """Count table whose moments are the given ones (counts must come out integral)."""
    mx, my, cxy = (Fraction(v).limit_denominator(10 * N) for v in (mean_x, mean_y, corr_xy))
    if kind == SG:
        table = {x: (1 + x * mx) / 2 * N for x in SG_CELLS}
    else:
        table = {(x, y): (1 + x * mx + y * my + x * y * cxy) / 4 * N for x, y in EPRB_CELLS}
    if any(v.denominator != 1 or v < 0 for v in table.values()):
        raise ValueError("moments do not correspond to a non-negative integer count table")
    return SummaryStatistics(kind, {k: int(v) for k, v in table.items()}, condition)


def empirical_E(stats: SummaryStatistics) -> float:
    """<x> for SG statistics, <xy> for EPRB statistics."""
    return stats.mean_x if stats.kind == SG else stats.corr_xy


def standard_error_E(stats: SummaryStatistics) -> float:
    n = stats.N
    if n < 2:
        raise ValueError("standard error needs N >= 2")
    e = empirical_E(stats)
    return math.sqrt(max(0.0, 1.0 - e * e) / n)
