"""Brute-force grid search over budget splits, used to validate the optimizer.

Exhaustively rates every point of a two-dimensional grid over the free
components ``(eps_pe, eps_cor)`` and keeps the best feasible cell.  Slow and
dumb on purpose: the genetic search is trusted only because it matches this.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .budget import EPSILON_FLOOR, EpsilonBudget, Family, reconstruct_sec

__all__ = [
    "GridSpec",
    "GridCell",
    "GridSearchResult",
    "grid_search",
    "grid_csv_text",
    "write_grid_csv",
]


@dataclass(frozen=True)
class GridSpec:
    """Shape of the search grid on each axis.

    ``log`` scale (the default) spaces points geometrically between the
    component floor and the total budget, which matches how the rate models
    respond to the components; ``linear`` is available for diagnostics.
    """

    points_per_axis: int = 200
    scale: str = "log"
    lower: float = EPSILON_FLOOR

    def __post_init__(self) -> None:
        if self.points_per_axis < 2:
            raise ValueError("points_per_axis must be at least 2")
        if self.scale not in ("log", "linear"):
            raise ValueError(f"scale must be 'log' or 'linear', got {self.scale!r}")
        if self.lower < EPSILON_FLOOR:
            raise ValueError(f"lower bound cannot undercut the floor {EPSILON_FLOOR}")

    def axis(self, upper: float) -> np.ndarray:
        if upper <= self.lower:
            raise ValueError(f"upper bound {upper} must exceed lower bound {self.lower}")
        if self.scale == "log":
            return np.logspace(
                math.log10(self.lower), math.log10(upper), self.points_per_axis
            )
        return np.linspace(self.lower, upper, self.points_per_axis)


@dataclass(frozen=True)
class GridCell:
    """One rated grid point; ``eps_sec``/``rate`` are ``None`` when infeasible."""

    eps_pe: float
    eps_cor: float
    eps_sec: float | None
    feasible: bool
    rate_bits_per_sec: float | None


@dataclass(frozen=True)
class GridSearchResult:
    """Best feasible cell plus the full rated grid.

    When no cell is feasible, ``best_budget`` is ``None`` and
    ``best_fitness`` is ``-inf``; ``feasible_count`` makes the empty
    feasible set explicit.
    """

    best_budget: EpsilonBudget | None
    best_fitness: float
    feasible_count: int
    cells: list[GridCell] = field(repr=False)


def _better(
    rate: float, pe: float, cor: float, best: tuple[float, float, float] | None
) -> bool:
    """Strict improvement, with ties resolved toward smaller components.

    The comparison depends only on the candidate values, never on visiting
    order, so shuffled evaluation returns the identical winner.
    """
    if best is None:
        return True
    b_rate, b_pe, b_cor = best
    if rate != b_rate:
        return rate > b_rate
    return (pe, cor) < (b_pe, b_cor)


def grid_search(
    spec: GridSpec,
    total_eps: float,
    family: Family,
    rate_fn: Callable[[EpsilonBudget], float],
) -> GridSearchResult:
    """Rate every grid point and return the best feasible split.

    Budget reconstruction failures mark a cell infeasible, as do domain
    errors raised by ``rate_fn``; neither aborts the scan.
    """
    axis = spec.axis(total_eps)
    cells: list[GridCell] = []
    best_key: tuple[float, float, float] | None = None
    best_budget: EpsilonBudget | None = None
    feasible_count = 0
    for pe in axis:
        for cor in axis:
            budget = reconstruct_sec(total_eps, float(pe), float(cor), family)
            if budget is None:
                cells.append(GridCell(float(pe), float(cor), None, False, None))
                continue
            try:
                rate = rate_fn(budget)
            except (ValueError, ArithmeticError, OverflowError):
                cells.append(GridCell(float(pe), float(cor), None, False, None))
                continue
            if math.isnan(rate):
                cells.append(GridCell(float(pe), float(cor), None, False, None))
                continue
            feasible_count += 1
            cells.append(
                GridCell(float(pe), float(cor), budget.eps_sec, True, float(rate))
            )
            if _better(rate, float(pe), float(cor), best_key):
                best_key = (float(rate), float(pe), float(cor))
                best_budget = budget
    best_fitness = best_key[0] if best_key is not None else float("-inf")
    return GridSearchResult(
        best_budget=best_budget,
        best_fitness=best_fitness,
        feasible_count=feasible_count,
        cells=cells,
    )


def grid_csv_text(cells: Iterable[GridCell]) -> str:
    """Render rated grid cells as CSV for offline landscape inspection."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["eps_pe", "eps_cor", "eps_sec", "feasible", "rate_bits_per_sec"])
    for cell in cells:
        writer.writerow(
            [
                repr(cell.eps_pe),
                repr(cell.eps_cor),
                "" if cell.eps_sec is None else repr(cell.eps_sec),
                "true" if cell.feasible else "false",
                "" if cell.rate_bits_per_sec is None else repr(cell.rate_bits_per_sec),
            ]
        )
    return buf.getvalue()


def write_grid_csv(cells: Iterable[GridCell], path: str) -> None:
    """Write :func:`grid_csv_text` output to ``path``."""
    with open(path, "w", newline="") as fh:
        fh.write(grid_csv_text(cells))
