"""Algebra of the total epsilon-security budget.

A composable security level ``eps_total`` is spent on three purposes: parameter
estimation (``eps_pe``), correctness of error correction (``eps_cor``), and
secrecy of the extracted key (``eps_sec``).  How many times ``eps_pe`` is
charged depends on the protocol family: the continuous-variable protocol
estimates two channel parameters and additionally pays an entropy-estimation
penalty equal to ``eps_pe`` (weight 3), while the discrete-variable protocol
estimates a single error rate (weight 1).  The secrecy share is always split
evenly between the smoothing and hashing failure probabilities,
``eps_s = eps_h = eps_sec / 2``.

This module owns the budget bookkeeping: reconstruction of ``eps_sec`` from the
two free components, the fixed baseline splits used for comparison, and the
linear map between optimizer genes in ``[-1, 1]`` and component values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

__all__ = [
    "EPSILON_FLOOR",
    "Family",
    "EpsilonBudget",
    "GeneBounds",
    "reconstruct_sec",
    "baseline_budgets",
    "map_gene",
    "unmap_gene",
]

#: Smallest admissible value for any epsilon component.  Components may sit
#: exactly on this floor; anything below it is rejected or infeasible.
EPSILON_FLOOR = 1e-21

#: Relative tolerance for the budget-closure identity.
_CLOSURE_RTOL = 1e-12


class Family(enum.Enum):
    """Protocol family, which fixes how components add up to the total."""

    CV = "cv"
    DV = "dv"

    @property
    def pe_weight(self) -> int:
        """Multiplicity of ``eps_pe`` in the budget constraint."""
        return 3 if self is Family.CV else 1


@dataclass(frozen=True)
class EpsilonBudget:
    """A fully resolved split of the total security budget.

    Instances always satisfy the family closure identity
    ``pe_weight * eps_pe + eps_cor + eps_sec == total`` (to relative
    tolerance 1e-12) with every component in ``[EPSILON_FLOOR, total)``,
    and ``eps_s == eps_h == eps_sec / 2`` exactly.
    """

    total: float
    eps_pe: float
    eps_cor: float
    eps_sec: float
    eps_s: float
    eps_h: float
    family: Family

    def __post_init__(self) -> None:
        if not (0.0 < self.total < 1.0):
            raise ValueError(f"total budget must lie in (0, 1), got {self.total}")
        for name in ("eps_pe", "eps_cor", "eps_sec"):
            value = getattr(self, name)
            if not (EPSILON_FLOOR <= value < self.total):
                raise ValueError(
                    f"{name} = {value} outside [{EPSILON_FLOOR}, total = {self.total})"
                )
        if self.eps_s != self.eps_sec * 0.5 or self.eps_h != self.eps_sec * 0.5:
            raise ValueError("eps_s and eps_h must each equal eps_sec / 2")
        closure = self.family.pe_weight * self.eps_pe + self.eps_cor + self.eps_sec
        if abs(closure - self.total) > _CLOSURE_RTOL * self.total:
            raise ValueError(
                f"budget does not close: weighted sum {closure} vs total {self.total}"
            )

    @classmethod
    def from_components(
        cls, eps_pe: float, eps_cor: float, eps_sec: float, family: Family
    ) -> "EpsilonBudget":
        """Build a budget from explicit components, deriving the matching total."""
        total = family.pe_weight * eps_pe + eps_cor + eps_sec
        return cls(
            total=total,
            eps_pe=eps_pe,
            eps_cor=eps_cor,
            eps_sec=eps_sec,
            eps_s=eps_sec * 0.5,
            eps_h=eps_sec * 0.5,
            family=family,
        )


def reconstruct_sec(
    total: float, eps_pe: float, eps_cor: float, family: Family
) -> EpsilonBudget | None:
    """Complete a budget from its two free components.

    ``eps_sec`` is whatever remains of ``total`` after charging ``eps_pe``
    (with its family weight) and ``eps_cor``.  Returns ``None`` when the
    remainder falls below the component floor: infeasibility is an ordinary
    value here, not an error, because the optimizer must be able to score
    arbitrary candidate splits.

    Raises ``ValueError`` for genuine domain violations: ``total`` outside
    ``(0, 1)`` or either input below ``EPSILON_FLOOR``.
    """
    if not (0.0 < total < 1.0):
        raise ValueError(f"total budget must lie in (0, 1), got {total}")
    if eps_pe < EPSILON_FLOOR or eps_cor < EPSILON_FLOOR:
        raise ValueError(
            f"components must be at least {EPSILON_FLOOR}, "
            f"got eps_pe = {eps_pe}, eps_cor = {eps_cor}"
        )
    eps_sec = total - family.pe_weight * eps_pe - eps_cor
    if eps_sec < EPSILON_FLOOR:
        return None
    if eps_sec >= total:
        # Subtracting components below half an ulp of ``total`` rounds back to
        # ``total`` itself; nudge down so the strict component bound holds.
        eps_sec = math.nextafter(total, 0.0)
    return EpsilonBudget(
        total=total,
        eps_pe=eps_pe,
        eps_cor=eps_cor,
        eps_sec=eps_sec,
        eps_s=eps_sec * 0.5,
        eps_h=eps_sec * 0.5,
        family=family,
    )


# Fixed reference splits, expressed as (pe, cor) fractions of the total.
# The secrecy share is reconstructed so the closure identity holds exactly.
_BASELINE_FRACTIONS = {
    Family.CV: (
        ("symmetric", 1.0 / 5.0, 1.0 / 5.0),
        ("asymmetric", 1.0 / 10.0, 2.0 / 5.0),
    ),
    Family.DV: (
        ("symmetric", 1.0 / 3.0, 1.0 / 3.0),
        ("asymmetric", 5.0 / 99.5, 90.0 / 99.5),
    ),
}


def baseline_budgets(total: float, family: Family) -> list[tuple[str, EpsilonBudget]]:
    """Return the labelled reference splits for ``total``.

    Two fixed splits per family: an even division of the budget
    (``symmetric``) and a deliberately lopsided one (``asymmetric``) that
    overweights correctness.  Both are feasible for any ``total`` well above
    the component floor and serve as the non-optimized comparison points.
    """
    out = []
    for label, pe_frac, cor_frac in _BASELINE_FRACTIONS[family]:
        budget = reconstruct_sec(total, total * pe_frac, total * cor_frac, family)
        if budget is None:  # only possible within a few floors of EPSILON_FLOOR
            raise ValueError(
                f"total = {total} too small for the {label} baseline split"
            )
        out.append((label, budget))
    return out


@dataclass(frozen=True)
class GeneBounds:
    """Closed-below interval ``[lower, upper)`` an optimizer gene maps onto."""

    lower: float = EPSILON_FLOOR
    upper: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.lower < self.upper):
            raise ValueError(f"need 0 < lower < upper, got [{self.lower}, {self.upper})")

    @classmethod
    def for_total(cls, total: float) -> "GeneBounds":
        """Bounds for a component of a budget with the given total."""
        return cls(lower=EPSILON_FLOOR, upper=total)


def map_gene(p: float, bounds: GeneBounds) -> float:
    """Map a normalized gene ``p`` in ``[-1, 1]`` linearly onto ``bounds``.

    ``p = -1`` lands exactly on ``bounds.lower`` and ``p = +1`` on
    ``bounds.upper``; the upper endpoint is admissible here because the
    feasibility of the resulting split is judged downstream.
    """
    if not (-1.0 <= p <= 1.0):
        raise ValueError(f"gene must lie in [-1, 1], got {p}")
    return bounds.lower + 0.5 * (p + 1.0) * (bounds.upper - bounds.lower)


def unmap_gene(x: float, bounds: GeneBounds) -> float:
    """Inverse of :func:`map_gene`; maps ``[lower, upper]`` back onto ``[-1, 1]``."""
    if not (bounds.lower <= x <= bounds.upper):
        raise ValueError(f"value {x} outside [{bounds.lower}, {bounds.upper}]")
    return 2.0 * (x - bounds.lower) / (bounds.upper - bounds.lower) - 1.0
