"""Finite-size composable key rate for a single-photon prepare-and-measure link.

Qubits are encoded in one of two bases (X with probability ``x_basis_prob``),
sent through a fibre of transmissivity ``T`` and detected with efficiency
``eta``; dark counts fire with probability ``dark_count_prob`` per gate and
produce a random bit.  Basis reconciliation keeps matching-basis events only,
a fraction ``pe_ratio`` of which is consumed to estimate the error rate.

All block counts refer to sifted-and-detected events: ``N`` transmitted
qubits yield about ``N * p_sift * Q1`` usable bits, split between parameter
estimation (``m``) and key generation (``n``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .budget import EpsilonBudget, Family
from .cv_rate import transmissivity

__all__ = [
    "DvProtocolParams",
    "DetectionStats",
    "DvRateBreakdown",
    "detection_stats",
    "estimated_qber",
    "worst_case_qber",
    "aep_term",
    "binary_entropy",
    "dv_key_rate",
]


@dataclass(frozen=True)
class DvProtocolParams:
    """Inputs of the single-photon link, defaulting to a long-haul fibre.

    :param length_km: fibre length
    :param attenuation_db_per_km: fibre attenuation
    :param det_efficiency: single-photon detector efficiency, in (0, 1]
    :param x_basis_prob: probability of choosing the X basis on either side
    :param block_size: number of transmitted qubits ``N``
    :param dark_count_prob: dark-count probability per detection gate
    :param recon_efficiency: error-correction inefficiency ``f_EC``, >= 1
    :param pe_ratio: fraction of sifted bits used for error estimation
    :param clock_hz: repetition rate
    :param dead_time_s: detector dead time after each click
    :param intrinsic_error: misalignment error of a true detection
    :param qber_override: if set, bypasses the detection model and uses this
        value directly as the estimated error rate
    """

    length_km: float = 100.0
    attenuation_db_per_km: float = 0.2
    det_efficiency: float = 0.92
    x_basis_prob: float = 0.5
    block_size: int = 30_000_000
    dark_count_prob: float = 1e-3
    recon_efficiency: float = 1.25
    pe_ratio: float = 0.25
    clock_hz: float = 2e9
    dead_time_s: float = 2e-6
    intrinsic_error: float = 0.0
    qber_override: float | None = None

    def __post_init__(self) -> None:
        checks = [
            (self.length_km >= 0.0, "length_km must be non-negative"),
            (self.attenuation_db_per_km >= 0.0, "attenuation_db_per_km must be non-negative"),
            (0.0 < self.det_efficiency <= 1.0, "det_efficiency must lie in (0, 1]"),
            (0.0 < self.x_basis_prob < 1.0, "x_basis_prob must lie in (0, 1)"),
            (self.block_size >= 2, "block_size must be at least 2"),
            (0.0 <= self.dark_count_prob <= 1.0, "dark_count_prob must lie in [0, 1]"),
            (self.recon_efficiency >= 1.0, "recon_efficiency must be at least 1"),
            (0.0 < self.pe_ratio < 1.0, "pe_ratio must lie in (0, 1)"),
            (self.clock_hz > 0.0, "clock_hz must be positive"),
            (self.dead_time_s >= 0.0, "dead_time_s must be non-negative"),
            (0.0 <= self.intrinsic_error <= 0.5, "intrinsic_error must lie in [0, 0.5]"),
            (
                self.qber_override is None or 0.0 <= self.qber_override <= 0.5,
                "qber_override must lie in [0, 0.5] when set",
            ),
        ]
        bad = [msg for ok, msg in checks if not ok]
        if bad:
            raise ValueError("; ".join(bad))


class DetectionStats(NamedTuple):
    """End-to-end efficiency, sifting probability and per-qubit click probability."""

    eta_tot: float
    p_sift: float
    q1: float


@dataclass(frozen=True)
class DvRateBreakdown:
    """Intermediate quantities of one key-rate evaluation.

    ``rate_per_use = kappa * secret_fraction`` and
    ``rate_bits_per_sec = c_dt * clock_hz * rate_per_use`` always hold, and
    ``qber_wc >= qber_est``.
    """

    eta_tot: float
    p_sift: float
    q1: float
    qber_est: float
    qber_wc: float
    kappa: float
    secret_fraction: float
    c_dt: float
    rate_per_use: float
    rate_bits_per_sec: float


def detection_stats(params: DvProtocolParams) -> DetectionStats:
    """Detection-layer probabilities of the link.

    ``eta_tot = eta * T`` is the end-to-end photon survival probability,
    ``p_sift = p_X^2 + (1 - p_X)^2`` the probability both sides pick the
    same basis, and ``Q1 = eta_tot + (1 - eta_tot) * p_dc`` the probability
    a gate clicks at all (true detection or dark count).
    """
    t = transmissivity(params.length_km, params.attenuation_db_per_km)
    eta_tot = params.det_efficiency * t
    p_x = params.x_basis_prob
    p_sift = p_x * p_x + (1.0 - p_x) * (1.0 - p_x)
    q1 = eta_tot + (1.0 - eta_tot) * params.dark_count_prob
    return DetectionStats(eta_tot=eta_tot, p_sift=p_sift, q1=q1)


def estimated_qber(params: DvProtocolParams, q1: float, eta_tot: float) -> float:
    """Expected error rate of a sifted detection, capped at 1/2.

    True detections err with the intrinsic misalignment probability; dark
    counts are uncorrelated with the sent bit and err half the time:

        ``E = (e_int * eta_tot + 0.5 * (1 - eta_tot) * p_dc) / Q1``.

    When ``qber_override`` is set on the parameters it is returned verbatim.
    """
    if params.qber_override is not None:
        return params.qber_override
    if q1 <= 0.0:
        raise ValueError("click probability must be positive to define an error rate")
    errors = params.intrinsic_error * eta_tot + 0.5 * (1.0 - eta_tot) * params.dark_count_prob
    return min(errors / q1, 0.5)


def worst_case_qber(qber_est: float, m: int, eps_pe: float) -> float:
    """Upper confidence limit on the error rate after comparing ``m`` bits.

    ``E_wc = E + sqrt((2 / m) * ln((m + 1) / eps_pe))``, capped at 1/2.

    :param qber_est: estimated error rate, in [0, 0.5]
    :param m: number of disclosed estimation bits, >= 1
    :param eps_pe: estimation failure probability, in (0, 1)
    """
    if not (0.0 <= qber_est <= 0.5):
        raise ValueError(f"qber_est must lie in [0, 0.5], got {qber_est}")
    if m < 1:
        raise ValueError(f"need at least one estimation bit, got m = {m}")
    if not (0.0 < eps_pe < 1.0):
        raise ValueError(f"eps_pe must lie in (0, 1), got {eps_pe}")
    dev = math.sqrt((2.0 / m) * math.log((m + 1) / eps_pe))
    return min(qber_est + dev, 0.5)


def aep_term(eps_s: float) -> float:
    """Entropy-rate convergence penalty ``7 * sqrt(log2(2 / eps_s))``.

    Vanishes at the boundary value ``eps_s = 2`` (included for that
    mathematical check; real budgets keep ``eps_s`` far below 1).
    """
    if not (0.0 < eps_s <= 2.0):
        raise ValueError(f"eps_s must lie in (0, 2], got {eps_s}")
    return 7.0 * math.sqrt(math.log2(2.0 / eps_s))


def binary_entropy(p: float) -> float:
    """Binary Shannon entropy in bits; ``h(0) = h(1) = 0``."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def dv_key_rate(params: DvProtocolParams, budget: EpsilonBudget) -> DvRateBreakdown:
    """Composable secret-key rate of the single-photon protocol.

    Sifted-and-detected counts ``n = floor((1 - pe_ratio) * N * p_sift * Q1)``
    and ``m = floor(pe_ratio * N * p_sift * Q1)`` set the finite-size
    penalties of the secret fraction

        ``r = 1 - h(E_wc) - f_EC * h(E)
        + (1 + log2(eps_cor * eps_h^2)) / n - aep(eps_s) / sqrt(n)``;

    the throughput prefactor ``kappa = (1 - pe_ratio) * p_sift * Q1``
    converts it into bits per transmitted qubit, and the dead-time factor
    ``c_dt = 1 / (1 + Q1 * t_dt * clock)`` deflates the clock for bits/s.

    Raises ``ValueError`` when the detected block degenerates
    (``n < 2`` or ``m < 1``).

    :param budget: feasible budget with ``family == Family.DV``
    """
    if budget.family is not Family.DV:
        raise ValueError(f"budget family must be DV, got {budget.family}")
    stats = detection_stats(params)
    sifted = params.block_size * stats.p_sift * stats.q1
    n = math.floor((1.0 - params.pe_ratio) * sifted)
    m = math.floor(params.pe_ratio * sifted)
    if n < 2 or m < 1:
        raise ValueError(
            f"detected block degenerate: n = {n} key and m = {m} estimation bits"
        )
    qber = estimated_qber(params, stats.q1, stats.eta_tot)
    qber_wc = worst_case_qber(qber, m, budget.eps_pe)
    leak = params.recon_efficiency * binary_entropy(qber)
    log_term = (1.0 + math.log2(budget.eps_cor * budget.eps_h * budget.eps_h)) / n
    secret_fraction = (
        1.0
        - binary_entropy(qber_wc)
        - leak
        + log_term
        - aep_term(budget.eps_s) / math.sqrt(n)
    )
    kappa = (1.0 - params.pe_ratio) * stats.p_sift * stats.q1
    c_dt = 1.0 / (1.0 + stats.q1 * params.dead_time_s * params.clock_hz)
    rate_per_use = kappa * secret_fraction
    return DvRateBreakdown(
        eta_tot=stats.eta_tot,
        p_sift=stats.p_sift,
        q1=stats.q1,
        qber_est=qber,
        qber_wc=qber_wc,
        kappa=kappa,
        secret_fraction=secret_fraction,
        c_dt=c_dt,
        rate_per_use=rate_per_use,
        rate_bits_per_sec=c_dt * params.clock_hz * rate_per_use,
    )
