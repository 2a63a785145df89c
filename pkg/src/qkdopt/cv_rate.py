"""Finite-size composable key rate for Gaussian-modulated coherent states.

The sender modulates coherent states with total quadrature variance ``mu`` and
the receiver applies homodyne detection with efficiency ``eta`` and electronic
noise ``v_el``.  Channel loss and excess noise are estimated from a fraction
``pe_ratio`` of the block; the surviving ``n`` signals pay the finite-size
penalty of the privacy-amplification and error-correction steps.

Model conventions (fixed here, swappable only through ``estimator_fn``):

* Detector loss and electronic noise are trusted: they enter the mutual
  information between the honest parties but the eavesdropper's Holevo bound
  is evaluated on the channel output with an ideal homodyne measurement.
* Parameter estimation is forecast at the true channel values
  (``t_hat = T``, ``xi_hat = xi``); only the estimator spreads depend on the
  number ``m`` of estimation signals.
* The worst-case excess noise is the upper confidence limit
  ``xi_hat + w * sigma_xi`` (pessimistic for the honest parties).  The
  subtractive variant is kept behind a flag for comparison runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

from .budget import EpsilonBudget, Family

__all__ = [
    "CvProtocolParams",
    "EstimatorModel",
    "WorstCaseChannel",
    "CvRateBreakdown",
    "transmissivity",
    "pe_confidence_width",
    "ml_estimator_model",
    "worst_case_estimators",
    "mutual_information",
    "bosonic_entropy",
    "holevo_bound",
    "finite_size_term",
    "cv_key_rate",
]

#: Worst-case transmissivity is clamped to this floor before use; hitting it
#: marks the channel estimate as degenerate (the confidence interval reached 0).
_T_FLOOR = 1e-12

#: Symplectic eigenvalues this far below 1 are treated as rounding noise and
#: clamped; anything lower is an unphysical state and raises.
_NU_TOL = 1e-9


@dataclass(frozen=True)
class CvProtocolParams:
    """Inputs of the coherent-state link, defaulting to a short metropolitan fibre.

    :param length_km: fibre length (zero models a back-to-back bench test)
    :param attenuation_db_per_km: fibre attenuation
    :param det_efficiency: homodyne detector efficiency, in (0, 1]
    :param excess_noise: channel excess noise at the channel input
    :param electronic_noise: detector electronic noise (shot-noise units)
    :param signal_variance: modulation variance ``mu`` (shot-noise units, >= 1)
    :param block_size: total number of transmitted signals ``N``
    :param recon_efficiency: reconciliation efficiency ``beta``, in (0, 1]
    :param discretization: bits per quadrature sample in key generation
    :param pe_ratio: fraction of the block sacrificed for parameter estimation
    :param clock_hz: repetition rate converting rate/use into bits per second
    """

    length_km: float = 4.0
    attenuation_db_per_km: float = 0.2
    det_efficiency: float = 0.85
    excess_noise: float = 0.01
    electronic_noise: float = 0.1
    signal_variance: float = 25.0
    block_size: int = 400_000
    recon_efficiency: float = 0.95
    discretization: int = 7
    pe_ratio: float = 0.3
    clock_hz: float = 1e9

    def __post_init__(self) -> None:
        checks = [
            (self.length_km >= 0.0, "length_km must be non-negative"),
            (self.attenuation_db_per_km >= 0.0, "attenuation_db_per_km must be non-negative"),
            (0.0 < self.det_efficiency <= 1.0, "det_efficiency must lie in (0, 1]"),
            (self.excess_noise >= 0.0, "excess_noise must be non-negative"),
            (self.electronic_noise >= 0.0, "electronic_noise must be non-negative"),
            (self.signal_variance >= 1.0, "signal_variance must be at least 1 (shot noise)"),
            (self.block_size >= 2, "block_size must be at least 2"),
            (0.0 < self.recon_efficiency <= 1.0, "recon_efficiency must lie in (0, 1]"),
            (self.discretization >= 1, "discretization must be a positive bit count"),
            (0.0 < self.pe_ratio < 1.0, "pe_ratio must lie in (0, 1)"),
            (self.clock_hz > 0.0, "clock_hz must be positive"),
        ]
        bad = [msg for ok, msg in checks if not ok]
        if bad:
            raise ValueError("; ".join(bad))


class EstimatorModel(NamedTuple):
    """Point estimates and one-sigma spreads of the channel parameters."""

    t_hat: float
    xi_hat: float
    sigma_t: float
    sigma_xi: float
    m: int


class WorstCaseChannel(NamedTuple):
    """Confidence-limit channel parameters fed to the Holevo bound.

    ``degenerate`` is set when the lower transmissivity limit collapsed to
    (or below) the clamping floor, i.e. estimation failed to exclude a dead
    channel; callers must then refuse to claim any key.
    """

    t: float
    xi: float
    degenerate: bool


@dataclass(frozen=True)
class CvRateBreakdown:
    """Intermediate quantities of one key-rate evaluation.

    ``rate_per_use = (n * r_pe_bits - finite_term_bits) / N`` and
    ``rate_bits_per_sec = clock_hz * rate_per_use`` always hold.
    """

    mutual_info_bits: float
    holevo_bits: float
    r_pe_bits: float
    finite_term_bits: float
    rate_per_use: float
    rate_bits_per_sec: float


def transmissivity(length_km: float, attenuation_db_per_km: float) -> float:
    """Power transmissivity of a fibre: ``10 ** (-A * L / 10)``.

    :param length_km: fibre length, >= 0
    :param attenuation_db_per_km: attenuation coefficient, >= 0
    """
    if length_km < 0.0 or attenuation_db_per_km < 0.0:
        raise ValueError("fibre length and attenuation must be non-negative")
    return 10.0 ** (-attenuation_db_per_km * length_km / 10.0)


def pe_confidence_width(eps_pe: float) -> float:
    """Number of standard deviations covering all but ``eps_pe`` of a Gaussian tail.

    ``w = sqrt(2 * ln(1 / eps_pe))``; the estimation failure probability
    ``eps_pe`` may be 1, in which case the interval has zero width.
    """
    if not (0.0 < eps_pe <= 1.0):
        raise ValueError(f"eps_pe must lie in (0, 1], got {eps_pe}")
    return math.sqrt(2.0 * math.log(1.0 / eps_pe))


def ml_estimator_model(
    params: CvProtocolParams, t_hat: float, xi_hat: float, m: int
) -> EstimatorModel:
    """Default maximum-likelihood spreads for the channel estimators.

    With ``m`` pairs of modulation/outcome samples, the transmissivity
    estimator built from the empirical correlation has variance
    ``4 * tau * sigma_z^2 / (eta^2 * m * sigma_x^2)`` and the excess-noise
    estimator has spread ``sigma_z^2 * sqrt(2 / m) / (eta * t_hat)``, where
    ``tau = eta * t_hat``, ``sigma_x^2 = mu - 1`` is the modulation variance
    and ``sigma_z^2 = 1 + v_el + tau * xi_hat`` is the residual noise
    variance seen by the receiver.

    :param t_hat: transmissivity point estimate, in (0, 1]
    :param xi_hat: excess-noise point estimate, >= 0
    :param m: number of estimation samples, >= 1
    """
    if not (0.0 < t_hat <= 1.0):
        raise ValueError(f"t_hat must lie in (0, 1], got {t_hat}")
    if xi_hat < 0.0:
        raise ValueError(f"xi_hat must be non-negative, got {xi_hat}")
    if m < 1:
        raise ValueError(f"need at least one estimation sample, got m = {m}")
    if params.signal_variance <= 1.0:
        raise ValueError("estimator spreads require modulation (signal_variance > 1)")
    eta = params.det_efficiency
    tau = eta * t_hat
    sigma_x2 = params.signal_variance - 1.0
    sigma_z2 = 1.0 + params.electronic_noise + tau * xi_hat
    sigma_t = 2.0 * math.sqrt(tau * sigma_z2 / (m * sigma_x2)) / eta
    sigma_xi = sigma_z2 * math.sqrt(2.0 / m) / (eta * t_hat)
    return EstimatorModel(t_hat=t_hat, xi_hat=xi_hat, sigma_t=sigma_t, sigma_xi=sigma_xi, m=m)


def worst_case_estimators(
    est: EstimatorModel, eps_pe: float, subtractive_xi: bool = False
) -> WorstCaseChannel:
    """Pessimistic channel parameters at confidence level ``1 - eps_pe``.

    Transmissivity is lowered and excess noise raised by ``w`` estimator
    spreads, with ``w = pe_confidence_width(eps_pe)``.  The lowered
    transmissivity is clamped into ``[1e-12, 1]``; reaching the floor flags
    the result as degenerate.  ``subtractive_xi`` flips the noise bound to
    ``xi_hat - w * sigma_xi`` (clamped at 0), an optimistic variant retained
    for comparison only.

    :param est: point estimates and spreads, e.g. from :func:`ml_estimator_model`
    :param eps_pe: estimation failure probability, in (0, 1]
    """
    w = pe_confidence_width(eps_pe)
    t_wc = est.t_hat - w * est.sigma_t
    degenerate = t_wc < _T_FLOOR
    t_wc = min(max(t_wc, _T_FLOOR), 1.0)
    if subtractive_xi:
        xi_wc = max(est.xi_hat - w * est.sigma_xi, 0.0)
    else:
        xi_wc = est.xi_hat + w * est.sigma_xi
    return WorstCaseChannel(t=t_wc, xi=xi_wc, degenerate=degenerate)


def mutual_information(params: CvProtocolParams, t: float, xi: float) -> float:
    """Shannon information between the modulation and the homodyne outcome.

    The receiver sees variance ``b_m = eta * b + 1 - eta + v_el`` where
    ``b = t * mu + 1 - t + t * xi`` is the channel output variance;
    conditioning on the modulation removes the signal part
    ``eta * t * (mu - 1)``, so

        ``I = (1/2) * log2(b_m / (b_m - eta * t * (mu - 1)))``.

    :param t: channel transmissivity, in (0, 1]
    :param xi: channel excess noise, >= 0
    """
    if not (0.0 < t <= 1.0):
        raise ValueError(f"transmissivity must lie in (0, 1], got {t}")
    if xi < 0.0:
        raise ValueError(f"excess noise must be non-negative, got {xi}")
    mu = params.signal_variance
    eta = params.det_efficiency
    b = t * mu + 1.0 - t + t * xi
    b_m = eta * b + 1.0 - eta + params.electronic_noise
    return 0.5 * math.log2(b_m / (b_m - eta * t * (mu - 1.0)))


def bosonic_entropy(nu: float) -> float:
    """Entropy (bits) of a thermal state with symplectic eigenvalue ``nu``.

    ``h(nu) = ((nu+1)/2) log2((nu+1)/2) - ((nu-1)/2) log2((nu-1)/2)``.
    Eigenvalues within 1e-9 below 1 are clamped to 1 (vacuum); anything
    smaller is unphysical and raises ``ValueError``.
    """
    if nu < 1.0 - _NU_TOL:
        raise ValueError(f"symplectic eigenvalue {nu} below 1: unphysical state")
    if nu <= 1.0:
        return 0.0
    up = 0.5 * (nu + 1.0)
    dn = 0.5 * (nu - 1.0)
    return up * math.log2(up) - dn * math.log2(dn)


def holevo_bound(params: CvProtocolParams, t: float, xi: float) -> float:
    """Eavesdropper information bound for an ideal homodyne at the channel output.

    The two-mode state shared before measurement has covariance blocks
    ``mu`` (sender), ``b = t * mu + 1 - t + t * xi`` (channel output) and
    correlation ``c = sqrt(t * (mu^2 - 1))``.  With
    ``Delta = mu^2 + b^2 - 2 c^2`` and ``det = (mu * b - c^2)^2`` the joint
    symplectic eigenvalues are ``nu_pm^2 = (Delta +/- sqrt(Delta^2 - 4 det)) / 2``
    and the conditional eigenvalue after a quadrature measurement is
    ``nu_c = sqrt(mu * (mu - c^2 / b))``, giving

        ``chi = h(nu_+) + h(nu_-) - h(nu_c)``.

    :param t: transmissivity of the pessimistic channel, in (0, 1]
    :param xi: excess noise of the pessimistic channel, >= 0
    """
    if not (0.0 < t <= 1.0):
        raise ValueError(f"transmissivity must lie in (0, 1], got {t}")
    if xi < 0.0:
        raise ValueError(f"excess noise must be non-negative, got {xi}")
    mu = params.signal_variance
    b = t * mu + 1.0 - t + t * xi
    c2 = t * (mu * mu - 1.0)
    delta = mu * mu + b * b - 2.0 * c2
    det_gamma = (mu * b - c2) ** 2
    disc = max(delta * delta - 4.0 * det_gamma, 0.0)
    root = math.sqrt(disc)
    nu_plus = math.sqrt(max((delta + root) * 0.5, 0.0))
    nu_minus = math.sqrt(max((delta - root) * 0.5, 0.0))
    nu_cond = math.sqrt(max(mu * (mu * b - c2) / b, 0.0))
    return bosonic_entropy(nu_plus) + bosonic_entropy(nu_minus) - bosonic_entropy(nu_cond)


def finite_size_term(n: int, budget: EpsilonBudget, discretization: int) -> float:
    """Total finite-size deduction ``F`` (bits) for a key block of ``n`` signals.

    ``F = sqrt(n) * log2(n) * sqrt(2 * ln(2 / eps_pe))
    + 4 * sqrt(n) * log2(sqrt(2^D) + 2) * sqrt(log2(8 / eps_sec^2))
    - log2(eps_sec^2 * eps_cor / 2)``

    combining the entropy-estimation penalty, the leftover-hash cost at
    ``D`` bits per sample, and the correctness/secrecy log terms.

    :param n: number of key-generation signals, >= 2
    :param discretization: bits per quadrature sample ``D``, >= 1
    """
    if n < 2:
        raise ValueError(f"need at least 2 key-generation signals, got n = {n}")
    if discretization < 1:
        raise ValueError(f"discretization must be positive, got {discretization}")
    eps_pe, eps_sec, eps_cor = budget.eps_pe, budget.eps_sec, budget.eps_cor
    if eps_pe <= 0.0 or eps_sec <= 0.0 or eps_cor <= 0.0:
        raise ValueError("all budget components must be positive")
    sqrt_n = math.sqrt(n)
    ent_term = sqrt_n * math.log2(n) * math.sqrt(2.0 * math.log(2.0 / eps_pe))
    hash_term = (
        4.0
        * sqrt_n
        * math.log2(math.sqrt(2.0**discretization) + 2.0)
        * math.sqrt(math.log2(8.0 / (eps_sec * eps_sec)))
    )
    log_term = math.log2(eps_sec * eps_sec * eps_cor / 2.0)
    return ent_term + hash_term - log_term


def cv_key_rate(
    params: CvProtocolParams,
    budget: EpsilonBudget,
    estimator_fn: Callable[[CvProtocolParams, float, float, int], EstimatorModel]
    | None = None,
    subtractive_xi: bool = False,
) -> CvRateBreakdown:
    """Composable secret-key rate of the coherent-state protocol.

    The block of ``N`` signals is split into ``m = floor(pe_ratio * N)``
    estimation signals and ``n = N - m`` key signals.  Estimation is
    forecast at the true channel values; the asymptotic secret fraction
    ``beta * I(t_hat, xi_hat) - chi(t_wc, xi_wc)`` is then charged the
    finite-size deduction ``F``:

        ``R = (n * R_pe - F) / N``,  bits/s = ``clock_hz * R``.

    A degenerate worst-case channel (transmissivity interval reaching zero)
    yields no claimable key: ``R_pe`` is forced to 0 so the rate comes out
    strictly negative at ``-F / N``.

    :param budget: feasible budget with ``family == Family.CV``
    :param estimator_fn: alternative estimator-spread model with the same
        signature as :func:`ml_estimator_model` (the default)
    :param subtractive_xi: use the optimistic noise bound (comparison only)
    """
    if budget.family is not Family.CV:
        raise ValueError(f"budget family must be CV, got {budget.family}")
    m = math.floor(params.pe_ratio * params.block_size)
    n = params.block_size - m
    if m < 1 or n < 2:
        raise ValueError(
            f"block split degenerate: m = {m} estimation and n = {n} key signals"
        )
    t_true = transmissivity(params.length_km, params.attenuation_db_per_km)
    xi_true = params.excess_noise
    build = estimator_fn if estimator_fn is not None else ml_estimator_model
    est = build(params, t_true, xi_true, m)
    wc = worst_case_estimators(est, budget.eps_pe, subtractive_xi=subtractive_xi)
    info = mutual_information(params, est.t_hat, est.xi_hat)
    chi = holevo_bound(params, wc.t, wc.xi)
    if wc.degenerate:
        r_pe = 0.0
    else:
        r_pe = params.recon_efficiency * info - chi
    fs = finite_size_term(n, budget, params.discretization)
    rate_per_use = (n * r_pe - fs) / params.block_size
    return CvRateBreakdown(
        mutual_info_bits=info,
        holevo_bits=chi,
        r_pe_bits=r_pe,
        finite_term_bits=fs,
        rate_per_use=rate_per_use,
        rate_bits_per_sec=params.clock_hz * rate_per_use,
    )
