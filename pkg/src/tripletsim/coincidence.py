"""Analytic two- and three-fold coincidence figures.

Wherever a closed-form approximation has an exact counterpart, both are
computed and returned side by side. Ratios whose denominator vanishes come
back as ``math.inf`` (or ``math.nan`` for 0/0) instead of raising, since
parameter sweeps legitimately cross zero noise.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import mpmath
import numpy as np

from .cascade import secondary_click_probability_approx, secondary_click_probability_exact
from .detector import BinaryDetectorModel, click_probability_ensemble, survival_complement
from .params import SourceParameters, spectral_arm
from .photon_stats import (DEFAULT_TAIL_TOLERANCE, PhotonNumberDistribution,
                           poisson_distribution)

SECONDS_PER_HOUR = 3600.0
REFERENCE_CAR_3FOLD = 3.3  # value quoted for <m> = 0.25, eta_i1 = 0.117


def ratio(num: float, den: float) -> float:
    """``num / den`` with ``inf`` for a vanishing denominator and ``nan`` for 0/0."""
    if den == 0:
        return math.nan if num == 0 else math.inf
    return num / den


# -- two-fold ----------------------------------------------------------------

def twofold_correlated(eta_s2: float, eta_i2: float, conversion: float,
                       mean_primary: float) -> float:
    return eta_s2 * eta_i2 * conversion * mean_primary


def twofold_noise(eta_s2: float, eta_i2: float, conversion: float, mean_primary: float,
                  p_noise_s2: float, p_noise_i2: float) -> float:
    gen = conversion * mean_primary
    return (eta_s2 * gen * p_noise_i2 + eta_i2 * gen * p_noise_s2
            + p_noise_s2 * p_noise_i2)


def snr_secondary(p_corr: float, p_noise: float) -> float:
    return ratio(p_corr, p_noise)


def leakage_click_probability(arm_eta: float, coupler_leak: float, waveguide_leak: float,
                              endface: float, leak_dist: PhotonNumberDistribution) -> float:
    """Probability that a leaked higher-order idler photon clicks a secondary arm."""
    at_least_one = math.fsum(
        survival_complement(coupler_leak, leak_dist.photon_numbers) * leak_dist.probabilities)
    return arm_eta * waveguide_leak * endface * at_least_one


class LeakageCoincidence(NamedTuple):
    full: float
    approx: float


def leakage_accidental_coincidence(p_leak_s2: float, p_leak_i2: float,
                                   p_s2: float, p_i2: float) -> LeakageCoincidence:
    """Accidental s2/i2 coincidences from leaked photons (full sum and dominant term)."""
    approx = p_leak_s2 * p_leak_i2
    return LeakageCoincidence(approx + p_leak_s2 * p_i2 + p_leak_i2 * p_s2, approx)


def car_secondary(p_corr: float, p_leak_coinc: float) -> float:
    return ratio(p_corr, p_leak_coinc)


def car_secondary_closed_form(conversion: float, mean_primary: float, waveguide_leak: float,
                              endface: float, coupler_leak: float, mean_leak: float) -> float:
    """Small-leakage approximation of the secondary coincidences-to-accidentals ratio."""
    den = (waveguide_leak * endface * coupler_leak * mean_leak) ** 2
    return ratio(conversion * mean_primary, den)


# -- three-fold --------------------------------------------------------------

class ThreefoldProbability(NamedTuple):
    exact: float
    approx: float


def threefold_probability(eta_s2: float, eta_i2: float, conversion: float, eta_i1: float,
                          primary: PhotonNumberDistribution) -> ThreefoldProbability:
    """Noise-free three-fold probability: exact sum and the ``(1-P)^(m-1) ~ 1`` form."""
    m = primary.photon_numbers
    rho = primary.probabilities
    idler = survival_complement(eta_i1, m)
    keep = np.power(1.0 - conversion, np.maximum(m - 1, 0))
    pref = eta_i2 * eta_s2 * conversion
    exact = pref * math.fsum(m * keep * idler * rho)
    approx = pref * math.fsum(m * idler * rho)
    return ThreefoldProbability(exact, approx)


def triplet_probability(eta_s2: float, eta_i2: float, conversion: float, eta_i1: float,
                        rho_1: float) -> float:
    """Genuine-triplet (single primary pair) three-fold detection probability."""
    return eta_i2 * eta_s2 * conversion * eta_i1 * rho_1


class HigherOrderRatio(NamedTuple):
    printed: float
    consistent: float


def higher_order_ratio(eta_i1: float, primary: PhotonNumberDistribution) -> HigherOrderRatio:
    """Three-fold excess over the single-pair contribution, two ways.

    ``printed`` is ``1 + sum_{m>=2} m [1-(1-eta)^m] rho_m / rho_1`` as usually
    written; ``consistent`` is the actual quotient of the three-fold and
    triplet probabilities, which carries an extra ``1/eta`` on the sum.
    """
    rho_1 = primary[1]
    if rho_1 == 0:
        raise ValueError("rho_1 = 0: higher-order ratio undefined")
    m = primary.photon_numbers[2:]
    rho = primary.probabilities[2:]
    excess = math.fsum(m * survival_complement(eta_i1, m) * rho) / rho_1
    if eta_i1 > 0:
        consistent = 1.0 + excess / eta_i1
    else:
        consistent = 1.0 + math.fsum(m * m * rho) / rho_1
    return HigherOrderRatio(1.0 + excess, consistent)


def car_threefold(r: float) -> float:
    return ratio(1.0, r - 1.0)


def triplet_rate(p_triplet: float, rep_rate: float) -> float:
    """Detected triplets per hour."""
    return p_triplet * rep_rate * SECONDS_PER_HOUR


def generated_rate(conversion: float, rho_1: float, rep_rate: float) -> float:
    """Triplets generated inside the device per hour."""
    return conversion * rho_1 * rep_rate * SECONDS_PER_HOUR


class ThreefoldNoise(NamedTuple):
    full: float
    approx: float


def threefold_noise(p_corr_2fold: float, p_noise_2fold: float, p_noise_i1: float,
                    p_i1: float) -> ThreefoldNoise:
    approx = p_noise_2fold * p_i1
    return ThreefoldNoise(p_corr_2fold * p_noise_i1 + approx, approx)


# -- aggregate ---------------------------------------------------------------

@dataclass(frozen=True)
class CoincidenceFigures:
    p_i1: float
    p_s2: float
    p_s2_approx: float
    p_i2: float
    p_i2_approx: float
    p_corr_2fold: float
    p_noise_2fold: float
    snr_2fold: float
    p_acc_leak_s2: float
    p_acc_leak_i2: float
    p_acc_coinc: float
    p_acc_coinc_approx: float
    car_2fold: float
    car_2fold_closed_form: float
    p_3fold_total: float
    p_3fold_total_approx: float
    p_3fold_triplet: float
    r_printed: float
    r_consistent: float
    car_3fold_printed: float
    car_3fold_consistent: float
    p_noise_3fold: float
    p_noise_3fold_approx: float
    snr_3fold: float
    snr_3fold_approx: float
    rate_triplet_detected: float
    rate_triplet_generated: float

    def to_dict(self) -> dict:
        return asdict(self)


def compute_figures(p: SourceParameters, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
                    ) -> CoincidenceFigures:
    mu = p.mean_photon_primary
    P = p.conversion
    eta_s, eta_i, eta_1 = p.eta_s2, p.eta_i2, p.eta_i1
    pn_s, pn_i, pn_1 = p.p_noise_s2, p.p_noise_i2, p.p_noise_i1
    primary = poisson_distribution(mu, tail_tolerance)
    leak_dist = poisson_distribution(p.mean_photon_leak, tail_tolerance)
    arm_s, arm_i = spectral_arm(p, "s2"), spectral_arm(p, "i2")

    p_i1 = click_probability_ensemble(BinaryDetectorModel(eta_1, pn_1), primary)
    p_s2 = secondary_click_probability_exact(arm_s, primary, P)
    p_i2 = secondary_click_probability_exact(arm_i, primary, P)

    corr = twofold_correlated(eta_s, eta_i, P, mu)
    noise2 = twofold_noise(eta_s, eta_i, P, mu, pn_s, pn_i)

    lk = p.leakage
    leak_s = leakage_click_probability(eta_s, lk.coupler_leak, lk.waveguide,
                                       p.endface_transmittance, leak_dist)
    leak_i = leakage_click_probability(eta_i, lk.coupler_leak, lk.waveguide,
                                       p.endface_transmittance, leak_dist)
    acc = leakage_accidental_coincidence(leak_s, leak_i, p_s2, p_i2)

    three = threefold_probability(eta_s, eta_i, P, eta_1, primary)
    triplet = triplet_probability(eta_s, eta_i, P, eta_1, primary[1])
    if primary[1] > 0:
        r = higher_order_ratio(eta_1, primary)
    else:
        r = HigherOrderRatio(math.nan, math.nan)
    noise3 = threefold_noise(corr, noise2, pn_1, p_i1)

    return CoincidenceFigures(
        p_i1=p_i1,
        p_s2=p_s2,
        p_s2_approx=secondary_click_probability_approx(arm_s, mu, P),
        p_i2=p_i2,
        p_i2_approx=secondary_click_probability_approx(arm_i, mu, P),
        p_corr_2fold=corr,
        p_noise_2fold=noise2,
        snr_2fold=snr_secondary(corr, noise2),
        p_acc_leak_s2=leak_s,
        p_acc_leak_i2=leak_i,
        p_acc_coinc=acc.full,
        p_acc_coinc_approx=acc.approx,
        car_2fold=car_secondary(corr, acc.full),
        car_2fold_closed_form=car_secondary_closed_form(
            P, mu, lk.waveguide, p.endface_transmittance, lk.coupler_leak, p.mean_photon_leak),
        p_3fold_total=three.exact,
        p_3fold_total_approx=three.approx,
        p_3fold_triplet=triplet,
        r_printed=r.printed,
        r_consistent=r.consistent,
        car_3fold_printed=car_threefold(r.printed),
        car_3fold_consistent=car_threefold(r.consistent),
        p_noise_3fold=noise3.full,
        p_noise_3fold_approx=noise3.approx,
        snr_3fold=ratio(three.exact, noise3.full),
        snr_3fold_approx=ratio(three.exact, noise3.approx),
        rate_triplet_detected=triplet_rate(triplet, p.rep_rate),
        rate_triplet_generated=generated_rate(P, primary[1], p.rep_rate),
    )


# -- exact click-pattern probabilities of the full generative model ----------

CHANNELS = ("i1", "s2", "i2")


def leak_routing(p: SourceParameters) -> tuple:
    """Per-photon probabilities that a leaked photon is detected in s2 / in i2."""
    lk = p.leakage
    base = lk.coupler_leak * lk.waveguide * p.endface_transmittance
    return base * p.eta_s2, base * p.eta_i2


def leakage_first_order_tolerance(p: SourceParameters) -> float:
    """Relative tolerance between the independent-arm leakage formulas and the
    routed-photon model.

    The formulas keep leakage terms to first order in the per-photon
    probabilities; the dropped terms are of relative size
    ``(coupler_leak + a_s2 + a_i2) * <m'>`` (saturation of the leaked-photon
    number and of the arm routing).
    """
    a_s, a_i = leak_routing(p)
    return (p.leakage.coupler_leak + a_s + a_i) * p.mean_photon_leak


def pattern_probabilities(p: SourceParameters, dps: int = 40) -> dict:
    """Exact singles, pair and triple click probabilities of the per-pulse model.

    The model is the one the Monte Carlo samples: Poisson primary pairs,
    binomial conversion, independent per-photon detection, Poisson leakage
    photons routed to at most one arm, independent noise, OR-ed per detector.
    No-click probabilities of every detector subset have closed forms via the
    Poisson generating function; click probabilities follow by
    inclusion-exclusion, evaluated at ``dps`` decimal digits to survive the
    cancellation for three-fold events near 1e-10.

    Keys are ``"i1"``, ``"i1&s2"``, ..., ``"i1&s2&i2"``.
    """
    mp = mpmath.mp.clone()
    mp.dps = dps
    f = mp.mpf
    mu, mu_leak = f(p.mean_photon_primary), f(p.mean_photon_leak)
    P = f(p.conversion)
    eta = {"i1": f(p.eta_i1), "s2": f(p.eta_s2), "i2": f(p.eta_i2)}
    pn = {"i1": f(p.p_noise_i1), "s2": f(p.p_noise_s2), "i2": f(p.p_noise_i2)}
    a_s, a_i = leak_routing(p)
    leak = {"i1": f(0), "s2": f(a_s), "i2": f(a_i)}

    def no_click(subset):
        log_q = mp.fsum(mp.log1p(-pn[c]) for c in subset)
        a = 1 - eta["i1"] if "i1" in subset else f(1)
        b = f(1)
        for c in ("s2", "i2"):
            if c in subset:
                b *= 1 - eta[c]
        z = a * (1 - P * (1 - b))
        log_q += -mu * (1 - z)
        log_q += -mu_leak * mp.fsum(leak[c] for c in subset)
        return mp.exp(log_q)

    out = {}
    for r in (1, 2, 3):
        for combo in itertools.combinations(CHANNELS, r):
            total = mp.fsum((-1) ** len(s) * no_click(s)
                            for k in range(len(combo) + 1)
                            for s in itertools.combinations(combo, k))
            out["&".join(combo)] = float(total)
    return out
