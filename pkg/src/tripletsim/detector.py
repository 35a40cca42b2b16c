"""Binary click detector for the primary idler arm.

The detector cannot resolve photon number: it clicks if a noise event
occurs OR at least one of the impinging photons survives the arm.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .photon_stats import PhotonNumberDistribution


class DetectorSaturatedError(ValueError):
    """Raised when a measured rate implies a click probability of one or more."""


@dataclass(frozen=True)
class BinaryDetectorModel:
    efficiency: float
    noise_probability: float

    def __post_init__(self):
        for name in ("efficiency", "noise_probability"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")


def survival_complement(eta: float, m) -> np.ndarray:
    """``1 - (1 - eta)^m`` evaluated without cancellation for small ``eta``."""
    m = np.asarray(m, dtype=float)
    if eta >= 1.0:
        return np.where(m > 0, 1.0, 0.0)
    return -np.expm1(m * math.log1p(-eta))


def click_probability_m(det: BinaryDetectorModel, m: int) -> float:
    """Click probability for exactly ``m`` photons arriving at the detector."""
    if m < 0:
        raise ValueError("photon number must be non-negative")
    pn = det.noise_probability
    return pn + (1.0 - pn) * float(survival_complement(det.efficiency, m))


def click_probability_ensemble(det: BinaryDetectorModel, dist: PhotonNumberDistribution
                               ) -> float:
    """Click probability averaged over a photon-number distribution.

    The photon sum runs over the stored support only, so the result is low by
    at most ``dist.tail_mass``. Noise fires on the whole ensemble, tail included.
    """
    pn = det.noise_probability
    photon_part = math.fsum(
        survival_complement(det.efficiency, dist.photon_numbers) * dist.probabilities)
    return pn + (1.0 - pn) * photon_part


def poisson_click_probability(det: BinaryDetectorModel, mean_photon: float) -> float:
    """Closed form ``1 - (1 - p_noise) exp(-eta <m>)`` for Poisson input."""
    pn = det.noise_probability
    return pn - (1.0 - pn) * math.expm1(-det.efficiency * mean_photon)


def predicted_click_rate(det: BinaryDetectorModel, dist: PhotonNumberDistribution,
                         rep_rate: float, window: float = 1e-9) -> float:
    """Free-running click rate: noise rate plus ``rep_rate`` times the ensemble probability."""
    if rep_rate <= 0:
        raise ValueError("rep_rate must be positive")
    noise_rate = det.noise_probability / window
    return noise_rate + rep_rate * click_probability_ensemble(det, dist)


@dataclass(frozen=True)
class MeanPhotonEstimate:
    linearized: float
    exact: float
    noise_dominated: bool = False


def infer_mean_photon_number(measured_rate: float, det: BinaryDetectorModel,
                             rep_rate: float, window: float = 1e-9) -> MeanPhotonEstimate:
    """Invert a measured idler click rate for the mean photon number per pulse.

    Returns the linearised estimate ``R / (eta R_rep)`` together with the exact
    inversion of the Poisson closed form. ``noise_dominated`` is set (and a
    warning issued) when the signal part of the rate is below ten times the
    noise rate, where the linearised estimate is unreliable.
    """
    eta = det.efficiency
    if eta <= 0:
        raise ValueError("detector efficiency must be positive to infer <m>")
    if rep_rate <= 0:
        raise ValueError("rep_rate must be positive")
    pn = det.noise_probability
    noise_rate = pn / window
    p_click = (measured_rate - noise_rate) / rep_rate
    if p_click >= 1.0:
        raise DetectorSaturatedError(
            f"click probability {p_click:.6g} >= 1: detector saturated, rate not invertible")

    signal_rate = measured_rate - noise_rate - rep_rate * pn
    noise_dominated = signal_rate <= 10.0 * noise_rate
    if noise_dominated:
        warnings.warn("signal rate is not well above the noise rate; "
                      "linearised <m> estimate is biased", RuntimeWarning, stacklevel=2)

    linearized = measured_rate / (eta * rep_rate)
    # 1 - P = (1 - pn) exp(-eta m)  =>  m = -log((1 - P) / (1 - pn)) / eta
    exact = -(math.log1p(-p_click) - math.log1p(-pn)) / eta
    return MeanPhotonEstimate(linearized, max(exact, 0.0), noise_dominated)
