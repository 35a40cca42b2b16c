"""Secondary-stage singles: spectral arm efficiencies and s2/i2 click probabilities."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .detector import BinaryDetectorModel, click_probability_ensemble
from .photon_stats import PhotonNumberDistribution, apply_channel, loss_channel


@dataclass(frozen=True)
class SpectralCurve:
    """Piecewise-linear efficiency curve over wavelength knots (nm)."""

    wavelengths: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.wavelengths, dtype=float)
        val = np.asarray(self.values, dtype=float)
        if lam.ndim != 1 or lam.shape != val.shape or lam.size < 2:
            raise ValueError("curve needs at least two (wavelength, value) knots")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("curve wavelengths must be strictly increasing")
        if np.any(val < 0) or np.any(val > 1):
            raise ValueError("curve efficiencies must lie in [0, 1]")
        object.__setattr__(self, "wavelengths", lam)
        object.__setattr__(self, "values", val)

    def __call__(self, wavelength):
        return np.interp(wavelength, self.wavelengths, self.values)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "SpectralCurve":
        """Read two columns (wavelength nm, efficiency); '#' lines and a text header are skipped."""
        lam, val = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    lam.append(float(row[0]))
                    val.append(float(row[1]))
                except ValueError:
                    if lam:
                        raise
                    continue  # header line
        return cls(np.array(lam), np.array(val))

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["wavelength_nm", "efficiency"])
            for lam, v in zip(self.wavelengths, self.values):
                w.writerow([repr(float(lam)), repr(float(v))])


@dataclass(frozen=True)
class SpectralArm:
    """One secondary measurement arm.

    ``efficiency`` is either the already-integrated scalar arm efficiency or a
    :class:`SpectralCurve` holding the product of splitter, optics, detector
    and end-face transmittance versus wavelength.
    """

    efficiency: Union[float, SpectralCurve]
    lambda_min: float
    lambda_max: float
    noise_probability: float = 0.0

    def __post_init__(self):
        if not self.lambda_min < self.lambda_max:
            raise ValueError("lambda_min must be smaller than lambda_max")
        if not 0.0 <= self.noise_probability <= 1.0:
            raise ValueError("noise_probability must lie in [0, 1]")
        if not isinstance(self.efficiency, SpectralCurve):
            if not 0.0 <= float(self.efficiency) <= 1.0:
                raise ValueError("scalar arm efficiency must lie in [0, 1]")


def integrate_arm_efficiency(arm: SpectralArm) -> float:
    """Band-averaged arm efficiency ``int eta(l) dl / (l_max - l_min)``.

    Trapezoidal quadrature over the curve knots (plus the interval end points)
    is exact for the piecewise-linear representation.
    """
    if not isinstance(arm.efficiency, SpectralCurve):
        return float(arm.efficiency)
    curve = arm.efficiency
    lo, hi = arm.lambda_min, arm.lambda_max
    if lo < curve.wavelengths[0] or hi > curve.wavelengths[-1]:
        raise ValueError(
            f"curve defined on [{curve.wavelengths[0]}, {curve.wavelengths[-1]}] nm "
            f"does not cover the arm interval [{lo}, {hi}] nm")
    inner = curve.wavelengths[(curve.wavelengths > lo) & (curve.wavelengths < hi)]
    lam = np.concatenate(([lo], inner, [hi]))
    return float(np.trapezoid(curve(lam), lam) / (hi - lo))


def _arm_detector(arm: SpectralArm) -> BinaryDetectorModel:
    return BinaryDetectorModel(integrate_arm_efficiency(arm), arm.noise_probability)


def secondary_distribution(primary: PhotonNumberDistribution, conversion: float
                           ) -> PhotonNumberDistribution:
    """Secondary pair-number distribution behind the second conversion stage."""
    channel = loss_channel(conversion, primary.truncation_bound + 1)
    return apply_channel(channel, primary)


def secondary_click_probability_exact(arm: SpectralArm, primary: PhotonNumberDistribution,
                                      conversion: float) -> float:
    """Single-arm click probability with the full binomial conversion sum."""
    if not 0.0 <= conversion <= 1.0:
        raise ValueError("conversion probability must lie in [0, 1]")
    return click_probability_ensemble(_arm_detector(arm),
                                      secondary_distribution(primary, conversion))


def generation_probability(mean_primary: float, conversion: float) -> float:
    """Effective secondary pair generation probability per pulse."""
    return conversion * mean_primary


def secondary_click_probability_approx(arm: SpectralArm, mean_primary: float,
                                       conversion: float) -> float:
    """First-order click probability ``p_noise + eta_tot * conversion * <m>``.

    Valid while ``conversion * <m>`` and ``p_noise`` are both small; the
    dropped terms are ``p_noise * eta_tot * conversion * <m>`` and
    ``(eta_tot * conversion * <m>)^2 / 2``.
    """
    eta = integrate_arm_efficiency(arm)
    return arm.noise_probability + eta * generation_probability(mean_primary, conversion)
