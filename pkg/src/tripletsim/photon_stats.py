"""Photon-number distributions and the binomial loss channel.

A :class:`PhotonNumberDistribution` is a truncated occupation vector
``rho[0..M]`` together with the probability mass that lies beyond ``M``.
Every "infinite" sum over photon numbers in this package runs over the
stored support, and ``tail_mass`` bounds the error of doing so.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaln, xlogy

DEFAULT_TAIL_TOLERANCE = 1e-12
_NORM_SLACK = 1e-12


@dataclass(frozen=True)
class PhotonNumberDistribution:
    """Occupation probabilities ``rho_m`` for ``m = 0..truncation_bound``."""

    probabilities: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        rho = np.asarray(self.probabilities, dtype=float)
        if rho.ndim != 1 or rho.size == 0:
            raise ValueError("probabilities must be a non-empty 1-d sequence")
        if np.any(rho < 0) or np.any(rho > 1) or not np.all(np.isfinite(rho)):
            raise ValueError("every occupation probability must lie in [0, 1]")
        if not 0.0 <= self.tail_mass <= 1.0:
            raise ValueError("tail_mass must lie in [0, 1]")
        total = math.fsum(rho) + self.tail_mass
        if abs(total - 1.0) > _NORM_SLACK:
            raise ValueError(f"distribution is not normalised (sum = {total!r})")
        rho.setflags(write=False)
        object.__setattr__(self, "probabilities", rho)

    @property
    def truncation_bound(self) -> int:
        return self.probabilities.size - 1

    @property
    def photon_numbers(self) -> np.ndarray:
        return np.arange(self.probabilities.size)

    def __getitem__(self, m: int) -> float:
        if m < 0:
            raise IndexError("photon number must be non-negative")
        if m > self.truncation_bound:
            return 0.0
        return float(self.probabilities[m])

    def mean(self) -> float:
        return mean(self)

    def to_dict(self) -> dict:
        return {
            "probabilities": self.probabilities.tolist(),
            "truncation_bound": self.truncation_bound,
            "tail_mass": self.tail_mass,
        }


@dataclass(frozen=True)
class LossChannel:
    """Binomial transfer matrix ``L[k, m]`` (zero for ``k > m``)."""

    transfer: np.ndarray
    success_probability: float

    @property
    def dim(self) -> int:
        return self.transfer.shape[0]


def poisson_distribution(mean: float, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
                         ) -> PhotonNumberDistribution:
    """Poisson occupation vector truncated where the analytic tail drops below tolerance."""
    if not math.isfinite(mean) or mean < 0:
        raise ValueError(f"mean photon number must be finite and >= 0, got {mean!r}")
    if not 0 < tail_tolerance <= 1e-6:
        raise ValueError("tail_tolerance must lie in (0, 1e-6]")
    if mean == 0:
        return PhotonNumberDistribution(np.array([1.0]), 0.0)

    bound = int(math.floor(mean))
    # gammainc(M + 1, mean) == P(X > M) for X ~ Poisson(mean)
    while gammainc(bound + 1, mean) >= tail_tolerance:
        bound += 1
    m = np.arange(bound + 1)
    rho = np.exp(xlogy(m, mean) - mean - gammaln(m + 1))
    tail = float(gammainc(bound + 1, mean))
    # float rounding in rho can leave the sum a few ulp off; absorb that into the tail
    tail = max(tail, 0.0)
    excess = math.fsum(rho) + tail - 1.0
    if excess > 0 and excess <= _NORM_SLACK:
        tail = max(tail - excess, 0.0)
    return PhotonNumberDistribution(rho, tail)


def _log_binomial_rows(dim: int) -> np.ndarray:
    """``log C(m, k)`` for ``0 <= k <= m < dim`` (``-inf`` above the diagonal)."""
    out = np.full((dim, dim), -np.inf)
    out[0, :] = 0.0
    for k in range(dim - 1):
        m = np.arange(k + 1, dim)
        # C(m, k+1) = C(m, k) * (m - k) / (k + 1)
        out[k + 1, k + 1:] = out[k, k + 1:] + np.log((m - k) / (k + 1))
    # C(m, m) = 1 exactly, so p = 1 yields an exact identity
    np.fill_diagonal(out, 0.0)
    return out


def loss_channel(p: float, dim: int) -> LossChannel:
    """Binomial transfer matrix ``L[k, m] = C(m, k) p^k (1 - p)^(m - k)``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"success probability must lie in [0, 1], got {p!r}")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    k = np.arange(dim)[:, None]
    m = np.arange(dim)[None, :]
    with np.errstate(invalid="ignore"):
        log_l = _log_binomial_rows(dim) + xlogy(k, p) + xlogy(m - k, 1.0 - p)
    transfer = np.where(k <= m, np.exp(log_l), 0.0)
    transfer = np.nan_to_num(transfer, nan=0.0)
    transfer.setflags(write=False)
    return LossChannel(transfer, float(p))


def apply_channel(channel: LossChannel, dist: PhotonNumberDistribution
                  ) -> PhotonNumberDistribution:
    """Push an input distribution through the channel: ``rho_k = sum_m L[k, m] rho_m``."""
    n = dist.probabilities.size
    if channel.dim < n:
        raise ValueError(
            f"channel dimension {channel.dim} is smaller than distribution support {n}")
    out = channel.transfer[:n, :n] @ dist.probabilities
    out = np.clip(out, 0.0, 1.0)
    # thinning never moves mass upward, so what was beyond M stays a valid bound
    slack = math.fsum(out) + dist.tail_mass - 1.0
    tail = dist.tail_mass
    if slack > 0:
        tail = max(tail - slack, 0.0)
    return PhotonNumberDistribution(out, tail)


def mean(dist: PhotonNumberDistribution) -> float:
    """Mean photon number, with ``M * tail_mass`` added as a guard for the cut tail."""
    m = dist.photon_numbers
    return math.fsum(m * dist.probabilities) + dist.truncation_bound * dist.tail_mass
