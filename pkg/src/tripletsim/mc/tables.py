"""Sampling tables shared by both kernel backends.

Every stochastic decision in the kernels is ``index = #{j : cdf[j] <= u}``
on a precomputed CDF, or a comparison of ``u`` against a precomputed
probability. Building the tables once in Python keeps the compiled and the
numpy kernels bit-identical: neither evaluates a transcendental function
on the click path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..coincidence import leak_routing
from ..params import SourceParameters
from ..photon_stats import loss_channel, poisson_distribution

# below the 2**-53 resolution of the uniforms
_TABLE_TAIL = 1e-18


@dataclass(frozen=True)
class KernelTables:
    pois_cdf: np.ndarray        # primary pair number m
    binom_cdf: np.ndarray       # [m, k] conversions given m
    nodet_i1: np.ndarray        # (1 - eta)^n
    nodet_s2: np.ndarray
    nodet_i2: np.ndarray
    p_noise_i1: float
    p_noise_s2: float
    p_noise_i2: float
    leak_cdf: np.ndarray        # leaked photon number m'
    leak_s2_cdf: np.ndarray     # [m', n_s] routed-and-detected in s2
    leak_i2_cdf: np.ndarray     # [rest, n_i] routed-and-detected in i2 given not s2
    jitter_sigma: float = 0.0

    @property
    def leak_enabled(self) -> bool:
        return self.leak_cdf.size > 1


def _poisson_cdf(mean: float) -> np.ndarray:
    rho = poisson_distribution(mean, _TABLE_TAIL).probabilities
    cdf = np.cumsum(rho)
    cdf[-1] = 1.0
    return np.minimum(cdf, 1.0)


def _binomial_cdf_rows(p: float, dim: int) -> np.ndarray:
    pmf = loss_channel(p, dim).transfer  # column m is the pmf over k
    cdf = np.cumsum(pmf, axis=0).T.copy()
    k = np.arange(dim)
    cdf[k[None, :] >= k[:, None]] = 1.0
    return np.ascontiguousarray(np.minimum(cdf, 1.0))


def _no_detection(eta: float, n_max: int) -> np.ndarray:
    out = np.empty(n_max + 1)
    q = 1.0 - eta
    acc = 1.0
    for n in range(n_max + 1):
        out[n] = acc
        acc *= q
    return out


def build_tables(p: SourceParameters, jitter_sigma: float = 0.0) -> KernelTables:
    pois = _poisson_cdf(p.mean_photon_primary)
    m_max = pois.size - 1
    a_s, a_i = leak_routing(p)
    if p.mean_photon_leak > 0 and (a_s > 0 or a_i > 0):
        leak = _poisson_cdf(p.mean_photon_leak)
        l_max = leak.size - 1
        leak_s = _binomial_cdf_rows(a_s, l_max + 1)
        cond_i = a_i / (1.0 - a_s) if a_s < 1.0 else 0.0
        leak_i = _binomial_cdf_rows(min(cond_i, 1.0), l_max + 1)
    else:
        leak = np.ones(1)
        leak_s = np.ones((1, 1))
        leak_i = np.ones((1, 1))
    return KernelTables(
        pois_cdf=pois,
        binom_cdf=_binomial_cdf_rows(p.conversion, m_max + 1),
        nodet_i1=_no_detection(p.eta_i1, m_max),
        nodet_s2=_no_detection(p.eta_s2, m_max),
        nodet_i2=_no_detection(p.eta_i2, m_max),
        p_noise_i1=p.p_noise_i1,
        p_noise_s2=p.p_noise_s2,
        p_noise_i2=p.p_noise_i2,
        leak_cdf=leak,
        leak_s2_cdf=leak_s,
        leak_i2_cdf=leak_i,
        jitter_sigma=float(jitter_sigma),
    )
