"""Pure numpy kernel. Must stay draw-for-draw identical to ``_kernel.pyx``."""
from __future__ import annotations

import numpy as np

from . import _rng as r
from .tables import KernelTables

MASK_I1, MASK_S2, MASK_I2 = 1, 2, 4


def _sample(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.searchsorted(cdf, u, side="right")


def _sample_rows(cdf: np.ndarray, rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    return (cdf[rows] <= u[:, None]).sum(axis=1)


def simulate_range(start: int, stop: int, key: int, t: KernelTables):
    """Simulate pulses ``start .. stop-1``; return clicked pulses only.

    Returns ``(pulse_index uint64, mask uint8, offsets float64[n, 3] or None)``.
    """
    idx = np.arange(start, stop, dtype=np.uint64)
    n = idx.size
    mask = np.zeros(n, dtype=np.uint8)

    m = _sample(t.pois_cdf, r.uniforms(key, idx, r.SLOT_M))
    has = np.nonzero(m > 0)[0]
    if has.size:
        sub, ms = idx[has], m[has]
        k = _sample_rows(t.binom_cdf, ms, r.uniforms(key, sub, r.SLOT_K))
        hit = r.uniforms(key, sub, r.SLOT_DET_I1) >= t.nodet_i1[ms]
        mask[has[hit]] |= MASK_I1
        conv = np.nonzero(k > 0)[0]
        if conv.size:
            sub2, ks, pos = sub[conv], k[conv], has[conv]
            hit = r.uniforms(key, sub2, r.SLOT_DET_S2) >= t.nodet_s2[ks]
            mask[pos[hit]] |= MASK_S2
            hit = r.uniforms(key, sub2, r.SLOT_DET_I2) >= t.nodet_i2[ks]
            mask[pos[hit]] |= MASK_I2

    if t.leak_enabled:
        ml = _sample(t.leak_cdf, r.uniforms(key, idx, r.SLOT_LEAK_M))
        has = np.nonzero(ml > 0)[0]
        if has.size:
            sub, mls = idx[has], ml[has]
            ns = _sample_rows(t.leak_s2_cdf, mls, r.uniforms(key, sub, r.SLOT_LEAK_S2))
            ni = _sample_rows(t.leak_i2_cdf, mls - ns, r.uniforms(key, sub, r.SLOT_LEAK_I2))
            mask[has[ns > 0]] |= MASK_S2
            mask[has[ni > 0]] |= MASK_I2

    for slot, pn, bit in ((r.SLOT_NOISE_I1, t.p_noise_i1, MASK_I1),
                          (r.SLOT_NOISE_S2, t.p_noise_s2, MASK_S2),
                          (r.SLOT_NOISE_I2, t.p_noise_i2, MASK_I2)):
        if pn > 0:
            mask[r.uniforms(key, idx, slot) < pn] |= bit

    keep = np.nonzero(mask)[0]
    out_idx, out_mask = idx[keep], mask[keep]
    offsets = None
    if t.jitter_sigma > 0:
        offsets = np.full((keep.size, 3), np.nan)
        for ch, bit in enumerate((MASK_I1, MASK_S2, MASK_I2)):
            sel = np.nonzero(out_mask & bit)[0]
            if sel.size:
                u1 = r.uniforms(key, out_idx[sel], r.SLOT_JITTER + 2 * ch)
                u2 = r.uniforms(key, out_idx[sel], r.SLOT_JITTER + 2 * ch + 1)
                offsets[sel, ch] = (t.jitter_sigma * np.sqrt(-2.0 * np.log1p(-u1))
                                    * np.cos(2.0 * np.pi * u2))
    return out_idx, out_mask, offsets
