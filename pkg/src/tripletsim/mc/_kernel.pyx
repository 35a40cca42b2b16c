# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-pulse kernel. Must stay draw-for-draw identical to ``_fallback.py``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, uint8_t
from libc.math cimport sqrt, log1p, cos

cnp.import_array()

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2 = 0x94D049BB133111EBULL
cdef uint64_t SLOTS = 32
cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef double TWO_PI = 6.283185307179586

# slot numbers mirror _rng.py
cdef enum:
    SLOT_M = 0
    SLOT_K = 1
    SLOT_DET_I1 = 2
    SLOT_DET_S2 = 3
    SLOT_DET_I2 = 4
    SLOT_NOISE_I1 = 5
    SLOT_NOISE_S2 = 6
    SLOT_NOISE_I2 = 7
    SLOT_LEAK_M = 8
    SLOT_LEAK_S2 = 9
    SLOT_LEAK_I2 = 10
    SLOT_JITTER = 11


cdef inline double draw(uint64_t key, uint64_t pulse, uint64_t slot) noexcept nogil:
    cdef uint64_t z = key + (pulse * SLOTS + slot + 1) * GAMMA
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    z = z ^ (z >> 31)
    return <double>(z >> 11) * INV_2_53


cdef inline Py_ssize_t sample(const double[::1] cdf, double u) noexcept nogil:
    cdef Py_ssize_t j = 0
    while cdf[j] <= u:
        j += 1
    return j


cdef inline Py_ssize_t sample_row(const double[:, ::1] cdf, Py_ssize_t row, double u) noexcept nogil:
    cdef Py_ssize_t j = 0
    while cdf[row, j] <= u:
        j += 1
    return j


def simulate_range(uint64_t start, uint64_t stop, uint64_t key, t):
    """Simulate pulses ``start .. stop-1``; return clicked pulses only."""
    cdef const double[::1] pois = t.pois_cdf
    cdef const double[:, ::1] binom = t.binom_cdf
    cdef const double[::1] nd1 = t.nodet_i1
    cdef const double[::1] nds = t.nodet_s2
    cdef const double[::1] ndi = t.nodet_i2
    cdef double pn1 = t.p_noise_i1
    cdef double pns = t.p_noise_s2
    cdef double pni = t.p_noise_i2
    cdef const double[::1] lcdf = t.leak_cdf
    cdef const double[:, ::1] lscdf = t.leak_s2_cdf
    cdef const double[:, ::1] licdf = t.leak_i2_cdf
    cdef bint leak = lcdf.shape[0] > 1
    cdef double sigma = t.jitter_sigma
    cdef bint jitter = sigma > 0

    cdef Py_ssize_t n = <Py_ssize_t>(stop - start)
    out_idx_arr = np.empty(n, dtype=np.uint64)
    out_mask_arr = np.empty(n, dtype=np.uint8)
    cdef uint64_t[::1] out_idx = out_idx_arr
    cdef uint8_t[::1] out_mask = out_mask_arr
    cdef Py_ssize_t count = 0
    cdef uint64_t pulse
    cdef Py_ssize_t m, k, ml, ns, ni
    cdef uint8_t mask

    with nogil:
        for pulse in range(start, stop):
            mask = 0
            m = sample(pois, draw(key, pulse, SLOT_M))
            if m > 0:
                k = sample_row(binom, m, draw(key, pulse, SLOT_K))
                if draw(key, pulse, SLOT_DET_I1) >= nd1[m]:
                    mask |= 1
                if k > 0:
                    if draw(key, pulse, SLOT_DET_S2) >= nds[k]:
                        mask |= 2
                    if draw(key, pulse, SLOT_DET_I2) >= ndi[k]:
                        mask |= 4
            if leak:
                ml = sample(lcdf, draw(key, pulse, SLOT_LEAK_M))
                if ml > 0:
                    ns = sample_row(lscdf, ml, draw(key, pulse, SLOT_LEAK_S2))
                    ni = sample_row(licdf, ml - ns, draw(key, pulse, SLOT_LEAK_I2))
                    if ns > 0:
                        mask |= 2
                    if ni > 0:
                        mask |= 4
            if pn1 > 0 and draw(key, pulse, SLOT_NOISE_I1) < pn1:
                mask |= 1
            if pns > 0 and draw(key, pulse, SLOT_NOISE_S2) < pns:
                mask |= 2
            if pni > 0 and draw(key, pulse, SLOT_NOISE_I2) < pni:
                mask |= 4
            if mask:
                out_idx[count] = pulse
                out_mask[count] = mask
                count += 1

    idx_arr = out_idx_arr[:count].copy()
    mask_arr = out_mask_arr[:count].copy()
    if not jitter:
        return idx_arr, mask_arr, None

    offsets_arr = np.full((count, 3), np.nan)
    cdef double[:, ::1] offs = offsets_arr
    cdef uint64_t[::1] kept = idx_arr
    cdef uint8_t[::1] kmask = mask_arr
    cdef Py_ssize_t i, ch
    cdef double u1, u2
    with nogil:
        for i in range(count):
            for ch in range(3):
                if kmask[i] & (1 << ch):
                    u1 = draw(key, kept[i], SLOT_JITTER + 2 * ch)
                    u2 = draw(key, kept[i], SLOT_JITTER + 2 * ch + 1)
                    offs[i, ch] = sigma * sqrt(-2.0 * log1p(-u1)) * cos(TWO_PI * u2)
    return idx_arr, mask_arr, offsets_arr
