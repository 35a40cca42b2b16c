"""Coincidence counting on click streams.

Same-pulse coincidences are keyed by pulse index. When the stream carries
per-click time offsets, clicks must additionally lie within the coincidence
window of each other. Accidentals are counted between a click in pulse ``n``
and clicks in pulse ``n + d`` for each requested offset ``d``, which is how a
time-tagger sees them at integer multiples of the repetition period.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .mc.engine import CHANNEL_BITS, ClickStream

CHANNELS = ("i1", "s2", "i2")
PAIRS = tuple("&".join(c) for c in itertools.combinations(CHANNELS, 2))
TRIPLE = "i1&s2&i2"
# accidental keys: "<channel in pulse n>><channels in pulse n+d>"
ACCIDENTAL_KEYS = ("i1>s2&i2", "i1>s2", "i1>i2", "s2>i2")


class UnsortedStreamError(ValueError):
    pass


def binomial_error(count: int, trials: int) -> float:
    if trials <= 0:
        return math.nan
    f = count / trials
    return math.sqrt(f * (1.0 - f) / trials)


@dataclass
class CoincidenceReport:
    pulses: int
    singles: dict
    pairs: dict
    triple: int
    accidentals: dict = field(default_factory=dict)  # offset -> {key: count}
    timestamp_mode: bool = False
    window: Optional[float] = None

    def count(self, key: str) -> int:
        if key in self.singles:
            return self.singles[key]
        if key in self.pairs:
            return self.pairs[key]
        if key == TRIPLE:
            return self.triple
        raise KeyError(key)

    def fraction(self, key: str) -> float:
        return self.count(key) / self.pulses

    def error(self, key: str) -> float:
        return binomial_error(self.count(key), self.pulses)

    def accidental_trials(self, offset: int) -> int:
        return max(self.pulses - offset, 0)

    def accidental_fraction(self, offset: int, key: str) -> float:
        trials = self.accidental_trials(offset)
        return self.accidentals[offset][key] / trials if trials else math.nan

    def accidental_error(self, offset: int, key: str) -> float:
        return binomial_error(self.accidentals[offset][key], self.accidental_trials(offset))

    def to_dict(self) -> dict:
        keys = list(CHANNELS) + list(PAIRS) + [TRIPLE]
        return {
            "pulses": self.pulses,
            "timestamp_mode": self.timestamp_mode,
            "window": self.window,
            "counts": {k: self.count(k) for k in keys},
            "fractions": {k: self.fraction(k) for k in keys},
            "errors": {k: self.error(k) for k in keys},
            "accidentals": {
                str(d): {
                    "trials": self.accidental_trials(d),
                    "counts": dict(acc),
                    "fractions": {k: self.accidental_fraction(d, k) for k in acc},
                    "errors": {k: self.accidental_error(d, k) for k in acc},
                }
                for d, acc in sorted(self.accidentals.items())
            },
        }


def _merge_duplicates(stream: ClickStream):
    idx = np.asarray(stream.pulse_index, dtype=np.uint64)
    mask = np.asarray(stream.mask, dtype=np.uint8)
    offs = stream.offsets
    if idx.size and np.any(idx[1:] < idx[:-1]):
        raise UnsortedStreamError("click stream must be sorted by pulse_index")
    if idx.size < 2 or np.all(idx[1:] != idx[:-1]):
        return idx, mask, offs
    starts = np.concatenate(([0], np.nonzero(idx[1:] != idx[:-1])[0] + 1))
    merged_mask = np.bitwise_or.reduceat(mask, starts)
    merged_offs = None
    if offs is not None:
        # keep the first finite offset per channel within each pulse
        merged_offs = np.full((starts.size, 3), np.nan)
        group = np.repeat(np.arange(starts.size), np.diff(np.append(starts, idx.size)))
        for ch in range(3):
            ok = np.nonzero(np.isfinite(offs[:, ch]))[0][::-1]
            merged_offs[group[ok], ch] = offs[ok, ch]
    return idx[starts], merged_mask, merged_offs


def _has(mask: np.ndarray, channels: Iterable[str]) -> np.ndarray:
    bits = 0
    for c in channels:
        bits |= CHANNEL_BITS[c]
    return (mask & bits) == bits


def _within(offs: np.ndarray, cols, window: float) -> np.ndarray:
    vals = offs[:, cols]
    return (np.nanmax(vals, axis=1) - np.nanmin(vals, axis=1)) <= window


def count(stream: ClickStream, offsets: Iterable[int] = (1,),
          window: Optional[float] = None) -> CoincidenceReport:
    """Singles, same-pulse coincidences and shifted-pulse accidentals."""
    offsets = sorted(set(int(d) for d in offsets))
    if any(d < 1 for d in offsets):
        raise ValueError("accidental offsets must be >= 1")
    idx, mask, offs = _merge_duplicates(stream)
    timestamp = offs is not None
    if timestamp and window is None:
        window = 1e-9
    col = {c: i for i, c in enumerate(CHANNELS)}

    def coincident(sel: np.ndarray, channels) -> np.ndarray:
        if not timestamp or len(channels) < 2:
            return sel
        out = sel.copy()
        rows = np.nonzero(sel)[0]
        if rows.size:
            out[rows] = _within(offs[rows], [col[c] for c in channels], window)
        return out

    singles = {c: int(np.count_nonzero(mask & CHANNEL_BITS[c])) for c in CHANNELS}
    pairs = {}
    for key in PAIRS:
        chans = key.split("&")
        pairs[key] = int(np.count_nonzero(coincident(_has(mask, chans), chans)))
    triple = int(np.count_nonzero(coincident(_has(mask, CHANNELS), CHANNELS)))

    accidentals = {}
    for d in offsets:
        acc = {}
        for key in ACCIDENTAL_KEYS:
            first, later = key.split(">")
            later_ch = later.split("&")
            src = np.nonzero(mask & CHANNEL_BITS[first])[0]
            target = idx[src] + np.uint64(d)
            pos = np.searchsorted(idx, target)
            pos_c = np.minimum(pos, max(idx.size - 1, 0))
            hit = (pos < idx.size) & (idx[pos_c] == target) if idx.size else np.zeros(0, bool)
            hit &= _has(mask[pos_c], later_ch) if idx.size else hit
            if timestamp and hit.any():
                rows = np.nonzero(hit)[0]
                vals = np.column_stack([offs[src[rows], col[first]]]
                                       + [offs[pos_c[rows], col[c]] for c in later_ch])
                spread = vals.max(axis=1) - vals.min(axis=1)
                hit[rows] = spread <= window
            acc[key] = int(np.count_nonzero(hit))
        accidentals[d] = acc

    return CoincidenceReport(stream.pulses, singles, pairs, triple, accidentals,
                             timestamp, window if timestamp else None)


@dataclass(frozen=True)
class HigherOrderEstimate:
    value: float
    error: float
    flags: tuple = ()
    mean_photon: Optional[float] = None


def estimate_higher_order_ratio(report: CoincidenceReport, eta_i1: Optional[float] = None,
                                max_mean_photon: float = 1.0) -> HigherOrderEstimate:
    """Empirical higher-order ratio from same-pulse triples and offset-1 accidentals.

    A three-fold event in pulse ``n+1`` joined with an idler-1 click of pulse
    ``n`` is as likely as one where a two-pair pulse's *other* idler photon
    provides the idler-1 click. The partner idler of a two-pair pulse adds the
    same amount again, less the share where both idlers fire, so the
    multi-pair contribution is ``(2 - eta_i1)`` times the offset-1 accidentals
    (``2`` if ``eta_i1`` is unknown). The estimate is ``T / (T - A)``.

    Holds while two-pair pulses dominate the multi-pair background; with
    ``eta_i1`` given, the mean photon number is inferred from the idler-1
    singles and ``"out_of_band"`` is flagged above ``max_mean_photon``.
    """
    if 1 not in report.accidentals:
        raise ValueError("report lacks offset-1 accidentals")
    flags = []
    n = report.pulses
    t = report.triple / n
    trials = report.accidental_trials(1)
    acc = report.accidentals[1]["i1>s2&i2"] / trials if trials else 0.0
    factor = 2.0 - eta_i1 if eta_i1 is not None else 2.0
    a = factor * acc

    mean_photon = None
    if eta_i1 is not None and eta_i1 > 0:
        p_i1 = report.fraction("i1")
        mean_photon = -math.log1p(-p_i1) / eta_i1 if p_i1 < 1 else math.inf
        if mean_photon > max_mean_photon:
            flags.append("out_of_band")

    if report.triple == 0 or t - a <= 0:
        flags.append("undefined")
        return HigherOrderEstimate(math.nan, math.nan, tuple(flags), mean_photon)

    value = t / (t - a)
    sigma_t = math.sqrt(t / n)
    sigma_a = factor * math.sqrt(acc / trials) if trials else 0.0
    error = math.hypot(a * sigma_t, t * sigma_a) / (t - a) ** 2
    return HigherOrderEstimate(value, error, tuple(flags), mean_photon)
