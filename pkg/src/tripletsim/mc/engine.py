"""Pulse-level Monte Carlo of the cascaded source.

Per pulse: ``m ~ Poisson(<m>)`` primary pairs; each signal-1 photon converts
with probability ``P_PDC,2``; each secondary pair's s2 and i2 photon and each
of the ``m`` idler-1 photons is detected independently with its arm
efficiency; ``m' ~ Poisson(<m'>)`` leaked higher-order idler photons are each
routed to at most one secondary arm; every detector also fires on noise.
Detector output is the OR of all causes.

Only pulses with at least one click are recorded. The stream is a pure
function of ``(seed, config)`` and does not depend on how the pulse range is
partitioned.
"""
from __future__ import annotations

import io
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Union

import numpy as np

from ..coincidence import pattern_probabilities
from ..params import SourceParameters
from . import _rng
from .backend import get_kernel
from .tables import build_tables

CHUNK = 1 << 20
MASK_I1, MASK_S2, MASK_I2 = 1, 2, 4
CHANNEL_BITS = {"i1": MASK_I1, "s2": MASK_S2, "i2": MASK_I2}

BINARY_MAGIC = b"TRPLCLK1"
_HEADER = struct.Struct("<8sQB")  # magic, total pulses, flags (bit0: offsets present)
_RECORD = np.dtype([("pulse_index", "<u8"), ("mask", "u1")])
_RECORD_T = np.dtype([("pulse_index", "<u8"), ("mask", "u1"), ("offsets", "<f8", (3,))])


class ResourceLimitError(RuntimeError):
    """The requested run would exceed the configured stream size cap."""


@dataclass(frozen=True)
class SimulationConfig:
    pulses: int
    seed: int = 0
    jitter_sigma: float = 0.0
    physics: SourceParameters = field(default_factory=SourceParameters)
    max_stream_bytes: int = 2 << 30
    backend: Optional[str] = None

    def __post_init__(self):
        if self.pulses < 1:
            raise ValueError("pulses must be >= 1")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")


class ClickRecord(NamedTuple):
    pulse_index: int
    i1: bool
    s2: bool
    i2: bool
    offsets: Optional[tuple] = None


@dataclass
class ClickStream:
    """Columnar click stream: one entry per pulse with at least one click."""

    pulses: int
    pulse_index: np.ndarray
    mask: np.ndarray
    offsets: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.pulse_index.size

    @property
    def has_offsets(self) -> bool:
        return self.offsets is not None

    def records(self) -> Iterator[ClickRecord]:
        for i in range(len(self)):
            mk = int(self.mask[i])
            offs = None if self.offsets is None else tuple(float(x) for x in self.offsets[i])
            yield ClickRecord(int(self.pulse_index[i]), bool(mk & MASK_I1),
                              bool(mk & MASK_S2), bool(mk & MASK_I2), offs)

    def channel_count(self, channel: str) -> int:
        return int(np.count_nonzero(self.mask & CHANNEL_BITS[channel]))

    def equals(self, other: "ClickStream") -> bool:
        if self.pulses != other.pulses or not np.array_equal(self.pulse_index, other.pulse_index):
            return False
        if not np.array_equal(self.mask, other.mask):
            return False
        if (self.offsets is None) != (other.offsets is None):
            return False
        return self.offsets is None or np.array_equal(self.offsets, other.offsets, equal_nan=True)

    @classmethod
    def from_records(cls, pulses: int, records) -> "ClickStream":
        records = list(records)
        idx = np.array([r.pulse_index for r in records], dtype=np.uint64)
        mask = np.array([r.i1 * MASK_I1 | r.s2 * MASK_S2 | r.i2 * MASK_I2 for r in records],
                        dtype=np.uint8)
        offsets = None
        if records and records[0].offsets is not None:
            offsets = np.array([r.offsets for r in records], dtype=float).reshape(-1, 3)
        return cls(pulses, idx, mask, offsets)

    @classmethod
    def concatenate(cls, pulses: int, parts) -> "ClickStream":
        parts = list(parts)
        idx = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, np.uint64)
        mask = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, np.uint8)
        offsets = None
        if parts and parts[0][2] is not None:
            offsets = np.concatenate([p[2] for p in parts])
        return cls(pulses, idx, mask, offsets)


def _record_bytes(jitter: bool) -> int:
    return (_RECORD_T if jitter else _RECORD).itemsize


def check_resources(cfg: SimulationConfig) -> None:
    """Raise :class:`ResourceLimitError` if the expected stream (plus a
    6-sigma margin) would exceed ``cfg.max_stream_bytes``."""
    pat = pattern_probabilities(cfg.physics, dps=20)
    p_any = (pat["i1"] + pat["s2"] + pat["i2"] - pat["i1&s2"] - pat["i1&i2"]
             - pat["s2&i2"] + pat["i1&s2&i2"])
    expected = cfg.pulses * p_any
    records = expected + 6.0 * math.sqrt(max(expected, 1.0))
    need = records * _record_bytes(cfg.jitter_sigma > 0)
    if need > cfg.max_stream_bytes:
        raise ResourceLimitError(
            f"{cfg.pulses} pulses would produce ~{need / 2**20:.0f} MiB of click records, "
            f"above the {cfg.max_stream_bytes / 2**20:.0f} MiB cap")


def _run_range(kernel, start: int, stop: int, key: int, tables) -> list:
    out = []
    for lo in range(start, stop, CHUNK):
        out.append(kernel(lo, min(lo + CHUNK, stop), key, tables))
    return out


def simulate(cfg: SimulationConfig) -> ClickStream:
    """Run the whole pulse range in one thread."""
    return simulate_batch_parallel(cfg, partitions=1)


def simulate_batch_parallel(cfg: SimulationConfig, partitions: int) -> ClickStream:
    """Split the pulse range into ``partitions`` contiguous blocks run concurrently.

    Draws are keyed by pulse index, so the merged stream is identical to
    :func:`simulate` for every partition count.
    """
    if partitions < 1:
        raise ValueError("partitions must be >= 1")
    check_resources(cfg)
    kernel = get_kernel(cfg.backend)
    tables = build_tables(cfg.physics, cfg.jitter_sigma)
    key = _rng.seed_key(cfg.seed)
    n = cfg.pulses
    partitions = min(partitions, n)
    bounds = [n * i // partitions for i in range(partitions + 1)]
    if partitions == 1:
        chunks = _run_range(kernel, 0, n, key, tables)
    else:
        with ThreadPoolExecutor(max_workers=partitions) as pool:
            futures = [pool.submit(_run_range, kernel, bounds[i], bounds[i + 1], key, tables)
                       for i in range(partitions)]
            chunks = [c for f in futures for c in f.result()]
    return ClickStream.concatenate(n, chunks)


# -- I/O ---------------------------------------------------------------------

def write_binary(stream: ClickStream, path: Union[str, Path]) -> None:
    """Little-endian records ``u64 pulse_index, u8 mask[, 3 x f64 offsets]`` after a header."""
    jitter = stream.has_offsets
    rec = np.zeros(len(stream), dtype=_RECORD_T if jitter else _RECORD)
    rec["pulse_index"] = stream.pulse_index
    rec["mask"] = stream.mask
    if jitter:
        rec["offsets"] = stream.offsets
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BINARY_MAGIC, stream.pulses, 1 if jitter else 0))
        fh.write(rec.tobytes())


def read_binary(path: Union[str, Path]) -> ClickStream:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("truncated click stream header")
    magic, pulses, flags = _HEADER.unpack_from(data)
    if magic != BINARY_MAGIC:
        raise ValueError("not a click stream file (bad magic)")
    jitter = bool(flags & 1)
    dtype = _RECORD_T if jitter else _RECORD
    body = data[_HEADER.size:]
    if len(body) % dtype.itemsize:
        raise ValueError("click stream body is not a whole number of records")
    rec = np.frombuffer(body, dtype=dtype)
    offsets = rec["offsets"].astype(float) if jitter else None
    return ClickStream(int(pulses), rec["pulse_index"].astype(np.uint64),
                       rec["mask"].astype(np.uint8), offsets)


def write_csv(stream: ClickStream, path: Union[str, Path]) -> None:
    buf = io.StringIO()
    buf.write(f"# pulses={stream.pulses}\n")
    cols = ["pulse_index", "i1", "s2", "i2"]
    if stream.has_offsets:
        cols += ["t_i1", "t_s2", "t_i2"]
    buf.write(",".join(cols) + "\n")
    for r in stream.records():
        row = [str(r.pulse_index), str(int(r.i1)), str(int(r.s2)), str(int(r.i2))]
        if r.offsets is not None:
            row += ["" if math.isnan(x) else repr(x) for x in r.offsets]
        buf.write(",".join(row) + "\n")
    Path(path).write_text(buf.getvalue())


def read_csv(path: Union[str, Path]) -> ClickStream:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# pulses="):
        raise ValueError("click stream CSV must start with '# pulses=N'")
    pulses = int(lines[0].split("=", 1)[1])
    header = lines[1].split(",")
    jitter = len(header) == 7
    records = []
    for line in lines[2:]:
        if not line.strip():
            continue
        f = line.split(",")
        offs = None
        if jitter:
            offs = tuple(math.nan if x == "" else float(x) for x in f[4:7])
        records.append(ClickRecord(int(f[0]), f[1] == "1", f[2] == "1", f[3] == "1", offs))
    stream = ClickStream.from_records(pulses, records)
    if jitter and stream.offsets is None:
        stream.offsets = np.zeros((0, 3))
    return stream
