"""Capture container: parse, validate, serialize and order raw CSI packets.

File layout (all little-endian)
-------------------------------
Header, 20 bytes::

    magic "CSI1" (4s) | version u16 | n_ant u8 | pad u8 |
    sample_rate_pps u32 | frame_count u64

Frame, 1036 bytes::

    timestamp_us u64 | seq_no u16 | antenna_id u8 | pad u8 |
    256 x (real i16, imag i16)

I/Q values are signed 16-bit fixed point on the wire and are converted to
complex128 on load. A frame round-trips bit-exactly through
``parse_frame(encode_frame(f))``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    FrameCountMismatchError,
    InvalidAntennaError,
    TruncatedFrameError,
)

MAGIC = b"CSI1"
N_SUBCARRIERS = 256
HEADER_STRUCT = struct.Struct("<4sHBBIQ")
FRAME_HEAD_STRUCT = struct.Struct("<QHBB")
FRAME_SIZE = FRAME_HEAD_STRUCT.size + N_SUBCARRIERS * 4
IQ_DTYPE = np.dtype("<i2")


@dataclass(frozen=True)
class CaptureHeader:
    version: int
    n_ant: int
    sample_rate_pps: int
    frame_count: int

    def encode(self) -> bytes:
        return HEADER_STRUCT.pack(
            MAGIC, self.version, self.n_ant, 0, self.sample_rate_pps, self.frame_count
        )


@dataclass(frozen=True)
class CsiFrame:
    """One received packet's channel estimate.

    ``subcarriers`` is a length-256 complex128 array whose real/imag parts
    must be integral and in the i16 range for the frame to be encodable.
    """

    timestamp_us: int
    seq_no: int
    antenna_id: int
    subcarriers: np.ndarray

    def __post_init__(self):
        sc = np.asarray(self.subcarriers, dtype=np.complex128)
        if sc.shape != (N_SUBCARRIERS,):
            raise TruncatedFrameError(
                f"expected {N_SUBCARRIERS} subcarriers, got shape {sc.shape}"
            )
        object.__setattr__(self, "subcarriers", sc)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CsiFrame):
            return NotImplemented
        return (
            self.timestamp_us == other.timestamp_us
            and self.seq_no == other.seq_no
            and self.antenna_id == other.antenna_id
            and np.array_equal(self.subcarriers, other.subcarriers)
        )


def parse_frame(data: bytes, n_ant: int = 4) -> CsiFrame:
    """Parse one wire-format frame.

    Raises TruncatedFrameError if ``data`` is shorter than a frame and
    InvalidAntennaError if the antenna id is >= ``n_ant``. Trailing bytes
    beyond the fixed frame size are ignored (callers slice per frame).
    """
    if len(data) < FRAME_SIZE:
        raise TruncatedFrameError(f"frame needs {FRAME_SIZE} bytes, got {len(data)}")
    timestamp_us, seq_no, antenna_id, _pad = FRAME_HEAD_STRUCT.unpack_from(data, 0)
    if antenna_id >= n_ant:
        raise InvalidAntennaError(f"antenna_id {antenna_id} >= n_ant {n_ant}")
    iq = np.frombuffer(
        data, dtype=IQ_DTYPE, count=N_SUBCARRIERS * 2, offset=FRAME_HEAD_STRUCT.size
    ).astype(np.float64)
    subcarriers = iq[0::2] + 1j * iq[1::2]
    return CsiFrame(timestamp_us, seq_no, antenna_id, subcarriers)


def encode_frame(frame: CsiFrame) -> bytes:
    """Serialize a frame to its 1036-byte wire form.

    The I/Q values must be integral and within the i16 range; anything else
    would not round-trip and raises ValueError.
    """
    re = frame.subcarriers.real
    im = frame.subcarriers.imag
    iq = np.empty(N_SUBCARRIERS * 2, dtype=np.float64)
    iq[0::2] = re
    iq[1::2] = im
    if not np.all(iq == np.rint(iq)):
        raise ValueError("subcarrier I/Q values must be integral to encode")
    if iq.min() < -32768 or iq.max() > 32767:
        raise ValueError("subcarrier I/Q values exceed the i16 range")
    head = FRAME_HEAD_STRUCT.pack(
        frame.timestamp_us, frame.seq_no, frame.antenna_id, 0
    )
    return head + iq.astype(IQ_DTYPE).tobytes()


def write_capture(
    path: str | Path,
    frames: Sequence[CsiFrame],
    n_ant: int,
    sample_rate_pps: int,
    version: int = 1,
) -> CaptureHeader:
    """Write frames to ``path`` in capture-container format."""
    header = CaptureHeader(version, n_ant, sample_rate_pps, len(frames))
    with open(path, "wb") as fh:
        fh.write(header.encode())
        for frame in frames:
            if frame.antenna_id >= n_ant:
                raise InvalidAntennaError(
                    f"antenna_id {frame.antenna_id} >= n_ant {n_ant}"
                )
            fh.write(encode_frame(frame))
    return header


def read_capture(path: str | Path) -> tuple[CaptureHeader, list[CsiFrame]]:
    """Read a capture file, returning its header and frames in file order.

    Raises BadMagicError, FrameCountMismatchError (declared count does not
    match the payload, including trailing bytes) or InvalidAntennaError.
    I/O failures propagate as OSError.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER_STRUCT.size:
        raise TruncatedFrameError(
            f"capture header needs {HEADER_STRUCT.size} bytes, got {len(blob)}"
        )
    magic, version, n_ant, _pad, rate, frame_count = HEADER_STRUCT.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagicError(f"expected magic {MAGIC!r}, got {magic!r}")
    header = CaptureHeader(version, n_ant, rate, frame_count)

    payload = len(blob) - HEADER_STRUCT.size
    if payload != frame_count * FRAME_SIZE:
        raise FrameCountMismatchError(
            f"header declares {frame_count} frames "
            f"({frame_count * FRAME_SIZE} bytes), payload has {payload} bytes"
        )
    frames = []
    offset = HEADER_STRUCT.size
    for _ in range(frame_count):
        frames.append(parse_frame(blob[offset : offset + FRAME_SIZE], n_ant=n_ant))
        offset += FRAME_SIZE
    return header, frames


def _modular_seq_order(seqs: list[int]) -> list[int]:
    """Rank equal-timestamp frames by 16-bit sequence number, wrap-aware.

    Packets sent within one second never span more than half the counter
    range at 200 pps, so ordering by modular distance from a common anchor
    is exact.
    """
    ref = seqs[0]
    d = [(s - ref) & 0xFFFF for s in seqs]
    if max(d) >= 0x8000:
        d = [(x + 0x8000) & 0xFFFF for x in d]
    return d


def group_by_antenna(
    frames: Iterable[CsiFrame], n_ant: int | None = None
) -> dict[int, list[CsiFrame]]:
    """Partition frames by antenna id, each group time-sorted.

    Within a group, ties on ``timestamp_us`` are broken by wrap-aware
    sequence number. If ``n_ant`` is given, ids >= n_ant raise
    InvalidAntennaError; otherwise every id is accepted.
    """
    groups: dict[int, list[CsiFrame]] = {}
    for frame in frames:
        if n_ant is not None and frame.antenna_id >= n_ant:
            raise InvalidAntennaError(
                f"antenna_id {frame.antenna_id} >= n_ant {n_ant}"
            )
        groups.setdefault(frame.antenna_id, []).append(frame)

    for ant, group in groups.items():
        group.sort(key=lambda f: f.timestamp_us)
        # fix ordering inside equal-timestamp runs
        out: list[CsiFrame] = []
        i = 0
        while i < len(group):
            j = i
            while j < len(group) and group[j].timestamp_us == group[i].timestamp_us:
                j += 1
            run = group[i:j]
            if len(run) > 1:
                ranks = _modular_seq_order([f.seq_no for f in run])
                run = [f for _, f in sorted(zip(ranks, run), key=lambda t: t[0])]
            out.extend(run)
            i = j
        groups[ant] = out
    return groups


# -- import adapter for foreign router dumps ---------------------------------

_TS_KINDS = {
    "u64_us": (8, lambda b: int.from_bytes(b, "little")),
    "u32_us": (4, lambda b: int.from_bytes(b, "little")),
    # seconds u32 followed by microseconds u32, as written by gettimeofday
    "u32_s_u32_us": (
        8,
        lambda b: int.from_bytes(b[:4], "little") * 1_000_000
        + int.from_bytes(b[4:], "little"),
    ),
}


@dataclass(frozen=True)
class ForeignCaptureMap:
    """Field table describing a fixed-record foreign CSI dump.

    Vendor capture tools emit raw records whose byte layout varies by
    firmware build, so the offsets are configuration, not constants.
    ``antenna_order`` applies when the records carry no antenna field:
    ``round_robin`` assigns record i to antenna i % n_ant (antennas
    interleaved per transmission), ``blocks`` splits the file into n_ant
    consecutive equal runs (one burst per antenna).
    """

    record_bytes: int
    csi_offset: int
    timestamp_offset: int
    timestamp_kind: str = "u64_us"
    header_bytes: int = 0
    seq_offset: int | None = None
    antenna_offset: int | None = None
    antenna_order: str = "round_robin"
    n_ant: int = 1
    sample_rate_pps: int = 200


def import_foreign(path: str | Path, fmap: ForeignCaptureMap) -> tuple[CaptureHeader, list[CsiFrame]]:
    """Map a foreign fixed-record dump into capture-container frames."""
    if fmap.timestamp_kind not in _TS_KINDS:
        raise ValueError(f"unknown timestamp_kind {fmap.timestamp_kind!r}")
    if fmap.antenna_order not in ("round_robin", "blocks"):
        raise ValueError(f"unknown antenna_order {fmap.antenna_order!r}")
    ts_size, ts_decode = _TS_KINDS[fmap.timestamp_kind]
    need = max(
        fmap.csi_offset + N_SUBCARRIERS * 4, fmap.timestamp_offset + ts_size
    )
    if need > fmap.record_bytes:
        raise ValueError("field offsets exceed record_bytes")

    with open(path, "rb") as fh:
        blob = fh.read()
    body = blob[fmap.header_bytes :]
    n_records = len(body) // fmap.record_bytes
    if n_records * fmap.record_bytes != len(body):
        raise TruncatedFrameError(
            f"{len(body)} payload bytes is not a multiple of record size "
            f"{fmap.record_bytes}"
        )

    frames = []
    for i in range(n_records):
        rec = body[i * fmap.record_bytes : (i + 1) * fmap.record_bytes]
        ts = ts_decode(rec[fmap.timestamp_offset : fmap.timestamp_offset + ts_size])
        seq = (
            int.from_bytes(rec[fmap.seq_offset : fmap.seq_offset + 2], "little")
            if fmap.seq_offset is not None
            else i & 0xFFFF
        )
        if fmap.antenna_offset is not None:
            ant = rec[fmap.antenna_offset]
        elif fmap.antenna_order == "round_robin":
            ant = i % fmap.n_ant
        else:
            ant = min(i // max(1, n_records // fmap.n_ant), fmap.n_ant - 1)
        if ant >= fmap.n_ant:
            raise InvalidAntennaError(f"antenna_id {ant} >= n_ant {fmap.n_ant}")
        iq = np.frombuffer(
            rec, dtype=IQ_DTYPE, count=N_SUBCARRIERS * 2, offset=fmap.csi_offset
        ).astype(np.float64)
        frames.append(CsiFrame(ts, seq, ant, iq[0::2] + 1j * iq[1::2]))

    header = CaptureHeader(1, fmap.n_ant, fmap.sample_rate_pps, len(frames))
    return header, frames
