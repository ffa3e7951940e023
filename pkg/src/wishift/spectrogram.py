"""Turn ordered CSI packets into pruned, normalized amplitude spectrograms.

The chain per packet and antenna is: 256-point FFT over the subcarrier
vector, complex magnitude, removal of the 14 control bins. Stacking those
rows packet-major, antenna-minor gives a matrix of shape
``(n_packets * n_ant) x 242``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .capture import CsiFrame, N_SUBCARRIERS
from .errors import (
    BadLengthError,
    BadWindowError,
    EmptyCaptureError,
    NonFiniteInputError,
    UnequalGroupLengthsError,
)

M_DATA_BINS = 242

# Null and guard bins of the 80 MHz OFDM layout, in centered indexing:
# DC nulls {-1, 0, +1} plus edge guards {-128..-123} and {+123..+127}.
# Mapped to FFT bin numbers (centered index c -> bin c mod 256):
CONTROL_BINS = frozenset(
    {255, 0, 1} | set(range(128, 134)) | set(range(123, 128))
)
_KEEP_BINS = np.array(
    [k for k in range(N_SUBCARRIERS) if k not in CONTROL_BINS], dtype=np.intp
)
assert _KEEP_BINS.size == M_DATA_BINS

_BITREV = np.array(
    [int(f"{i:08b}"[::-1], 2) for i in range(N_SUBCARRIERS)], dtype=np.intp
)
_TWIDDLES = {
    m: np.exp(-2j * np.pi * np.arange(m // 2) / m)
    for m in (2, 4, 8, 16, 32, 64, 128, 256)
}


def fft256(x: np.ndarray) -> np.ndarray:
    """256-point DFT, unnormalized forward convention.

    Radix-2 decimation in time, vectorized over leading axes: ``x`` may be
    a single length-256 vector or any array whose last axis has length 256.
    """
    a = np.asarray(x, dtype=np.complex128)
    if a.shape[-1] != N_SUBCARRIERS:
        raise BadLengthError(f"fft256 needs length {N_SUBCARRIERS} input, got {a.shape[-1]}")
    a = a[..., _BITREV]
    lead = a.shape[:-1]
    m = 2
    while m <= N_SUBCARRIERS:
        half = m // 2
        a = a.reshape(lead + (N_SUBCARRIERS // m, m))
        even = a[..., :half]
        odd = a[..., half:] * _TWIDDLES[m]
        a = np.concatenate((even + odd, even - odd), axis=-1)
        m *= 2
    return a.reshape(lead + (N_SUBCARRIERS,))


def prune_control(bins: np.ndarray, remove: frozenset[int] | None = None) -> np.ndarray:
    """Drop the 14 control bins, keeping the 242 data bins in order.

    ``remove`` overrides the default null/guard set; it must leave 242
    survivors. Works on a single row or any array with bins on the last
    axis.
    """
    a = np.asarray(bins)
    if a.shape[-1] != N_SUBCARRIERS:
        raise BadLengthError(f"prune_control needs {N_SUBCARRIERS} bins, got {a.shape[-1]}")
    if remove is None:
        keep = _KEEP_BINS
    else:
        keep = np.array([k for k in range(N_SUBCARRIERS) if k not in remove], dtype=np.intp)
        if keep.size != M_DATA_BINS:
            raise ValueError(f"removal set must leave {M_DATA_BINS} bins, leaves {keep.size}")
    return a[..., keep]


@dataclass(frozen=True)
class Spectrogram:
    """Amplitude matrix of shape (n_packets * n_ant) x 242 plus timing."""

    data: np.ndarray
    n_packets: int
    n_ant: int
    t0_us: int
    dt_us: float

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2 or d.shape[1] != M_DATA_BINS:
            raise BadLengthError(f"spectrogram must be rows x {M_DATA_BINS}, got {d.shape}")
        if d.shape[0] != self.n_packets * self.n_ant:
            raise BadLengthError(
                f"{d.shape[0]} rows != n_packets {self.n_packets} * n_ant {self.n_ant}"
            )
        if not np.all(np.isfinite(d)):
            raise NonFiniteInputError("spectrogram entries must be finite")
        object.__setattr__(self, "data", d)


def build_spectrogram(
    groups: Mapping[int, Sequence[CsiFrame]],
    transform: str = "fft",
) -> Spectrogram:
    """Build the amplitude spectrogram from per-antenna packet groups.

    Rows are ordered packet-major, antenna-minor (ascending antenna id).
    ``transform="identity"`` skips the FFT and takes raw subcarrier
    magnitudes instead, for side-by-side comparison of the two readings of
    the per-packet transform.
    """
    if transform not in ("fft", "identity"):
        raise ValueError(f"unknown transform {transform!r}")
    if not groups:
        raise EmptyCaptureError("no antenna groups")
    ants = sorted(groups)
    lengths = {len(groups[a]) for a in ants}
    if lengths == {0}:
        raise EmptyCaptureError("antenna groups are empty")
    if len(lengths) != 1:
        raise UnequalGroupLengthsError(
            f"groups have unequal lengths {sorted(lengths)}"
        )
    n_packets = lengths.pop()
    n_ant = len(ants)

    # (n_ant, n_packets, 256) stack, then transform along subcarriers
    raw = np.stack(
        [np.stack([f.subcarriers for f in groups[a]]) for a in ants]
    )
    spectra = fft256(raw) if transform == "fft" else raw
    amps = prune_control(np.abs(spectra))
    # packet-major, antenna-minor: (n_packets, n_ant, 242) -> rows
    data = amps.transpose(1, 0, 2).reshape(n_packets * n_ant, M_DATA_BINS)

    first = groups[ants[0]]
    t0_us = min(int(groups[a][0].timestamp_us) for a in ants)
    if n_packets > 1:
        dt_us = (first[-1].timestamp_us - first[0].timestamp_us) / (n_packets - 1)
    else:
        dt_us = 0.0
    return Spectrogram(data, n_packets, n_ant, t0_us, float(dt_us))


def normalize(spec: Spectrogram, scheme: str = "zscore") -> Spectrogram:
    """Normalize a spectrogram; returns a new one.

    ``zscore`` standardizes each subcarrier column to mean 0, std 1
    (zero-variance columns map to 0), so the result is signed.
    ``maxabs`` divides by the global maximum magnitude.
    """
    d = np.asarray(spec.data, dtype=np.float64)
    if not np.all(np.isfinite(d)):
        raise NonFiniteInputError("normalize requires finite input")
    if scheme == "zscore":
        mu = d.mean(axis=0)
        sd = d.std(axis=0)
        out = np.where(sd > 0.0, (d - mu) / np.where(sd > 0.0, sd, 1.0), 0.0)
    elif scheme == "maxabs":
        peak = np.abs(d).max()
        out = d / peak if peak > 0.0 else d.copy()
    elif scheme == "none":
        out = d.copy()
    else:
        raise ValueError(f"unknown normalization scheme {scheme!r}")
    return _with_data(spec, out)


def _with_data(spec: Spectrogram, data: np.ndarray) -> Spectrogram:
    out = Spectrogram.__new__(Spectrogram)
    object.__setattr__(out, "data", data)
    object.__setattr__(out, "n_packets", spec.n_packets)
    object.__setattr__(out, "n_ant", spec.n_ant)
    object.__setattr__(out, "t0_us", spec.t0_us)
    object.__setattr__(out, "dt_us", spec.dt_us)
    return out


@dataclass(frozen=True)
class ActivitySample:
    """A fixed-length labeled window cut from a spectrogram.

    ``window`` has shape (n_w * n_ant) x 242; ``start_packet`` is the
    packet index of the window's first row, kept for time-ordered splits
    and for recomputing the slice from raw frames.
    """

    window: np.ndarray
    label: int
    domain: tuple[int, int, int]
    start_packet: int


def window_samples(
    spec: Spectrogram,
    spans,
    n_w: int,
    stride: int,
) -> list[ActivitySample]:
    """Cut fixed-length windows from annotated packet spans.

    ``spans`` is an iterable of labeled packet ranges (objects with
    ``label``, ``start_idx``, ``end_idx`` and ``domain`` attributes, both
    indices inclusive). Windows lie fully inside one span and inherit its
    label; a span of length L yields floor((L - n_w) / stride) + 1 windows
    when L >= n_w, else none.
    """
    if n_w < 1 or stride < 1:
        raise ValueError("n_w and stride must be >= 1")
    if n_w > spec.n_packets:
        raise BadWindowError(f"window of {n_w} packets > capture of {spec.n_packets}")
    n_ant = spec.n_ant
    samples = []
    for span in spans:
        start, end = span.start_idx, span.end_idx
        if start < 0 or end >= spec.n_packets or start > end:
            raise ValueError(f"span [{start}, {end}] outside capture of {spec.n_packets} packets")
        span_len = end - start + 1
        if span_len < n_w:
            continue
        for k in range((span_len - n_w) // stride + 1):
            off = start + k * stride
            window = spec.data[off * n_ant : (off + n_w) * n_ant]
            samples.append(
                ActivitySample(window.copy(), span.label, span.domain, off)
            )
    return samples
