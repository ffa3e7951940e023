"""Align camera frames with CSI packets and map frame-indexed activity
annotations onto packet ranges.

Annotation records travel as JSON Lines, one activity span per line, with
required keys ``label``, ``start_frame``, ``end_frame``, ``env_id``,
``person_id``, ``session_id`` (frame indices inclusive). Camera frame
timestamps live in a separate JSON array of microsecond values.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, EmptyInputError, UnalignedFrameError

# one camera frame period at 10 fps
DEFAULT_TOLERANCE_US = 100_000


@dataclass(frozen=True)
class Annotation:
    """One labeled activity span in camera-frame indices (inclusive)."""

    label: str
    start_frame: int
    end_frame: int
    env_id: int
    person_id: int
    session_id: int

    def __post_init__(self):
        if self.start_frame > self.end_frame:
            raise ValueError(
                f"start_frame {self.start_frame} > end_frame {self.end_frame}"
            )


@dataclass(frozen=True)
class PacketRange:
    """Inclusive index range into the time-sorted CSI packet stream."""

    start_idx: int
    end_idx: int

    def __post_init__(self):
        if self.start_idx > self.end_idx:
            raise ValueError(f"start_idx {self.start_idx} > end_idx {self.end_idx}")

    def __len__(self) -> int:
        return self.end_idx - self.start_idx + 1


@dataclass(frozen=True)
class LabeledSpan:
    """A class-labeled packet range plus its (env, person, session) domain."""

    label: int
    start_idx: int
    end_idx: int
    domain: tuple[int, int, int]


@dataclass(frozen=True)
class Alignment:
    """frame index -> nearest packet index, with out-of-tolerance frames
    listed in ``unmatched``."""

    packet_idx: np.ndarray
    delta_us: np.ndarray
    unmatched: frozenset[int]

    def packet_for(self, frame: int) -> int:
        if frame < 0 or frame >= len(self.packet_idx) or frame in self.unmatched:
            raise UnalignedFrameError(f"camera frame {frame} has no matched packet")
        return int(self.packet_idx[frame])


def align(
    frame_ts: Sequence[int],
    csi_ts: Sequence[int],
    tolerance_us: int = DEFAULT_TOLERANCE_US,
    remove_offset: bool = False,
) -> Alignment:
    """Map each camera frame to the CSI packet minimizing \\|delta t\\|.

    Both timestamp lists must be sorted ascending and nonempty. Ties go to
    the earlier packet. Frames whose best match is farther than
    ``tolerance_us`` are reported unmatched rather than dropped silently.
    ``remove_offset`` first subtracts the median delta, for captures whose
    camera host clock was not synchronized to the receiver.
    """
    f = np.asarray(frame_ts, dtype=np.int64)
    c = np.asarray(csi_ts, dtype=np.int64)
    if f.size == 0 or c.size == 0:
        raise EmptyInputError("align needs nonempty frame and packet timestamps")

    if remove_offset:
        probe = _nearest(f, c)
        offset = np.median(c[probe] - f)
        f = f + np.int64(offset)

    idx = _nearest(f, c)
    delta = np.abs(c[idx] - f)
    unmatched = frozenset(int(i) for i in np.nonzero(delta > tolerance_us)[0])
    return Alignment(idx, delta, unmatched)


def _nearest(f: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Index into sorted ``c`` of the nearest value to each entry of ``f``;
    ties resolve to the earlier (smaller) index."""
    right = np.searchsorted(c, f, side="left")
    left = np.clip(right - 1, 0, c.size - 1)
    right = np.clip(right, 0, c.size - 1)
    d_left = np.abs(c[left] - f)
    d_right = np.abs(c[right] - f)
    return np.where(d_left <= d_right, left, right)


def to_packet_ranges(
    annotations: Sequence[Annotation],
    alignment: Alignment,
    label_ids: dict[str, int],
) -> tuple[list[LabeledSpan], list[str]]:
    """Convert frame-indexed annotations into labeled packet spans.

    Returns the spans plus warning strings for annotations that collapsed
    to an empty range after mapping (start packet beyond end packet).
    Raises UnalignedFrameError when an annotation touches an unmatched
    frame and KeyError for labels missing from ``label_ids``.
    """
    spans: list[LabeledSpan] = []
    warnings: list[str] = []
    for ann in annotations:
        start = alignment.packet_for(ann.start_frame)
        end = alignment.packet_for(ann.end_frame)
        if start > end:
            warnings.append(
                f"annotation {ann.label!r} frames [{ann.start_frame}, {ann.end_frame}] "
                f"maps to empty packet range [{start}, {end}]; dropped"
            )
            continue
        spans.append(
            LabeledSpan(
                label=label_ids[ann.label],
                start_idx=start,
                end_idx=end,
                domain=(ann.env_id, ann.person_id, ann.session_id),
            )
        )
    return spans, warnings


# -- file I/O -----------------------------------------------------------------

_REQUIRED_KEYS = ("label", "start_frame", "end_frame", "env_id", "person_id", "session_id")


def write_annotations(path: str | Path, annotations: Sequence[Annotation]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(json.dumps({
                "label": ann.label,
                "start_frame": ann.start_frame,
                "end_frame": ann.end_frame,
                "env_id": ann.env_id,
                "person_id": ann.person_id,
                "session_id": ann.session_id,
            }) + "\n")


def read_annotations(path: str | Path) -> list[Annotation]:
    annotations = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            for key in _REQUIRED_KEYS:
                if key not in rec:
                    raise ConfigError(f"{path}:{lineno}: missing required key {key!r}")
            annotations.append(Annotation(
                label=str(rec["label"]),
                start_frame=int(rec["start_frame"]),
                end_frame=int(rec["end_frame"]),
                env_id=int(rec["env_id"]),
                person_id=int(rec["person_id"]),
                session_id=int(rec["session_id"]),
            ))
    return annotations


def write_camera_timestamps(path: str | Path, ts_us: Sequence[int]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([int(t) for t in ts_us], fh)
        fh.write("\n")


def read_camera_timestamps(path: str | Path) -> list[int]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ConfigError(f"{path}: camera timestamps must be a JSON array")
    return [int(t) for t in data]
