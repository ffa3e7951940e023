"""In-memory labeled sample set shared by the classifier, the embedding and
the shift experiments, with tensor-container persistence."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyDatasetError
from .spectrogram import ActivitySample
from .tensorfile import read_sidecar, read_tensor, write_sidecar, write_tensor


@dataclass
class LabeledDataset:
    """Windowed activity samples as stacked arrays.

    ``X`` is (n, rows, 242) float64, ``y`` class ids, ``domains`` the
    (env_id, person_id, session_id) triples, ``start_packets`` each
    window's first packet index within its session (for time-ordered
    splits).
    """

    X: np.ndarray
    y: np.ndarray
    domains: np.ndarray
    start_packets: np.ndarray
    class_names: list[str]

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.domains = np.asarray(self.domains, dtype=np.int64)
        self.start_packets = np.asarray(self.start_packets, dtype=np.int64)
        if self.X.ndim != 3:
            raise ValueError(f"X must be (n, rows, bins), got {self.X.shape}")
        n = self.X.shape[0]
        if not (self.y.shape == (n,) and self.domains.shape == (n, 3)
                and self.start_packets.shape == (n,)):
            raise ValueError("X, y, domains and start_packets disagree on sample count")

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            self.X[idx], self.y[idx], self.domains[idx],
            self.start_packets[idx], list(self.class_names),
        )

    @staticmethod
    def from_samples(
        samples: Sequence[ActivitySample], class_names: Sequence[str]
    ) -> "LabeledDataset":
        if not samples:
            raise EmptyDatasetError("no activity samples")
        return LabeledDataset(
            X=np.stack([s.window for s in samples]),
            y=np.array([s.label for s in samples]),
            domains=np.array([s.domain for s in samples]),
            start_packets=np.array([s.start_packet for s in samples]),
            class_names=list(class_names),
        )

    def save(self, tensor_path: str | Path) -> None:
        """Write samples.tns plus a .json sidecar next to it."""
        tensor_path = Path(tensor_path)
        write_tensor(tensor_path, self.X)
        write_sidecar(tensor_path.with_suffix(".json"), {
            "labels": self.y.tolist(),
            "domains": self.domains.tolist(),
            "start_packets": self.start_packets.tolist(),
            "class_names": self.class_names,
        })

    @staticmethod
    def load(tensor_path: str | Path) -> "LabeledDataset":
        tensor_path = Path(tensor_path)
        X = read_tensor(tensor_path).astype(np.float64)
        meta = read_sidecar(tensor_path.with_suffix(".json"))
        return LabeledDataset(
            X=X,
            y=np.array(meta["labels"]),
            domains=np.array(meta["domains"]),
            start_packets=np.array(meta["start_packets"]),
            class_names=list(meta["class_names"]),
        )


def concat_datasets(parts: Sequence[LabeledDataset]) -> LabeledDataset:
    if not parts:
        raise EmptyDatasetError("nothing to concatenate")
    names = parts[0].class_names
    for p in parts[1:]:
        if p.class_names != names:
            raise ValueError("datasets use different class name tables")
    return LabeledDataset(
        X=np.concatenate([p.X for p in parts]),
        y=np.concatenate([p.y for p in parts]),
        domains=np.concatenate([p.domains for p in parts]),
        start_packets=np.concatenate([p.start_packets for p in parts]),
        class_names=list(names),
    )
