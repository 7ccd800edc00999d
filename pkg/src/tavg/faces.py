"""Pluggable face detection: annotation sidecars by default, Haar cascades optionally."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import cv2
import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class FaceBox:
    x: int
    y: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return self.w * self.h


class FaceDetector(Protocol):
    def detect(self, frame: np.ndarray, index: int) -> list:
        """Return zero or more FaceBoxes for the given frame."""
        ...


def clip_box(box: FaceBox, height: int, width: int) -> FaceBox | None:
    """Clamp a box to the frame; None if nothing remains."""
    x0, y0 = max(box.x, 0), max(box.y, 0)
    x1, y1 = min(box.x + box.w, width), min(box.y + box.h, height)
    if x1 <= x0 or y1 <= y0:
        return None
    return FaceBox(x0, y0, x1 - x0, y1 - y0)


class SidecarDetector:
    """Deterministic detector backed by a per-frame annotation JSON file.

    Format: {"boxes": {"<frame index>": [[x, y, w, h], ...], ...}}.
    Frames without an entry have no faces.
    """

    def __init__(self, path):
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise DataError(f"cannot read annotations {path}: {exc}") from exc
        except ValueError as exc:
            raise DataError(f"invalid annotation JSON in {path}: {exc}") from exc
        if not isinstance(data, dict) or "boxes" not in data:
            raise DataError(f"{path}: annotation file must contain a "
                            f"'boxes' mapping")
        self.boxes = {}
        for key, entries in data["boxes"].items():
            self.boxes[int(key)] = [FaceBox(*map(int, e)) for e in entries]

    def detect(self, frame: np.ndarray, index: int) -> list:
        h, w = frame.shape[:2]
        found = (clip_box(b, h, w) for b in self.boxes.get(index, ()))
        return [b for b in found if b is not None]


class HaarCascadeDetector:
    """Adapter over an OpenCV Haar cascade model file."""

    def __init__(self, cascade_path, scale_factor: float = 1.1,
                 min_neighbors: int = 4):
        if not Path(cascade_path).exists():
            raise DataError(f"cascade file not found: {cascade_path}")
        self.cascade = cv2.CascadeClassifier(str(cascade_path))
        if self.cascade.empty():
            raise DataError(f"could not load Haar cascade from {cascade_path}")
        self.scale_factor = scale_factor
        self.min_neighbors = min_neighbors

    def detect(self, frame: np.ndarray, index: int) -> list:
        gray = cv2.cvtColor((np.clip(frame, 0, 1) * 255).astype(np.uint8),
                            cv2.COLOR_RGB2GRAY)
        hits = self.cascade.detectMultiScale(gray, self.scale_factor,
                                             self.min_neighbors)
        h, w = frame.shape[:2]
        found = (clip_box(FaceBox(*map(int, hit)), h, w) for hit in hits)
        return [b for b in found if b is not None]
