import dataclasses
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from talking_clip.core.errors import KeypointFormatError

logger = logging.getLogger("data")


@dataclasses.dataclass(frozen=True)
class KeypointSequence:
    """Per-frame 2D facial keypoints in pixel coordinates."""

    points: np.ndarray  # [F, K, 2]
    nose_index: int
    upper_face_indices: np.ndarray  # int [n_upper]
    mouth_indices: np.ndarray  # int, excluded from the expression metric

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 3 or points.shape[-1] != 2:
            raise KeypointFormatError(f"points must be [F, K, 2], got {points.shape}")
        if not np.isfinite(points).all():
            raise KeypointFormatError("points contain non-finite values")
        num_points = points.shape[1]
        upper = np.asarray(self.upper_face_indices, dtype=np.int64).reshape(-1)
        mouth = np.asarray(self.mouth_indices, dtype=np.int64).reshape(-1)
        if not 0 <= self.nose_index < num_points:
            raise KeypointFormatError(f"nose index {self.nose_index} outside [0, {num_points})")
        for name, indices in (("upper face", upper), ("mouth", mouth)):
            if len(indices) > 0 and (indices.min() < 0 or indices.max() >= num_points):
                raise KeypointFormatError(f"{name} indices outside [0, {num_points})")
        if len(upper) == 0:
            raise KeypointFormatError("at least one upper face index is needed")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "upper_face_indices", upper)
        object.__setattr__(self, "mouth_indices", mouth)

    @property
    def num_frames(self) -> int:
        return int(self.points.shape[0])

    @property
    def num_points(self) -> int:
        return int(self.points.shape[1])

    def nose(self) -> np.ndarray:
        """[F, 2] nose-tip trajectory."""
        return self.points[:, self.nose_index]

    def relative_to_nose(self, indices: np.ndarray) -> np.ndarray:
        """[F, len(indices), 2] coordinates relative to the nose tip of the same frame."""
        return self.points[:, indices] - self.points[:, self.nose_index : self.nose_index + 1]

    def window(self, start: int, stop: int) -> "KeypointSequence":
        return dataclasses.replace(self, points=self.points[start:stop])


def _header(kps: KeypointSequence) -> Dict[str, Any]:
    return {
        "nose_index": kps.nose_index,
        "upper_face_indices": kps.upper_face_indices.tolist(),
        "mouth_indices": kps.mouth_indices.tolist(),
        "num_points": kps.num_points,
    }


def write_keypoints(path: Union[str, Path], kps: KeypointSequence) -> None:
    """JSON lines: an index-map header, then one {frame, points} record per frame."""
    lines = [json.dumps(_header(kps))]
    for i, frame in enumerate(kps.points):
        lines.append(json.dumps({"frame": i, "points": frame.tolist()}))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_keypoints(path: Union[str, Path]) -> KeypointSequence:
    path = Path(path)
    if not path.is_file():
        raise KeypointFormatError(f"keypoint file '{path}' does not exist")
    records: List[Dict[str, Any]] = []
    for line_no, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        if len(line.strip()) == 0:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise KeypointFormatError(f"{path}:{line_no}: invalid JSON: {e}") from e
        if not isinstance(record, dict):
            raise KeypointFormatError(f"{path}:{line_no}: expected a JSON object")
        records.append(record)

    if len(records) == 0:
        raise KeypointFormatError(f"keypoint file '{path}' is empty")
    header, frames = records[0], records[1:]
    missing = {"nose_index", "upper_face_indices", "mouth_indices", "num_points"} - set(header)
    if len(missing) > 0:
        raise KeypointFormatError(f"{path}: header lacks {', '.join(sorted(missing))}")

    try:
        num_points = int(header["num_points"])
        nose_index = int(header["nose_index"])
        upper = np.asarray(header["upper_face_indices"], dtype=np.int64)
        mouth = np.asarray(header["mouth_indices"], dtype=np.int64)
    except (TypeError, ValueError) as e:
        raise KeypointFormatError(f"{path}: malformed header: {e}") from e
    if num_points <= 0:
        raise KeypointFormatError(f"{path}: num_points must be > 0, got {num_points}")

    points = np.zeros((len(frames), num_points, 2))
    for i, record in enumerate(frames):
        if record.get("frame") != i:
            raise KeypointFormatError(f"{path}: expected frame {i}, got {record.get('frame')}")
        try:
            frame_points = np.asarray(record.get("points"), dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise KeypointFormatError(f"{path}: frame {i} has malformed points: {e}") from e
        if frame_points.shape != (num_points, 2):
            raise KeypointFormatError(f"{path}: frame {i} has points of shape {frame_points.shape}")
        points[i] = frame_points
    logger.debug("Read %d keypoint frames from %s", len(frames), path)
    return KeypointSequence(
        points=points,
        nose_index=nose_index,
        upper_face_indices=upper,
        mouth_indices=mouth,
    )
