import dataclasses
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from talking_clip.core.errors import TalkingClipError

logger = logging.getLogger("infer")

RUN_MANIFEST_NAME = "manifest.json"


@dataclasses.dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run's outputs."""

    kind: str  # "infer" or "train"
    seed: int
    config_hash: str
    checkpoint_hash: Optional[str] = None
    fps: Optional[float] = None
    num_frames: Optional[int] = None
    clip_boundaries: List[Tuple[int, int]] = dataclasses.field(default_factory=list)
    extra: Dict[str, Any] = dataclasses.field(default_factory=dict)

    def to_json(self) -> str:
        data = dataclasses.asdict(self)
        data["clip_boundaries"] = [list(b) for b in self.clip_boundaries]
        return json.dumps(data, indent=2, sort_keys=True) + "\n"


def clip_boundaries(n_clips: int, clip_len: int) -> List[Tuple[int, int]]:
    """[start, stop) frame ranges of consecutive clips."""
    return [(k * clip_len, (k + 1) * clip_len) for k in range(n_clips)]


def write_manifest(directory: Union[str, Path], manifest: RunManifest) -> Path:
    path = Path(directory) / RUN_MANIFEST_NAME
    path.write_text(manifest.to_json(), "utf-8")
    logger.debug("Wrote %s", path)
    return path


def read_manifest(path: Union[str, Path]) -> RunManifest:
    try:
        data = json.loads(Path(path).read_text("utf-8"))
        data["clip_boundaries"] = [tuple(b) for b in data.get("clip_boundaries", [])]
        return RunManifest(**data)
    except (OSError, json.JSONDecodeError, TypeError) as e:
        raise TalkingClipError(f"cannot read run manifest '{path}': {e}") from e
