"""Motion conditions and the global-motion / dynamic-expression metrics.

Variances are taken per coordinate over frames (population variance by default) and summed over x
and y. Keypoints are aggregated by mean (or sum, see `MetricConfig.keypoint_reduction`). The
expression variance used as a training condition averages over every upper-face keypoint, the Exp
metric leaves out the mouth keypoints. Glo is not invariant to a rigid shift of the whole face over
time while Exp is.
"""

import dataclasses
import logging
from typing import Dict, List, Optional

import numpy as np

from talking_clip.core.config import MetricConfig
from talking_clip.core.errors import FrameCountMismatch, KeypointFormatError, TooFewFrames
from talking_clip.motion.keypoints import KeypointSequence

logger = logging.getLogger("metrics")

_DEFAULT = MetricConfig()


def _check_frames(kps: KeypointSequence, ddof: int) -> None:
    if kps.num_frames < 2 or kps.num_frames <= ddof:
        raise TooFewFrames(f"need at least {max(2, ddof + 1)} frames, got {kps.num_frames}")


def head_movement_variance(kps: KeypointSequence, config: MetricConfig = _DEFAULT) -> float:
    """Var_x + Var_y of the nose-tip trajectory."""
    _check_frames(kps, config.ddof)
    return float(np.var(kps.nose(), axis=0, ddof=config.ddof).sum())


def _relative_variance(kps: KeypointSequence, indices: np.ndarray, config: MetricConfig) -> float:
    _check_frames(kps, config.ddof)
    if len(indices) == 0:
        raise KeypointFormatError("no keypoints left for the expression variance")
    per_point = np.var(kps.relative_to_nose(indices), axis=0, ddof=config.ddof).sum(axis=-1)
    return float(per_point.sum() if config.keypoint_reduction == "sum" else per_point.mean())


def expression_variance(kps: KeypointSequence, config: MetricConfig = _DEFAULT) -> float:
    """Mean over the upper-face keypoints of Var_x + Var_y of their nose-relative coordinates."""
    return _relative_variance(kps, kps.upper_face_indices, config)


def expression_metric_indices(kps: KeypointSequence) -> np.ndarray:
    """Upper-face keypoints outside the mouth area."""
    return np.setdiff1d(kps.upper_face_indices, kps.mouth_indices)


@dataclasses.dataclass(frozen=True)
class MotionMetrics:
    glo: float
    exp: float
    dglo: Optional[float] = None
    dexp: Optional[float] = None

    def to_dict(self) -> Dict[str, Optional[float]]:
        report: Dict[str, Optional[float]] = {"Glo": self.glo, "Exp": self.exp}
        if self.dglo is not None:
            report["DGlo"] = self.dglo
            report["DExp"] = self.dexp
        return report


def _windows(num_frames: int, window: Optional[int]) -> List[slice]:
    if window is None or window >= num_frames:
        return [slice(0, num_frames)]
    windows = [slice(s, min(s + window, num_frames)) for s in range(0, num_frames, window)]
    return [w for w in windows if w.stop - w.start >= 2]


def _glo_exp(kps: KeypointSequence, window: Optional[int], config: MetricConfig) -> np.ndarray:
    indices = expression_metric_indices(kps)
    values = []
    for w in _windows(kps.num_frames, window):
        part = kps.window(w.start, w.stop)
        values.append((head_movement_variance(part, config), _relative_variance(part, indices, config)))
    if len(values) == 0:
        raise TooFewFrames(f"no window of {window} frames holds at least 2 frames")
    return np.mean(np.asarray(values), axis=0)


def motion_metrics(
    gen: KeypointSequence,
    gt: Optional[KeypointSequence] = None,
    window: Optional[int] = None,
    config: MetricConfig = _DEFAULT,
) -> MotionMetrics:
    """Glo and Exp of `gen`, plus their absolute deviations from `gt` when given.

    With a `window`, metrics are averaged over non-overlapping windows of that many frames.
    """
    if gt is not None and gt.num_frames != gen.num_frames:
        raise FrameCountMismatch(f"generated has {gen.num_frames} frames, ground truth {gt.num_frames}")
    glo, exp = _glo_exp(gen, window, config)
    if gt is None:
        return MotionMetrics(glo=float(glo), exp=float(exp))
    gt_glo, gt_exp = _glo_exp(gt, window, config)
    logger.debug("Ground truth Glo %.6f Exp %.6f", gt_glo, gt_exp)
    return MotionMetrics(glo=float(glo), exp=float(exp), dglo=float(abs(glo - gt_glo)), dexp=float(abs(exp - gt_exp)))
