from .keypoints import KeypointSequence, read_keypoints, write_keypoints  # noqa
from .metrics import (  # noqa
    MotionMetrics,
    expression_metric_indices,
    expression_variance,
    head_movement_variance,
    motion_metrics,
)
