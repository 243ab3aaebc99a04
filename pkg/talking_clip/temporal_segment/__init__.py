from .segment import (  # noqa
    SegmentSchedule,
    abstract_motion_frames,
    abstract_validity,
    build_schedule,
    format_schedule_table,
    schedule_from_config,
    segment_coverage,
)
