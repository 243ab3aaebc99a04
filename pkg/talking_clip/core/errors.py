from typing import List, Sequence


class TalkingClipError(RuntimeError):
    """Root of every error raised by this package."""


class ConfigError(TalkingClipError):
    pass


class ScheduleOverrun(ConfigError):
    pass


class NonPositiveDim(ConfigError):
    pass


class InvalidConfigError(ConfigError):
    """Raised by config validation, lists every violated invariant."""

    def __init__(self, violations: Sequence[ConfigError]) -> None:
        self.violations: List[ConfigError] = list(violations)
        super().__init__("; ".join(f"{type(v).__name__}: {v}" for v in self.violations))


class ShapeMismatch(TalkingClipError):
    pass


class MissingCacheEntry(TalkingClipError):
    pass


class UnknownConditionTag(TalkingClipError):
    pass


class EmptyAudio(TalkingClipError):
    pass


class UnsupportedSampleRate(TalkingClipError):
    pass


class UnsupportedAudioFormat(TalkingClipError):
    pass


class TOutOfRange(TalkingClipError):
    pass


class NonFiniteLoss(TalkingClipError):
    pass


class CheckpointMismatch(TalkingClipError):
    pass


class TooFewFrames(TalkingClipError):
    pass


class FrameCountMismatch(TalkingClipError):
    pass


class KeypointFormatError(TalkingClipError):
    pass


class DatasetError(TalkingClipError):
    pass


def expect_shape(name: str, actual: Sequence[int], expected: Sequence[int]) -> None:
    """Raise ShapeMismatch unless `actual` equals `expected`.

    A negative entry in `expected` matches any size on that axis.
    """
    ok = len(actual) == len(expected) and all(e < 0 or a == e for a, e in zip(actual, expected))
    if not ok:
        wanted = tuple("*" if e < 0 else e for e in expected)
        raise ShapeMismatch(f"{name}: expected shape {wanted}, got {tuple(actual)}")
