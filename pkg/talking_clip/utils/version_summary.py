import platform
import sys

import numpy
import torch

import talking_clip

try:
    from talking_clip import build_info  # type: ignore[attr-defined]

    _GIT_DESCRIBE = build_info.GIT_DESCRIBE
    _GIT_COMMIT = build_info.GIT_COMMIT
    _DATE = build_info.DATE
except ImportError:
    _GIT_DESCRIBE = _GIT_COMMIT = _DATE = "(unknown)"


def create_version_summary() -> str:
    return f"""\
Version: {talking_clip.__version__}
VCS: {_GIT_DESCRIBE}
Commit: {_GIT_COMMIT}
Date: {_DATE}
torch: {torch.__version__}
numpy: {numpy.__version__}
Python: {sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}
OS: {platform.platform()}"""
