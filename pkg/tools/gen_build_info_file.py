import subprocess
from datetime import datetime
from pathlib import Path

FILE_TEMPLATE = """\
GIT_DESCRIBE = "{git_describe}"
GIT_COMMIT = "{commit}"
DATE = "{date}"
"""

REPO_ROOT = Path(__file__).parent.parent


def _git(*args: str) -> str:
    try:
        return subprocess.check_output(["git", *args], stderr=subprocess.DEVNULL, cwd=REPO_ROOT).decode().strip()
    except (subprocess.CalledProcessError, FileNotFoundError):
        return "(unknown)"


def gen_build_info_file() -> Path:
    """Write talking_clip/build_info.py, read by the `--version` summary."""
    print("Generating build info file...")
    build_info_file = REPO_ROOT / "talking_clip" / "build_info.py"
    if not build_info_file.parent.is_dir():
        raise RuntimeError(f"Misplaced {build_info_file}")

    build_info_file.write_text(
        FILE_TEMPLATE.format(
            git_describe=_git("describe", "--always", "--dirty"),
            commit=_git("rev-parse", "HEAD"),
            date=datetime.today().isoformat(timespec="seconds"),
        )
    )
    print(f"  -> {build_info_file.relative_to(REPO_ROOT)}")
    return build_info_file


if __name__ == "__main__":
    gen_build_info_file()
