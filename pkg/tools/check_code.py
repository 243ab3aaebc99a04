import argparse
import subprocess
import sys
from pathlib import Path
from typing import Any, Callable, List

from colorama import Fore, Style, just_fix_windows_console

just_fix_windows_console()

REPO_ROOT = Path(__file__).parent.parent
SOURCE_DIRS = ("talking_clip", "tools")


def print_color(*args: str, newline: bool = True) -> None:
    sys.stdout.write("".join(args) + Style.RESET_ALL)
    if newline:
        sys.stdout.write("\n")
    sys.stdout.flush()


class CheckError(RuntimeError):
    pass


def indent_text(text: str, indent: int) -> str:
    return "".join(" " * indent + line for line in text.splitlines(keepends=True))


def check(name: str) -> Callable:
    def wrapper(func: Callable) -> Callable:
        def decorate(*arg: Any, **kwargs: Any) -> Any:
            print_color(Fore.CYAN, Style.BRIGHT, f">>> Running {name}... ", newline=False)
            try:
                retval = func(*arg, **kwargs)
            except subprocess.CalledProcessError as e:
                print_color(Fore.RED, "FAILED")
                print_color(Fore.CYAN, "Return code: ", Fore.RED, str(e.returncode))
                print_color(Fore.CYAN, "Output:")
                print(indent_text(e.stderr.decode("utf-8"), 4), end="")
                print(indent_text(e.stdout.decode("utf-8"), 4), end="")
                print_color(Fore.CYAN, "Command:")
                print(indent_text(" ".join(e.cmd), 4))
                raise CheckError(name) from e
            print_color(Fore.GREEN, "PASSED.")
            return retval

        return decorate

    return wrapper


def _run(args: List[str]) -> None:
    subprocess.check_output(args, stderr=subprocess.PIPE, cwd=REPO_ROOT)


@check("black")
def run_black(files: List[Path], fix: bool) -> None:
    _run(["black"] + ([] if fix else ["--check"]) + [str(p) for p in files])


@check("autoflake")
def run_autoflake(files: List[Path], fix: bool) -> None:
    mode = ["--in-place"] if fix else ["--check-diff"]
    _run(["autoflake", "--remove-unused-variables", "--quiet"] + mode + [str(p) for p in files])


@check("isort")
def run_isort(files: List[Path], fix: bool) -> None:
    _run(["isort", "--color"] + ([] if fix else ["--check-only"]) + [str(p) for p in files])


@check("flake8")
def run_flake8(files: List[Path], _: bool) -> None:
    _run(["flake8", "--color", "always"] + [str(p) for p in files])


@check("mypy")
def run_mypy(files: List[Path], _: bool) -> None:
    _run(["mypy", "--color-output"] + [str(p) for p in files])


@check("pytest")
def run_pytest(_: List[Path], __: bool) -> None:
    _run(["pytest", "-q", "--cov=talking_clip", "--cov-report=term"])


def get_py_files() -> List[Path]:
    """Tracked Python files when inside a git checkout, else every file under the source folders."""
    try:
        output = subprocess.check_output(["git", "ls-files", "*.py"], stderr=subprocess.DEVNULL, cwd=REPO_ROOT)
    except (subprocess.CalledProcessError, FileNotFoundError):
        output = b""
    files = [Path(line) for line in output.decode("utf-8").splitlines()]
    if len(files) == 0:
        files = [p.relative_to(REPO_ROOT) for d in SOURCE_DIRS for p in sorted((REPO_ROOT / d).rglob("*.py"))]
        files.append(Path("build.py"))
    for p in files:
        if not (REPO_ROOT / p).is_file():
            raise RuntimeError(f"{p.as_posix()} is not a file. Hint: Stage your changes.")
    return files


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--fix", action="store_true", help="let the formatters rewrite files")
    parser.add_argument("--tests", action="store_true", help="also run the test suite with coverage")
    args = parser.parse_args()

    py_files = get_py_files()
    print(f"Found {len(py_files)} python files.")

    py_checks = [run_black, run_autoflake, run_isort, run_flake8, run_mypy]
    if args.tests:
        py_checks.append(run_pytest)
    failed = []
    for py_check in py_checks:
        try:
            py_check(py_files, args.fix)
        except CheckError as e:
            failed.append(str(e))
    if len(failed) > 0:
        print_color("\n", Fore.RED, f"Failed: {', '.join(failed)}")
        print_color(Fore.CYAN, "Hint: Try --fix to automatically format/fix code")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
