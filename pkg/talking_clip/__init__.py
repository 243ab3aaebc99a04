from importlib.metadata import PackageNotFoundError, version

__project__ = "talking-clip"

try:
    __version__ = version(__project__)
except PackageNotFoundError:
    __version__ = "(local)"
