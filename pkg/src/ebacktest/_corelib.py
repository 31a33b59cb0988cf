"""Select the numerical core: compiled extension if built, else pure Python."""

try:
    from ebacktest import _core as core
except ImportError:  # pragma: no cover - depends on the build
    from ebacktest import _core_python as core

from ebacktest import _core_python as pycore

IMPLEMENTATION = core.IMPLEMENTATION

__all__ = ["core", "pycore", "IMPLEMENTATION"]
