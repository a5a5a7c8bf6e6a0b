"""Gene-set-masked autoencoder and its downstream analyses.

Submodules load lazily so the command-line entry point can pin BLAS
thread counts before numpy is first imported.
"""

from __future__ import annotations

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "cli",
    "dataio",
    "embedding",
    "errors",
    "genesets",
    "netcore",
    "pipelines",
    "plotting",
    "reports",
    "stats",
    "synth",
)

__all__ = ["__version__", *_SUBMODULES]


def __getattr__(name: str):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(__all__)
