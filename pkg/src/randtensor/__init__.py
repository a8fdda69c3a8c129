"""randtensor: flattening norms, Wick renormalization, and Monte Carlo
moment experiments for sparse random tensors.

Submodules (imported lazily so process-level thread pinning in the CLI and
worker entry points happens before numpy loads):

* ``tensor_core``  sparse labeled tensors over truncated lattices
* ``norms``        matricization, flattening norms, merging contraction
* ``wick``         Laguerre/Hermite renormalization and the exact oracle
* ``sampler``      deterministic counter-based Gaussian fields
* ``estimator``    random tensor realization and moment experiments
* ``families``     deterministic coefficient-tensor generators
* ``config``       experiment configuration
* ``runner``       cell orchestration, persistence, replay
* ``verify``       exact verification gates
"""

from __future__ import annotations

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "tensor_core", "norms", "wick", "sampler", "estimator",
    "families", "config", "runner", "report", "verify", "cli",
)


def __getattr__(name: str):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
