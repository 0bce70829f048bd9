"""Selects the curve backend at import time.

The compiled ``platoonzk._native`` extension is used when it imports;
otherwise the pure-Python ``platoonzk._pybls`` fallback. Set
``PLATOONZK_BACKEND=python`` (or ``native``) to force one.
"""

from __future__ import annotations

import contextlib
import importlib
import logging
import os
from types import ModuleType
from typing import Iterator

log = logging.getLogger(__name__)

ENV_VAR = "PLATOONZK_BACKEND"
_MODULES = {"native": "platoonzk._native", "python": "platoonzk._pybls"}


def load(name: str) -> ModuleType:
    try:
        return importlib.import_module(_MODULES[name])
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(_MODULES)}") from None


def available() -> list[str]:
    names = []
    for name in _MODULES:
        try:
            load(name)
        except ImportError:
            continue
        names.append(name)
    return names


def _select() -> ModuleType:
    choice = os.environ.get(ENV_VAR, "auto").strip().lower() or "auto"
    if choice != "auto":
        return load(choice)
    try:
        return load("native")
    except ImportError:
        log.info("compiled backend unavailable, using pure-Python fallback")
        return load("python")


impl: ModuleType = _select()


def name() -> str:
    return impl.NAME


@contextlib.contextmanager
def use(backend: str) -> Iterator[ModuleType]:
    """Temporarily switch the process-wide backend (benchmarks, cross-checks)."""
    global impl
    previous = impl
    impl = load(backend)
    try:
        yield impl
    finally:
        impl = previous
