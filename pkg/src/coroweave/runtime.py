"""Runtime support imported by generated coroutine modules.

Generated code calls ``prefetch`` at every suspension point.  Pure
Python cannot issue a real cache-line prefetch, so by default it is a
no-op; tests and tracers install a hook to observe the address stream
(e.g. to check that every pointer is announced before it is read).
"""

from __future__ import annotations

import contextlib
from typing import Any, Callable, Protocol, runtime_checkable

__all__ = [
    "prefetch",
    "set_prefetch_hook",
    "prefetch_hook",
    "fmix32",
    "fmix64",
    "StepCoroutine",
    "BatchCoroutine",
]

_MASK32 = 0xFFFFFFFF
_MASK64 = 0xFFFFFFFFFFFFFFFF

_hook: Callable[[Any], None] | None = None


def prefetch(addr: Any) -> None:
    """Announce that ``addr`` is about to be dereferenced."""
    if _hook is not None:
        _hook(addr)


def set_prefetch_hook(hook: Callable[[Any], None] | None) -> None:
    global _hook
    _hook = hook


@contextlib.contextmanager
def prefetch_hook(hook: Callable[[Any], None]):
    """Install ``hook`` for the duration of a with-block."""
    prev = _hook
    set_prefetch_hook(hook)
    try:
        yield
    finally:
        set_prefetch_hook(prev)


def fmix32(h: int) -> int:
    """32-bit avalanche finalizer (Murmur3)."""
    h &= _MASK32
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & _MASK32
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & _MASK32
    h ^= h >> 16
    return h


def fmix64(h: int) -> int:
    """64-bit avalanche finalizer (Murmur3)."""
    h &= _MASK64
    h ^= h >> 33
    h = (h * 0xFF51AFD7ED558CCD) & _MASK64
    h ^= h >> 33
    h = (h * 0xC4CEB9FE1A85EC53) & _MASK64
    h ^= h >> 33
    return h


@runtime_checkable
class StepCoroutine(Protocol):
    """Contract of generated per-task coroutines.

    ``step()`` runs to the next suspension point and returns False, or
    to completion and returns True; once finished it keeps returning
    True.  ``reset()`` rewinds to the entry state without touching the
    stored arguments, so the same instance can re-run.
    """

    def step(self) -> bool: ...

    def done(self) -> bool: ...

    def reset(self) -> None: ...

    def result(self) -> Any: ...


@runtime_checkable
class BatchCoroutine(Protocol):
    """Contract of generated fixed-width batch coroutines.

    ``init`` loads one argument sequence per declared arg (each of the
    batch width), ``super_step()`` advances every lane by one stage and
    returns True when all lanes are finished, ``fini`` copies lane
    results into ``out``.
    """

    def init(self, *args: Any) -> None: ...

    def super_step(self) -> bool: ...

    def fini(self, out: list) -> None: ...
