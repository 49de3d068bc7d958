"""Cooperative schedulers for generated coroutine units.

All of them interleave up to ``width`` in-flight tasks on the calling
thread.  The number of slots bounds how many loads are outstanding at
once, so the width should track what the memory subsystem can overlap,
not how many tasks exist; 48 is a good default on recent server cores.

``run_simplest`` and ``run_push_pull`` drive dynamic (per-task) units,
``run_static_batch`` drives lockstep batch units, and ``run_hybrid``
drives prefix-lockstep units.  Task identity is the caller's problem:
the dynamic schedulers hand out slot indexes and instances, never task
ids, because a slot is reused by many tasks over a run.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Callable, Sequence

from .runtime import BatchCoroutine, StepCoroutine

__all__ = [
    "DrainOrder",
    "SchedulerConfig",
    "run_simplest",
    "run_push_pull",
    "run_static_batch",
    "run_hybrid",
    "interleave_map",
]

DEFAULT_WIDTH = 48


class DrainOrder(enum.Enum):
    """How to retire the tail once no new tasks remain.

    SWEEP keeps round-robin stepping every live slot (the tail finishes
    out of order, as during the full phase).  SLOT_ORDER runs each
    remaining slot to completion in slot order, which gives a stable
    completion order at the cost of interleaving.
    """

    SWEEP = "sweep"
    SLOT_ORDER = "slot_order"


@dataclass(frozen=True, slots=True)
class SchedulerConfig:
    width: int = DEFAULT_WIDTH
    drain: DrainOrder = DrainOrder.SWEEP

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ValueError(f"width must be >= 1, got {self.width}")


def run_simplest(
    config: SchedulerConfig,
    task_count: int,
    refill: Callable[[int, int], StepCoroutine],
    on_complete: Callable[[int, StepCoroutine], None] | None = None,
) -> int:
    """Round-robin stepping with immediate refill of finished slots.

    ``refill(slot, task_index)`` constructs the coroutine instance for
    the next task; ``on_complete(slot, instance)`` (if given) observes
    each finished instance before its slot is reused.  Returns the
    number of completed tasks.
    """
    if task_count <= 0:
        return 0
    fill = min(config.width, task_count)
    slots: list[StepCoroutine | None] = [refill(i, i) for i in range(fill)]
    next_task = fill
    done = 0
    while next_task < task_count:
        for i, inst in enumerate(slots):
            if inst is None:
                continue
            if inst.step():
                done += 1
                if on_complete is not None:
                    on_complete(i, inst)
                if next_task < task_count:
                    slots[i] = refill(i, next_task)
                    next_task += 1
                else:
                    slots[i] = None
    if config.drain is DrainOrder.SLOT_ORDER:
        for i, inst in enumerate(slots):
            if inst is None:
                continue
            while not inst.step():
                pass
            done += 1
            if on_complete is not None:
                on_complete(i, inst)
            slots[i] = None
    else:
        live = sum(1 for s in slots if s is not None)
        while live:
            for i, inst in enumerate(slots):
                if inst is None:
                    continue
                if inst.step():
                    done += 1
                    if on_complete is not None:
                        on_complete(i, inst)
                    slots[i] = None
                    live -= 1
    return done


def run_push_pull(
    config: SchedulerConfig,
    push: Callable[[int], StepCoroutine | None],
    pull: Callable[[int, StepCoroutine], bool],
) -> int:
    """Producer/consumer stepping with backpressure on both ends.

    ``push(slot)`` supplies the next task instance or None when the
    producer is exhausted; ``pull(slot, instance)`` consumes a finished
    task and may return False to reject it, in which case the instance
    is reset and recomputed for a later offer (the producer must
    eventually accept, or this never returns).  Returns the number of
    accepted tasks.
    """
    slots: list[StepCoroutine | None] = [push(i) for i in range(config.width)]
    accepted = 0
    live = sum(1 for s in slots if s is not None)
    while live:
        for i, inst in enumerate(slots):
            if inst is None:
                continue
            if inst.step():
                if pull(i, inst):
                    accepted += 1
                    slots[i] = push(i)
                    if slots[i] is None:
                        live -= 1
                else:
                    inst.reset()
    return accepted


def _pad_group(group: list, width: int, pad: tuple | None) -> list:
    if len(group) == width:
        return group
    filler = pad if pad is not None else group[-1]
    return group + [filler] * (width - len(group))


def _columns(group: list, nargs: int) -> list[list]:
    return [[task[j] for task in group] for j in range(nargs)]


def run_static_batch(
    config: SchedulerConfig,
    batch: BatchCoroutine,
    inputs: Sequence[tuple],
    outputs: list,
    pad: tuple | None = None,
) -> int:
    """Drive a lockstep batch unit over ``inputs`` in width groups.

    ``inputs`` holds one arg tuple per task; results land in
    ``outputs`` by task index.  A short final group is padded with
    ``pad`` (default: the group's last real input) and the padding
    lanes' results are discarded.  Returns the task count.
    """
    width = config.width
    unit_width = getattr(type(batch), "_WIDTH", None)
    if unit_width is not None and unit_width != width:
        raise ValueError(f"config width {width} != batch unit width {unit_width}")
    if not inputs:
        return 0
    nargs = len(inputs[0])
    buf: list[Any] = [None] * width
    for g in range(0, len(inputs), width):
        group = list(inputs[g:g + width])
        real = len(group)
        group = _pad_group(group, width, pad)
        batch.init(*_columns(group, nargs))
        while not batch.super_step():
            pass
        batch.fini(buf)
        outputs[g:g + real] = buf[:real]
    return len(inputs)


def run_hybrid(
    config: SchedulerConfig,
    unit: Any,
    inputs: Sequence[tuple],
    outputs: list,
    pad: tuple | None = None,
) -> int:
    """Drive a prefix-lockstep unit: batch prefix, per-lane finish.

    Each width group runs the statically scheduled stage prefix in
    lockstep, then the remaining stages per lane with round-robin
    stepping on the same columnar storage.  Returns the task count.
    """
    width = config.width
    unit_width = getattr(type(unit), "_WIDTH", None)
    if unit_width is not None and unit_width != width:
        raise ValueError(f"config width {width} != hybrid unit width {unit_width}")
    if not inputs:
        return 0
    nargs = len(inputs[0])
    buf: list[Any] = [None] * width
    for g in range(0, len(inputs), width):
        group = list(inputs[g:g + width])
        real = len(group)
        group = _pad_group(group, width, pad)
        unit.init(*_columns(group, nargs))
        unit.run_prefix()
        live = width
        pending = [True] * width
        while live:
            for i in range(width):
                if pending[i] and unit.step_slot(i):
                    pending[i] = False
                    live -= 1
        unit.fini(buf)
        outputs[g:g + real] = buf[:real]
    return len(inputs)


def interleave_map(
    config: SchedulerConfig,
    factory: Callable[..., StepCoroutine],
    tasks: Sequence[tuple],
) -> list:
    """Map ``factory(*task)`` over ``tasks`` with interleaved stepping.

    Results come back in task order regardless of completion order.
    """
    results: list[Any] = [None] * len(tasks)
    slot_task = [0] * min(config.width, len(tasks) or 1)

    def refill(slot: int, task_index: int) -> StepCoroutine:
        slot_task[slot] = task_index
        return factory(*tasks[task_index])

    def on_complete(slot: int, inst: StepCoroutine) -> None:
        results[slot_task[slot]] = inst.result()

    run_simplest(config, len(tasks), refill, on_complete)
    return results
