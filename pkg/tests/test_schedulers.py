"""Scheduler semantics: exactly-once, ordering, backpressure, batching."""

import pytest

from coroweave import (
    DrainOrder,
    SchedulerConfig,
    emit_dynamic,
    emit_hybrid,
    emit_routine,
    emit_static,
    interleave_map,
    load_unit,
    run_hybrid,
    run_push_pull,
    run_simplest,
    run_static_batch,
)
from coroweave.dsl import assign, coroutine, opaque, return_, while_, yield_
from coroweave.schedulers import DEFAULT_WIDTH


class Task:
    """Synthetic coroutine finishing after a fixed number of suspensions."""

    def __init__(self, tid, yields, log=None):
        self.tid = tid
        self.yields = yields
        self.remaining = yields
        self.log = log
        self.finished = False

    def step(self):
        if self.finished:
            return True
        if self.remaining > 0:
            self.remaining -= 1
            return False
        self.finished = True
        if self.log is not None:
            self.log.append(self.tid)
        return True

    def done(self):
        return self.finished

    def reset(self):
        self.remaining = self.yields
        self.finished = False

    def result(self):
        return self.tid * 10


def traced_stage_def():
    """Two lockstep stages that log (stage, task) into a shared list."""
    return (
        coroutine("probe")
        .result("int", "out")
        .shared_arg("list", "trace")
        .arg("int", "tid")
        .body(
            opaque("trace.append((0, tid))"),
            yield_("static"),
            opaque("trace.append((1, tid))"),
            yield_("static"),
            return_("tid * 10"),
        )
    )


def looped_tail_def():
    """Static prefix, then a tid-dependent number of extra suspensions."""
    return (
        coroutine("straggler")
        .result("int", "out")
        .arg("int", "tid")
        .variable("int", "t", "0")
        .variable("int", "c", "0")
        .body(
            assign("t", "tid * 7"),
            yield_("static"),
            assign("c", "tid % 5"),
            yield_("static"),
            while_("(c := c - 1) >= 0").do_(
                assign("t", "t + 1"),
                yield_(),
            ),
            return_("t"),
        )
    )


class TestConfig:
    def test_defaults(self):
        cfg = SchedulerConfig()
        assert cfg.width == DEFAULT_WIDTH == 48
        assert cfg.drain is DrainOrder.SWEEP

    def test_rejects_bad_width(self):
        with pytest.raises(ValueError, match="width must be >= 1"):
            SchedulerConfig(width=0)

    def test_drain_order_values(self):
        assert DrainOrder("sweep") is DrainOrder.SWEEP
        assert DrainOrder("slot_order") is DrainOrder.SLOT_ORDER


class TestRunSimplest:
    @pytest.mark.parametrize("width", [1, 2, 5])
    @pytest.mark.parametrize("drain", list(DrainOrder))
    def test_exactly_once(self, width, drain):
        for count in (0, 1, width - 1, width, width + 1, 10 * width):
            if count < 0:
                continue
            built: list[int] = []
            completed: list[int] = []

            def refill(slot, task_index):
                built.append(task_index)
                return Task(task_index, task_index % 3)

            def on_complete(slot, inst):
                completed.append(inst.tid)

            done = run_simplest(
                SchedulerConfig(width=width, drain=drain),
                count,
                refill,
                on_complete,
            )
            assert done == count
            assert sorted(built) == list(range(count))
            assert sorted(completed) == list(range(count))

    def test_zero_tasks_never_build(self):
        calls = []
        assert run_simplest(SchedulerConfig(width=4), 0, lambda s, t: calls.append(t)) == 0
        assert calls == []

    def test_sweep_drain_finishes_out_of_order(self):
        finish_log: list[int] = []
        steps = {0: 5, 1: 0, 2: 2}
        run_simplest(
            SchedulerConfig(width=3),
            3,
            lambda slot, t: Task(t, steps[t], finish_log),
        )
        assert finish_log == [1, 2, 0]

    def test_slot_order_drain_is_stable(self):
        finish_log: list[int] = []
        steps = {0: 5, 1: 0, 2: 2}
        run_simplest(
            SchedulerConfig(width=3, drain=DrainOrder.SLOT_ORDER),
            3,
            lambda slot, t: Task(t, steps[t], finish_log),
        )
        assert finish_log == [0, 1, 2]

    def test_slots_refill_immediately(self):
        # slot of a finished task is reused before the sweep moves on
        seen_slots: dict[int, int] = {}

        def refill(slot, task_index):
            seen_slots[task_index] = slot
            return Task(task_index, 0)

        run_simplest(SchedulerConfig(width=2), 6, refill)
        assert seen_slots == {0: 0, 1: 1, 2: 0, 3: 1, 4: 0, 5: 1}


class TestRunPushPull:
    def test_accepts_everything(self):
        pending = list(range(7))
        got = []

        def push(slot):
            return Task(pending.pop(0), 2) if pending else None

        def pull(slot, inst):
            got.append(inst.result())
            return True

        n = run_push_pull(SchedulerConfig(width=3), push, pull)
        assert n == 7
        assert sorted(got) == [t * 10 for t in range(7)]

    def test_rejected_tasks_are_recomputed(self):
        pending = list(range(6))
        offers: dict[int, int] = {}

        def push(slot):
            return Task(pending.pop(0), 1) if pending else None

        def pull(slot, inst):
            offers[inst.tid] = offers.get(inst.tid, 0) + 1
            if inst.tid % 2 == 0 and offers[inst.tid] == 1:
                return False  # not ready for this one yet
            assert inst.result() == inst.tid * 10
            return True

        n = run_push_pull(SchedulerConfig(width=2), push, pull)
        assert n == 6
        assert {t: c for t, c in offers.items() if c > 1} == {0: 2, 2: 2, 4: 2}

    def test_empty_producer(self):
        assert run_push_pull(SchedulerConfig(width=4), lambda s: None, lambda s, i: True) == 0

    def test_reject_recomputes_from_pristine_args(self):
        # generated units must survive the reset/retry path even though
        # their body consumed the arg values (walrus countdown)
        d = looped_tail_def()
        routine = load_unit(emit_routine(d))
        make = load_unit(emit_dynamic(d))()
        rejected = set()
        got: dict[int, int] = {}

        class Tagged:
            """Generated classes use __slots__; identity rides outside."""

            def __init__(self, tid):
                self.tid = tid
                self.inst = make(tid)

            def step(self):
                return self.inst.step()

            def done(self):
                return self.inst.done()

            def reset(self):
                self.inst.reset()

            def result(self):
                return self.inst.result()

        queue = list(range(9))

        def push(slot):
            return Tagged(queue.pop(0)) if queue else None

        def pull(slot, task):
            if task.tid % 3 == 0 and task.tid not in rejected:
                rejected.add(task.tid)
                return False
            got[task.tid] = task.result()
            return True

        n = run_push_pull(SchedulerConfig(width=4), push, pull)
        assert n == 9
        assert got == {tid: routine(tid) for tid in range(9)}
        assert rejected == {0, 3, 6}


class TestStaticBatch:
    def make(self, width, trace):
        return load_unit(emit_static(traced_stage_def(), width))(trace)()

    def test_results_land_by_task_index(self):
        trace: list = []
        cfg = SchedulerConfig(width=4)
        inputs = [(t,) for t in range(11)]
        outputs = [None] * 11
        n = run_static_batch(cfg, self.make(4, trace), inputs, outputs, pad=(-1,))
        assert n == 11
        assert outputs == [t * 10 for t in range(11)]

    def test_each_real_task_runs_each_stage_once(self):
        trace: list = []
        inputs = [(t,) for t in range(6)]
        outputs = [None] * 6
        run_static_batch(SchedulerConfig(width=4), self.make(4, trace), inputs, outputs, pad=(-1,))
        for stage in (0, 1):
            stage_tasks = [t for s, t in trace if s == stage and t != -1]
            assert sorted(stage_tasks) == list(range(6))
        # two padding lanes in the short final group, per stage
        assert sum(1 for _, t in trace if t == -1) == 4

    def test_default_pad_repeats_last_input(self):
        trace: list = []
        inputs = [(3,), (9,)]
        outputs = [None, None]
        run_static_batch(SchedulerConfig(width=4), self.make(4, trace), inputs, outputs)
        assert outputs == [30, 90]
        assert sum(1 for _, t in trace if t == 9) == 3 * 2  # real lane + 2 pads, 2 stages

    def test_empty_inputs(self):
        outputs: list = []
        assert run_static_batch(SchedulerConfig(width=4), self.make(4, []), [], outputs) == 0
        assert outputs == []

    def test_width_mismatch_is_an_error(self):
        with pytest.raises(ValueError, match="config width 2 != batch unit width 4"):
            run_static_batch(SchedulerConfig(width=2), self.make(4, []), [(1,)], [None])


class TestHybrid:
    def test_matches_routine_across_groups(self):
        d = looped_tail_def()
        routine = load_unit(emit_routine(d))
        unit = load_unit(emit_hybrid(d, 4))()()
        inputs = [(t,) for t in range(10)]
        outputs = [None] * 10
        n = run_hybrid(SchedulerConfig(width=4), unit, inputs, outputs, pad=(0,))
        assert n == 10
        assert outputs == [routine(t) for t in range(10)]

    def test_traced_unit_runs_each_stage_once(self):
        trace: list = []
        unit = load_unit(emit_hybrid(traced_stage_def(), 3))(trace)()
        inputs = [(t,) for t in range(7)]
        outputs = [None] * 7
        run_hybrid(SchedulerConfig(width=3), unit, inputs, outputs, pad=(-1,))
        assert outputs == [t * 10 for t in range(7)]
        for stage in (0, 1):
            stage_tasks = [t for s, t in trace if s == stage and t != -1]
            assert sorted(stage_tasks) == list(range(7))

    def test_width_mismatch_is_an_error(self):
        unit = load_unit(emit_hybrid(looped_tail_def(), 8))()()
        with pytest.raises(ValueError, match="config width 4 != hybrid unit width 8"):
            run_hybrid(SchedulerConfig(width=4), unit, [(1,)], [None])

    def test_empty_inputs(self):
        unit = load_unit(emit_hybrid(looped_tail_def(), 2))()()
        assert run_hybrid(SchedulerConfig(width=2), unit, [], []) == 0


class TestInterleaveMap:
    def test_results_in_task_order(self):
        tasks = [(t, (7 - t) % 4) for t in range(20)]
        out = interleave_map(SchedulerConfig(width=3), Task, tasks)
        assert out == [t * 10 for t in range(20)]

    def test_single_slot_degenerates_to_sequential(self):
        order: list = []
        tasks = [(t, 2) for t in range(5)]
        out = interleave_map(
            SchedulerConfig(width=1),
            lambda tid, y: Task(tid, y, order),
            tasks,
        )
        assert out == [t * 10 for t in range(5)]
        assert order == [0, 1, 2, 3, 4]

    def test_empty_tasks(self):
        assert interleave_map(SchedulerConfig(width=4), Task, []) == []

    def test_with_generated_units(self):
        d = looped_tail_def()
        routine = load_unit(emit_routine(d))
        cls = load_unit(emit_dynamic(d))()
        tasks = [(t,) for t in range(25)]
        for width in (1, 2, 48):
            out = interleave_map(SchedulerConfig(width=width), cls, tasks)
            assert out == [routine(t) for t in range(25)]
