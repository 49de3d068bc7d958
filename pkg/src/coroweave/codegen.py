"""Python source generation from lowered coroutine definitions.

Four emitters share one lowering:

* ``emit_routine``: the plain sequential function (suspension points
  stripped), used as the ground-truth twin of every generated unit.
* ``emit_dynamic``: a resumable per-task class driven through
  ``step()``; any control flow is allowed because each instance carries
  its own state id and dispatches on it.
* ``emit_static``: a fixed-width batch class that marches all lanes
  through the stages in lockstep; requires the state machine to be a
  straight line.
* ``emit_hybrid``: fixed-width lanes that run a statically scheduled
  stage prefix in lockstep, then finish each lane dynamically on the
  same storage.

Every emitter returns a :class:`SourceText` whose ``entry`` names a
zero-or-more-argument factory; calling the factory with the shared-arg
values (closure state, stored once per run, not per task) yields the
class, or the function itself for ``emit_routine``.  Output is
deterministic: the same definition always produces identical bytes.
"""

from __future__ import annotations

import contextlib
import textwrap
from dataclasses import dataclass
from typing import Any

from . import __version__, dsl
from .dsl import CoroutineDef, DeclKind, YieldHint
from .lowering import (
    ContextSpec,
    Fsm,
    Layout,
    compute_context,
    split_stages,
    static_prefix_len,
    straight_line_error,
    strip_yields,
)

__all__ = [
    "CodegenError",
    "SourceText",
    "emit_context",
    "emit_dynamic",
    "emit_static",
    "emit_hybrid",
    "emit_routine",
    "load_unit",
]


class CodegenError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class SourceText:
    """A generated compilation unit.

    ``entry`` is the top-level symbol to pull out of the executed
    module: a factory function for generated classes, the function
    itself for routines.
    """

    entry: str
    header: str
    body: str

    @property
    def text(self) -> str:
        return self.header + "\n\n" + self.body


def _header(name: str) -> str:
    return (
        f"# Automatically generated by coroweave {__version__} from coroutine"
        f" def {name!r}. Do not edit by hand.\n"
        "from coroweave.runtime import fmix32, fmix64, prefetch\n"
    )


class _W:
    """Indented line writer."""

    def __init__(self) -> None:
        self.lines: list[str] = []
        self.depth = 0

    def put(self, line: str = "") -> None:
        self.lines.append("    " * self.depth + line if line else "")

    def put_stmt_text(self, text: str) -> None:
        # Opaque statement text may span lines; re-home it at the
        # current indent.
        for line in textwrap.dedent(text).strip("\n").splitlines():
            self.put(line)

    @contextlib.contextmanager
    def indent(self):
        self.depth += 1
        try:
            yield
        finally:
            self.depth -= 1

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def load_unit(src: SourceText) -> Any:
    """Exec a generated unit and return its entry symbol."""
    ns: dict[str, Any] = {"__name__": f"coroweave.generated.{src.entry}"}
    exec(compile(src.text, f"<coroweave:{src.entry}>", "exec"), ns)
    return ns[src.entry]


# -- shared emission helpers


def _shared_names(cdef: CoroutineDef) -> list[str]:
    return [d.name for d in cdef.shared_args]


def _emit_ops(w: _W, ops, *, result_lhs: str) -> None:
    for op in ops:
        match op:
            case ("opaque", text):
                w.put_stmt_text(text)
            case ("assign", dst, expr):
                w.put(f"{dst} = {expr}")
            case ("store", lvalue, expr):
                w.put(f"{lvalue} = {expr}")
            case ("prefetch", expr):
                w.put(f"prefetch({expr})")
            case ("result", expr):
                w.put(f"{result_lhs} = {expr}")


def _emit_dispatch(w: _W, fsm: Fsm, block_ids, *, result_lhs: str,
                   on_yield, on_finish) -> None:
    """The block dispatch loop: ``_b`` selects an arm, arms jump or exit."""
    w.put("while True:")
    with w.indent():
        first = True
        for b in block_ids:
            blk = fsm.blocks[b]
            w.put(f"{'if' if first else 'elif'} _b == {b}:")
            first = False
            with w.indent():
                _emit_ops(w, blk.ops, result_lhs=result_lhs)
                match blk.term:
                    case ("goto", t):
                        w.put(f"_b = {t}")
                        w.put("continue")
                    case ("br", cond, bt, bf):
                        w.put(f"_b = {bt} if ({cond}) else {bf}")
                        w.put("continue")
                    case ("yield", sid, _hint):
                        on_yield(w, sid)
                    case ("finish",):
                        on_finish(w)
        w.put("else:")
        with w.indent():
            w.put('raise AssertionError(f"no block {_b}")')


def _stage_is_single_block(fsm: Fsm, stage_id: int) -> bool:
    st = fsm.stages[stage_id]
    return len(st.block_ids) == 1


# -- context records


def emit_context(cdef: CoroutineDef, layout: Layout) -> SourceText:
    """A bare context record for the definition under the given layout.

    AoS: one instance per task, one slot per field.  SoA: one instance
    per batch, one fixed-width column per field; columns for declared
    args and variables carry a ``_soa_`` prefix, internal fields keep
    their names.
    """
    fsm = split_stages(cdef)
    ctx = compute_context(cdef, fsm)
    w = _W()
    if layout.kind == "aos":
        cls = f"Context_{cdef.name}"
        fields = ctx.field_names()
        w.put(f"class {cls}:")
        with w.indent():
            w.put(f'"""Per-task context record for {cdef.name!r}."""')
            w.put()
            w.put(f"__slots__ = {fields!r}")
            w.put()
            args = [d.name for d in ctx.args]
            w.put(f"def __init__(self{''.join(', ' + a for a in args)}):")
            with w.indent():
                for a in args:
                    w.put(f"self.{a} = {a}")
                for v in ctx.variables:
                    w.put(f"self.{v.name} = None")
                for f in ctx.internal:
                    w.put(f"self.{f} = 0" if f == "_state" else f"self.{f} = None")
                if not args and not ctx.variables and not ctx.internal:
                    w.put("pass")
    else:
        if layout.width < 1:
            raise CodegenError(f"{cdef.name}: SoA width must be >= 1, got {layout.width}")
        cls = f"Context_{cdef.name}_soa_{layout.width}"
        cols = list(ctx.internal) + [
            f"_soa_{d.name}" for d in ctx.args + ctx.variables
        ]
        w.put(f"class {cls}:")
        with w.indent():
            w.put(f'"""Width-{layout.width} columnar context for {cdef.name!r}."""')
            w.put()
            w.put(f"__slots__ = {tuple(cols)!r}")
            w.put()
            w.put(f"_WIDTH = {layout.width}")
            w.put()
            w.put("def __init__(self):")
            with w.indent():
                for c in cols:
                    init = "0" if c == "_state" else "None"
                    w.put(f"self.{c} = [{init}] * {layout.width}")
                if not cols:
                    w.put("pass")
    return SourceText(cls, _header(cdef.name), w.text())


# -- dynamic (per-task, any control flow)


def emit_dynamic(cdef: CoroutineDef) -> SourceText:
    """Resumable per-task unit: ``make_<name>(shared...)`` -> class.

    ``step()`` returns False at each suspension point and True at and
    after completion.  Beyond the context fields, every arg keeps a
    pristine ``_arg_`` copy so ``reset()`` (and the pull-reject restart
    path) re-runs the task on its original inputs even if the body
    mutated them; ``_state`` is always carried since this unit exists
    to be dynamically scheduled.
    """
    fsm = split_stages(cdef)
    ctx = compute_context(cdef, fsm)
    cls = f"CoroutineState_{cdef.name}"
    factory = f"make_{cdef.name}"
    finished = fsm.finished_id

    args = [d.name for d in ctx.args]
    variables = [d.name for d in ctx.variables]
    temps = [f for f in ctx.internal if f in ("_cond", "_addr")]
    carried = args + variables + temps
    slots = tuple(
        [s for a in args for s in (f"_arg_{a}", a)]
        + variables
        + ["_state"]
        + (["_result"] if cdef.result_decl is not None else [])
        + temps
    )

    w = _W()
    w.put(f"def {factory}({', '.join(_shared_names(cdef))}):")
    with w.indent():
        w.put(f"class {cls}:")
        with w.indent():
            w.put(f'"""{cdef.name}: {len(fsm.state_entry)} resume state(s),'
                  f" finished == {finished}.\"\"\"")
            w.put()
            w.put(f"__slots__ = {slots!r}")
            w.put()
            w.put(f"_FINISHED = {finished}")
            w.put()
            w.put(f"def __init__(self{''.join(', ' + a for a in args)}):")
            with w.indent():
                for a in args:
                    w.put(f"self._arg_{a} = {a}")
                    w.put(f"self.{a} = {a}")
                for v in variables:
                    w.put(f"self.{v} = None")
                w.put("self._state = 0")
                if cdef.result_decl is not None:
                    w.put("self._result = None")
                for t in temps:
                    w.put(f"self.{t} = None")
            w.put()
            w.put("def step(self):")
            with w.indent():
                w.put("_s = self._state")
                w.put(f"if _s == {finished}:")
                with w.indent():
                    w.put("return True")
                for f in carried:
                    w.put(f"{f} = self.{f}")
                entries = ", ".join(str(b) for b in fsm.state_entry)
                w.put(f"_b = ({entries},)[_s]")

                def on_yield(w: _W, sid: int) -> None:
                    for f in carried:
                        w.put(f"self.{f} = {f}")
                    w.put(f"self._state = {sid}")
                    w.put("return False")

                def on_finish(w: _W) -> None:
                    w.put(f"self._state = {finished}")
                    w.put("return True")

                _emit_dispatch(
                    w, fsm, range(len(fsm.blocks)),
                    result_lhs="self._result", on_yield=on_yield,
                    on_finish=on_finish,
                )
            w.put()
            w.put("def done(self):")
            with w.indent():
                w.put(f"return self._state == {finished}")
            w.put()
            w.put("def reset(self):")
            with w.indent():
                w.put("self._state = 0")
                for a in args:
                    w.put(f"self.{a} = self._arg_{a}")
            w.put()
            w.put("def result(self):")
            with w.indent():
                if cdef.result_decl is not None:
                    w.put("return self._result")
                else:
                    w.put("return None")
        w.put()
        w.put(f"return {cls}")
    return SourceText(factory, _header(cdef.name), w.text())


# -- static (fixed-width lockstep batch)


def _soa_slots(cdef: CoroutineDef, ctx: ContextSpec, *, per_lane_state: bool) -> list[str]:
    slots = []
    if per_lane_state:
        slots.append("_state")
    slots.append("_result")
    slots += [t for t in ("_cond", "_addr") if t in ctx.internal]
    slots += [f"_soa_{d.name}" for d in ctx.args + ctx.variables]
    return slots


def _emit_lane_copy(w: _W, names: list[str], temps: list[str], i: str, *, direction: str) -> None:
    for n in names:
        if direction == "in":
            w.put(f"{n} = _soa_{n}[{i}]")
        else:
            w.put(f"_soa_{n}[{i}] = {n}")
    for t in temps:
        if direction == "in":
            w.put(f"{t} = {t}_col[{i}]")
        else:
            w.put(f"{t}_col[{i}] = {t}")


def _emit_stage_loop(w: _W, fsm: Fsm, stage_id: int, width: int,
                     names: list[str], temps: list[str]) -> None:
    """One lockstep width loop for a straight-line stage.

    Each lane runs this stage's blocks to the stage-ending yield (copy
    lane state out, next lane) or to finish (lane result is already
    stored).
    """
    st = fsm.stages[stage_id]
    entry = fsm.state_entry[stage_id]
    w.put(f"for _i in range({width}):")
    with w.indent():
        _emit_lane_copy(w, names, temps, "_i", direction="in")
        if _stage_is_single_block(fsm, stage_id):
            blk = fsm.blocks[entry]
            _emit_ops(w, blk.ops, result_lhs="_result_col[_i]")
            if blk.term[0] == "yield":
                _emit_lane_copy(w, names, temps, "_i", direction="out")
        else:

            def on_yield(w: _W, sid: int) -> None:
                _emit_lane_copy(w, names, temps, "_i", direction="out")
                w.put("break")

            def on_finish(w: _W) -> None:
                w.put("break")

            w.put(f"_b = {entry}")
            _emit_dispatch(
                w, fsm, st.block_ids, result_lhs="_result_col[_i]",
                on_yield=on_yield, on_finish=on_finish,
            )


def _emit_col_aliases(w: _W, names: list[str], temps: list[str], *, result: bool) -> None:
    for n in names:
        w.put(f"_soa_{n} = self._soa_{n}")
    for t in temps:
        w.put(f"{t}_col = self.{t}")
    if result:
        w.put("_result_col = self._result")


def _emit_init(w: _W, cdef: CoroutineDef, ctx: ContextSpec, width: int,
               *, scalar_stage: bool, lane_state: str | None) -> None:
    """Batch (re)initialization: load arg lanes, rewind the schedule."""
    args = [d.name for d in ctx.args]
    w.put(f"def init(self{''.join(', ' + a for a in args)}):")
    with w.indent():
        if scalar_stage:
            w.put("self._stage = 0")
        for a in args:
            w.put(f"_soa_{a} = self._soa_{a}")
        if lane_state is not None:
            w.put("_state = self._state")
        w.put(f"for _i in range({width}):")
        with w.indent():
            for a in args:
                w.put(f"_soa_{a}[_i] = {a}[_i]")
            if lane_state is not None:
                w.put(f"_state[_i] = {lane_state}")
            if not args and lane_state is None:
                w.put("pass")


def _emit_fini(w: _W, width: int) -> None:
    w.put("def fini(self, out):")
    with w.indent():
        w.put("_result_col = self._result")
        w.put(f"for _i in range({width}):")
        with w.indent():
            w.put("out[_i] = _result_col[_i]")


def emit_static(cdef: CoroutineDef, width: int) -> SourceText:
    """Lockstep batch unit: ``make_<name>_<width>(shared...)`` -> class.

    Requires a straight-line state machine (stage k suspends only into
    stage k+1).  ``super_step()`` advances every lane one stage and
    returns True once the final stage ran; lane state lives in columns.
    """
    if width < 1:
        raise CodegenError(f"{cdef.name}: width must be >= 1, got {width}")
    fsm = split_stages(cdef)
    err = straight_line_error(fsm)
    if err is not None:
        raise CodegenError(f"{cdef.name}: {err}")
    ctx = compute_context(cdef, fsm)
    nstages = len(fsm.state_entry)
    cls = f"CoroutineState_{cdef.name}_{width}"
    factory = f"make_{cdef.name}_{width}"
    names = [d.name for d in ctx.args + ctx.variables]
    temps = [t for t in ("_cond", "_addr") if t in ctx.internal]
    slots = tuple(["_stage"] + _soa_slots(cdef, ctx, per_lane_state=False))

    w = _W()
    w.put(f"def {factory}({', '.join(_shared_names(cdef))}):")
    with w.indent():
        w.put(f"class {cls}:")
        with w.indent():
            w.put(f'"""{cdef.name} across {width} lockstep lanes,'
                  f" {nstages} stage(s) per batch.\"\"\"")
            w.put()
            w.put(f"__slots__ = {slots!r}")
            w.put()
            w.put(f"_WIDTH = {width}")
            w.put(f"_STAGES = {nstages}")
            w.put()
            w.put("def __init__(self):")
            with w.indent():
                w.put("self._stage = 0")
                for s in slots[1:]:
                    w.put(f"self.{s} = [None] * {width}")
            w.put()
            _emit_init(w, cdef, ctx, width, scalar_stage=True, lane_state=None)
            w.put()
            w.put("def super_step(self):")
            with w.indent():
                w.put("_stage = self._stage")
                w.put(f"if _stage >= {nstages}:")
                with w.indent():
                    w.put("return True")
                _emit_col_aliases(w, names, temps, result=True)
                for k in range(nstages):
                    w.put(f"if _stage == {k}:")
                    with w.indent():
                        _emit_stage_loop(w, fsm, k, width, names, temps)
                        w.put(f"self._stage = {k + 1}")
                        w.put(f"return {k == nstages - 1}")
                w.put("return True")
            w.put()
            _emit_fini(w, width)
        w.put()
        w.put(f"return {cls}")
    return SourceText(factory, _header(cdef.name), w.text())


# -- hybrid (static stage prefix, dynamic per-lane suffix)


def emit_hybrid(cdef: CoroutineDef, width: int) -> SourceText:
    """Prefix-lockstep unit: ``make_hybrid_<name>_<width>(shared...)``.

    ``run_prefix()`` marches all lanes through the statically hinted
    leading stages in lockstep; afterwards each lane is stepped to
    completion with ``step_slot(i)`` on the same columnar storage.
    """
    if width < 1:
        raise CodegenError(f"{cdef.name}: width must be >= 1, got {width}")
    fsm = split_stages(cdef)
    prefix = static_prefix_len(fsm)
    if prefix < 1:
        raise CodegenError(
            f"{cdef.name}: no statically scheduled stage prefix; hint the"
            " leading yields as static, or use the dynamic unit"
        )
    ctx = compute_context(cdef, fsm)
    finished = fsm.finished_id
    cls = f"CoroutineHybrid_{cdef.name}_{width}"
    factory = f"make_hybrid_{cdef.name}_{width}"
    names = [d.name for d in ctx.args + ctx.variables]
    temps = [t for t in ("_cond", "_addr") if t in ctx.internal]
    slots = tuple(_soa_slots(cdef, ctx, per_lane_state=True))

    w = _W()
    w.put(f"def {factory}({', '.join(_shared_names(cdef))}):")
    with w.indent():
        w.put(f"class {cls}:")
        with w.indent():
            w.put(f'"""{cdef.name} across {width} lanes: {prefix} lockstep'
                  f" stage(s), then per-lane stepping.\"\"\"")
            w.put()
            w.put(f"__slots__ = {slots!r}")
            w.put()
            w.put(f"_WIDTH = {width}")
            w.put(f"_PREFIX = {prefix}")
            w.put(f"_FINISHED = {finished}")
            w.put()
            w.put("def __init__(self):")
            with w.indent():
                for s in slots:
                    w.put(f"self.{s} = [None] * {width}")
            w.put()
            _emit_init(w, cdef, ctx, width, scalar_stage=False, lane_state="0")
            w.put()
            w.put("def run_prefix(self):")
            with w.indent():
                _emit_col_aliases(w, names, temps, result=True)
                for k in range(prefix):
                    _emit_stage_loop(w, fsm, k, width, names, temps)
                w.put("_state = self._state")
                w.put(f"for _i in range({width}):")
                with w.indent():
                    w.put(f"_state[_i] = {prefix}")
            w.put()
            w.put("def step_slot(self, _i):")
            with w.indent():
                w.put("_s = self._state[_i]")
                w.put(f"if _s == {finished}:")
                with w.indent():
                    w.put("return True")
                for n in names:
                    w.put(f"{n} = self._soa_{n}[_i]")
                for t in temps:
                    w.put(f"{t} = self.{t}[_i]")
                entries = ", ".join(str(b) for b in fsm.state_entry)
                w.put(f"_b = ({entries},)[_s]")

                def on_yield(w: _W, sid: int) -> None:
                    for n in names:
                        w.put(f"self._soa_{n}[_i] = {n}")
                    for t in temps:
                        w.put(f"self.{t}[_i] = {t}")
                    w.put(f"self._state[_i] = {sid}")
                    w.put("return False")

                def on_finish(w: _W) -> None:
                    w.put(f"self._state[_i] = {finished}")
                    w.put("return True")

                _emit_dispatch(
                    w, fsm, range(len(fsm.blocks)),
                    result_lhs="self._result[_i]", on_yield=on_yield,
                    on_finish=on_finish,
                )
            w.put()
            w.put("def done_slot(self, _i):")
            with w.indent():
                w.put(f"return self._state[_i] == {finished}")
            w.put()
            _emit_fini(w, width)
        w.put()
        w.put(f"return {cls}")
    return SourceText(factory, _header(cdef.name), w.text())


# -- plain sequential routine


def emit_routine(cdef: CoroutineDef) -> SourceText:
    """The sequential twin as a plain function (suspensions stripped)."""
    diags = dsl.validate(cdef)
    if diags:
        raise CodegenError(
            f"{cdef.name} does not validate: " + "; ".join(str(d) for d in diags)
        )
    stripped = strip_yields(cdef)
    params = [
        d.name for d in cdef.decls if d.kind in (DeclKind.ARG, DeclKind.SHARED_ARG)
    ]
    w = _W()
    w.put(f"def {cdef.name}({', '.join(params)}):")
    with w.indent():
        w.put(f'"""Sequential form of the {cdef.name!r} coroutine def."""')
        for d in cdef.variables:
            if d.init is not None:
                w.put(f"{d.name} = {d.init}")
        _RoutineEmitter(w, cdef).suite(stripped.body, None, None)
    return SourceText(cdef.name, _header(cdef.name), w.text())


def _binds_continue(blk: dsl.Block) -> bool:
    for s in blk.stmts:
        match s:
            case dsl.Continue():
                return True
            case dsl.Block():
                if _binds_continue(s):
                    return True
            case dsl.If(then=then, orelse=orelse):
                if _binds_continue(then):
                    return True
                if orelse is not None and _binds_continue(orelse):
                    return True
            case dsl.Switch(cases=cases, default=default):
                if any(_binds_continue(b) for _, b in cases):
                    return True
                if default is not None and _binds_continue(default):
                    return True
    return False


def _binds_break(blk: dsl.Block) -> bool:
    # Break binds the nearest enclosing loop or switch, so the scan
    # stops at nested loops and switches either way.
    for s in blk.stmts:
        match s:
            case dsl.Break():
                return True
            case dsl.Block():
                if _binds_break(s):
                    return True
            case dsl.If(then=then, orelse=orelse):
                if _binds_break(then):
                    return True
                if orelse is not None and _binds_break(orelse):
                    return True
    return False


class _RoutineEmitter:
    """Structured statement emission for the sequential routine.

    Break/continue targets are carried as literal line lists so that a
    translation through a ``for _once in (0,):`` wrapper (needed when a
    do-while body re-checks its condition via continue, or a switch arm
    breaks out early) composes with enclosing constructs.
    """

    def __init__(self, w: _W, cdef: CoroutineDef) -> None:
        self.w = w
        self.cdef = cdef
        self.counter = 0

    def fresh(self) -> int:
        self.counter += 1
        return self.counter

    def suite(self, blk: dsl.Block, brk: list[str] | None, cont: list[str] | None) -> None:
        before = len(self.w.lines)
        for d in blk.decls:
            if d.init is not None:
                self.w.put(f"{d.name} = {d.init}")
        for s in blk.stmts:
            self.stmt(s, brk, cont)
        if len(self.w.lines) == before:
            self.w.put("pass")

    def stmt(self, s, brk, cont) -> None:
        w = self.w
        match s:
            case dsl.Opaque(text=text):
                w.put_stmt_text(text)
            case dsl.Assign(dst=dst, value=value) | dsl.Load(dst=dst, addr=value):
                w.put(f"{dst} = {value}")
            case dsl.Store(addr=addr, value=value):
                w.put(f"{addr} = {value}")
            case dsl.Return(value=value):
                w.put(f"return {value}" if value is not None else "return None")
            case dsl.Break():
                for line in brk:
                    w.put(line)
            case dsl.Continue():
                for line in cont:
                    w.put(line)
            case dsl.Block():
                self.suite(s, brk, cont)
            case dsl.If(cond=cond, then=then, orelse=orelse):
                w.put(f"if {cond}:")
                with w.indent():
                    self.suite(then, brk, cont)
                if orelse is not None:
                    w.put("else:")
                    with w.indent():
                        self.suite(orelse, brk, cont)
            case dsl.While(cond=cond, body=body):
                w.put(f"while {cond}:")
                with w.indent():
                    self.suite(body, ["break"], ["continue"])
            case dsl.DoWhile(body=body, cond=cond):
                self.do_while(body, cond)
            case dsl.Switch():
                self.switch(s, brk, cont)
            case dsl.Call(args=args):
                self.tail_call(args)
            case _:
                raise CodegenError(f"cannot emit {type(s).__name__} in a routine")

    def do_while(self, body: dsl.Block, cond: str) -> None:
        w = self.w
        if not _binds_continue(body):
            w.put("while True:")
            with w.indent():
                self.suite(body, ["break"], None)
                w.put(f"if not ({cond}):")
                with w.indent():
                    w.put("break")
            return
        # A continue must land on the condition check, which a bare
        # while-True continue would skip; route it through a one-shot
        # inner loop.
        n = self.fresh()
        has_break = _binds_break(body)
        if has_break:
            w.put(f"_brk{n} = False")
        w.put("while True:")
        with w.indent():
            w.put(f"for _once{n} in (0,):")
            with w.indent():
                brk = [f"_brk{n} = True", "break"] if has_break else None
                self.suite(body, brk, ["break"])
            if has_break:
                w.put(f"if _brk{n}:")
                with w.indent():
                    w.put("break")
            w.put(f"if not ({cond}):")
            with w.indent():
                w.put("break")

    def switch(self, s: dsl.Switch, brk, cont) -> None:
        w = self.w
        n = self.fresh()
        tmp = f"_sw{n}"
        w.put(f"{tmp} = {s.scrutinee}")
        arms = list(s.cases)
        wrap = any(_binds_break(b) for _, b in arms) or (
            s.default is not None and _binds_break(s.default)
        )
        if not wrap:
            self.switch_chain(tmp, s, brk=None, cont=cont)
            return
        # An early break out of an arm needs something to break from;
        # an outer continue inside the wrapper must first escape it.
        cont_inner = cont
        cont_flag = None
        needs_cont = any(_binds_continue(b) for _, b in arms) or (
            s.default is not None and _binds_continue(s.default)
        )
        if cont is not None and needs_cont:
            cont_flag = f"_cont{n}"
            w.put(f"{cont_flag} = False")
            cont_inner = [f"{cont_flag} = True", "break"]
        w.put(f"for _once{n} in (0,):")
        with w.indent():
            self.switch_chain(tmp, s, brk=["break"], cont=cont_inner)
        if cont_flag is not None:
            w.put(f"if {cont_flag}:")
            with w.indent():
                for line in cont:
                    w.put(line)

    def switch_chain(self, tmp: str, s: dsl.Switch, brk, cont) -> None:
        w = self.w
        for k, (const, blk) in enumerate(s.cases):
            w.put(f"{'if' if k == 0 else 'elif'} {tmp} == ({const}):")
            with w.indent():
                self.suite(blk, brk, cont)
        if s.default is not None:
            w.put("else:")
            with w.indent():
                self.suite(s.default, brk, cont)

    def tail_call(self, args: tuple[str, ...]) -> None:
        # Self tail-resume maps onto tail recursion in the routine.
        it = iter(args)
        passed = [
            d.name if d.kind is DeclKind.SHARED_ARG else next(it)
            for d in self.cdef.decls
            if d.kind in (DeclKind.ARG, DeclKind.SHARED_ARG)
        ]
        self.w.put(f"return {self.cdef.name}({', '.join(passed)})")
