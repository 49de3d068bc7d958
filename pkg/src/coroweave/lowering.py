"""Lowering of coroutine definitions to yield-split state machines.

``split_stages`` flattens the structured statement tree into basic
blocks with explicit terminators and allocates one resumption state per
suspension point, in program order of first appearance.  State 0 is the
entry; ``finished_id`` (== suspension count + 1) is a pseudo-state with
no code.  A block list plus a state->entry-block table is enough for a
code generator to produce a portable dispatch loop, which is the
lowering strategy used here instead of interleaved switch labels.

``strip_yields`` produces the sequential twin of a definition (all
suspension points and prefetches removed); it is the baseline that
interleaved execution is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import dsl
from .dsl import CoroutineDef, Decl, DeclKind, YieldHint

__all__ = [
    "LoweringError",
    "CfgBlock",
    "Stage",
    "Fsm",
    "ContextSpec",
    "Layout",
    "INTERNAL_FIELDS",
    "split_stages",
    "compute_context",
    "strip_yields",
    "fsm_dump",
    "straight_line_error",
    "static_prefix_len",
]

# Internal context fields, in their canonical layout order.
INTERNAL_FIELDS = ("_state", "_result", "_cond", "_addr")


class LoweringError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class CfgBlock:
    """Straight-line ops plus one terminator.

    Ops are tuples: ``("opaque", text)``, ``("assign", dst, expr)``,
    ``("store", lvalue, expr)``, ``("prefetch", expr)``, and
    ``("result", expr)``.  Terminators are ``("goto", block)``,
    ``("br", cond, if_true, if_false)`` on block ids,
    ``("yield", state, hint)`` on a state id, and ``("finish",)``.
    """

    ops: tuple
    term: tuple


@dataclass(frozen=True, slots=True)
class Stage:
    """Per-state view: everything reachable without crossing a yield."""

    id: int
    block_ids: tuple[int, ...]
    stmt_count: int
    successors: tuple[int, ...]
    hint: YieldHint


@dataclass(frozen=True, slots=True)
class Fsm:
    name: str
    blocks: tuple[CfgBlock, ...]
    state_entry: tuple[int, ...]
    finished_id: int
    state_hints: tuple[YieldHint, ...]
    stages: tuple[Stage, ...]
    warnings: tuple[str, ...]

    @property
    def suspension_count(self) -> int:
        return len(self.state_entry) - 1


@dataclass(frozen=True, slots=True)
class ContextSpec:
    """What must live in a per-task context record.

    Everything declared is kept (no liveness pruning); shared args are
    segregated because they are stored once per scheduler, not per
    task.  ``internal`` is the subset of INTERNAL_FIELDS this
    definition needs.
    """

    args: tuple[Decl, ...]
    shared_args: tuple[Decl, ...]
    variables: tuple[Decl, ...]
    internal: tuple[str, ...]

    def field_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.args + self.variables) + self.internal


@dataclass(frozen=True, slots=True)
class Layout:
    """AoS keeps one record per task; SoA keeps one array per field."""

    kind: str
    width: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("aos", "soa"):
            raise LoweringError(f"layout kind must be 'aos' or 'soa', got {self.kind!r}")


class _Lowerer:
    def __init__(self, cdef: CoroutineDef) -> None:
        self.cdef = cdef
        self.ops: list[list] = []
        self.terms: list[tuple | None] = []
        self.state_entry: list[int] = []
        self.state_hints: list[YieldHint] = []
        self.warnings: list[str] = []
        self.sw_count = 0

    # -- block plumbing

    def new_block(self) -> int:
        self.ops.append([])
        self.terms.append(None)
        return len(self.terms) - 1

    def seal(self, b: int, term: tuple) -> None:
        assert self.terms[b] is None
        self.terms[b] = term

    def emit(self, b: int, op: tuple) -> None:
        self.ops[b].append(op)

    def reusable(self, b: int) -> bool:
        # A block with no ops and no terminator can become a loop header
        # directly instead of chaining through a goto.
        return not self.ops[b] and self.terms[b] is None

    def targeted(self, b: int) -> bool:
        for t in self.terms:
            match t:
                case ("goto", x) if x == b:
                    return True
                case ("br", _, x, y) if b in (x, y):
                    return True
        return False

    def suspend(self, cur: int, hint: YieldHint) -> int:
        nb = self.new_block()
        self.state_entry.append(nb)
        self.state_hints.append(hint)
        self.seal(cur, ("yield", len(self.state_entry) - 1, hint))
        return nb

    # -- recursive lowering; returns the open block or None if control ended

    def run(self) -> Fsm:
        entry = self.new_block()
        self.state_entry.append(entry)
        for d in self.cdef.decls:
            if d.kind is DeclKind.VARIABLE and d.init is not None:
                self.emit(entry, ("assign", d.name, d.init))
        cur = self.lower_block(self.cdef.body, entry, "body", None, None)
        if cur is not None:
            self.seal(cur, ("finish",))
        return self.finish()

    def lower_block(self, blk: dsl.Block, cur: int, path: str, brk, cont):
        for d in blk.decls:
            if d.init is not None:
                self.emit(cur, ("assign", d.name, d.init))
        for i, s in enumerate(blk.stmts):
            if cur is None:
                self.warnings.append(f"unreachable code dropped at {path}[{i}]")
                return None
            cur = self.lower_stmt(s, cur, f"{path}[{i}]", brk, cont)
        return cur

    def lower_stmt(self, s, cur: int, path: str, brk, cont):
        match s:
            case dsl.Opaque(text=text):
                self.emit(cur, ("opaque", text))
                return cur
            case dsl.Assign(dst=dst, value=value):
                self.emit(cur, ("assign", dst, value))
                return cur
            case dsl.Load(dst=dst, addr=addr, yield_before=yb):
                if not yb:
                    self.emit(cur, ("assign", dst, addr))
                    return cur
                self.emit(cur, ("assign", "_addr", addr))
                self.emit(cur, ("prefetch", "_addr"))
                nb = self.suspend(cur, YieldHint.DEFAULT)
                self.emit(nb, ("assign", dst, "_addr"))
                return nb
            case dsl.Store(addr=addr, value=value, yield_before=yb):
                if not yb:
                    self.emit(cur, ("store", addr, value))
                    return cur
                self.emit(cur, ("assign", "_addr", value))
                nb = self.suspend(cur, YieldHint.DEFAULT)
                self.emit(nb, ("store", addr, "_addr"))
                return nb
            case dsl.Prefetch(addrs=addrs):
                for a in addrs:
                    self.emit(cur, ("prefetch", a))
                return cur
            case dsl.Yield(hint=hint):
                return self.suspend(cur, hint)
            case dsl.Return(value=value):
                if value is not None:
                    self.emit(cur, ("result", value))
                self.seal(cur, ("finish",))
                return None
            case dsl.Break():
                self.seal(cur, ("goto", brk))
                return None
            case dsl.Continue():
                self.seal(cur, ("goto", cont))
                return None
            case dsl.Block():
                return self.lower_block(s, cur, path, brk, cont)
            case dsl.If():
                return self.lower_if(s, cur, path, brk, cont)
            case dsl.While(cond=cond, body=body):
                if self.reusable(cur):
                    head = cur
                else:
                    head = self.new_block()
                    self.seal(cur, ("goto", head))
                body_b = self.new_block()
                after = self.new_block()
                self.seal(head, ("br", cond, body_b, after))
                open_ = self.lower_block(body, body_b, path + ".do", after, head)
                if open_ is not None:
                    self.seal(open_, ("goto", head))
                return after
            case dsl.DoWhile(body=body, cond=cond):
                if self.reusable(cur):
                    body_b = cur
                else:
                    body_b = self.new_block()
                    self.seal(cur, ("goto", body_b))
                cond_b = self.new_block()
                after = self.new_block()
                open_ = self.lower_block(body, body_b, path + ".do", after, cond_b)
                if open_ is not None:
                    self.seal(open_, ("goto", cond_b))
                if self.terms[cond_b] is None:
                    self.seal(cond_b, ("br", cond, body_b, after))
                return after if self.targeted(after) else None
            case dsl.Switch():
                return self.lower_switch(s, cur, path, brk, cont)
            case dsl.Call(args=args):
                # Tail resume: rebind args (through temporaries, so an arg
                # expression may read the old values) and restart from entry,
                # which also re-runs variable initializers.
                temps = []
                for j, a in enumerate(args):
                    self.emit(cur, ("assign", f"_ca{j}", a))
                    temps.append(f"_ca{j}")
                for d, t in zip(self.cdef.args, temps):
                    self.emit(cur, ("assign", d.name, t))
                self.seal(cur, ("goto", self.state_entry[0]))
                return None
        raise LoweringError(f"cannot lower {type(s).__name__} at {path}")

    def lower_if(self, s: dsl.If, cur: int, path: str, brk, cont):
        cond = s.cond
        if s.yield_before:
            self.emit(cur, ("assign", "_cond", cond))
            cur = self.suspend(cur, YieldHint.DEFAULT)
            cond = "_cond"
        then_b = self.new_block()
        else_b = self.new_block() if s.orelse is not None else None
        after = self.new_block()
        self.seal(cur, ("br", cond, then_b, else_b if else_b is not None else after))
        t_open = self.lower_block(s.then, then_b, path + ".then", brk, cont)
        if t_open is not None:
            self.seal(t_open, ("goto", after))
        if else_b is not None:
            e_open = self.lower_block(s.orelse, else_b, path + ".else", brk, cont)
            if e_open is not None:
                self.seal(e_open, ("goto", after))
        return after if (s.orelse is None or self.targeted(after)) else None

    def lower_switch(self, s: dsl.Switch, cur: int, path: str, brk, cont):
        tmp = f"_sw{self.sw_count}"
        self.sw_count += 1
        self.emit(cur, ("assign", tmp, s.scrutinee))
        after = self.new_block()
        cmp_b = cur
        n = len(s.cases)
        for k, (const, blk) in enumerate(s.cases):
            case_b = self.new_block()
            if k + 1 < n or s.default is not None:
                next_b = self.new_block()
            else:
                next_b = after
            self.seal(cmp_b, ("br", f"{tmp} == ({const})", case_b, next_b))
            open_ = self.lower_block(blk, case_b, f"{path}.case[{k}]", after, cont)
            if open_ is not None:
                self.seal(open_, ("goto", after))
            cmp_b = next_b
        if s.default is not None:
            open_ = self.lower_block(s.default, cmp_b, path + ".default", after, cont)
            if open_ is not None:
                self.seal(open_, ("goto", after))
        return after if (s.default is None or self.targeted(after)) else None

    # -- reachability pruning and the per-state stage view

    def finish(self) -> Fsm:
        keep = set()
        work = list(self.state_entry)
        while work:
            b = work.pop()
            if b in keep:
                continue
            keep.add(b)
            match self.terms[b]:
                case ("goto", x):
                    work.append(x)
                case ("br", _, x, y):
                    work.extend((x, y))
        remap = {}
        for old in range(len(self.terms)):
            if old in keep:
                remap[old] = len(remap)

        def fix(term: tuple) -> tuple:
            match term:
                case ("goto", x):
                    return ("goto", remap[x])
                case ("br", c, x, y):
                    return ("br", c, remap[x], remap[y])
            return term

        blocks = tuple(
            CfgBlock(tuple(self.ops[old]), fix(self.terms[old]))
            for old in sorted(keep)
        )
        state_entry = tuple(remap[b] for b in self.state_entry)
        finished = len(state_entry)
        stages = _build_stages(blocks, state_entry, finished)
        return Fsm(
            name=self.cdef.name,
            blocks=blocks,
            state_entry=state_entry,
            finished_id=finished,
            state_hints=tuple(self.state_hints),
            stages=stages,
            warnings=tuple(self.warnings),
        )


def _build_stages(blocks, state_entry, finished_id) -> tuple[Stage, ...]:
    stages = []
    for sid, entry in enumerate(state_entry):
        seen: set[int] = set()
        work = [entry]
        succ_states: set[int] = set()
        hints: set[YieldHint] = set()
        reaches_finish = False
        while work:
            b = work.pop()
            if b in seen:
                continue
            seen.add(b)
            match blocks[b].term:
                case ("goto", x):
                    work.append(x)
                case ("br", _, x, y):
                    work.extend((x, y))
                case ("yield", target, hint):
                    succ_states.add(target)
                    hints.add(hint)
                case ("finish",):
                    reaches_finish = True
        succs = sorted(succ_states) + ([finished_id] if reaches_finish else [])
        hint = hints.pop() if len(hints) == 1 else YieldHint.DEFAULT
        stmt_count = sum(len(blocks[b].ops) for b in seen)
        stages.append(Stage(sid, tuple(sorted(seen)), stmt_count, tuple(succs), hint))
    return tuple(stages)


def split_stages(cdef: CoroutineDef) -> Fsm:
    """Lower a validated definition to its finite state machine.

    Raises LoweringError if the definition has validation diagnostics.
    Unreachable statements are dropped and reported in ``warnings``.
    """
    diags = dsl.validate(cdef)
    if diags:
        raise LoweringError(
            "definition does not validate: " + "; ".join(str(d) for d in diags)
        )
    return _Lowerer(cdef).run()


def compute_context(cdef: CoroutineDef, fsm: Fsm) -> ContextSpec:
    """Decide which declared and internal fields the context needs.

    All declared args and variables are context-resident (no liveness
    analysis).  ``_state`` appears when any suspension point may run
    under a dynamic schedule, ``_result`` when a result is declared,
    ``_cond``/``_addr`` when a branch or memory op suspends before use.
    """
    variables = list(cdef.variables)
    _collect_block_vars(cdef.body, variables)
    needs_cond = False
    needs_addr = False
    for b in fsm.blocks:
        for op in b.ops:
            if op[0] == "assign" and op[1] == "_cond":
                needs_cond = True
            if op[0] == "assign" and op[1] == "_addr":
                needs_addr = True
    internal = []
    if fsm.suspension_count > 0 and any(
        h in (YieldHint.DEFAULT, YieldHint.DYNAMIC) for h in fsm.state_hints
    ):
        internal.append("_state")
    if cdef.result_decl is not None:
        internal.append("_result")
    if needs_cond:
        internal.append("_cond")
    if needs_addr:
        internal.append("_addr")
    return ContextSpec(
        args=cdef.args,
        shared_args=cdef.shared_args,
        variables=tuple(variables),
        internal=tuple(internal),
    )


def _collect_block_vars(blk: dsl.Block, out: list[Decl]) -> None:
    out.extend(blk.decls)
    for s in blk.stmts:
        match s:
            case dsl.Block():
                _collect_block_vars(s, out)
            case dsl.If(then=then, orelse=orelse):
                _collect_block_vars(then, out)
                if orelse is not None:
                    _collect_block_vars(orelse, out)
            case dsl.Switch(cases=cases, default=default):
                for _, b in cases:
                    _collect_block_vars(b, out)
                if default is not None:
                    _collect_block_vars(default, out)
            case dsl.While(body=body) | dsl.DoWhile(body=body):
                _collect_block_vars(body, out)


def strip_yields(cdef: CoroutineDef) -> CoroutineDef:
    """Sequential twin: drop suspension points and prefetches.

    Yield and Prefetch statements are removed and every
    suspend-before-use flag is cleared; marked memory ops keep their
    nodes (they already execute as plain assignments).  A definition
    with no suspension points comes back structurally identical.
    """
    return CoroutineDef(cdef.name, cdef.decls, _strip_block(cdef.body))


def _strip_block(blk: dsl.Block) -> dsl.Block:
    out = []
    for s in blk.stmts:
        match s:
            case dsl.Yield() | dsl.Prefetch():
                continue
            case dsl.Block():
                out.append(_strip_block(s))
            case dsl.If(cond=cond, then=then, orelse=orelse):
                out.append(
                    dsl.If(cond, _strip_block(then),
                           _strip_block(orelse) if orelse is not None else None,
                           yield_before=False)
                )
            case dsl.Switch(scrutinee=scrutinee, cases=cases, default=default):
                out.append(
                    dsl.Switch(
                        scrutinee,
                        tuple((c, _strip_block(b)) for c, b in cases),
                        _strip_block(default) if default is not None else None,
                    )
                )
            case dsl.While(cond=cond, body=body):
                out.append(dsl.While(cond, _strip_block(body)))
            case dsl.DoWhile(body=body, cond=cond):
                out.append(dsl.DoWhile(_strip_block(body), cond))
            case dsl.Load(dst=dst, addr=addr):
                out.append(dsl.Load(dst, addr, yield_before=False))
            case dsl.Store(addr=addr, value=value):
                out.append(dsl.Store(addr, value, yield_before=False))
            case _:
                out.append(s)
    return dsl.Block(tuple(out), blk.decls)


def fsm_dump(fsm: Fsm) -> str:
    """One line per state: ``state <id>: [<n> stmts] -> <successors>``."""
    lines = [
        f"state {st.id}: [{st.stmt_count} stmts] -> "
        + " ".join(str(x) for x in st.successors)
        for st in fsm.stages
    ]
    return "\n".join(lines) + "\n"


def straight_line_error(fsm: Fsm) -> str | None:
    """Why this FSM cannot run as fused per-stage loops, or None if it can.

    Straight-line means stage k suspends only into stage k+1 and only
    the last stage finishes, so a batch marches through the stages in
    lockstep.
    """
    last = len(fsm.state_entry) - 1
    for st in fsm.stages:
        want = (st.id + 1,) if st.id < last else (fsm.finished_id,)
        if st.successors != want:
            got = ", ".join(str(x) for x in st.successors) or "nothing"
            return (
                f"stage {st.id} reaches {got} instead of state {want[0]}; "
                "state transitions are data-dependent, so use the dynamic "
                "or hybrid schedule instead"
            )
    return None


def static_prefix_len(fsm: Fsm) -> int:
    """Leading run of stages pinned static (for hybrid scheduling).

    A stage counts while it is hinted static and flows unconditionally
    into the next stage; everything after runs under the dynamic
    scheduler.
    """
    n = 0
    last = len(fsm.state_entry) - 1
    for st in fsm.stages:
        if st.id >= last:
            break
        if st.hint is not YieldHint.STATIC or st.successors != (st.id + 1,):
            break
        n += 1
    return n
