"""Intermediate representation and lowering.

Lowering makes every value lifetime explicit: each binding
initialization, assignment, and by-value argument is a Copy, each
binding leaving scope gets a Destroy, and function literals become
global routines taking their environment record as an extra leading
parameter.  The move optimization then rewrites a Copy into a Move and
deletes the source's Destroy whenever the source has no further use on
any control-flow path; it never reorders instructions.

Slots are indexes into a routine-local frame.  Instructions form a
tree: straight-line lists plus CondBr, which carries its branch blocks
inline.  Linearity (each produced slot consumed exactly once per path)
is machine-checked by verify_linearity before and after optimization.
"""

from __future__ import annotations

import copy as _copylib
from dataclasses import dataclass, field

from .ast import (
    ArrayLit,
    Assign,
    Binary,
    Binding,
    Call,
    Cond,
    Expr,
    FieldAcc,
    FloatLit,
    FuncLit,
    IndexAcc,
    InoutArg,
    IntLit,
    Path,
    StructInit,
)
from .diagnostics import NO_SPAN, Span
from .typechecker import StructInfo, TypedProgram
from .types import FLOAT, INT, INOUT, ArrayType, FloatType, FuncType, IntType, StructType, Type

# ---------------------------------------------------------------------------
# Type metadata


@dataclass(frozen=True)
class EnvRecordType(Type):
    """The record type of one routine's captured environment."""

    routine_id: str
    fields: tuple[tuple[str, Type], ...]

    def __str__(self) -> str:
        return f"env.{self.routine_id}"


@dataclass(frozen=True)
class TypeMetadata:
    type: Type
    trivial: bool
    size_bytes: int
    copy_routine: str
    destroy_routine: str


TRIVIAL_COPY = "copy.trivial"
NOOP_DESTROY = "destroy.noop"

_HANDLE_SIZE = 8


def _is_trivial(t: Type, table: dict[str, StructInfo]) -> bool:
    if isinstance(t, (IntType, FloatType)):
        return True
    if isinstance(t, StructType):
        return all(_is_trivial(ft, table) for ft in table[t.name].field_types)
    if isinstance(t, EnvRecordType):
        return all(_is_trivial(ft, table) for _, ft in t.fields)
    return False  # arrays and functions own heap storage


def size_bytes(t: Type, table: dict[str, StructInfo]) -> int:
    """Layout size; array elements and closure environments count as one
    handle-sized cell."""
    if isinstance(t, (IntType, FloatType)):
        return 8
    if isinstance(t, ArrayType):
        return _HANDLE_SIZE
    if isinstance(t, FuncType):
        # Routine id, environment handle, copy routine, destroy routine.
        return 4 * _HANDLE_SIZE
    if isinstance(t, StructType):
        return sum(size_bytes(ft, table) for ft in table[t.name].field_types)
    if isinstance(t, EnvRecordType):
        return sum(size_bytes(ft, table) for _, ft in t.fields)
    raise AssertionError(f"unknown type {t!r}")


def synthesize_metatype(t: Type, table: dict[str, StructInfo]) -> TypeMetadata:
    """Deterministic per-type copy/destroy metadata.

    Trivial types share the bitwise copy and the no-op destroy; every
    other type gets routines named after the type itself.
    """
    trivial = _is_trivial(t, table)
    if trivial:
        cr, dr = TRIVIAL_COPY, NOOP_DESTROY
    else:
        cr, dr = f"copy[{t}]", f"destroy[{t}]"
    return TypeMetadata(t, trivial, size_bytes(t, table), cr, dr)


# ---------------------------------------------------------------------------
# Instructions

# A path step inside an instruction: ("field", name) or ("index", slot).
Step = tuple[str, object]


class Instr:
    span: Span = NO_SPAN


@dataclass
class MakeInt(Instr):
    dst: int
    value: int
    span: Span = NO_SPAN


@dataclass
class MakeFloat(Instr):
    dst: int
    value: float
    span: Span = NO_SPAN


@dataclass
class MakeArray(Instr):
    dst: int
    element_type: Type
    operands: list[int]
    span: Span = NO_SPAN


@dataclass
class MakeStruct(Instr):
    dst: int
    struct_name: str
    operands: list[int]
    span: Span = NO_SPAN


@dataclass
class MakeClosure(Instr):
    dst: int
    routine_id: str
    operands: list[int]  # captured values, declaration order
    copy_routine: str
    destroy_routine: str
    span: Span = NO_SPAN


@dataclass
class Copy(Instr):
    dst: int
    src: int
    span: Span = NO_SPAN


@dataclass
class Move(Instr):
    dst: int
    src: int
    span: Span = NO_SPAN


@dataclass
class Destroy(Instr):
    slot: int
    span: Span = NO_SPAN


@dataclass
class LoadPath(Instr):
    dst: int
    base: int
    steps: list[Step]
    span: Span = NO_SPAN


@dataclass
class StorePath(Instr):
    base: int
    steps: list[Step]
    value: int
    span: Span = NO_SPAN


@dataclass
class ResolveLocation(Instr):
    dst: int
    base: int
    steps: list[Step]
    # True for a call borrowing its callee path: the location may root
    # at an immutable binding, since invocation is not a mutation.
    borrow: bool = False
    span: Span = NO_SPAN


@dataclass
class OverlapCheck(Instr):
    a: int
    b: int
    span: Span = NO_SPAN


@dataclass
class CallInstr(Instr):
    dst: int
    callee: int
    args: list[int]
    locations: list[int]
    span: Span = NO_SPAN


@dataclass
class BinaryInstr(Instr):
    dst: int
    op: str
    lhs: int
    rhs: int
    span: Span = NO_SPAN


@dataclass
class CondBr(Instr):
    cond: int
    then_block: list[Instr]
    else_block: list[Instr]
    span: Span = NO_SPAN


@dataclass
class Return(Instr):
    slot: int
    span: Span = NO_SPAN


# Routine parameter passing markers.
P_ENV = "env"
P_VALUE = "value"
P_INOUT = "inout"


@dataclass
class Routine:
    id: str
    # (passing, type); the env parameter, when present, is first.
    params: list[tuple[str, Type | None]]
    body: list[Instr]
    n_slots: int
    # Captured environment layout, declaration order (None for entry).
    env_fields: list[tuple[str, Type]] | None = None
    # Slots of let bindings and by-value parameters; the VM asserts in
    # debug mode that no store or inout resolution roots in one.
    immutable_slots: frozenset[int] = frozenset()


@dataclass
class IRProgram:
    routines: dict[str, Routine]
    metatypes: dict[Type, TypeMetadata]
    entry: str
    structs: dict[str, StructInfo]


ENTRY_ID = "@entry"


# ---------------------------------------------------------------------------
# Lowering


class _RoutineBuilder:
    def __init__(self, lowerer: _Lowerer, rid: str, fl: FuncLit | None):
        self.lowerer = lowerer
        self.id = rid
        self.body: list[Instr] = []
        self.blocks: list[list[Instr]] = [self.body]
        self.n_slots = 0
        self.slot_map: dict[int, int] = {}  # binding id -> slot
        self.inout_ids: set[int] = set()  # binding ids of inout params
        self.env_slot: int | None = None
        self.env_field_by_id: dict[int, str] = {}
        self.params: list[tuple[str, Type | None]] = []
        self.env_fields: list[tuple[str, Type]] | None = None
        self.immutable: set[int] = set()
        if fl is not None:
            self.env_slot = self.new_slot()
            self.params.append((P_ENV, None))
            self.env_fields = []
            assert fl.captures is not None and fl.param_ids is not None
            for cap in fl.captures:
                self.env_field_by_id[cap.binding_id] = cap.name
                self.env_fields.append((cap.name, cap.ty))
            assert isinstance(fl.ty, FuncType)
            for param, pid, (passing, pty) in zip(fl.params, fl.param_ids, fl.ty.params):
                slot = self.new_slot()
                self.slot_map[pid] = slot
                if passing == INOUT:
                    self.inout_ids.add(pid)
                    self.params.append((P_INOUT, pty))
                else:
                    self.params.append((P_VALUE, pty))
                    self.immutable.add(slot)

    # -- emission helpers ----------------------------------------------------

    def new_slot(self) -> int:
        self.n_slots += 1
        return self.n_slots - 1

    def emit(self, ins: Instr) -> None:
        self.blocks[-1].append(ins)

    # -- expression lowering --------------------------------------------------

    def lower_full(self, e: Expr) -> int:
        """Lower a statement chain; returns the slot owning the result."""
        if isinstance(e, Binding):
            return self.lower_binding(e)
        if isinstance(e, Assign):
            return self.lower_assign(e)
        return self.lower_value(e)

    def lower_binding(self, e: Binding) -> int:
        if e.name == "_":
            t = self.lower_value(e.init)
            self.emit(Destroy(t, e.init.span))
            return self.lower_full(e.body)
        assert e.binding_id is not None
        slot = self.new_slot()
        self.slot_map[e.binding_id] = slot
        if e.qualifier == "let":
            self.immutable.add(slot)
        if isinstance(e.init, Path):
            self.emit_path_read(e.init, slot)
        else:
            t = self.lower_value(e.init)
            self.emit(Copy(slot, t, e.init.span))
            self.emit(Destroy(t, e.init.span))
        result = self.lower_full(e.body)
        self.emit(Destroy(slot, e.span))
        return result

    def lower_assign(self, e: Assign) -> int:
        if e.target.root == "_" and not e.target.accessors:
            t = self.lower_value(e.value)
            self.emit(Destroy(t, e.value.span))
            return self.lower_full(e.body)
        # Subscripts of the target evaluate before the value, left to right.
        base, steps = self.lower_target(e.target)
        v = self.lower_copied(e.value)
        self.emit(StorePath(base, steps, v, e.span))
        return self.lower_full(e.body)

    def lower_target(self, p: Path) -> tuple[int, list[Step]]:
        """Base slot and steps for a write or location path."""
        steps: list[Step] = []
        if p.root_kind == "capture":
            base = self.env_slot
            assert base is not None
            steps.append(("field", self.env_field_by_id[p.root_binding_id]))
        else:
            base = self.slot_map[p.root_binding_id]
        for acc in p.accessors:
            if isinstance(acc, FieldAcc):
                steps.append(("field", acc.name))
            else:
                steps.append(("index", self.lower_value(acc.index)))
        return base, steps

    def emit_path_read(self, p: Path, dst: int) -> None:
        """Read a path into dst; a bare binding read is a plain Copy."""
        if p.root_kind in ("local", "param") and not p.accessors:
            self.emit(Copy(dst, self.slot_map[p.root_binding_id], p.span))
            return
        base, steps = self.lower_target(p)
        self.emit(LoadPath(dst, base, steps, p.span))

    def lower_value(self, e: Expr) -> int:
        """Lower an operand; returns a fresh slot owning the value."""
        if isinstance(e, IntLit):
            t = self.new_slot()
            self.emit(MakeInt(t, e.value, e.span))
            return t
        if isinstance(e, FloatLit):
            t = self.new_slot()
            self.emit(MakeFloat(t, e.value, e.span))
            return t
        if isinstance(e, ArrayLit):
            assert isinstance(e.ty, ArrayType)
            self.lowerer.register_type(e.ty)
            ops = [self.lower_value(x) for x in e.elements]
            t = self.new_slot()
            self.emit(MakeArray(t, e.ty.element, ops, e.span))
            return t
        if isinstance(e, StructInit):
            self.lowerer.register_type(e.ty)
            ops = [self.lower_value(a) for a in e.args]
            t = self.new_slot()
            self.emit(MakeStruct(t, e.name, ops, e.span))
            return t
        if isinstance(e, Path):
            self.lowerer.register_type(e.ty)
            t = self.new_slot()
            self.emit_path_read(e, t)
            return t
        if isinstance(e, FuncLit):
            return self.lower_funclit(e)
        if isinstance(e, Call):
            return self.lower_call(e)
        if isinstance(e, Binary):
            lhs = self.lower_value(e.lhs)
            rhs = self.lower_value(e.rhs)
            t = self.new_slot()
            self.emit(BinaryInstr(t, e.op, lhs, rhs, e.span))
            return t
        if isinstance(e, (Binding, Assign)):
            # Parenthesized statement chain in operand position.
            return self.lower_full(e)
        if isinstance(e, Cond):
            result = self.new_slot()
            cond = self.lower_value(e.cond)
            then_block: list[Instr] = []
            self.blocks.append(then_block)
            r = self.lower_full(e.then)
            self.emit(Move(result, r, e.then.span))
            self.blocks.pop()
            else_block: list[Instr] = []
            self.blocks.append(else_block)
            r = self.lower_full(e.orelse)
            self.emit(Move(result, r, e.orelse.span))
            self.blocks.pop()
            self.emit(CondBr(cond, then_block, else_block, e.span))
            return result
        raise AssertionError(f"cannot lower {e!r} as an operand")

    def lower_copied(self, e: Expr) -> int:
        """Lower a value that flows into a binding slot, stored place, or
        by-value argument: the flow is an explicit Copy.  Path reads
        already copy; computed values are copied out of their temporary
        and the temporary destroyed."""
        if isinstance(e, Path):
            return self.lower_value(e)
        t = self.lower_value(e)
        u = self.new_slot()
        self.emit(Copy(u, t, e.span))
        self.emit(Destroy(t, e.span))
        return u

    def lower_funclit(self, e: FuncLit) -> int:
        routine = self.lowerer.lower_routine(e)
        assert e.captures is not None
        ops = []
        for cap in e.captures:
            t = self.new_slot()
            if cap.binding_id in self.slot_map:
                slot = self.slot_map[cap.binding_id]
                if cap.binding_id in self.inout_ids:
                    self.emit(LoadPath(t, slot, [], e.span))
                else:
                    self.emit(Copy(t, slot, e.span))
            else:
                # Captured transitively from this routine's own environment.
                assert self.env_slot is not None
                name = self.env_field_by_id[cap.binding_id]
                self.emit(LoadPath(t, self.env_slot, [("field", name)], e.span))
            ops.append(t)
        env_meta = self.lowerer.env_metatype(routine)
        dst = self.new_slot()
        self.emit(
            MakeClosure(
                dst, routine.id, ops, env_meta.copy_routine, env_meta.destroy_routine, e.span
            )
        )
        return dst

    def lower_call(self, e: Call) -> int:
        assert e.overlap_pairs is not None and e.callee_overlap is not None
        # A path callee is borrowed in place so environment mutations
        # persist in the named closure value; any other callee is a
        # temporary the call consumes.
        callee_target: tuple[int, list[Step]] | None = None
        if isinstance(e.callee, Path):
            callee_target = self.lower_target(e.callee)
        else:
            callee = self.lower_value(e.callee)
        # Arguments evaluate left to right; an inout argument's
        # contribution is its subscript temporaries.  All locations are
        # then resolved adjacent to the call, so no user code runs
        # between a resolution and the call it feeds.
        args: list[int] = []
        inout_paths: list[Path] = []
        resolved: list[tuple[int, list[Step]]] = []
        for a in e.args:
            if isinstance(a, InoutArg):
                inout_paths.append(a.path)
                resolved.append(self.lower_target(a.path))
            else:
                args.append(self.lower_copied(a))
        if callee_target is not None:
            callee = self.new_slot()
            base, steps = callee_target
            self.emit(ResolveLocation(callee, base, steps, borrow=True, span=e.callee.span))
        locations = []
        for (base, steps), p in zip(resolved, inout_paths):
            loc = self.new_slot()
            self.emit(ResolveLocation(loc, base, steps, span=p.span))
            locations.append(loc)
        for i in e.callee_overlap:
            self.emit(OverlapCheck(callee, locations[i], e.span))
        for i, j in e.overlap_pairs:
            self.emit(OverlapCheck(locations[i], locations[j], e.span))
        dst = self.new_slot()
        self.emit(CallInstr(dst, callee, args, locations, e.span))
        return dst

    def finish(self, result: int, value_param_slots: list[int], span: Span) -> Routine:
        for slot in reversed(value_param_slots):
            self.emit(Destroy(slot, span))
        self.emit(Return(result, span))
        return Routine(
            self.id,
            self.params,
            self.body,
            self.n_slots,
            self.env_fields,
            frozenset(self.immutable),
        )


class _Lowerer:
    def __init__(self, tp: TypedProgram):
        self.tp = tp
        self.structs = tp.structs
        self.routines: dict[str, Routine] = {}
        self.metatypes: dict[Type, TypeMetadata] = {}
        self.env_types: dict[str, EnvRecordType] = {}
        self.next_fn = 0

    def register_type(self, t: Type | None) -> None:
        if t is not None and t not in self.metatypes:
            self.metatypes[t] = synthesize_metatype(t, self.structs)
            if isinstance(t, ArrayType):
                self.register_type(t.element)
            elif isinstance(t, StructType):
                for ft in self.structs[t.name].field_types:
                    self.register_type(ft)
            elif isinstance(t, FuncType):
                for _, pt in t.params:
                    self.register_type(pt)
                self.register_type(t.ret)

    def env_metatype(self, routine: Routine) -> TypeMetadata:
        env_ty = self.env_types[routine.id]
        return self.metatypes[env_ty]

    def lower_routine(self, fl: FuncLit) -> Routine:
        rid = f"@fn{self.next_fn}"
        self.next_fn += 1
        assert fl.captures is not None
        env_ty = EnvRecordType(rid, tuple((c.name, c.ty) for c in fl.captures))
        self.env_types[rid] = env_ty
        self.metatypes[env_ty] = synthesize_metatype(env_ty, self.structs)
        for c in fl.captures:
            self.register_type(c.ty)
        self.register_type(fl.ty)
        b = _RoutineBuilder(self, rid, fl)
        result = b.lower_full(fl.body)
        value_params = [
            b.slot_map[pid] for pid in (fl.param_ids or []) if pid not in b.inout_ids
        ]
        routine = b.finish(result, value_params, fl.span)
        self.routines[rid] = routine
        return routine

    def lower(self) -> IRProgram:
        self.register_type(INT)
        self.register_type(FLOAT)
        for name in self.structs:
            self.register_type(StructType(name))
        b = _RoutineBuilder(self, ENTRY_ID, None)
        result = b.lower_full(self.tp.program.entry)
        routine = b.finish(result, [], self.tp.program.entry.span)
        self.routines[ENTRY_ID] = routine
        return IRProgram(self.routines, self.metatypes, ENTRY_ID, self.structs)


def lower_program(tp: TypedProgram) -> IRProgram:
    """Lower a type-checked program to naive IR (no move elision)."""
    ir = _Lowerer(tp).lower()
    verify_linearity(ir)
    return ir


# ---------------------------------------------------------------------------
# Move optimization


def _operand_uses(ins: Instr, slot: int) -> int:
    """Number of times ins reads or consumes slot (definitions excluded)."""
    n = 0
    if isinstance(ins, (MakeArray, MakeStruct, MakeClosure)):
        n += ins.operands.count(slot)
    elif isinstance(ins, (Copy, Move)):
        n += ins.src == slot
    elif isinstance(ins, Destroy):
        n += ins.slot == slot
    elif isinstance(ins, (LoadPath, ResolveLocation)):
        n += ins.base == slot
        n += sum(1 for kind, v in ins.steps if kind == "index" and v == slot)
    elif isinstance(ins, StorePath):
        n += ins.base == slot
        n += ins.value == slot
        n += sum(1 for kind, v in ins.steps if kind == "index" and v == slot)
    elif isinstance(ins, OverlapCheck):
        n += (ins.a == slot) + (ins.b == slot)
    elif isinstance(ins, CallInstr):
        n += ins.callee == slot
        n += ins.args.count(slot) + ins.locations.count(slot)
    elif isinstance(ins, BinaryInstr):
        n += (ins.lhs == slot) + (ins.rhs == slot)
    elif isinstance(ins, CondBr):
        n += ins.cond == slot
    elif isinstance(ins, Return):
        n += ins.slot == slot
    return n


def _collect_uses(block: list[Instr], start: int, slot: int, out: list) -> None:
    for i in range(start, len(block)):
        ins = block[i]
        if _operand_uses(ins, slot):
            out.append((block, i, ins))
        if isinstance(ins, CondBr):
            _collect_uses(ins.then_block, 0, slot, out)
            _collect_uses(ins.else_block, 0, slot, out)


def _optimize_block(block: list[Instr]) -> None:
    i = 0
    while i < len(block):
        ins = block[i]
        if isinstance(ins, CondBr):
            _optimize_block(ins.then_block)
            _optimize_block(ins.else_block)
        elif isinstance(ins, Copy):
            uses: list = []
            _collect_uses(block, i + 1, ins.src, uses)
            if len(uses) == 1:
                ublock, _, use = uses[0]
                # Safe only when the lone remaining use is the source's
                # Destroy in this very block; a Destroy in a branch (or a
                # branch-dependent use pattern) stays untouched.
                if ublock is block and isinstance(use, Destroy):
                    block[i] = Move(ins.dst, ins.src, ins.span)
                    for j in range(i + 1, len(block)):
                        if block[j] is use:
                            del block[j]
                            break
        i += 1


def apply_move_optimization(ir: IRProgram) -> IRProgram:
    """Return a copy of ir with last-use Copies rewritten to Moves."""
    out = IRProgram(
        _copylib.deepcopy(ir.routines), dict(ir.metatypes), ir.entry, ir.structs
    )
    for routine in out.routines.values():
        _optimize_block(routine.body)
    verify_linearity(out)
    return out


# ---------------------------------------------------------------------------
# Linearity verification

_OWNED = "owned"
_EMPTY = "empty"
_LOC = "loc"
_ENV = "env"


class _LinearityError(AssertionError):
    pass


def _lin_fail(rid: str, ins: Instr, msg: str) -> _LinearityError:
    return _LinearityError(f"linearity violation in {rid} at {ins}: {msg}")


def verify_linearity(ir: IRProgram) -> None:
    """Check that every slot is produced once and consumed exactly once
    along each control-flow path (Copy only reads its source)."""
    for routine in ir.routines.values():
        state: dict[int, str] = {}
        for i, (passing, _) in enumerate(routine.params):
            state[i] = {P_ENV: _ENV, P_VALUE: _OWNED, P_INOUT: _LOC}[passing]
        _verify_block(routine.id, routine.body, state, top=True)
        for slot, st in state.items():
            if st == _OWNED:
                raise _LinearityError(
                    f"linearity violation in {routine.id}: slot {slot} leaks at exit"
                )


def _verify_block(rid: str, block: list[Instr], state: dict[int, str], top: bool) -> None:
    def produce(ins: Instr, slot: int) -> None:
        if state.get(slot, _EMPTY) != _EMPTY:
            raise _lin_fail(rid, ins, f"slot {slot} already live")
        state[slot] = _OWNED

    def consume(ins: Instr, slot: int) -> None:
        if state.get(slot, _EMPTY) != _OWNED:
            raise _lin_fail(rid, ins, f"slot {slot} not owned")
        state[slot] = _EMPTY

    def read(ins: Instr, slot: int) -> None:
        if state.get(slot, _EMPTY) not in (_OWNED, _LOC, _ENV):
            raise _lin_fail(rid, ins, f"slot {slot} not readable")

    for idx, ins in enumerate(block):
        if isinstance(ins, (MakeInt, MakeFloat)):
            produce(ins, ins.dst)
        elif isinstance(ins, (MakeArray, MakeStruct, MakeClosure)):
            for op in ins.operands:
                consume(ins, op)
            produce(ins, ins.dst)
        elif isinstance(ins, Copy):
            read(ins, ins.src)
            produce(ins, ins.dst)
        elif isinstance(ins, Move):
            consume(ins, ins.src)
            produce(ins, ins.dst)
        elif isinstance(ins, Destroy):
            consume(ins, ins.slot)
        elif isinstance(ins, LoadPath):
            read(ins, ins.base)
            for kind, v in ins.steps:
                if kind == "index":
                    consume(ins, v)  # type: ignore[arg-type]
            produce(ins, ins.dst)
        elif isinstance(ins, StorePath):
            read(ins, ins.base)
            for kind, v in ins.steps:
                if kind == "index":
                    consume(ins, v)  # type: ignore[arg-type]
            consume(ins, ins.value)
        elif isinstance(ins, ResolveLocation):
            read(ins, ins.base)
            for kind, v in ins.steps:
                if kind == "index":
                    consume(ins, v)  # type: ignore[arg-type]
            produce(ins, ins.dst)
        elif isinstance(ins, OverlapCheck):
            read(ins, ins.a)
            read(ins, ins.b)
        elif isinstance(ins, CallInstr):
            consume(ins, ins.callee)
            for a in ins.args:
                consume(ins, a)
            for l in ins.locations:
                consume(ins, l)
            produce(ins, ins.dst)
        elif isinstance(ins, BinaryInstr):
            consume(ins, ins.lhs)
            consume(ins, ins.rhs)
            produce(ins, ins.dst)
        elif isinstance(ins, CondBr):
            consume(ins, ins.cond)
            then_state = dict(state)
            else_state = dict(state)
            _verify_block(rid, ins.then_block, then_state, top=False)
            _verify_block(rid, ins.else_block, else_state, top=False)
            live_then = {s: st for s, st in then_state.items() if st != _EMPTY}
            live_else = {s: st for s, st in else_state.items() if st != _EMPTY}
            if live_then != live_else:
                raise _lin_fail(rid, ins, "branch end states differ")
            state.clear()
            state.update(live_then)
        elif isinstance(ins, Return):
            if not top or idx != len(block) - 1:
                raise _lin_fail(rid, ins, "Return must end the routine body")
            consume(ins, ins.slot)
        else:  # pragma: no cover
            raise AssertionError(f"unknown instruction {ins!r}")
    if top and (not block or not isinstance(block[-1], Return)):
        raise _LinearityError(f"linearity violation in {rid}: body must end with Return")


# ---------------------------------------------------------------------------
# Dump


def _fmt_steps(steps: list[Step]) -> str:
    out = []
    for kind, v in steps:
        out.append(f".{v}" if kind == "field" else f"[%{v}]")
    return "".join(out)


def _fmt_instr(ins: Instr) -> str:
    if isinstance(ins, MakeInt):
        return f"make_int {ins.value} -> %{ins.dst}"
    if isinstance(ins, MakeFloat):
        return f"make_float {ins.value!r} -> %{ins.dst}"
    if isinstance(ins, MakeArray):
        ops = ", ".join(f"%{o}" for o in ins.operands)
        return f"make_array [{ins.element_type}] ({ops}) -> %{ins.dst}"
    if isinstance(ins, MakeStruct):
        ops = ", ".join(f"%{o}" for o in ins.operands)
        return f"make_struct {ins.struct_name} ({ops}) -> %{ins.dst}"
    if isinstance(ins, MakeClosure):
        ops = ", ".join(f"%{o}" for o in ins.operands)
        return (
            f"make_closure {ins.routine_id} ({ops}) "
            f"c={ins.copy_routine} d={ins.destroy_routine} -> %{ins.dst}"
        )
    if isinstance(ins, Copy):
        return f"copy %{ins.src} -> %{ins.dst}"
    if isinstance(ins, Move):
        return f"move %{ins.src} -> %{ins.dst}"
    if isinstance(ins, Destroy):
        return f"destroy %{ins.slot}"
    if isinstance(ins, LoadPath):
        return f"load_path %{ins.base}{_fmt_steps(ins.steps)} -> %{ins.dst}"
    if isinstance(ins, StorePath):
        return f"store_path %{ins.base}{_fmt_steps(ins.steps)} <- %{ins.value}"
    if isinstance(ins, ResolveLocation):
        return f"resolve_location %{ins.base}{_fmt_steps(ins.steps)} -> %{ins.dst}"
    if isinstance(ins, OverlapCheck):
        return f"overlap_check %{ins.a}, %{ins.b}"
    if isinstance(ins, CallInstr):
        args = ", ".join(f"%{a}" for a in ins.args)
        locs = ", ".join(f"%{l}" for l in ins.locations)
        return f"call %{ins.callee} ({args})({locs}) -> %{ins.dst}"
    if isinstance(ins, BinaryInstr):
        return f"binary {ins.op} %{ins.lhs}, %{ins.rhs} -> %{ins.dst}"
    if isinstance(ins, Return):
        return f"return %{ins.slot}"
    raise AssertionError(f"unknown instruction {ins!r}")


def _dump_block(block: list[Instr], out: list[str], indent: str) -> None:
    for i, ins in enumerate(block):
        if isinstance(ins, CondBr):
            out.append(f"{indent}{i}: cond_br %{ins.cond}")
            out.append(f"{indent}then:")
            _dump_block(ins.then_block, out, indent + "  ")
            out.append(f"{indent}else:")
            _dump_block(ins.else_block, out, indent + "  ")
        else:
            out.append(f"{indent}{i}: {_fmt_instr(ins)}")


def dump_ir(ir: IRProgram) -> str:
    out: list[str] = []
    for rid in sorted(ir.routines, key=lambda r: (r != ir.entry, r)):
        routine = ir.routines[rid]
        params = []
        for passing, ty in routine.params:
            params.append("env" if passing == P_ENV else f"{passing} {ty}")
        out.append(f"routine {rid}({', '.join(params)}) slots={routine.n_slots}")
        _dump_block(routine.body, out, "  ")
    return "\n".join(out)
