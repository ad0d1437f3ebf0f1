"""Virtual machine.

Values form disjoint trees.  Ints, floats, and structs live inline;
arrays own a refcounted block in a dynamic store keyed by opaque
storage ids; closures own an environment record of captured values.
Copying an array under copy-on-write just retains its block; the block
is duplicated lazily, the first time a mutation reaches it while it is
shared.  With cow off every copy is a deep copy, so blocks are never
shared and the counters expose exactly what each strategy costs.

inout arguments travel as Locations: a trail of frame-slot, field, and
array-element hops, never a machine address.  Resolution applies
prepare_mutation along the path, so a callee always writes
uniquely-referenced storage; overlap between two locations of one call
is the trail-prefix relation, checked dynamically for pairs the type
checker could not decide.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .diagnostics import NO_SPAN, RuntimeTrap, Span
from .ir import (
    BinaryInstr,
    CallInstr,
    CondBr,
    Copy,
    Destroy,
    ENTRY_ID,
    IRProgram,
    Instr,
    LoadPath,
    MakeArray,
    MakeClosure,
    MakeFloat,
    MakeInt,
    MakeStruct,
    Move,
    OverlapCheck,
    P_ENV,
    P_INOUT,
    P_VALUE,
    ResolveLocation,
    Return,
    Routine,
    StorePath,
    size_bytes,
)
from .types import Type

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1

# Trap kinds.
INDEX_OUT_OF_BOUNDS = "IndexOutOfBounds"
OVERLAP_VIOLATION = "OverlapViolation"
INTEGER_OVERFLOW = "IntegerOverflow"
DIVISION_BY_ZERO = "DivisionByZero"


@dataclass
class RuntimeStats:
    deep_copies: int = 0
    retains: int = 0
    releases: int = 0
    moves: int = 0
    cow_copies: int = 0
    allocs: int = 0
    frees: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "deep_copies": self.deep_copies,
            "retains": self.retains,
            "releases": self.releases,
            "moves": self.moves,
            "cow_copies": self.cow_copies,
            "allocs": self.allocs,
            "frees": self.frees,
        }

    def as_json(self) -> str:
        return json.dumps(self.as_dict(), separators=(",", ":"))


# ---------------------------------------------------------------------------
# Values


class StructVal:
    """Struct value; fields laid out in declaration order.

    field_names is set only for closure environment records, whose
    layout is not in the user struct table.
    """

    __slots__ = ("name", "fields", "field_names")

    def __init__(self, name: str, fields: list, field_names: tuple[str, ...] | None = None):
        self.name = name
        self.fields = fields
        self.field_names = field_names


class ArrayVal:
    """An array handle: element type plus a storage id.

    Each live handle is a distinct owner; copy-on-write rewrites
    handle.sid in place when it duplicates the block under an owner.
    """

    __slots__ = ("element_type", "sid")

    def __init__(self, element_type: Type, sid: int):
        self.element_type = element_type
        self.sid = sid


class ClosureRecord:
    __slots__ = ("routine_id", "env", "copy_routine", "destroy_routine")

    def __init__(self, routine_id: str, env: StructVal, copy_routine: str, destroy_routine: str):
        self.routine_id = routine_id
        self.env = env
        self.copy_routine = copy_routine
        self.destroy_routine = destroy_routine


class FuncVal:
    __slots__ = ("record",)

    def __init__(self, record: ClosureRecord):
        self.record = record


Value = object  # int | float | StructVal | ArrayVal | FuncVal


class Block:
    """One store entry: ⟨r, n, k, elements⟩."""

    __slots__ = ("r", "element_type", "elems")

    def __init__(self, element_type: Type, elems: list):
        self.r = 1
        self.element_type = element_type
        self.elems = elems

    @property
    def n(self) -> int:
        return len(self.elems)


class Frame:
    __slots__ = ("routine", "slots")

    def __init__(self, routine: Routine):
        self.routine = routine
        self.slots: list = [None] * routine.n_slots


# A location is a trail of hops from a frame slot down to a place:
#   ("slot", frame, index) — always first;
#   ("field", name)        — struct field step;
#   ("elem", sid, index)   — array element step.
# Two locations overlap iff one trail is a prefix of the other.


@dataclass(frozen=True)
class Location:
    trail: tuple

    @property
    def kind(self) -> str:
        for hop in reversed(self.trail):
            if hop[0] == "elem":
                return "ArrayElement"
        return "FrameSlot"


def check_dynamic_overlap(l1: Location, l2: Location, span: Span = NO_SPAN) -> None:
    """Trap iff the locations denote the same place or one contains the
    other; trails that differ at any common hop are disjoint."""
    for a, b in zip(l1.trail, l2.trail):
        if a != b:
            return
    raise RuntimeTrap(span, OVERLAP_VIOLATION, "overlapping inout arguments")


# ---------------------------------------------------------------------------
# Array layout serialization


def serialize_array_layout(
    elements: list[int], element_size_bytes: int, byte_order: str
) -> tuple[int, int, int, bytes]:
    """Render an Int array's storage tuple ⟨r, n, k, payload⟩.

    Elements are two's-complement signed integers of the given width;
    a value outside the representable range is an error.
    """
    if byte_order not in ("little", "big"):
        raise ValueError(f"byte_order must be 'little' or 'big', got {byte_order!r}")
    n = len(elements)
    k = n * element_size_bytes
    payload = bytearray()
    lo = -(1 << (8 * element_size_bytes - 1))
    hi = (1 << (8 * element_size_bytes - 1)) - 1
    for v in elements:
        if not lo <= v <= hi:
            raise ValueError(f"value {v} does not fit in {element_size_bytes} bytes")
        payload += v.to_bytes(element_size_bytes, byte_order, signed=True)
    return (1, n, k, bytes(payload))


# ---------------------------------------------------------------------------
# Formatting


def format_value(v: Value) -> str:
    if isinstance(v, bool):  # defensive: comparisons must produce plain ints
        raise AssertionError("boolean leaked into a value")
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, FuncVal):
        return "<function>"
    raise AssertionError(f"cannot format {v!r} without a store")


class VM:
    def __init__(self, ir: IRProgram, cow: bool = True, debug: bool = False):
        self.ir = ir
        self.cow = cow
        self.debug = debug
        self.stats = RuntimeStats()
        self.store: dict[int, Block] = {}
        self.next_sid = 0
        self.frames: list[Frame] = []

    # -- store management ----------------------------------------------------

    def alloc(self, element_type: Type, elems: list) -> int:
        sid = self.next_sid
        self.next_sid += 1
        self.store[sid] = Block(element_type, elems)
        self.stats.allocs += 1
        return sid

    def block_k(self, block: Block) -> int:
        return block.n * size_bytes(block.element_type, self.ir.structs)

    # -- value operations -----------------------------------------------------

    def copy_value(self, v: Value) -> Value:
        if isinstance(v, (int, float)):
            return v
        if isinstance(v, StructVal):
            return StructVal(v.name, [self.copy_value(f) for f in v.fields], v.field_names)
        if isinstance(v, ArrayVal):
            if self.cow:
                self.store[v.sid].r += 1
                self.stats.retains += 1
                return ArrayVal(v.element_type, v.sid)
            block = self.store[v.sid]
            elems = [self.copy_value(e) for e in block.elems]
            self.stats.deep_copies += 1
            return ArrayVal(v.element_type, self.alloc(v.element_type, elems))
        if isinstance(v, FuncVal):
            rec = v.record
            env = StructVal(
                rec.env.name,
                [self.copy_value(f) for f in rec.env.fields],
                rec.env.field_names,
            )
            return FuncVal(ClosureRecord(rec.routine_id, env, rec.copy_routine, rec.destroy_routine))
        raise AssertionError(f"cannot copy {v!r}")

    def destroy_value(self, v: Value) -> None:
        if isinstance(v, (int, float)) or v is None:
            return
        if isinstance(v, StructVal):
            for f in v.fields:
                self.destroy_value(f)
            return
        if isinstance(v, ArrayVal):
            block = self.store.get(v.sid)
            assert block is not None and block.r >= 1, "destroy of a dead block"
            if block.r == 1:
                for e in block.elems:
                    self.destroy_value(e)
                del self.store[v.sid]
                self.stats.frees += 1
            else:
                block.r -= 1
                self.stats.releases += 1
            return
        if isinstance(v, FuncVal):
            self.destroy_value(v.record.env)
            return
        raise AssertionError(f"cannot destroy {v!r}")

    def cow_dup(self, handle: ArrayVal) -> Block:
        """Duplicate handle's shared block for mutation: the original
        loses one reference, the handle is rewritten to a fresh unique
        block, and the elements are copied element-wise (retaining
        nested arrays when cow is on)."""
        old = self.store[handle.sid]
        assert old.r > 1
        old.r -= 1
        self.stats.releases += 1
        elems = [self.copy_value(e) for e in old.elems]
        handle.sid = self.alloc(handle.element_type, elems)
        self.stats.cow_copies += 1
        return self.store[handle.sid]

    # -- formatting through the store -----------------------------------------

    def render(self, v: Value) -> str:
        if isinstance(v, ArrayVal):
            elems = self.store[v.sid].elems
            return f"[{', '.join(self.render(e) for e in elems)}]"
        if isinstance(v, StructVal):
            return f"{v.name}({', '.join(self.render(f) for f in v.fields)})"
        return format_value(v)

    # -- frame helpers ----------------------------------------------------------

    def take(self, frame: Frame, slot: int) -> Value:
        v = frame.slots[slot]
        frame.slots[slot] = None
        return v

    def field_index(self, sv: StructVal, name: str) -> int:
        if sv.field_names is not None:
            return sv.field_names.index(name)
        idx = self.ir.structs[sv.name].index_of(name)
        assert idx is not None
        return idx

    def check_bounds(self, block: Block, index: int, span: Span) -> None:
        if not 0 <= index < block.n:
            raise RuntimeTrap(
                span,
                INDEX_OUT_OF_BOUNDS,
                f"index {index} out of bounds for array of {block.n} elements",
            )

    # -- path navigation ---------------------------------------------------------

    def _loc_place(self, loc: Location, span: Span, prepare: bool):
        """Walk a location's trail to (container, index).

        container is a frame-slot list, struct field list, or block
        element list; the value lives at container[index].  With
        prepare=True, shared blocks crossed by the trail are duplicated
        and the trail rewritten, which is prepare_mutation.
        """
        hop = loc.trail[0]
        assert hop[0] == "slot"
        container: list = hop[1].slots
        index = hop[2]
        trail = [hop]
        for hop in loc.trail[1:]:
            cur = container[index]
            if hop[0] == "field":
                assert isinstance(cur, StructVal)
                container = cur.fields
                index = self.field_index(cur, hop[1])
                trail.append(hop)
            else:
                assert isinstance(cur, ArrayVal) and cur.sid == hop[1], (
                    "stale location: storage replaced during argument evaluation"
                )
                block = self.store[cur.sid]
                if prepare and block.r > 1:
                    block = self.cow_dup(cur)
                self.check_bounds(block, hop[2], span)
                container = block.elems
                index = hop[2]
                trail.append(("elem", cur.sid, hop[2]))
        return container, index, Location(tuple(trail))

    def prepare_mutation(self, loc: Location, span: Span = NO_SPAN) -> Location:
        """Make every block along loc uniquely referenced; returns the
        location rewritten to the duplicated blocks."""
        _, _, out = self._loc_place(loc, span, prepare=True)
        return out

    def read_location(self, loc: Location, span: Span) -> Value:
        container, index, _ = self._loc_place(loc, span, prepare=False)
        return container[index]

    def _walk_steps(self, frame: Frame, cur: Value, steps, span: Span, prepare: bool, trail=None):
        """Walk path steps from a value; consumes index slots.

        Returns (container, index) of the final place when the walk is
        rooted in a container, plus the extended trail when requested.
        Used by loads (prepare=False), stores and resolutions
        (prepare=True).
        """
        container = None
        index = None
        for kind, v in steps:
            if container is not None:
                cur = container[index]
            if kind == "field":
                assert isinstance(cur, StructVal)
                container = cur.fields
                index = self.field_index(cur, v)
                if trail is not None:
                    trail.append(("field", v))
            else:
                i = self.take(frame, v)
                assert isinstance(i, int)
                assert isinstance(cur, ArrayVal)
                block = self.store[cur.sid]
                if prepare and block.r > 1:
                    block = self.cow_dup(cur)
                self.check_bounds(block, i, span)
                container = block.elems
                index = i
                if trail is not None:
                    trail.append(("elem", cur.sid, i))
        return container, index

    # -- instruction execution ------------------------------------------------

    def exec_load(self, frame: Frame, ins: LoadPath) -> None:
        base = frame.slots[ins.base]
        if isinstance(base, Location):
            container, index, _ = self._loc_place(base, ins.span, prepare=False)
            cur = container[index]
        else:
            cur = base
        container, index = self._walk_steps(frame, cur, ins.steps, ins.span, prepare=False)
        target = cur if container is None else container[index]
        frame.slots[ins.dst] = self.copy_value(target)

    def exec_store(self, frame: Frame, ins: StorePath) -> None:
        value = self.take(frame, ins.value)
        base = frame.slots[ins.base]
        if isinstance(base, Location):
            container, index, _ = self._loc_place(base, ins.span, prepare=True)
            if ins.steps:
                c2, i2 = self._walk_steps(
                    frame, container[index], ins.steps, ins.span, prepare=True
                )
                container, index = c2, i2
        else:
            if self.debug:
                assert ins.base not in frame.routine.immutable_slots, (
                    "write through an immutable binding"
                )
            if not ins.steps:
                container, index = frame.slots, ins.base
            else:
                container, index = self._walk_steps(
                    frame, base, ins.steps, ins.span, prepare=True
                )
        old = container[index]
        container[index] = value
        self.destroy_value(old)

    def exec_resolve(self, frame: Frame, ins: ResolveLocation) -> None:
        base = frame.slots[ins.base]
        if isinstance(base, Location):
            _, _, loc = self._loc_place(base, ins.span, prepare=True)
            trail = list(loc.trail)
            cur = self.read_location(loc, ins.span)
        else:
            if self.debug and not ins.borrow:
                assert ins.base not in frame.routine.immutable_slots, (
                    "inout resolution of an immutable binding"
                )
            trail = [("slot", frame, ins.base)]
            cur = base
        self._walk_steps(frame, cur, ins.steps, ins.span, prepare=True, trail=trail)
        frame.slots[ins.dst] = Location(tuple(trail))

    def exec_call(self, frame: Frame, ins: CallInstr) -> None:
        callee = self.take(frame, ins.callee)
        if isinstance(callee, Location):
            # Borrowed callee: the closure value stays in place and its
            # environment mutations persist there.
            fn = self.read_location(callee, ins.span)
            owned = None
        else:
            fn = callee
            owned = callee
        assert isinstance(fn, FuncVal)
        args = [self.take(frame, s) for s in ins.args]
        locations = [self.take(frame, s) for s in ins.locations]
        routine = self.ir.routines[fn.record.routine_id]
        result = self.execute_routine(routine, args, locations, fn.record.env)
        if owned is not None:
            self.destroy_value(owned)
        frame.slots[ins.dst] = result

    def exec_binary(self, frame: Frame, ins: BinaryInstr) -> None:
        lhs = self.take(frame, ins.lhs)
        rhs = self.take(frame, ins.rhs)
        frame.slots[ins.dst] = apply_binary(ins.op, lhs, rhs, ins.span)

    def execute_routine(self, routine: Routine, args: list, locations: list, env) -> Value:
        frame = Frame(routine)
        ai = 0
        li = 0
        for i, (passing, _) in enumerate(routine.params):
            if passing == P_ENV:
                frame.slots[i] = env  # borrowed, never destroyed here
            elif passing == P_VALUE:
                frame.slots[i] = args[ai]
                ai += 1
            else:
                assert passing == P_INOUT
                frame.slots[i] = locations[li]
                li += 1
        self.frames.append(frame)
        try:
            result = self.exec_block(routine.body, frame)
        finally:
            self.frames.pop()
        assert result is not None, "routine body must end in Return"
        return result

    def exec_block(self, block: list[Instr], frame: Frame) -> Value | None:
        for ins in block:
            if isinstance(ins, MakeInt) or isinstance(ins, MakeFloat):
                frame.slots[ins.dst] = ins.value
            elif isinstance(ins, Copy):
                frame.slots[ins.dst] = self.copy_value(frame.slots[ins.src])
            elif isinstance(ins, Move):
                frame.slots[ins.dst] = self.take(frame, ins.src)
                self.stats.moves += 1
            elif isinstance(ins, Destroy):
                self.destroy_value(self.take(frame, ins.slot))
            elif isinstance(ins, LoadPath):
                self.exec_load(frame, ins)
            elif isinstance(ins, StorePath):
                self.exec_store(frame, ins)
            elif isinstance(ins, BinaryInstr):
                self.exec_binary(frame, ins)
            elif isinstance(ins, MakeArray):
                elems = [self.take(frame, s) for s in ins.operands]
                sid = self.alloc(ins.element_type, elems)
                frame.slots[ins.dst] = ArrayVal(ins.element_type, sid)
            elif isinstance(ins, MakeStruct):
                fields = [self.take(frame, s) for s in ins.operands]
                frame.slots[ins.dst] = StructVal(ins.struct_name, fields)
            elif isinstance(ins, MakeClosure):
                captured = [self.take(frame, s) for s in ins.operands]
                routine = self.ir.routines[ins.routine_id]
                names = tuple(n for n, _ in (routine.env_fields or []))
                env = StructVal(f"env.{ins.routine_id}", captured, names)
                record = ClosureRecord(
                    ins.routine_id, env, ins.copy_routine, ins.destroy_routine
                )
                frame.slots[ins.dst] = FuncVal(record)
            elif isinstance(ins, ResolveLocation):
                self.exec_resolve(frame, ins)
            elif isinstance(ins, OverlapCheck):
                check_dynamic_overlap(frame.slots[ins.a], frame.slots[ins.b], ins.span)
            elif isinstance(ins, CallInstr):
                self.exec_call(frame, ins)
            elif isinstance(ins, CondBr):
                cond = self.take(frame, ins.cond)
                assert isinstance(cond, int)
                chosen = ins.then_block if cond != 0 else ins.else_block
                self.exec_block(chosen, frame)
            elif isinstance(ins, Return):
                result = self.take(frame, ins.slot)
                if self.debug:
                    self.audit_refcounts(pending=result)
                return result
            else:  # pragma: no cover
                raise AssertionError(f"unknown instruction {ins!r}")
            if self.debug:
                self.audit_refcounts()
        return None

    # -- debug store scan ---------------------------------------------------------

    def audit_refcounts(self, pending: Value | None = None) -> None:
        """Safepoint check: each block's r equals the number of live
        Values holding its σ."""
        refs: dict[int, int] = {}

        def walk(v: Value) -> None:
            if isinstance(v, ArrayVal):
                refs[v.sid] = refs.get(v.sid, 0) + 1
            elif isinstance(v, StructVal):
                for f in v.fields:
                    walk(f)
            elif isinstance(v, FuncVal):
                walk(v.record.env)

        for frame in self.frames:
            for v in frame.slots:
                if v is not None and not isinstance(v, Location):
                    walk(v)
        if pending is not None:
            walk(pending)
        for block in self.store.values():
            for e in block.elems:
                walk(e)
        counted = {sid: block.r for sid, block in self.store.items()}
        assert refs == counted, f"refcount drift: live {refs} vs counters {counted}"

    # -- top level -------------------------------------------------------------

    def run(self) -> str:
        entry = self.ir.routines[self.ir.entry]
        result = self.execute_routine(entry, [], [], None)
        text = self.render(result)
        self.destroy_value(result)
        return text


def apply_binary(op: str, lhs: Value, rhs: Value, span: Span) -> Value:
    """Shared scalar semantics: Int is checked 64-bit two's complement
    with truncating division; Float is IEEE 754 double (division by
    zero yields an infinity or nan, never a trap)."""
    if isinstance(lhs, int):
        return _int_binary(op, lhs, rhs, span)
    return _float_binary(op, lhs, rhs)


def _int_binary(op: str, a: int, b: int, span: Span) -> int:
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    elif op in ("/", "%"):
        if b == 0:
            raise RuntimeTrap(span, DIVISION_BY_ZERO, "division by zero")
        q = a // b
        if (a % b != 0) and ((a < 0) != (b < 0)):
            q += 1  # truncate toward zero
        r = q if op == "/" else a - b * q
    else:  # pragma: no cover
        raise AssertionError(f"unknown operator {op}")
    if not INT_MIN <= r <= INT_MAX:
        raise RuntimeTrap(span, INTEGER_OVERFLOW, f"integer overflow in '{op}'")
    return r


def _float_binary(op: str, a: float, b: float) -> Value:
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    assert op == "/", f"unknown operator {op}"
    if b == 0.0:
        if a != a or a == 0.0:
            return float("nan")
        import math

        sign = math.copysign(1.0, a) * math.copysign(1.0, b)
        return math.copysign(float("inf"), sign)
    return a / b


def execute(
    ir: IRProgram, cow: bool = True, debug: bool = False
) -> tuple[str, RuntimeStats]:
    """Run ir's entry routine; returns the formatted final value and
    the run's counters.  Non-trapping runs must leave the store empty
    with allocs == frees and retains == releases."""
    vm = VM(ir, cow=cow, debug=debug)
    text = vm.run()
    assert not vm.store, f"store not empty at exit: {sorted(vm.store)}"
    assert vm.stats.allocs == vm.stats.frees, (
        f"leak: allocs {vm.stats.allocs} != frees {vm.stats.frees}"
    )
    assert vm.stats.retains == vm.stats.releases, (
        f"imbalance: retains {vm.stats.retains} != releases {vm.stats.releases}"
    )
    return text, vm.stats
