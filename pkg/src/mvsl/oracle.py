"""Naive reference interpreter.

Defines observable behavior in the most literal way possible: every
binding, assignment, capture, and by-value argument performs a full
deep copy, and inout arguments are copied in at the call and copied
back to their source places when it returns.  No storage is shared, no
copy is elided, nothing is counted.  The VM must agree with this
interpreter on every program; their implementations share nothing
beyond the typed AST, which is the point.
"""

from __future__ import annotations

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
from .diagnostics import NO_SPAN, RuntimeTrap, Span
from .typechecker import StructInfo, TypedProgram

_INT_MIN = -(2**63)
_INT_MAX = 2**63 - 1


class Struct:
    __slots__ = ("name", "fields")

    def __init__(self, name: str, fields: list):
        self.name = name
        self.fields = fields


class Array:
    __slots__ = ("elems",)

    def __init__(self, elems: list):
        self.elems = elems


class Func:
    """A closure value: the literal plus its captured environment.

    env maps capture names to values.  Copying the closure deep-copies
    env; calling the closure through a path reuses this very dict, so
    mutations of captures persist across calls of the same value.
    """

    __slots__ = ("lit", "env")

    def __init__(self, lit: FuncLit, env: dict):
        self.lit = lit
        self.env = env


class Scope:
    """One lexical scope level; lookup walks outward.

    A closure body runs in a scope whose outermost level is the
    closure's env dict, so capture reads and writes hit the dict that
    lives in the Func value.
    """

    __slots__ = ("vars", "parent")

    def __init__(self, vars: dict, parent: Scope | None):
        self.vars = vars
        self.parent = parent

    def owner(self, name: str) -> dict:
        s: Scope | None = self
        while s is not None:
            if name in s.vars:
                return s.vars
            s = s.parent
        raise AssertionError(f"unbound '{name}' survived the typechecker")


def deep_copy(v):
    if isinstance(v, (int, float)):
        return v
    if isinstance(v, Struct):
        return Struct(v.name, [deep_copy(f) for f in v.fields])
    if isinstance(v, Array):
        return Array([deep_copy(e) for e in v.elems])
    if isinstance(v, Func):
        return Func(v.lit, {k: deep_copy(x) for k, x in v.env.items()})
    raise AssertionError(f"cannot copy {v!r}")


def render(v) -> str:
    if isinstance(v, bool):
        raise AssertionError("boolean leaked into a value")
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Struct):
        return f"{v.name}({', '.join(render(f) for f in v.fields)})"
    if isinstance(v, Array):
        return f"[{', '.join(render(e) for e in v.elems)}]"
    if isinstance(v, Func):
        return "<function>"
    raise AssertionError(f"cannot render {v!r}")


def _arith(op: str, a, b, span: Span):
    if op in ("==", "!=", "<", "<=", ">", ">="):
        table = {
            "==": a == b,
            "!=": a != b,
            "<": a < b,
            "<=": a <= b,
            ">": a > b,
            ">=": a >= b,
        }
        return 1 if table[op] else 0
    if isinstance(a, int):
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        else:
            if b == 0:
                raise RuntimeTrap(span, "DivisionByZero", "division by zero")
            # Truncate toward zero; remainder takes the dividend's sign.
            q = abs(a) // abs(b)
            if (a < 0) != (b < 0):
                q = -q
            r = q if op == "/" else a - b * q
        if not _INT_MIN <= r <= _INT_MAX:
            raise RuntimeTrap(span, "IntegerOverflow", f"integer overflow in '{op}'")
        return r
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0.0:
        if a != a or a == 0.0:
            return float("nan")
        neg = (repr(a)[0] == "-") != (repr(b)[0] == "-")
        return float("-inf") if neg else float("inf")
    return a / b


class _Interp:
    def __init__(self, structs: dict[str, StructInfo]):
        self.structs = structs

    # -- paths ------------------------------------------------------------

    def trail(self, p: Path, scope: Scope) -> tuple:
        """Concrete place of a path: owning-dict identity, name, then
        one hop per accessor with subscripts evaluated to numbers."""
        owner = scope.owner(p.root)
        hops: list = [(id(owner), p.root)]
        for acc in p.accessors:
            if isinstance(acc, FieldAcc):
                hops.append(("f", acc.name))
            else:
                hops.append(("i", self.eval(acc.index, scope)))
        return tuple(hops)

    def read_trail(self, owner: dict, t: tuple, span: Span):
        v = owner[t[0][1]]
        for hop in t[1:]:
            if hop[0] == "f":
                assert isinstance(v, Struct)
                v = v.fields[self._field(v, hop[1])]
            else:
                v = self._elem(v, hop[1], span)
        return v

    def write_trail(self, owner: dict, t: tuple, value, span: Span) -> None:
        if len(t) == 1:
            owner[t[0][1]] = value
            return
        v = owner[t[0][1]]
        for hop in t[1:-1]:
            if hop[0] == "f":
                v = v.fields[self._field(v, hop[1])]
            else:
                v = self._elem(v, hop[1], span)
        last = t[-1]
        if last[0] == "f":
            v.fields[self._field(v, last[1])] = value
        else:
            assert isinstance(v, Array)
            self._bounds(v, last[1], span)
            v.elems[last[1]] = value

    def _field(self, v: Struct, name: str) -> int:
        idx = self.structs[v.name].index_of(name)
        assert idx is not None
        return idx

    def _bounds(self, v: Array, i: int, span: Span) -> None:
        if not 0 <= i < len(v.elems):
            raise RuntimeTrap(
                span,
                "IndexOutOfBounds",
                f"index {i} out of bounds for array of {len(v.elems)} elements",
            )

    def _elem(self, v, i: int, span: Span):
        assert isinstance(v, Array)
        self._bounds(v, i, span)
        return v.elems[i]

    # -- evaluation --------------------------------------------------------

    def eval(self, e: Expr, scope: Scope):
        if isinstance(e, IntLit) or isinstance(e, FloatLit):
            return e.value
        if isinstance(e, Path):
            t = self.trail(e, scope)
            owner = scope.owner(e.root)
            return deep_copy(self.read_trail(owner, t, e.span))
        if isinstance(e, ArrayLit):
            return Array([self.eval(x, scope) for x in e.elements])
        if isinstance(e, StructInit):
            return Struct(e.name, [self.eval(a, scope) for a in e.args])
        if isinstance(e, FuncLit):
            assert e.captures is not None
            env = {}
            for cap in e.captures:
                env[cap.name] = deep_copy(scope.owner(cap.name)[cap.name])
            return Func(e, env)
        if isinstance(e, Binary):
            lhs = self.eval(e.lhs, scope)
            rhs = self.eval(e.rhs, scope)
            return _arith(e.op, lhs, rhs, e.span)
        if isinstance(e, Cond):
            c = self.eval(e.cond, scope)
            return self.eval(e.then if c != 0 else e.orelse, scope)
        if isinstance(e, Binding):
            if e.name == "_":
                self.eval(e.init, scope)
                return self.eval(e.body, scope)
            inner = Scope({e.name: self.eval(e.init, scope)}, scope)
            return self.eval(e.body, inner)
        if isinstance(e, Assign):
            if e.target.root == "_" and not e.target.accessors:
                self.eval(e.value, scope)
            else:
                # Subscripts of the target run before the value; bounds
                # are checked by the write itself.
                t = self.trail(e.target, scope)
                owner = scope.owner(e.target.root)
                v = self.eval(e.value, scope)
                self.write_trail(owner, t, v, e.span)
            return self.eval(e.body, scope)
        if isinstance(e, Call):
            return self.call(e, scope)
        raise AssertionError(f"cannot evaluate {e!r}")

    def call(self, e: Call, scope: Scope):
        assert e.overlap_pairs is not None and e.callee_overlap is not None
        # Phases match the compiled form: callee subscripts, arguments
        # left to right (an inout argument contributes its subscripts),
        # then the callee and every inout place are resolved with bounds
        # checks, then overlap checks, then the call itself.
        callee_trail: tuple | None = None
        if isinstance(e.callee, Path):
            callee_trail = self.trail(e.callee, scope)
            callee_owner = scope.owner(e.callee.root)
        else:
            fn = self.eval(e.callee, scope)

        copied_in: list = []
        inout: list[tuple[dict, tuple]] = []  # (owner, concrete trail)
        for a in e.args:
            if isinstance(a, InoutArg):
                t = self.trail(a.path, scope)
                inout.append((scope.owner(a.path.root), t))
            else:
                copied_in.append(self.eval(a, scope))

        # A path callee is read in place so capture mutations persist in
        # the named closure; any other callee is a temporary.
        if callee_trail is not None:
            fn = self.read_trail(callee_owner, callee_trail, e.callee.span)
        assert isinstance(fn, Func)
        for o, t in inout:
            self.read_trail(o, t, e.span)

        def prefix_related(t1: tuple, t2: tuple) -> bool:
            return all(a == b for a, b in zip(t1, t2))

        for i in e.callee_overlap:
            assert callee_trail is not None
            if prefix_related(callee_trail, inout[i][1]):
                raise RuntimeTrap(e.span, "OverlapViolation", "overlapping inout arguments")
        for i, j in e.overlap_pairs:
            if prefix_related(inout[i][1], inout[j][1]):
                raise RuntimeTrap(e.span, "OverlapViolation", "overlapping inout arguments")

        # Copy in.
        inout_vals = [deep_copy(self.read_trail(o, t, e.span)) for o, t in inout]

        # The closure's env dict itself is the outermost scope, so
        # capture mutations persist in the value across calls.
        body_scope = Scope({}, Scope(fn.env, None))
        vi = iter(copied_in)
        ii = iter(inout_vals)
        for p in fn.lit.params:
            body_scope.vars[p.name] = next(ii) if p.passing == "inout" else next(vi)
        result = self.eval(fn.lit.body, body_scope)

        # Copy out, left to right; exclusivity keeps order unobservable.
        for (o, t), p in zip(inout, [p for p in fn.lit.params if p.passing == "inout"]):
            self.write_trail(o, t, deep_copy(body_scope.vars[p.name]), e.span)
        return result


def interpret_eager(tp: TypedProgram) -> str:
    """Run the program under literal copy-everywhere semantics and
    return its formatted final value; traps raise RuntimeTrap."""
    interp = _Interp(tp.structs)
    result = interp.eval(tp.program.entry, Scope({}, None))
    return render(result)
