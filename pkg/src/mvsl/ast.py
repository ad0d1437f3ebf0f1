"""Tokens, surface syntax trees, and the pretty printer.

AST nodes are dataclasses that compare structurally; spans never take
part in equality so `parse(pretty(tree)) == tree` is a meaningful
property.  Fields that the type checker fills in later (ty, binding
ids, capture lists) live as plain attributes with class-level defaults
and stay out of equality as well.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .diagnostics import NO_SPAN, Span
from .types import Type


class TokenKind(enum.Enum):
    KEYWORD = "keyword"
    IDENT = "identifier"
    INT = "integer-literal"
    FLOAT = "float-literal"
    PUNCT = "punctuation"
    OP = "operator"
    ARROW = "arrow"
    AMP = "ampersand"
    UNDERSCORE = "underscore"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    span: Span


# ---------------------------------------------------------------------------
# Type expressions (surface syntax; resolved to types.Type by the checker)


class TypeExpr:
    span: Span


@dataclass
class NamedTE(TypeExpr):
    name: str
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class ArrayTE(TypeExpr):
    element: TypeExpr
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class FuncTE(TypeExpr):
    # Each parameter is (passing, type) with passing "byValue" or "inout".
    params: list[tuple[str, TypeExpr]]
    ret: TypeExpr
    span: Span = field(compare=False, default=NO_SPAN)


# ---------------------------------------------------------------------------
# Expressions


class Expr:
    """Base class for expression nodes.

    `span` is set by the parser.  `ty` is None until the type checker
    annotates the node.
    """

    span: Span
    ty: Type | None = None


@dataclass
class IntLit(Expr):
    value: int
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class FloatLit(Expr):
    value: float
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class ArrayLit(Expr):
    elements: list[Expr]
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class StructInit(Expr):
    name: str
    args: list[Expr]
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class FieldAcc:
    name: str
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class IndexAcc:
    index: Expr
    span: Span = field(compare=False, default=NO_SPAN)


Accessor = FieldAcc | IndexAcc


@dataclass
class Path(Expr):
    """An identifier root followed by field and index accessors.

    The root "_" is the wildcard; it may only appear as a whole
    assignment or binding target, never be read.
    """

    root: str
    accessors: list[Accessor] = field(default_factory=list)
    span: Span = field(compare=False, default=NO_SPAN)

    # Filled by the type checker.
    root_binding_id: int | None = field(compare=False, default=None)
    root_kind: str | None = field(compare=False, default=None)


@dataclass
class Param:
    name: str
    passing: str  # "byValue" or "inout"
    type_expr: TypeExpr
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class Capture:
    """One captured binding of a function literal (checker output)."""

    name: str
    binding_id: int
    ty: Type


@dataclass
class FuncLit(Expr):
    params: list[Param]
    ret: TypeExpr
    body: Expr
    span: Span = field(compare=False, default=NO_SPAN)

    # Filled by the type checker.
    param_ids: list[int] | None = field(compare=False, default=None)
    captures: list[Capture] | None = field(compare=False, default=None)


@dataclass
class InoutArg:
    """An &-marked call argument; always a path."""

    path: Path
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class Call(Expr):
    callee: Expr
    args: list[Expr | InoutArg]
    span: Span = field(compare=False, default=NO_SPAN)

    # Pairs of inout argument positions (indexes into the sublist of
    # inout args) whose overlap could not be decided statically and
    # must be checked at runtime.  Filled by the type checker.
    overlap_pairs: list[tuple[int, int]] | None = field(compare=False, default=None)

    # A path callee is borrowed for the duration of the call, so it
    # participates in exclusivity too: inout argument positions whose
    # overlap with the callee path needs a runtime check.
    callee_overlap: list[int] | None = field(compare=False, default=None)


@dataclass
class Binary(Expr):
    op: str
    lhs: Expr
    rhs: Expr
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class Cond(Expr):
    cond: Expr
    then: Expr
    orelse: Expr
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class Binding(Expr):
    """`var`/`let` name binding: qualifier name[: type] = init in body."""

    qualifier: str  # "var" or "let"
    name: str  # "_" for a wildcard binding
    annotation: TypeExpr | None
    init: Expr
    body: Expr
    span: Span = field(compare=False, default=NO_SPAN)

    binding_id: int | None = field(compare=False, default=None)


@dataclass
class Assign(Expr):
    """Path assignment: target = value in body.

    A wildcard discard `_ = e in body` is an Assign whose target is the
    path `_`.
    """

    target: Path
    value: Expr
    body: Expr
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class FieldDecl:
    qualifier: str  # "var" or "let"
    name: str
    type_expr: TypeExpr
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class StructDecl:
    name: str
    fields: list[FieldDecl]
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass
class Program:
    structs: list[StructDecl]
    entry: Expr


# ---------------------------------------------------------------------------
# Pretty printing
#
# Operand-level precedence, lowest binds loosest:
#   1 if-expression   2 comparison   3 additive   4 multiplicative
#   5 call/path postfix   6 primary
# Statement-level forms (bindings, assignments) only ever appear in
# body positions and never need parentheses.

_PREC_IF = 1
_PREC_CMP = 2
_PREC_ADD = 3
_PREC_MUL = 4
_PREC_POSTFIX = 5
_PREC_PRIMARY = 6

_CMP_OPS = {"==", "!=", "<", "<=", ">", ">="}
_ADD_OPS = {"+", "-"}
_MUL_OPS = {"*", "/", "%"}


def _binary_prec(op: str) -> int:
    if op in _CMP_OPS:
        return _PREC_CMP
    if op in _ADD_OPS:
        return _PREC_ADD
    return _PREC_MUL


def pretty_type(te: TypeExpr) -> str:
    if isinstance(te, NamedTE):
        return te.name
    if isinstance(te, ArrayTE):
        return f"[{pretty_type(te.element)}]"
    if isinstance(te, FuncTE):
        parts = []
        for passing, pt in te.params:
            prefix = "inout " if passing == "inout" else ""
            parts.append(prefix + pretty_type(pt))
        return f"({', '.join(parts)}) -> {pretty_type(te.ret)}"
    raise AssertionError(f"unknown type expression {te!r}")


def _pretty_path(p: Path) -> str:
    out = [p.root]
    for acc in p.accessors:
        if isinstance(acc, FieldAcc):
            out.append(f".{acc.name}")
        else:
            out.append(f"[{_operand(acc.index)}]")
    return "".join(out)


def _operand(e: Expr) -> str:
    return pretty_expr(e, _PREC_IF)


def pretty_expr(e: Expr, min_prec: int = 0, multiline: bool = False) -> str:
    """Render e, parenthesizing when its form binds looser than min_prec.

    With multiline=True, statement chains (bindings and assignments)
    break onto one line per statement; function literal bodies always
    render inline.
    """
    sep = "\n" if multiline else " "
    if isinstance(e, (Binding, Assign)):
        text = _pretty_statement(e, sep)
        return f"({text})" if min_prec > 0 else text
    text, prec = _pretty_operand(e)
    return f"({text})" if prec < min_prec else text


def _pretty_statement(e: Expr, sep: str) -> str:
    parts = []
    while True:
        if isinstance(e, Binding):
            ann = f": {pretty_type(e.annotation)}" if e.annotation else ""
            parts.append(f"{e.qualifier} {e.name}{ann} = {_operand(e.init)} in")
            e = e.body
        elif isinstance(e, Assign):
            parts.append(f"{_pretty_path(e.target)} = {_operand(e.value)} in")
            e = e.body
        else:
            parts.append(pretty_expr(e))
            return sep.join(parts)


def _pretty_operand(e: Expr) -> tuple[str, int]:
    if isinstance(e, IntLit):
        return str(e.value), _PREC_PRIMARY
    if isinstance(e, FloatLit):
        return repr(e.value), _PREC_PRIMARY
    if isinstance(e, Path):
        prec = _PREC_PRIMARY if not e.accessors else _PREC_POSTFIX
        return _pretty_path(e), prec
    if isinstance(e, ArrayLit):
        return f"[{', '.join(_operand(x) for x in e.elements)}]", _PREC_PRIMARY
    if isinstance(e, StructInit):
        return f"{e.name}({', '.join(_operand(a) for a in e.args)})", _PREC_POSTFIX
    if isinstance(e, FuncLit):
        params = ", ".join(
            f"{p.name}: {'inout ' if p.passing == 'inout' else ''}{pretty_type(p.type_expr)}"
            for p in e.params
        )
        body = pretty_expr(e.body)
        return f"({params}) -> {pretty_type(e.ret)} {{ {body} }}", _PREC_PRIMARY
    if isinstance(e, Call):
        callee = pretty_expr(e.callee, _PREC_POSTFIX)
        args = []
        for a in e.args:
            if isinstance(a, InoutArg):
                args.append(f"&{_pretty_path(a.path)}")
            else:
                args.append(_operand(a))
        return f"{callee}({', '.join(args)})", _PREC_POSTFIX
    if isinstance(e, Binary):
        prec = _binary_prec(e.op)
        lhs = pretty_expr(e.lhs, prec)
        rhs = pretty_expr(e.rhs, prec + 1)
        return f"{lhs} {e.op} {rhs}", prec
    if isinstance(e, Cond):
        text = (
            f"if {_operand(e.cond)} then {_operand(e.then)} else {_operand(e.orelse)}"
        )
        return text, _PREC_IF
    raise AssertionError(f"unknown expression {e!r}")


def pretty_program(p: Program) -> str:
    lines = []
    for s in p.structs:
        fields = "; ".join(
            f"{f.qualifier} {f.name}: {pretty_type(f.type_expr)}" for f in s.fields
        )
        body = f"{{ {fields} }}" if s.fields else "{}"
        lines.append(f"struct {s.name} {body} in")
    lines.append(pretty_expr(p.entry, multiline=True))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# AST dump (for the --dump=ast driver mode)


def dump_ast(p: Program) -> str:
    out: list[str] = []
    for s in p.structs:
        out.append(f"struct {s.name}")
        for f in s.fields:
            out.append(f"  {f.qualifier} {f.name}: {pretty_type(f.type_expr)}")
    _dump_expr(p.entry, out, 0)
    return "\n".join(out)


def _dump_expr(e: Expr, out: list[str], depth: int) -> None:
    pad = "  " * depth

    def put(line: str) -> None:
        out.append(pad + line)

    if isinstance(e, IntLit):
        put(f"IntLit {e.value}")
    elif isinstance(e, FloatLit):
        put(f"FloatLit {e.value!r}")
    elif isinstance(e, Path):
        put(f"Path {_pretty_path(e)}")
        for acc in e.accessors:
            if isinstance(acc, IndexAcc):
                _dump_expr(acc.index, out, depth + 1)
    elif isinstance(e, ArrayLit):
        put("ArrayLit")
        for x in e.elements:
            _dump_expr(x, out, depth + 1)
    elif isinstance(e, StructInit):
        put(f"StructInit {e.name}")
        for a in e.args:
            _dump_expr(a, out, depth + 1)
    elif isinstance(e, FuncLit):
        params = ", ".join(
            f"{p.name}: {'inout ' if p.passing == 'inout' else ''}{pretty_type(p.type_expr)}"
            for p in e.params
        )
        put(f"FuncLit ({params}) -> {pretty_type(e.ret)}")
        _dump_expr(e.body, out, depth + 1)
    elif isinstance(e, Call):
        put("Call")
        _dump_expr(e.callee, out, depth + 1)
        for a in e.args:
            if isinstance(a, InoutArg):
                out.append("  " * (depth + 1) + f"InoutArg &{_pretty_path(a.path)}")
            else:
                _dump_expr(a, out, depth + 1)
    elif isinstance(e, Binary):
        put(f"Binary {e.op}")
        _dump_expr(e.lhs, out, depth + 1)
        _dump_expr(e.rhs, out, depth + 1)
    elif isinstance(e, Cond):
        put("Cond")
        _dump_expr(e.cond, out, depth + 1)
        _dump_expr(e.then, out, depth + 1)
        _dump_expr(e.orelse, out, depth + 1)
    elif isinstance(e, Binding):
        ann = f": {pretty_type(e.annotation)}" if e.annotation else ""
        put(f"Binding {e.qualifier} {e.name}{ann}")
        _dump_expr(e.init, out, depth + 1)
        _dump_expr(e.body, out, depth)
    elif isinstance(e, Assign):
        put(f"Assign {_pretty_path(e.target)}")
        _dump_expr(e.value, out, depth + 1)
        _dump_expr(e.body, out, depth)
    else:  # pragma: no cover
        raise AssertionError(f"unknown expression {e!r}")
