"""Recursive descent parser.

Grammar, one production per comment below its parse function:

    program   -> struct-decl* expr
    struct    -> "struct" IDENT "{" [field (";" field)*] "}" "in"
    field     -> ("var" | "let") IDENT ":" type
    type      -> IDENT | "[" type "]"
               | "(" [param-type ("," param-type)*] ")" "->" type
    expr      -> binding | assignment | operand
    binding   -> ("var" | "let") (IDENT | "_") [":" type]
                 ("=" operand | braced-body) "in" expr
    assignment-> path "=" operand "in" expr
    operand   -> "if" operand "then" operand "else" operand | comparison
    comparison-> additive (("=="|"!="|"<"|"<="|">"|">=") additive)*
    additive  -> multiplicative (("+"|"-") multiplicative)*
    multiplicative -> postfix (("*"|"/"|"%") postfix)*
    postfix   -> primary ("(" args ")" | "." IDENT | "[" operand "]")*
    primary   -> INT | FLOAT | IDENT | "_" | "[" operand ("," operand)* "]"
               | func-lit | "(" operand ")"
    func-lit  -> "(" [param ("," param)*] ")" "->" type "{" expr "}"
    param     -> IDENT ":" ["inout"] type

The braced-body form is sugar: `var f: () -> T { e } in b` declares a
zero-parameter function literal and is only accepted when the binding
is annotated with a zero-parameter function type.

Calls `Name(...)` where Name is a declared struct are classified as
struct initializers during parsing; struct names are collected before
the entry expression is parsed.
"""

from __future__ import annotations

from .ast import (
    ArrayLit,
    ArrayTE,
    Assign,
    Binary,
    Binding,
    Call,
    Cond,
    Expr,
    FieldAcc,
    FieldDecl,
    FloatLit,
    FuncLit,
    FuncTE,
    IndexAcc,
    InoutArg,
    IntLit,
    NamedTE,
    Param,
    Path,
    Program,
    StructDecl,
    StructInit,
    Token,
    TokenKind,
    TypeExpr,
)
from .diagnostics import ParseError, Span
from .lexer import tokenize

_INT_MAX = 2**63 - 1

_CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
_ADD_OPS = ("+", "-")
_MUL_OPS = ("*", "/", "%")


class _Parser:
    def __init__(self, tokens: list[Token], source_len: int):
        self.tokens = tokens
        self.pos = 0
        self.eof_span = Span(source_len, source_len)
        self.struct_names: set[str] = set()

    # -- cursor helpers ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token | None:
        i = self.pos + ahead
        return self.tokens[i] if i < len(self.tokens) else None

    def at(self, kind: TokenKind, lexeme: str | None = None, ahead: int = 0) -> bool:
        t = self.peek(ahead)
        return t is not None and t.kind is kind and (lexeme is None or t.lexeme == lexeme)

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def match(self, kind: TokenKind, lexeme: str | None = None) -> Token | None:
        if self.at(kind, lexeme):
            return self.advance()
        return None

    def here(self) -> Span:
        t = self.peek()
        return t.span if t is not None else self.eof_span

    def fail(self, what: str) -> ParseError:
        t = self.peek()
        found = "end of input" if t is None else f"'{t.lexeme}'"
        return ParseError(self.here(), f"expected {what}, found {found}")

    def expect(self, kind: TokenKind, lexeme: str | None, what: str) -> Token:
        t = self.match(kind, lexeme)
        if t is None:
            raise self.fail(what)
        return t

    # -- program and declarations ------------------------------------------

    def parse_program(self) -> Program:
        structs = []
        while self.at(TokenKind.KEYWORD, "struct"):
            structs.append(self.struct_decl())
            self.expect(TokenKind.KEYWORD, "in", "'in' after struct declaration")
        entry = self.expr()
        if self.peek() is not None:
            raise self.fail("end of input")
        return Program(structs, entry)

    def struct_decl(self) -> StructDecl:
        start = self.expect(TokenKind.KEYWORD, "struct", "'struct'").span
        name_tok = self.expect(TokenKind.IDENT, None, "struct name")
        if name_tok.lexeme in self.struct_names:
            raise ParseError(name_tok.span, f"duplicate struct '{name_tok.lexeme}'")
        self.expect(TokenKind.PUNCT, "{", "'{'")
        fields: list[FieldDecl] = []
        seen: set[str] = set()
        if not self.at(TokenKind.PUNCT, "}"):
            while True:
                fields.append(self.field_decl(seen))
                if not self.match(TokenKind.PUNCT, ";"):
                    break
        end = self.expect(TokenKind.PUNCT, "}", "'}' or ';'").span
        self.struct_names.add(name_tok.lexeme)
        return StructDecl(name_tok.lexeme, fields, start.merge(end))

    def field_decl(self, seen: set[str]) -> FieldDecl:
        qual = self.peek()
        if qual is None or qual.kind is not TokenKind.KEYWORD or qual.lexeme not in ("var", "let"):
            raise self.fail("'var' or 'let' field")
        self.advance()
        name_tok = self.expect(TokenKind.IDENT, None, "field name")
        if name_tok.lexeme in seen:
            raise ParseError(name_tok.span, f"duplicate field '{name_tok.lexeme}'")
        seen.add(name_tok.lexeme)
        self.expect(TokenKind.PUNCT, ":", "':'")
        te = self.type_expr()
        return FieldDecl(qual.lexeme, name_tok.lexeme, te, qual.span.merge(te.span))

    # -- types ---------------------------------------------------------------

    def type_expr(self) -> TypeExpr:
        t = self.peek()
        if t is None:
            raise self.fail("a type")
        if t.kind is TokenKind.IDENT:
            self.advance()
            return NamedTE(t.lexeme, t.span)
        if t.kind is TokenKind.PUNCT and t.lexeme == "[":
            self.advance()
            elem = self.type_expr()
            end = self.expect(TokenKind.PUNCT, "]", "']'").span
            return ArrayTE(elem, t.span.merge(end))
        if t.kind is TokenKind.PUNCT and t.lexeme == "(":
            self.advance()
            params: list[tuple[str, TypeExpr]] = []
            if not self.at(TokenKind.PUNCT, ")"):
                while True:
                    passing = "inout" if self.match(TokenKind.KEYWORD, "inout") else "byValue"
                    params.append((passing, self.type_expr()))
                    if not self.match(TokenKind.PUNCT, ","):
                        break
            self.expect(TokenKind.PUNCT, ")", "')' or ','")
            self.expect(TokenKind.ARROW, None, "'->'")
            ret = self.type_expr()
            return FuncTE(params, ret, t.span.merge(ret.span))
        raise self.fail("a type")

    # -- expressions ---------------------------------------------------------

    def expr(self) -> Expr:
        t = self.peek()
        if t is not None and t.kind is TokenKind.KEYWORD and t.lexeme in ("var", "let"):
            return self.binding()
        e = self.operand()
        if self.at(TokenKind.OP, "="):
            if not isinstance(e, Path):
                raise ParseError(self.here(), "assignment target must be a path")
            self.advance()
            value = self.operand()
            self.expect(TokenKind.KEYWORD, "in", "'in' after assignment")
            body = self.expr()
            return Assign(e, value, body, e.span.merge(body.span))
        return e

    def binding(self) -> Expr:
        qual = self.advance()  # var or let
        name_tok = self.peek()
        if name_tok is None or name_tok.kind not in (TokenKind.IDENT, TokenKind.UNDERSCORE):
            raise self.fail("binding name")
        self.advance()
        annotation: TypeExpr | None = None
        if self.match(TokenKind.PUNCT, ":"):
            annotation = self.type_expr()
        if self.at(TokenKind.PUNCT, "{"):
            # Sugar for a zero-parameter function literal.
            if not isinstance(annotation, FuncTE) or annotation.params:
                raise self.fail("'='")
            open_brace = self.advance()
            fn_body = self.expr()
            end = self.expect(TokenKind.PUNCT, "}", "'}'").span
            init: Expr = FuncLit([], annotation.ret, fn_body, open_brace.span.merge(end))
        else:
            self.expect(TokenKind.OP, "=", "'='")
            init = self.operand()
        self.expect(TokenKind.KEYWORD, "in", "'in' after binding")
        body = self.expr()
        return Binding(
            qual.lexeme, name_tok.lexeme, annotation, init, body, qual.span.merge(body.span)
        )

    def operand(self) -> Expr:
        if self.at(TokenKind.KEYWORD, "if"):
            start = self.advance().span
            cond = self.operand()
            self.expect(TokenKind.KEYWORD, "then", "'then'")
            then = self.operand()
            self.expect(TokenKind.KEYWORD, "else", "'else'")
            orelse = self.operand()
            return Cond(cond, then, orelse, start.merge(orelse.span))
        return self.comparison()

    def _binary_chain(self, ops: tuple[str, ...], sub) -> Expr:
        lhs = sub()
        while True:
            t = self.peek()
            if t is None or t.kind is not TokenKind.OP or t.lexeme not in ops:
                return lhs
            self.advance()
            rhs = sub()
            lhs = Binary(t.lexeme, lhs, rhs, lhs.span.merge(rhs.span))

    def comparison(self) -> Expr:
        return self._binary_chain(_CMP_OPS, self.additive)

    def additive(self) -> Expr:
        return self._binary_chain(_ADD_OPS, self.multiplicative)

    def multiplicative(self) -> Expr:
        return self._binary_chain(_MUL_OPS, self.postfix)

    def postfix(self) -> Expr:
        e = self.primary()
        while True:
            if self.at(TokenKind.PUNCT, "("):
                e = self.call(e)
            elif self.at(TokenKind.PUNCT, "."):
                if not isinstance(e, Path):
                    raise ParseError(self.here(), "field access requires a path")
                dot = self.advance()
                name_tok = self.expect(TokenKind.IDENT, None, "field name")
                e.accessors.append(FieldAcc(name_tok.lexeme, dot.span.merge(name_tok.span)))
                e.span = e.span.merge(name_tok.span)
            elif self.at(TokenKind.PUNCT, "["):
                if not isinstance(e, Path):
                    raise ParseError(self.here(), "indexing requires a path")
                self.advance()
                idx = self.operand()
                end = self.expect(TokenKind.PUNCT, "]", "']'").span
                e.accessors.append(IndexAcc(idx, idx.span.merge(end)))
                e.span = e.span.merge(end)
            else:
                return e

    def call(self, callee: Expr) -> Expr:
        self.expect(TokenKind.PUNCT, "(", "'('")
        args: list[Expr | InoutArg] = []
        if not self.at(TokenKind.PUNCT, ")"):
            while True:
                amp = self.match(TokenKind.AMP)
                if amp is not None:
                    p = self.inout_path()
                    args.append(InoutArg(p, amp.span.merge(p.span)))
                else:
                    args.append(self.operand())
                if not self.match(TokenKind.PUNCT, ","):
                    break
        end = self.expect(TokenKind.PUNCT, ")", "')' or ','").span
        span = callee.span.merge(end)
        if (
            isinstance(callee, Path)
            and not callee.accessors
            and callee.root in self.struct_names
        ):
            plain: list[Expr] = []
            for a in args:
                if isinstance(a, InoutArg):
                    raise ParseError(a.span, "inout argument in struct initializer")
                plain.append(a)
            return StructInit(callee.root, plain, span)
        return Call(callee, args, span)

    def inout_path(self) -> Path:
        root = self.peek()
        if root is None or root.kind not in (TokenKind.IDENT, TokenKind.UNDERSCORE):
            raise self.fail("a path after '&'")
        self.advance()
        p = Path(root.lexeme, [], root.span)
        while True:
            if self.at(TokenKind.PUNCT, "."):
                dot = self.advance()
                name_tok = self.expect(TokenKind.IDENT, None, "field name")
                p.accessors.append(FieldAcc(name_tok.lexeme, dot.span.merge(name_tok.span)))
                p.span = p.span.merge(name_tok.span)
            elif self.at(TokenKind.PUNCT, "["):
                self.advance()
                idx = self.operand()
                end = self.expect(TokenKind.PUNCT, "]", "']'").span
                p.accessors.append(IndexAcc(idx, idx.span.merge(end)))
                p.span = p.span.merge(end)
            else:
                return p

    def primary(self) -> Expr:
        t = self.peek()
        if t is None:
            raise self.fail("an expression")
        if t.kind is TokenKind.INT:
            self.advance()
            value = int(t.lexeme)
            if value > _INT_MAX:
                raise ParseError(t.span, "integer literal out of range")
            return IntLit(value, t.span)
        if t.kind is TokenKind.FLOAT:
            self.advance()
            value = float(t.lexeme)
            if value != value or value in (float("inf"), float("-inf")):
                raise ParseError(t.span, "float literal out of range")
            return FloatLit(value, t.span)
        if t.kind is TokenKind.IDENT:
            self.advance()
            return Path(t.lexeme, [], t.span)
        if t.kind is TokenKind.UNDERSCORE:
            self.advance()
            return Path("_", [], t.span)
        if t.kind is TokenKind.PUNCT and t.lexeme == "[":
            self.advance()
            elements = [self.operand()]
            while self.match(TokenKind.PUNCT, ","):
                elements.append(self.operand())
            end = self.expect(TokenKind.PUNCT, "]", "']' or ','").span
            return ArrayLit(elements, t.span.merge(end))
        if t.kind is TokenKind.PUNCT and t.lexeme == "(":
            # Function literal when the parenthesis opens a parameter list
            # (empty, or IDENT ':'), otherwise a grouping.
            if self.at(TokenKind.PUNCT, ")", ahead=1) or (
                self.at(TokenKind.IDENT, ahead=1) and self.at(TokenKind.PUNCT, ":", ahead=2)
            ):
                return self.func_lit()
            self.advance()
            inner = self.expr()
            self.expect(TokenKind.PUNCT, ")", "')'")
            return inner
        raise self.fail("an expression")

    def func_lit(self) -> FuncLit:
        start = self.expect(TokenKind.PUNCT, "(", "'('").span
        params: list[Param] = []
        seen: set[str] = set()
        if not self.at(TokenKind.PUNCT, ")"):
            while True:
                name_tok = self.expect(TokenKind.IDENT, None, "parameter name")
                if name_tok.lexeme in seen:
                    raise ParseError(name_tok.span, f"duplicate parameter '{name_tok.lexeme}'")
                seen.add(name_tok.lexeme)
                self.expect(TokenKind.PUNCT, ":", "':'")
                passing = "inout" if self.match(TokenKind.KEYWORD, "inout") else "byValue"
                te = self.type_expr()
                params.append(Param(name_tok.lexeme, passing, te, name_tok.span.merge(te.span)))
                if not self.match(TokenKind.PUNCT, ","):
                    break
        self.expect(TokenKind.PUNCT, ")", "')' or ','")
        self.expect(TokenKind.ARROW, None, "'->'")
        ret = self.type_expr()
        self.expect(TokenKind.PUNCT, "{", "'{'")
        body = self.expr()
        end = self.expect(TokenKind.PUNCT, "}", "'}'").span
        return FuncLit(params, ret, body, start.merge(end))


def parse_program(tokens: list[Token], source_len: int = 0) -> Program:
    """Parse a token stream into a Program; raises ParseError."""
    if tokens and source_len == 0:
        source_len = tokens[-1].span.end
    return _Parser(tokens, source_len).parse_program()


def parse_source(source: str) -> Program:
    """Tokenize and parse source text."""
    return parse_program(tokenize(source), len(source))
