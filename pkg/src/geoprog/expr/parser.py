"""Expression-text parser.

Grammar (EBNF, documented in the README):

    expr    := addsub
    addsub  := muldiv (("+" | "-") muldiv)*
    muldiv  := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?          # right-associative
    atom    := NUMBER [implicit]          # implicit: NUMBER var | NUMBER pi
            | "pi" | VAR                  #           | NUMBER "(" expr ")"
            | ("sin"|"cos"|"tan") "(" expr ")"
            | "(" expr ")"

Variables are N0..N10, V0..V6 and single lowercase letters; "pi" (or the
glyph) is the circle constant.  Implicit multiplication is allowed only
between a number literal and a following variable, pi, or parenthesis.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ExprSyntaxError, UnknownIdentifier
from .ast import (
    MAX_INTER_VAR,
    MAX_PROBLEM_VAR,
    Add,
    Cos,
    Div,
    Expr,
    Mul,
    Neg,
    Num,
    Pi,
    Pow,
    Sin,
    Sub,
    Tan,
    Var,
    VarId,
)

_FUNCS = {"sin": Sin, "cos": Cos, "tan": Tan}
_SYMBOLS = {"+": "PLUS", "-": "MINUS", "*": "STAR", "/": "SLASH",
            "^": "CARET", "(": "LPAREN", ")": "RPAREN"}


@dataclass(frozen=True)
class Token:
    kind: str  # NUMBER, IDENT, PLUS, MINUS, STAR, SLASH, CARET, LPAREN, RPAREN, EOF
    text: str
    start: int
    end: int


def tokenize_expr(text: str) -> list[Token]:
    """Lex expression text into tokens with character spans."""
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _SYMBOLS:
            tokens.append(Token(_SYMBOLS[c], c, i, i + 1))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            tokens.append(Token("NUMBER", text[i:j], i, j))
            i = j
            continue
        if c == "π":  # the pi glyph
            tokens.append(Token("IDENT", "pi", i, i + 1))
            i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], i, j))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(Token("EOF", "", n, n))
    return tokens


def classify_var(name: str, offset: int = 0) -> VarId:
    """Map an identifier to its VarId or raise UnknownIdentifier."""
    if len(name) >= 2 and name[0] in "NV" and name[1:].isdigit():
        index = int(name[1:])
        limit = MAX_PROBLEM_VAR if name[0] == "N" else MAX_INTER_VAR
        if index <= limit:
            return VarId.problem(index) if name[0] == "N" else VarId.inter(index)
    if len(name) == 1 and name.islower():
        return VarId.arg(name)
    raise UnknownIdentifier(name, offset)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        if self.cur.kind != kind:
            raise ExprSyntaxError(
                f"expected {kind} but found {self.cur.text or 'end of input'!r}",
                self.cur.start,
            )
        return self.advance()

    def parse(self) -> Expr:
        e = self.addsub()
        if self.cur.kind != "EOF":
            raise ExprSyntaxError(f"trailing input {self.cur.text!r}", self.cur.start)
        return e

    def addsub(self) -> Expr:
        e = self.muldiv()
        while self.cur.kind in ("PLUS", "MINUS"):
            op = self.advance().kind
            rhs = self.muldiv()
            e = Add(e, rhs) if op == "PLUS" else Sub(e, rhs)
        return e

    def muldiv(self) -> Expr:
        e = self.unary()
        while self.cur.kind in ("STAR", "SLASH"):
            op = self.advance().kind
            rhs = self.unary()
            e = Mul(e, rhs) if op == "STAR" else Div(e, rhs)
        return e

    def unary(self) -> Expr:
        if self.cur.kind == "MINUS":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.cur.kind == "CARET":
            self.advance()
            return Pow(base, self.unary())  # right-associative; allows a^-2
        return base

    def atom(self) -> Expr:
        tok = self.cur
        if tok.kind == "NUMBER":
            self.advance()
            lit = Num(float(tok.text))
            nxt = self.cur
            if nxt.kind == "LPAREN" or (nxt.kind == "IDENT" and nxt.text not in _FUNCS):
                return Mul(lit, self.power())
            return lit
        if tok.kind == "LPAREN":
            self.advance()
            e = self.addsub()
            self.expect("RPAREN")
            return e
        if tok.kind == "IDENT":
            self.advance()
            if tok.text == "pi":
                return Pi()
            if tok.text in _FUNCS:
                self.expect("LPAREN")
                inner = self.addsub()
                self.expect("RPAREN")
                return _FUNCS[tok.text](inner)
            return Var(classify_var(tok.text, tok.start))
        raise ExprSyntaxError(
            f"expected a value but found {tok.text or 'end of input'!r}", tok.start
        )


def parse_expr(text: str) -> Expr:
    """Parse expression text into an AST."""
    tokens = tokenize_expr(text)
    if tokens[0].kind == "EOF":
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(tokens).parse()
