"""
Recursive-descent parser for the expression language.

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' unary)?
    atom    := number | 'z' | 'i' | 'exp' '(' expr ')' | '(' expr ')'

Exponents must evaluate to integer constants.
"""

import re
from dataclasses import dataclass
from typing import List

from app.core.errors import ExpressionSyntaxError, UnknownIdentifierError
from app.geometry.expressions import Z, AnalyticExpr, Const, add, div, exp, mul, neg, power, sub

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)

FUNCTIONS = {"exp": exp}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


def tokenize(src: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        match = _TOKEN.match(src, pos)
        if match is None or match.end() == pos:
            offset = len(src[pos:]) - len(src[pos:].lstrip())
            raise ExpressionSyntaxError(f"Unexpected character '{src[pos + offset]}'", pos + offset)
        kind = match.lastgroup
        tokens.append(Token(kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(Token("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = tokenize(src)
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.current
        self.index += 1
        return token

    def expect(self, text: str) -> Token:
        if self.current.text != text:
            found = self.current.text or "end of input"
            raise ExpressionSyntaxError(f"Expected '{text}' but found '{found}'", self.current.position)
        return self.advance()

    def parse(self) -> AnalyticExpr:
        if self.current.kind == "end":
            raise ExpressionSyntaxError("Empty expression", 0)
        tree = self.expr()
        if self.current.kind != "end":
            raise ExpressionSyntaxError(f"Unexpected '{self.current.text}'", self.current.position)
        return tree

    def expr(self) -> AnalyticExpr:
        tree = self.term()
        while self.current.text in ("+", "-"):
            op = self.advance().text
            right = self.term()
            tree = add(tree, right) if op == "+" else sub(tree, right)
        return tree

    def term(self) -> AnalyticExpr:
        tree = self.unary()
        while self.current.text in ("*", "/"):
            op = self.advance().text
            right = self.unary()
            tree = mul(tree, right) if op == "*" else div(tree, right)
        return tree

    def unary(self) -> AnalyticExpr:
        if self.current.text == "-":
            self.advance()
            return neg(self.unary())
        if self.current.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> AnalyticExpr:
        base = self.atom()
        if self.current.text != "^":
            return base
        caret = self.advance()
        exponent = self.unary()
        if not exponent.is_constant():
            raise ExpressionSyntaxError("Exponent must be a constant integer", caret.position + 1)
        value = complex(exponent.evaluate(0))
        if value.imag != 0 or value.real != int(value.real):
            raise ExpressionSyntaxError(
                f"Exponent must be an integer, got {value}", caret.position + 1
            )
        return power(base, int(value.real))

    def atom(self) -> AnalyticExpr:
        token = self.current
        if token.kind == "number":
            self.advance()
            return Const(float(token.text))
        if token.kind == "name":
            self.advance()
            if token.text == "z":
                return Z
            if token.text == "i":
                return Const(1j)
            if token.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return FUNCTIONS[token.text](arg)
            raise UnknownIdentifierError(token.text, token.position)
        if token.text == "(":
            self.advance()
            tree = self.expr()
            self.expect(")")
            return tree
        found = token.text or "end of input"
        raise ExpressionSyntaxError(f"Unexpected '{found}'", token.position)


def parse_expression(src: str) -> AnalyticExpr:
    """Parse an expression string into an AnalyticExpr"""
    return _Parser(src).parse()
