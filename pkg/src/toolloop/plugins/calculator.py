"""Arithmetic tool: decimal numbers, + - * /, parentheses, unary minus."""

from __future__ import annotations

import math

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..server.envstore import EnvState
from .base import ToolPlugin, ToolResult, extract_tag


class CalcError(ValueError):
    pass


class _Parser:
    """Recursive descent over: expr := term (('+'|'-') term)*;
    term := factor (('*'|'/') factor)*; factor := '-' factor | number | '(' expr ')'.
    """

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def parse(self) -> float:
        value = self.expr()
        self.skip_ws()
        if self.pos != len(self.text):
            raise CalcError(f"unexpected character {self.text[self.pos]!r} at {self.pos}")
        return value

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expr(self) -> float:
        value = self.term()
        while (op := self.peek()) in ("+", "-"):
            self.pos += 1
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self) -> float:
        value = self.factor()
        while (op := self.peek()) in ("*", "/"):
            self.pos += 1
            rhs = self.factor()
            if op == "*":
                value = value * rhs
            else:
                if rhs == 0.0:
                    raise CalcError("division by zero")
                value = value / rhs
        return value

    def factor(self) -> float:
        ch = self.peek()
        if ch == "-":
            self.pos += 1
            return -self.factor()
        if ch == "(":
            self.pos += 1
            value = self.expr()
            if self.peek() != ")":
                raise CalcError("missing closing parenthesis")
            self.pos += 1
            return value
        return self.number()

    def number(self) -> float:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isdigit() or self.text[self.pos] == "."):
            self.pos += 1
        token = self.text[start : self.pos]
        if not token or token == ".":
            raise CalcError(f"expected a number at position {start}")
        try:
            return float(token)
        except ValueError:
            raise CalcError(f"bad number literal {token!r}") from None


def format_number(value: float) -> str:
    """Render with 12 fractional digits, then strip trailing zeros."""
    s = f"{value:.12f}"
    s = s.rstrip("0").rstrip(".")
    return "0" if s in ("", "-0") else s


def calculator_execute(expr: str) -> str:
    """Evaluate and format; raises CalcError on bad input or division by zero."""
    value = _Parser(expr).parse()
    if not math.isfinite(value):
        raise CalcError("result overflows")
    return format_number(value)


class CalculatorTool(ToolPlugin):
    tool_id = "calculator"
    stop_strings = ("</calc>",)

    def parse_action(self, action_text: str) -> str | None:
        return extract_tag(action_text, "calc")

    def conduct_action(self, env: "EnvState", tool_input: str) -> ToolResult:
        try:
            return ToolResult(calculator_execute(tool_input))
        except CalcError as exc:
            return ToolResult(f"Error: {exc}", valid=False)
