"""Position-tracking JSON reader that keeps duplicate keys and member order.

Standard ``json`` collapses repeated keys, which the document-order edit style
relies on. In lenient mode a missing comma between object members or array
elements is tolerated (hand-written edit lists commonly drop one).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any

from .errors import VeslSyntaxError


@dataclass
class Node:
    value: Any
    line: int
    column: int
    literal: str | None = None  # source text of numbers


@dataclass
class ObjectNode(Node):
    # list of (key, key_line, key_column, value_node)
    pairs: list = field(default_factory=list)


@dataclass
class ArrayNode(Node):
    items: list = field(default_factory=list)


_WS = re.compile(r"[ \t\r\n]*")
_NUMBER = re.compile(r"-?(?:0|[1-9][0-9]*)(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?")
_STRING = re.compile(r'"(?:[^"\\\x00-\x1f]|\\(?:["\\/bfnrt]|u[0-9a-fA-F]{4}))*"')


class _Parser:
    def __init__(self, text: str, lenient: bool) -> None:
        self.text = text
        self.pos = 0
        self.lenient = lenient
        self.line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def where(self, pos: int) -> tuple[int, int]:
        lo, hi = 0, len(self.line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.line_starts[mid] <= pos:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, pos - self.line_starts[lo] + 1

    def fail(self, message: str, pos: int | None = None):
        line, col = self.where(self.pos if pos is None else pos)
        raise VeslSyntaxError(message, line=line, column=col)

    def skip(self) -> None:
        self.pos = _WS.match(self.text, self.pos).end()

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos:self.pos + 1]

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            found = self.text[self.pos:self.pos + 1] or "end of input"
            self.fail(f"expected {ch!r}, found {found!r}")
        self.pos += 1

    def value(self) -> Node:
        ch = self.peek()
        line, col = self.where(self.pos)
        if ch == "{":
            return self.obj(line, col)
        if ch == "[":
            return self.arr(line, col)
        if ch == '"':
            return Node(self.string(), line, col)
        m = _NUMBER.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            literal = m.group()
            return Node(json.loads(literal), line, col, literal)
        for word, val in (("true", True), ("false", False), ("null", None)):
            if self.text.startswith(word, self.pos):
                self.pos += len(word)
                return Node(val, line, col)
        self.fail(f"unexpected {ch!r}" if ch else "unexpected end of input")

    def string(self) -> str:
        m = _STRING.match(self.text, self.pos)
        if not m:
            self.fail("malformed string")
        self.pos = m.end()
        return json.loads(m.group())

    def _separator(self, close: str) -> bool:
        """Consume a comma; return False at the closing bracket."""
        ch = self.peek()
        if ch == ",":
            self.pos += 1
            if self.peek() == close:
                self.fail("trailing comma")
            return True
        if ch == close:
            return False
        if self.lenient and ch:
            return True
        self.fail(f"expected ',' or {close!r}")

    def obj(self, line: int, col: int) -> ObjectNode:
        node = ObjectNode(None, line, col)
        self.expect("{")
        if self.peek() == "}":
            self.pos += 1
            return node
        while True:
            if self.peek() != '"':
                self.fail("expected a string key")
            kline, kcol = self.where(self.pos)
            key = self.string()
            self.expect(":")
            node.pairs.append((key, kline, kcol, self.value()))
            if not self._separator("}"):
                break
        self.expect("}")
        return node

    def arr(self, line: int, col: int) -> ArrayNode:
        node = ArrayNode(None, line, col)
        self.expect("[")
        if self.peek() == "]":
            self.pos += 1
            return node
        while True:
            node.items.append(self.value())
            if not self._separator("]"):
                break
        self.expect("]")
        return node


def parse(text: str, *, lenient: bool = True) -> Node:
    parser = _Parser(text, lenient)
    node = parser.value()
    if parser.peek():
        parser.fail("trailing content after document")
    return node
