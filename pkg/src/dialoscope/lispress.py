"""Parser, canonical printer and queries for Lispress programs.

Lispress is the s-expression program language used to express SMCalFlow
dialog states. We only need to parse, re-print canonically (for
exact-match scoring) and walk the tree (for refer/revise detection);
programs are never executed.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import List as ListT

_NUMBER_RE = re.compile(r"^[+-]?\d+(\.\d+)?([eE][+-]?\d+)?$")


class LispressError(ValueError):
    """Raised on malformed Lispress source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Symbol:
    name: str


@dataclass(frozen=True)
class StringLit:
    text: str


@dataclass(frozen=True)
class Number:
    # kept verbatim so canonical printing never re-formats numerics
    text: str


@dataclass(frozen=True)
class TypedLiteral:
    tag: str
    child: "Node"


@dataclass(frozen=True)
class List:
    children: ListT["Node"] = field(default_factory=list)

    def __hash__(self):
        return hash(tuple(self.children))

    def __eq__(self, other):
        return isinstance(other, List) and self.children == other.children


Node = object  # Symbol | StringLit | Number | TypedLiteral | List


class _Lexer:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self._skip_ws()
        if self.pos >= len(self.src):
            return None
        return self.src[self.pos]

    def read_string(self) -> StringLit:
        start = self.pos
        assert self.src[self.pos] == '"'
        self.pos += 1
        out = []
        while self.pos < len(self.src):
            ch = self.src[self.pos]
            if ch == "\\":
                if self.pos + 1 >= len(self.src):
                    raise LispressError("unterminated escape in string", self.pos)
                nxt = self.src[self.pos + 1]
                if nxt not in ('"', "\\"):
                    raise LispressError(f"invalid escape '\\{nxt}'", self.pos)
                out.append(nxt)
                self.pos += 2
            elif ch == '"':
                self.pos += 1
                return StringLit("".join(out))
            else:
                out.append(ch)
                self.pos += 1
        raise LispressError("unterminated string literal", start)

    def read_atom(self):
        start = self.pos
        while self.pos < len(self.src):
            ch = self.src[self.pos]
            if ch.isspace() or ch in '()"#':
                break
            self.pos += 1
        text = self.src[start:self.pos]
        if not text:
            raise LispressError("empty atom", start)
        if _NUMBER_RE.match(text):
            return Number(text)
        return Symbol(text)


def _parse_form(lex: _Lexer):
    ch = lex.peek()
    if ch is None:
        raise LispressError("unexpected end of input", lex.pos)
    if ch == "(":
        open_pos = lex.pos
        lex.pos += 1
        children = []
        while True:
            nxt = lex.peek()
            if nxt is None:
                raise LispressError("unbalanced '(' ", open_pos)
            if nxt == ")":
                lex.pos += 1
                return List(children)
            children.append(_parse_form(lex))
    if ch == ")":
        raise LispressError("unbalanced ')'", lex.pos)
    if ch == '"':
        return lex.read_string()
    if ch == "#":
        lex.pos += 1
        form = _parse_form(lex)
        if (
            isinstance(form, List)
            and len(form.children) == 2
            and isinstance(form.children[0], Symbol)
        ):
            return TypedLiteral(form.children[0].name, form.children[1])
        return TypedLiteral("", form)
    return lex.read_atom()


def parse(source: str) -> Node:
    """Parse exactly one top-level Lispress form."""
    if not source or not source.strip():
        raise LispressError("empty input", 0)
    lex = _Lexer(source)
    node = _parse_form(lex)
    if lex.peek() is not None:
        raise LispressError("trailing tokens after top-level form", lex.pos)
    return node


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def print_canonical(node: Node) -> str:
    """Single-line, single-space-separated rendering; right inverse of parse."""
    if isinstance(node, Symbol):
        return node.name
    if isinstance(node, Number):
        return node.text
    if isinstance(node, StringLit):
        return f'"{_escape(node.text)}"'
    if isinstance(node, TypedLiteral):
        if node.tag:
            return f"#({node.tag} {print_canonical(node.child)})"
        return "#" + print_canonical(node.child)
    if isinstance(node, List):
        return "(" + " ".join(print_canonical(c) for c in node.children) + ")"
    raise TypeError(f"not a Lispress node: {node!r}")


def contains_call(node: Node, fname: str) -> bool:
    """True iff some list subterm has Symbol(fname) in head position."""
    if isinstance(node, List):
        if node.children and isinstance(node.children[0], Symbol) and node.children[0].name == fname:
            return True
        return any(contains_call(c, fname) for c in node.children)
    if isinstance(node, TypedLiteral):
        return contains_call(node.child, fname)
    return False


def exact_match(pred: str, gold: str, strict: bool = False) -> bool:
    """Program equality after canonicalization.

    With strict=True, compares raw bytes instead (for parity experiments
    against scorers that do not canonicalize whitespace).
    """
    try:
        gold_node = parse(gold)
    except LispressError as exc:
        raise LispressError(f"gold program does not parse: {exc}", exc.offset) from exc
    if strict:
        return pred == gold
    try:
        pred_node = parse(pred)
    except LispressError:
        return False
    return print_canonical(pred_node) == print_canonical(gold_node)
