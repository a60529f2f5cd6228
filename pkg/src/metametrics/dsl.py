"""A small arithmetic language for season-level metric formulas.

A definition line looks like::

    FG% percentage attempts=FGA = FG / FGA
    PTS36 rate = 36 * PTS / MIN

The header is ``name [kind] [attempts=stat]`` followed by ``=`` and an
expression over stat names, numeric literals, ``+ - * /`` and parentheses.
Stat names that are not plain identifiers (``3PA``, ``FG%``) are written in
backticks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from .errors import DuplicateMetric, MetricSyntaxError, MissingAttempts, UnknownStat

KINDS = ("rate", "total", "percentage")
DEFAULT_KIND = "total"

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_%]*")
_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Stat:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


Node = Union[Num, Stat, BinOp]


@dataclass(frozen=True)
class MetricDefinition:
    name: str
    kind: str
    expression: Node
    attempts_stat: Optional[str] = None
    source: str = field(default="", compare=False)

    @property
    def stats(self) -> frozenset:
        """Stat names referenced by the expression (attempts excluded)."""
        return frozenset(_collect_stats(self.expression))

    @property
    def required_stats(self) -> frozenset:
        extra = {self.attempts_stat} if self.attempts_stat else set()
        return self.stats | extra

    def to_source(self) -> str:
        parts = [self.name, self.kind]
        if self.attempts_stat:
            parts.append("attempts=" + _format_stat(self.attempts_stat))
        return " ".join(parts) + " = " + to_source(self.expression)

    def evaluate(self, stats: Mapping[str, np.ndarray]) -> np.ndarray:
        """Evaluate on aggregated stats; non-finite results become NaN."""
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.asarray(evaluate(self.expression, stats), dtype=float)
        return np.where(np.isfinite(out), out, np.nan)


def _collect_stats(node):
    if isinstance(node, Stat):
        yield node.name
    elif isinstance(node, BinOp):
        yield from _collect_stats(node.left)
        yield from _collect_stats(node.right)


def evaluate(node: Node, stats: Mapping[str, object]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Stat):
        return stats[node.name]
    a = evaluate(node.left, stats)
    b = evaluate(node.right, stats)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    return np.true_divide(a, b)


def _format_stat(name: str) -> str:
    if _IDENT.fullmatch(name):
        return name
    return f"`{name}`"


def _format_num(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def to_source(node: Node, parent_prec: int = 0, right_side: bool = False) -> str:
    """Print an expression with the minimum parentheses that preserve the tree."""
    if isinstance(node, Num):
        return _format_num(node.value)
    if isinstance(node, Stat):
        return _format_stat(node.name)
    prec = _PREC[node.op]
    text = (
        to_source(node.left, prec, False)
        + f" {node.op} "
        + to_source(node.right, prec, True)
    )
    # operators are left-associative, so an equal-precedence right child needs parens
    if prec < parent_prec or (right_side and prec == parent_prec):
        return f"({text})"
    return text


class _Parser:
    def __init__(self, text: str, line: int, col0: int):
        self.text = text
        self.line = line
        self.col0 = col0
        self.pos = 0
        self.tokens = self._tokenize()
        self.i = 0

    def error(self, msg, pos):
        raise MetricSyntaxError(msg, self.line, self.col0 + pos + 1)

    def _tokenize(self):
        toks = []
        t, n = self.text, len(self.text)
        p = 0
        while p < n:
            c = t[p]
            if c.isspace():
                p += 1
            elif c in "+-*/()":
                toks.append(("op", c, p))
                p += 1
            elif c == "`":
                end = t.find("`", p + 1)
                if end < 0 or end == p + 1:
                    self.error("unterminated or empty quoted stat name", p)
                toks.append(("stat", t[p + 1:end], p))
                p = end + 1
            elif (m := _NUMBER.match(t, p)) is not None:
                if p + len(m.group()) < n and (t[p + len(m.group())].isalpha() or t[p + len(m.group())] == "_"):
                    self.error("stat names starting with a digit must be quoted with backticks", p)
                toks.append(("num", m.group(), p))
                p = m.end()
            elif (m := _IDENT.match(t, p)) is not None:
                toks.append(("stat", m.group(), p))
                p = m.end()
            else:
                self.error(f"unexpected character {c!r}", p)
        toks.append(("end", "", n))
        return toks

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse(self) -> Node:
        node = self.expr()
        kind, val, p = self.peek()
        if kind != "end":
            self.error(f"unexpected token {val!r}", p)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        kind, val, p = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "stat":
            return Stat(val)
        if kind == "op" and val == "(":
            node = self.expr()
            k2, v2, p2 = self.take()
            if not (k2 == "op" and v2 == ")"):
                self.error("expected ')'", p2)
            return node
        if kind == "end":
            self.error("unexpected end of expression", p)
        self.error(f"unexpected token {val!r}", p)


def parse_expression(text: str, line: int = 1, col0: int = 0) -> Node:
    return _Parser(text, line, col0).parse()


def _read_word(src: str, p: int):
    """Read a header word (or backticked name) starting at ``p``."""
    if src[p] == "`":
        end = src.find("`", p + 1)
        if end < 0:
            return None, p
        return src[p + 1:end], end + 1
    q = p
    while q < len(src) and not src[q].isspace() and src[q] != "=":
        q += 1
    return src[p:q], q


def parse_metric(
    source: str, line: int = 1, known_stats: Optional[Iterable[str]] = None
) -> MetricDefinition:
    """Parse one definition line into a :class:`MetricDefinition`.

    Raises :class:`MetricSyntaxError` (with line/column),
    :class:`MissingAttempts` for a percentage without ``attempts=``, and
    :class:`UnknownStat` if ``known_stats`` is given and the formula uses
    anything outside it.
    """
    src = source.rstrip("\n")
    n = len(src)
    p = 0
    while p < n and src[p].isspace():
        p += 1
    if p >= n or src[p] == "=":
        raise MetricSyntaxError("missing metric name", line, p + 1)
    name, p = _read_word(src, p)
    if not name:
        raise MetricSyntaxError("bad metric name", line, p + 1)
    kind = None
    attempts = None
    while True:
        while p < n and src[p].isspace():
            p += 1
        if p >= n:
            raise MetricSyntaxError("expected '=' after metric header", line, p + 1)
        if src[p] == "=":
            p += 1
            break
        start = p
        word, p = _read_word(src, p)
        if word == "attempts" and p < n and src[p] == "=":
            p += 1
            if p >= n or src[p].isspace():
                raise MetricSyntaxError("attempts= needs a stat name", line, p + 1)
            attempts, p = _read_word(src, p)
            if not attempts:
                raise MetricSyntaxError("bad attempts stat name", line, start + 1)
        elif word in KINDS and kind is None:
            kind = word
        else:
            raise MetricSyntaxError(f"unexpected header token {word!r}", line, start + 1)
    expr = parse_expression(src[p:], line, p)
    kind = kind or DEFAULT_KIND
    if kind == "percentage" and attempts is None:
        raise MissingAttempts(
            f"percentage metric {name!r} needs attempts=<stat> (line {line})"
        )
    d = MetricDefinition(name, kind, expr, attempts, source=src.strip())
    if known_stats is not None:
        missing = d.required_stats - set(known_stats)
        if missing:
            raise UnknownStat(f"metric {name!r} uses unknown stats {sorted(missing)}")
    return d


def _strip_comment(line: str) -> str:
    in_tick = False
    for i, c in enumerate(line):
        if c == "`":
            in_tick = not in_tick
        elif c == "#" and not in_tick:
            return line[:i]
    return line


def parse_definitions(text: str, known_stats=None) -> list:
    """Parse a definitions file: one metric per line, ``#`` comments."""
    defs = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = _strip_comment(raw)
        if not body.strip():
            continue
        d = parse_metric(body, line=lineno, known_stats=known_stats)
        if d.name in seen:
            raise DuplicateMetric(f"metric {d.name!r} defined twice (line {lineno})")
        seen.add(d.name)
        defs.append(d)
    return defs


def load_definitions(path, known_stats=None) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_definitions(fh.read(), known_stats=known_stats)
