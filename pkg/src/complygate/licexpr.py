"""SPDX license expressions: parsing, rendering, and choice-set expansion.

An expression is a binary tree of license terms combined with ``AND``
(all obligations apply simultaneously) and ``OR`` (the licensee picks one
branch). ``AND`` binds tighter than ``OR``; parentheses override. A term
is a license id, optionally with a ``+`` (or-later) suffix and/or a
``WITH <exception>`` qualifier.

Policy evaluation consumes the disjunctive normal form produced by
:func:`to_choice_sets`: each choice set is one conjunction of licenses a
licensee could comply with.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

__all__ = [
    "LicenseTerm",
    "Term",
    "Conjunction",
    "Disjunction",
    "LicenseExpression",
    "ChoiceSet",
    "ExpressionSyntaxError",
    "ExpansionLimitError",
    "DEFAULT_CHOICE_SET_CAP",
    "parse_expression",
    "render",
    "to_choice_sets",
    "licenses_mentioned",
]

_IDSTRING_RE = re.compile(r"[A-Za-z0-9.\-]+")

DEFAULT_CHOICE_SET_CAP = 4096


class ExpressionSyntaxError(ValueError):
    """A license expression could not be parsed.

    Carries the character ``position`` where parsing stopped and a short
    description of what was ``expected`` there.
    """

    def __init__(self, position: int, expected: str, text: str = "") -> None:
        self.position = position
        self.expected = expected
        self.text = text
        marker = ""
        if text:
            marker = f"\n  {text}\n  {' ' * position}^"
        super().__init__(f"expected {expected} at position {position}{marker}")


class ExpansionLimitError(ValueError):
    """Choice-set expansion would exceed the configured cap."""

    def __init__(self, limit: int) -> None:
        self.limit = limit
        super().__init__(f"choice-set expansion exceeds the cap of {limit}")


@dataclass(frozen=True)
class LicenseTerm:
    """A single license id, with optional or-later and exception qualifiers."""

    license_id: str
    or_later: bool = False
    exception_id: str | None = None

    def __post_init__(self) -> None:
        if not self.license_id or not _IDSTRING_RE.fullmatch(self.license_id):
            raise ValueError(f"invalid license id: {self.license_id!r}")
        if self.exception_id is not None and not _IDSTRING_RE.fullmatch(self.exception_id):
            raise ValueError(f"invalid exception id: {self.exception_id!r}")

    def render(self) -> str:
        base = self.license_id + ("+" if self.or_later else "")
        if self.exception_id is not None:
            return f"{base} WITH {self.exception_id}"
        return base

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class Term:
    term: LicenseTerm


@dataclass(frozen=True)
class Conjunction:
    left: "LicenseExpression"
    right: "LicenseExpression"


@dataclass(frozen=True)
class Disjunction:
    left: "LicenseExpression"
    right: "LicenseExpression"


LicenseExpression = Union[Term, Conjunction, Disjunction]


@dataclass(frozen=True)
class ChoiceSet:
    """One conjunction of simultaneously applicable licenses."""

    terms: frozenset[LicenseTerm]

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("a choice set must contain at least one term")

    def sorted_terms(self) -> tuple[LicenseTerm, ...]:
        return tuple(sorted(self.terms, key=lambda t: t.render()))

    def render(self) -> str:
        return " AND ".join(t.render() for t in self.sorted_terms())

    def __str__(self) -> str:
        return self.render()


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<lpar>\()
  | (?P<rpar>\))
  | (?P<plus>\+)
  | (?P<id>[A-Za-z0-9.\-]+)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # "(", ")", "+", "id", "AND", "OR", "WITH", "eof"
    value: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    tokens: list[_Tok] = []
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(pos, "license identifier, operator, or parenthesis", text)
        if m.lastgroup == "id":
            word = m.group("id")
            upper = word.upper()
            # Operator keywords are case-insensitive; ids keep their case.
            if upper in ("AND", "OR", "WITH"):
                tokens.append(_Tok(upper, word, m.start()))
            else:
                tokens.append(_Tok("id", word, m.start()))
        else:
            tokens.append(_Tok(m.group(0), m.group(0), m.start()))
        pos = m.end()
    tokens.append(_Tok("eof", "", n))
    return tokens


# --- recursive descent parser ----------------------------------------------
#
# expression  = and_expr ("OR" and_expr)*          (left associative)
# and_expr    = operand  ("AND" operand)*          (left associative)
# operand     = "(" expression ")" / term
# term        = id "+"? ("WITH" id)?


class _Parser:
    def __init__(self, text: str, tokens: list[_Tok]) -> None:
        self.text = text
        self.tokens = tokens
        self.i = 0

    def peek(self) -> _Tok:
        return self.tokens[self.i]

    def advance(self) -> _Tok:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse(self) -> LicenseExpression:
        expr = self.expression()
        tok = self.peek()
        if tok.kind != "eof":
            raise ExpressionSyntaxError(tok.pos, "end of expression or operator", self.text)
        return expr

    def expression(self) -> LicenseExpression:
        node = self.and_expr()
        while self.peek().kind == "OR":
            self.advance()
            node = Disjunction(node, self.and_expr())
        return node

    def and_expr(self) -> LicenseExpression:
        node = self.operand()
        while self.peek().kind == "AND":
            self.advance()
            node = Conjunction(node, self.operand())
        return node

    def operand(self) -> LicenseExpression:
        tok = self.peek()
        if tok.kind == "(":
            self.advance()
            node = self.expression()
            closing = self.peek()
            if closing.kind != ")":
                raise ExpressionSyntaxError(closing.pos, "')'", self.text)
            self.advance()
            # WITH applies to a single license id, never a parenthesized group.
            after = self.peek()
            if after.kind == "WITH":
                raise ExpressionSyntaxError(after.pos, "AND, OR, or end (WITH requires a single license)", self.text)
            return node
        return Term(self.term())

    def term(self) -> LicenseTerm:
        tok = self.peek()
        if tok.kind != "id":
            raise ExpressionSyntaxError(tok.pos, "license identifier", self.text)
        self.advance()
        license_id = tok.value
        or_later = False
        if self.peek().kind == "+":
            self.advance()
            or_later = True
        exception_id: str | None = None
        if self.peek().kind == "WITH":
            self.advance()
            exc = self.peek()
            if exc.kind != "id":
                raise ExpressionSyntaxError(exc.pos, "exception identifier after WITH", self.text)
            self.advance()
            exception_id = exc.value
            if self.peek().kind == "WITH":
                raise ExpressionSyntaxError(self.peek().pos, "AND, OR, or end (term already has an exception)", self.text)
        return LicenseTerm(license_id, or_later=or_later, exception_id=exception_id)


def parse_expression(text: str) -> LicenseExpression:
    """Parse a license expression string into its AST.

    ``AND`` binds tighter than ``OR``, both associate to the left, and
    parentheses override. Keywords are accepted case-insensitively;
    identifiers are preserved verbatim.

    Raises :class:`ExpressionSyntaxError` on empty input, unbalanced
    parentheses, dangling operators, or ``WITH`` without an exception id.
    """
    if not text or not text.strip():
        raise ExpressionSyntaxError(0, "non-empty license expression", text)
    return _Parser(text, _tokenize(text)).parse()


# --- rendering ---------------------------------------------------------------

_PRECEDENCE = {Disjunction: 1, Conjunction: 2, Term: 3}


def render(expr: LicenseExpression) -> str:
    """Render an AST to its minimally parenthesized canonical string.

    ``parse_expression(render(e))`` is structurally identical to ``e``: a
    child is parenthesized when it binds looser than its parent, or when
    it is a right child at the same precedence (the parser associates to
    the left).
    """
    if isinstance(expr, Term):
        return expr.term.render()
    op = " AND " if isinstance(expr, Conjunction) else " OR "
    prec = _PRECEDENCE[type(expr)]

    def side(child: LicenseExpression, right: bool) -> str:
        text = render(child)
        child_prec = _PRECEDENCE[type(child)]
        if child_prec < prec or (right and child_prec == prec):
            return f"({text})"
        return text

    return side(expr.left, right=False) + op + side(expr.right, right=True)


# --- choice sets -------------------------------------------------------------


def to_choice_sets(
    expr: LicenseExpression, limit: int = DEFAULT_CHOICE_SET_CAP
) -> list[ChoiceSet]:
    """Expand an expression into its disjunctive normal form.

    Each returned :class:`ChoiceSet` is one way to satisfy the expression:
    the expression is acceptable exactly when some choice set is fully
    acceptable. Output is deduplicated and ordered lexicographically by
    rendered terms.

    Raises :class:`ExpansionLimitError` if the expansion would exceed
    ``limit`` sets (default 4096).
    """

    def expand(node: LicenseExpression) -> list[frozenset[LicenseTerm]]:
        if isinstance(node, Term):
            return [frozenset([node.term])]
        left = expand(node.left)
        right = expand(node.right)
        if isinstance(node, Disjunction):
            if len(left) + len(right) > limit:
                raise ExpansionLimitError(limit)
            return left + right
        if len(left) * len(right) > limit:
            raise ExpansionLimitError(limit)
        return [l | r for l in left for r in right]

    seen: set[frozenset[LicenseTerm]] = set()
    sets: list[ChoiceSet] = []
    for terms in expand(expr):
        if terms not in seen:
            seen.add(terms)
            sets.append(ChoiceSet(terms))
    sets.sort(key=lambda cs: tuple(t.render() for t in cs.sorted_terms()))
    return sets


def licenses_mentioned(expr: LicenseExpression) -> set[LicenseTerm]:
    """All distinct terms appearing anywhere in the expression."""
    return set(_iter_terms(expr))


def _iter_terms(expr: LicenseExpression) -> Iterator[LicenseTerm]:
    if isinstance(expr, Term):
        yield expr.term
    else:
        yield from _iter_terms(expr.left)
        yield from _iter_terms(expr.right)
