"""Fielded boolean query language shared by provider search and the union
index: a recursive-descent parser, evaluation over metadata records, and a
canonical printer whose output reparses to the same tree.

Grammar (reserved characters are ``(`` ``)`` ``:`` ``"``; keywords are the
uppercase words AND, OR, NOT; adjacency means AND; NOT > AND > OR)::

    query  := or
    or     := and { "OR" and }
    and    := not { ["AND"] not }
    not    := "NOT" not | atom
    atom   := "(" or ")" | clause
    clause := [ field ":" ] ( WORD | QUOTED )
    field  := element name | "any"
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .dc import Element, MetadataRecord, tokenize

__all__ = [
    "QuerySyntaxError",
    "Term",
    "Phrase",
    "Clause",
    "And",
    "Or",
    "Not",
    "QueryNode",
    "parse_query",
    "eval_query",
    "canonical_text",
    "clauses_of",
]


class QuerySyntaxError(ValueError):
    """Raised on malformed query text; ``offset`` is a byte offset into the
    UTF-8 encoding of the query."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.offset = offset


@dataclass(frozen=True)
class Term:
    token: str


@dataclass(frozen=True)
class Phrase:
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class Clause:
    # field None means "any element"
    field: Optional[Element]
    match: Union[Term, Phrase]


@dataclass(frozen=True)
class And:
    left: "QueryNode"
    right: "QueryNode"


@dataclass(frozen=True)
class Or:
    left: "QueryNode"
    right: "QueryNode"


@dataclass(frozen=True)
class Not:
    child: "QueryNode"


QueryNode = Union[Clause, And, Or, Not]


_RESERVED = set('():"')
_KEYWORDS = {"AND", "OR", "NOT"}


@dataclass(frozen=True)
class _Token:
    kind: str  # WORD, QUOTED, LPAREN, RPAREN, COLON, AND, OR, NOT, END
    text: str
    offset: int  # byte offset


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def _lex(text: str) -> list[_Token]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        offset = _byte_offset(text, i)
        if c == "(":
            tokens.append(_Token("LPAREN", c, offset))
            i += 1
        elif c == ")":
            tokens.append(_Token("RPAREN", c, offset))
            i += 1
        elif c == ":":
            tokens.append(_Token("COLON", c, offset))
            i += 1
        elif c == '"':
            j = text.find('"', i + 1)
            if j < 0:
                raise QuerySyntaxError("unbalanced quote", offset)
            tokens.append(_Token("QUOTED", text[i + 1 : j], offset))
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in _RESERVED:
                j += 1
            word = text[i:j]
            if word in _KEYWORDS:
                tokens.append(_Token(word, word, offset))
            else:
                tokens.append(_Token("WORD", word, offset))
            i = j
    tokens.append(_Token("END", "", _byte_offset(text, n)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def parse(self) -> QueryNode:
        node = self.parse_or()
        trailing = self.peek()
        if trailing.kind != "END":
            raise QuerySyntaxError("unexpected input after query", trailing.offset)
        return node

    def parse_or(self) -> QueryNode:
        node = self.parse_and()
        while self.peek().kind == "OR":
            self.take()
            node = Or(node, self.parse_and())
        return node

    def parse_and(self) -> QueryNode:
        node = self.parse_not()
        while True:
            kind = self.peek().kind
            if kind == "AND":
                self.take()
                node = And(node, self.parse_not())
            elif kind in ("NOT", "LPAREN", "WORD", "QUOTED"):
                # adjacency is implicit AND
                node = And(node, self.parse_not())
            else:
                return node

    def parse_not(self) -> QueryNode:
        token = self.peek()
        if token.kind == "NOT":
            self.take()
            return Not(self.parse_not())
        return self.parse_atom()

    def parse_atom(self) -> QueryNode:
        token = self.peek()
        if token.kind == "LPAREN":
            self.take()
            node = self.parse_or()
            closing = self.peek()
            if closing.kind != "RPAREN":
                raise QuerySyntaxError("unbalanced parenthesis", token.offset)
            self.take()
            return node
        return self.parse_clause()

    def parse_clause(self) -> QueryNode:
        token = self.peek()
        field: Optional[Element] = None
        fielded = False
        if token.kind == "WORD" and self.tokens[self.pos + 1].kind == "COLON":
            name = token.text.lower()
            if name != "any":
                try:
                    field = Element(name)
                except ValueError:
                    raise QuerySyntaxError(f"unknown field name {token.text!r}", token.offset)
            self.take()  # field word
            self.take()  # colon
            fielded = True
            token = self.peek()
        if token.kind == "WORD":
            self.take()
            tokens = tokenize(token.text)
            if not tokens:
                raise QuerySyntaxError("empty clause", token.offset)
            if len(tokens) == 1:
                return Clause(field, Term(tokens[0]))
            # a bare word that normalizes to several tokens behaves as a phrase
            return Clause(field, Phrase(tuple(tokens)))
        if token.kind == "QUOTED":
            self.take()
            tokens = tokenize(token.text)
            if not tokens:
                raise QuerySyntaxError("empty clause", token.offset)
            return Clause(field, Phrase(tuple(tokens)))
        what = "term or quoted phrase" if fielded else "clause"
        raise QuerySyntaxError(f"expected {what}", token.offset)


def parse_query(text: str) -> QueryNode:
    """Parse query text into an AST. Clause tokens come out normalized
    (lowercase, diacritic-free). Raises QuerySyntaxError with a byte
    offset on malformed input."""
    if not text or not text.strip():
        raise QuerySyntaxError("empty query", 0)
    return _Parser(_lex(text)).parse()


def _statement_matches(tokens: list[str], match: Union[Term, Phrase]) -> bool:
    if isinstance(match, Term):
        return match.token in tokens
    needle = list(match.tokens)
    width = len(needle)
    return any(tokens[i : i + width] == needle for i in range(len(tokens) - width + 1))


def clause_matches(clause: Clause, record: MetadataRecord) -> bool:
    for statement in record.statements:
        if clause.field is not None and statement.element is not clause.field:
            continue
        if _statement_matches(tokenize(statement.value), clause.match):
            return True
    return False


def eval_query(node: QueryNode, record: MetadataRecord) -> bool:
    """Boolean evaluation; total over any record including the empty one."""
    if isinstance(node, Clause):
        return clause_matches(node, record)
    if isinstance(node, And):
        return eval_query(node.left, record) and eval_query(node.right, record)
    if isinstance(node, Or):
        return eval_query(node.left, record) or eval_query(node.right, record)
    if isinstance(node, Not):
        return not eval_query(node.child, record)
    raise TypeError(f"not a query node: {node!r}")


def canonical_text(node: QueryNode) -> str:
    """Fully parenthesized rendering; parse_query(canonical_text(n)) is
    structurally equal to n."""
    if isinstance(node, Clause):
        name = node.field.value if node.field is not None else "any"
        if isinstance(node.match, Term):
            return f"({name}:{node.match.token})"
        quoted = " ".join(node.match.tokens)
        return f'({name}:"{quoted}")'
    if isinstance(node, And):
        return f"({canonical_text(node.left)} AND {canonical_text(node.right)})"
    if isinstance(node, Or):
        return f"({canonical_text(node.left)} OR {canonical_text(node.right)})"
    if isinstance(node, Not):
        return f"(NOT {canonical_text(node.child)})"
    raise TypeError(f"not a query node: {node!r}")


def clauses_of(node: QueryNode) -> set[Clause]:
    """All distinct clauses appearing anywhere in the tree."""
    if isinstance(node, Clause):
        return {node}
    if isinstance(node, (And, Or)):
        return clauses_of(node.left) | clauses_of(node.right)
    if isinstance(node, Not):
        return clauses_of(node.child)
    raise TypeError(f"not a query node: {node!r}")
