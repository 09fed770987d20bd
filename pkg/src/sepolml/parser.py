"""Parser for the Type-Enforcement subset of the SELinux policy language.

Grammar::

    document       = { statement } EOF
    statement      = type_decl | attribute_decl | typeattribute | allow | type_transition
    type_decl      = "type" NAME { "," NAME } ";"
    attribute_decl = "attribute" NAME ";"
    typeattribute  = "typeattribute" NAME NAME { "," NAME } ";"
    allow          = "allow" NAME NAME ":" NAME ( NAME | "{" NAME { NAME } "}" ) ";"
    type_transition= "type_transition" NAME NAME ":" NAME NAME ";"
    NAME           = [A-Za-z_][A-Za-z0-9_]*

``#`` starts a comment that runs to the end of the line. Whitespace (including
CR) is insignificant. Positions are 1-based ``(line, column)`` pairs.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from .errors import DataError

log = logging.getLogger(__name__)

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
KEYWORDS = ("type", "attribute", "typeattribute", "allow", "type_transition")
PUNCT = frozenset(";:{},")

STRICT = "strict"
LENIENT = "lenient"


@dataclass(frozen=True)
class Span:
    line: int
    column: int

    def __str__(self):
        return f"{self.line}:{self.column}"


class ParseError(DataError):
    def __init__(self, line, column, expected, found):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        super().__init__(f"{line}:{column}: expected {expected}, found {found}")


class UndeclaredType(DataError):
    def __init__(self, name, span):
        self.name = name
        self.span = span
        super().__init__(f"{span}: undeclared type {name!r}")

    def __eq__(self, other):
        return (
            isinstance(other, UndeclaredType)
            and self.name == other.name
            and self.span == other.span
        )

    def __hash__(self):
        return hash((self.name, self.span))

    def __repr__(self):
        return f"UndeclaredType({self.name!r}, {self.span})"


# Spans never take part in equality: two statements are equal when they say
# the same thing, wherever they were written.
_span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class TypeDecl:
    name: str
    attributes: tuple[str, ...] = ()
    span: Span | None = _span


@dataclass(frozen=True)
class AttributeDecl:
    name: str
    span: Span | None = _span


@dataclass(frozen=True)
class TypeAttributeAssoc:
    type_name: str
    attributes: tuple[str, ...]
    span: Span | None = _span


@dataclass(frozen=True)
class AllowRule:
    source: str
    target: str
    security_class: str
    permissions: tuple[str, ...]
    span: Span | None = _span

    def __post_init__(self):
        if not self.permissions:
            raise ValueError("allow rule needs at least one permission")
        if len(set(self.permissions)) != len(self.permissions):
            raise ValueError(f"duplicate permissions in {self.permissions}")


@dataclass(frozen=True)
class TypeTransitionRule:
    source_domain: str
    target_type: str
    security_class: str
    new_type: str
    span: Span | None = _span


Rule = Union[AllowRule, TypeTransitionRule]
Statement = Union[TypeDecl, AttributeDecl, TypeAttributeAssoc, AllowRule, TypeTransitionRule]


@dataclass(frozen=True)
class PolicyDocument:
    statements: tuple[Statement, ...] = ()
    source_name: str = field(default="<string>", compare=False)

    @property
    def rules(self) -> list[Rule]:
        return [s for s in self.statements if isinstance(s, (AllowRule, TypeTransitionRule))]

    def declared_names(self) -> set[str]:
        names = set()
        for s in self.statements:
            if isinstance(s, TypeDecl):
                names.add(s.name)
                names.update(s.attributes)
            elif isinstance(s, AttributeDecl):
                names.add(s.name)
            elif isinstance(s, TypeAttributeAssoc):
                names.update(s.attributes)
        return names

    def __len__(self):
        return len(self.statements)


def rule_type_refs(rule: Rule) -> tuple[str, ...]:
    if isinstance(rule, AllowRule):
        return (rule.source, rule.target)
    return (rule.source_domain, rule.target_type, rule.new_type)


# -- lexer ------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # "name", a punctuation char, or "eof"
    text: str
    line: int
    column: int

    def describe(self):
        if self.kind == "eof":
            return "end of input"
        return repr(self.text)


def tokenize(text: str) -> Iterator[Token]:
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r\f\v":
            i += 1
            col += 1
        elif ch == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in PUNCT:
            yield Token(ch, ch, line, col)
            i += 1
            col += 1
        else:
            m = NAME_RE.match(text, i)
            if m is None:
                raise ParseError(line, col, "identifier or punctuation", repr(ch))
            yield Token("name", m.group(), line, col)
            col += m.end() - i
            i = m.end()
    yield Token("eof", "", line, col)


# -- parser -----------------------------------------------------------------


class _Parser:
    def __init__(self, text, mode):
        self.tokens = list(tokenize(text))
        self.pos = 0
        self.mode = mode

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, expected):
        raise ParseError(self.tok.line, self.tok.column, expected, self.tok.describe())

    def expect(self, kind, expected=None):
        if self.tok.kind != kind:
            self.fail(expected or repr(kind))
        return self.advance()

    def name(self, what="identifier"):
        return self.expect("name", what).text

    def name_list(self, what):
        names = [self.name(what)]
        while self.tok.kind == ",":
            self.advance()
            names.append(self.name(what))
        return names

    def unique(self, names, tokens, what):
        seen = []
        for name, tok in zip(names, tokens):
            if name in seen:
                if self.mode == STRICT:
                    raise ParseError(tok.line, tok.column, f"distinct {what}", repr(name))
                log.warning("%d:%d: duplicate %s %r dropped", tok.line, tok.column, what, name)
                continue
            seen.append(name)
        return tuple(seen)

    def statement(self):
        tok = self.tok
        if tok.kind != "name" or tok.text not in KEYWORDS:
            self.fail("statement keyword (" + ", ".join(KEYWORDS) + ")")
        span = Span(tok.line, tok.column)
        self.advance()
        kw = tok.text
        if kw == "type":
            name = self.name("type name")
            attrs = []
            while self.tok.kind == ",":
                self.advance()
                attrs.append(self.name("attribute name"))
            self.expect(";", "';'")
            return TypeDecl(name, tuple(dict.fromkeys(attrs)), span)
        if kw == "attribute":
            name = self.name("attribute name")
            self.expect(";", "';'")
            return AttributeDecl(name, span)
        if kw == "typeattribute":
            name = self.name("type name")
            attrs = self.name_list("attribute name")
            self.expect(";", "';'")
            return TypeAttributeAssoc(name, tuple(dict.fromkeys(attrs)), span)
        if kw == "allow":
            source = self.name("source type")
            target = self.name("target type")
            self.expect(":", "':'")
            cls = self.name("security class")
            if self.tok.kind == "{":
                self.advance()
                perm_toks = [self.expect("name", "permission")]
                while self.tok.kind == "name":
                    perm_toks.append(self.advance())
                self.expect("}", "permission or '}'")
            else:
                perm_toks = [self.expect("name", "permission or '{'")]
            self.expect(";", "';'")
            perms = self.unique([t.text for t in perm_toks], perm_toks, "permission")
            return AllowRule(source, target, cls, perms, span)
        # type_transition
        source = self.name("source domain")
        target = self.name("target type")
        self.expect(":", "':'")
        cls = self.name("security class")
        new = self.name("new type")
        self.expect(";", "';'")
        return TypeTransitionRule(source, target, cls, new, span)

    def document(self):
        out = []
        while self.tok.kind != "eof":
            out.append(self.statement())
        return out


def parse_document(text: str, mode: str = LENIENT, source_name: str = "<string>") -> PolicyDocument:
    """Parse policy text into a :class:`PolicyDocument`.

    In strict mode every type referenced by a rule must be declared somewhere
    in the document (``type`` or ``attribute``), and duplicate permissions are
    a :class:`ParseError`. Lenient mode accepts undeclared names and drops
    duplicate permissions with a warning.
    """
    if mode not in (STRICT, LENIENT):
        raise ValueError(f"unknown parse mode {mode!r}")
    statements = _Parser(text, mode).document()
    doc = PolicyDocument(tuple(statements), source_name)
    if mode == STRICT:
        missing = validate_references(doc)
        if missing:
            raise missing[0]
    return doc


def validate_references(doc: PolicyDocument) -> list[UndeclaredType]:
    """Every rule-referenced name lacking a declaration, in document order."""
    declared = doc.declared_names()
    out = []
    for rule in doc.rules:
        for name in rule_type_refs(rule):
            if name not in declared:
                out.append(UndeclaredType(name, rule.span))
    return out


def serialize_statement(stmt: Statement) -> str:
    if isinstance(stmt, AllowRule):
        perms = " ".join(stmt.permissions)
        return f"allow {stmt.source} {stmt.target}:{stmt.security_class} {{ {perms} }};"
    if isinstance(stmt, TypeTransitionRule):
        return (
            f"type_transition {stmt.source_domain} {stmt.target_type}:"
            f"{stmt.security_class} {stmt.new_type};"
        )
    if isinstance(stmt, TypeDecl):
        return "type " + ", ".join((stmt.name,) + stmt.attributes) + ";"
    if isinstance(stmt, AttributeDecl):
        return f"attribute {stmt.name};"
    if isinstance(stmt, TypeAttributeAssoc):
        return f"typeattribute {stmt.type_name} " + ", ".join(stmt.attributes) + ";"
    raise TypeError(f"not a policy statement: {stmt!r}")


def serialize(doc: PolicyDocument) -> str:
    """Canonical text: one statement per line, newline-terminated."""
    return "".join(serialize_statement(s) + "\n" for s in doc.statements)


def parse_file(path, mode: str = LENIENT) -> PolicyDocument:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_document(fh.read(), mode, source_name=str(path))
