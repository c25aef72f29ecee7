"""Text format for behavior trees (.bt files).

Grammar:

    document  := "btdsl 1" node
    node      := composite | leaf
    composite := ("sequence" | "fallback" | "parallel") attrs? "{" node+ "}"
    leaf      := ("action" | "condition") IDENT attrs?
    attrs     := "(" key "=" value ("," key "=" value)* ")"

Identifiers match [A-Za-z_][A-Za-z0-9_]*, "#" starts a line comment and one
root node is required per document. Unknown attributes parse fine and are
reported by validate(), so the wire format can grow without breaking old
readers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .bt import COMPOSITE_KINDS, LeafRegistry, NodeKind, TreeNode

FORMAT_VERSION = "btdsl 1"

_COMPOSITE_WORDS = {"sequence": NodeKind.SEQUENCE, "fallback": NodeKind.FALLBACK, "parallel": NodeKind.PARALLEL}
_LEAF_WORDS = {"action": NodeKind.ACTION, "condition": NodeKind.CONDITION}

# attribute key -> node kinds it applies to
_KNOWN_ATTRS = {
    "memory": (NodeKind.SEQUENCE, NodeKind.FALLBACK),
    "success": (NodeKind.PARALLEL,),
}


class DslError(Exception):
    pass


class DslSyntaxError(DslError):
    def __init__(self, message: str, line: int, col: int, expected: Optional[set[str]] = None):
        self.line = line
        self.col = col
        self.expected = expected or set()
        super().__init__(f"{message} (line {line}, col {col})")


class EmptyDocumentError(DslError):
    pass


class DuplicateRootError(DslSyntaxError):
    pass


@dataclass
class Span:
    line: int
    col: int
    end_line: int
    end_col: int


@dataclass
class Diagnostic:
    message: str
    span: Optional[Span] = None

    def __str__(self) -> str:
        if self.span:
            return f"{self.message} (line {self.span.line}, col {self.span.col})"
        return self.message


@dataclass
class TreeDocument:
    source: str
    root: TreeNode
    spans: dict[int, Span] = field(default_factory=dict)  # id(node) -> Span
    version: str = FORMAT_VERSION

    def span_of(self, node: TreeNode) -> Optional[Span]:
        return self.spans.get(id(node))


@dataclass
class _Token:
    kind: str  # word | int | punct | eof
    text: str
    line: int
    col: int


_PUNCT = set("{}(),=")


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in _PUNCT:
            tokens.append(_Token("punct", ch, line, col))
            i += 1
            col += 1
            continue
        if ("a" <= ch <= "z") or ("A" <= ch <= "Z") or ch == "_":
            start, start_col = i, col
            while i < n and (text[i].isascii() and (text[i].isalnum() or text[i] == "_")):
                i += 1
                col += 1
            tokens.append(_Token("word", text[start:i], line, start_col))
            continue
        if "0" <= ch <= "9":
            start, start_col = i, col
            while i < n and "0" <= text[i] <= "9":
                i += 1
                col += 1
            tokens.append(_Token("int", text[start:i], line, start_col))
            continue
        raise DslSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], source: str):
        self.tokens = tokens
        self.source = source
        self.pos = 0
        self.spans: dict[int, Span] = {}

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, message: str, tok: _Token, expected: Optional[set[str]] = None):
        raise DslSyntaxError(message, tok.line, tok.col, expected)

    def expect_punct(self, ch: str) -> _Token:
        tok = self.peek()
        if tok.kind != "punct" or tok.text != ch:
            self.fail(f"expected {ch!r}, found {tok.text or 'end of input'!r}", tok, {ch})
        return self.advance()

    def parse_document(self) -> TreeNode:
        header = self.advance()
        version_tok = self.peek()
        if (
            header.kind != "word"
            or header.text != "btdsl"
            or version_tok.kind != "int"
            or version_tok.text != "1"
        ):
            self.fail("expected version header 'btdsl 1'", header, {"btdsl 1"})
        self.advance()
        if self.peek().kind == "eof":
            raise EmptyDocumentError("document has no root node")
        root = self.parse_node()
        trailing = self.peek()
        if trailing.kind != "eof":
            if trailing.kind == "word" and trailing.text in (*_COMPOSITE_WORDS, *_LEAF_WORDS):
                raise DuplicateRootError(
                    "document must have exactly one root node", trailing.line, trailing.col
                )
            self.fail(f"unexpected trailing input {trailing.text!r}", trailing)
        return root

    def parse_node(self) -> TreeNode:
        tok = self.peek()
        if tok.kind != "word":
            self.fail(
                f"expected a node keyword, found {tok.text or 'end of input'!r}",
                tok,
                set(_COMPOSITE_WORDS) | set(_LEAF_WORDS),
            )
        if tok.text in _COMPOSITE_WORDS:
            return self.parse_composite()
        if tok.text in _LEAF_WORDS:
            return self.parse_leaf()
        self.fail(
            f"unknown node keyword {tok.text!r}",
            tok,
            set(_COMPOSITE_WORDS) | set(_LEAF_WORDS),
        )

    def parse_composite(self) -> TreeNode:
        kw = self.advance()
        kind = _COMPOSITE_WORDS[kw.text]
        params = self.parse_attrs() if self._at_punct("(") else {}
        self.expect_punct("{")
        children = []
        while not self._at_punct("}"):
            if self.peek().kind == "eof":
                self.fail("unterminated composite, expected '}'", self.peek(), {"}"})
            children.append(self.parse_node())
        close = self.expect_punct("}")
        if not children:
            raise DslSyntaxError(
                f"{kw.text} needs at least one child", kw.line, kw.col
            )
        node = TreeNode(kind=kind, children=children, params=params)
        self.spans[id(node)] = Span(kw.line, kw.col, close.line, close.col)
        return node

    def parse_leaf(self) -> TreeNode:
        kw = self.advance()
        kind = _LEAF_WORDS[kw.text]
        name_tok = self.peek()
        if name_tok.kind != "word":
            self.fail(
                f"expected leaf name after {kw.text!r}, found {name_tok.text or 'end of input'!r}",
                name_tok,
                {"IDENT"},
            )
        self.advance()
        params = self.parse_attrs() if self._at_punct("(") else {}
        node = TreeNode(kind=kind, leaf_name=name_tok.text, params=params)
        end_line, end_col = name_tok.line, name_tok.col + len(name_tok.text) - 1
        self.spans[id(node)] = Span(kw.line, kw.col, end_line, end_col)
        return node

    def parse_attrs(self) -> dict[str, str]:
        self.expect_punct("(")
        params: dict[str, str] = {}
        while True:
            key_tok = self.peek()
            if key_tok.kind != "word":
                self.fail(
                    f"expected attribute name, found {key_tok.text or 'end of input'!r}",
                    key_tok,
                    {"IDENT"},
                )
            self.advance()
            self.expect_punct("=")
            val_tok = self.peek()
            if val_tok.kind not in ("word", "int"):
                self.fail(
                    f"expected attribute value, found {val_tok.text or 'end of input'!r}",
                    val_tok,
                    {"IDENT", "INT"},
                )
            self.advance()
            if key_tok.text in params:
                raise DslSyntaxError(
                    f"duplicate attribute {key_tok.text!r}", key_tok.line, key_tok.col
                )
            params[key_tok.text] = val_tok.text
            if self._at_punct(","):
                self.advance()
                continue
            self.expect_punct(")")
            return params

    def _at_punct(self, ch: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.text == ch


def parse(text: str) -> TreeDocument:
    """Parse DSL text into a TreeDocument or raise a position-bearing error."""
    tokens = _tokenize(text)
    if tokens[0].kind == "eof":
        raise EmptyDocumentError("document is empty")
    parser = _Parser(tokens, text)
    root = parser.parse_document()
    return TreeDocument(source=text, root=root, spans=parser.spans)


def parse_file(path) -> TreeDocument:
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())


def validate(doc: TreeDocument, registry: LeafRegistry) -> list[Diagnostic]:
    """Check leaf bindings and attribute use; empty list means a clean tree."""
    diagnostics: list[Diagnostic] = []
    for node in doc.root.walk():
        span = doc.span_of(node)
        if node.leaf_name and node.leaf_name not in registry:
            diagnostics.append(Diagnostic(f"leaf {node.leaf_name!r} is not registered", span))
        for key, value in node.params.items():
            allowed = _KNOWN_ATTRS.get(key)
            if allowed is None or node.kind not in allowed:
                diagnostics.append(
                    Diagnostic(f"attribute {key!r} not recognized for {node.kind.value}", span)
                )
                continue
            if key == "memory" and value not in ("true", "false"):
                diagnostics.append(Diagnostic(f"memory must be true or false, got {value!r}", span))
            if key == "success" and value != "all":
                if not value.isdigit() or int(value) <= 0:
                    diagnostics.append(
                        Diagnostic("threshold must be positive or all", span)
                    )
    return diagnostics


def serialize(root: TreeNode) -> str:
    """Canonical text for a tree: 2-space indent, attributes sorted by key."""
    lines = [FORMAT_VERSION]
    _serialize_node(root, 0, lines)
    return "\n".join(lines) + "\n"


def _serialize_node(node: TreeNode, depth: int, lines: list[str]) -> None:
    pad = "  " * depth
    attrs = ""
    if node.params:
        attrs = "(" + ", ".join(f"{k}={node.params[k]}" for k in sorted(node.params)) + ")"
    if node.kind in COMPOSITE_KINDS:
        lines.append(f"{pad}{node.kind.value}{attrs} {{")
        for child in node.children:
            _serialize_node(child, depth + 1, lines)
        lines.append(f"{pad}}}")
    else:
        lines.append(f"{pad}{node.kind.value} {node.leaf_name}{attrs}")
