"""Lossless tokenizer for the Haskell subset used in benchmark tasks.

Every character of the input lands in exactly one token, so joining the
token texts reproduces the source.  Whitespace and comments are kept as
tokens because the rewriters edit source in place.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import ParseError


class Kind(str, Enum):
    IDENT = "identifier"
    OPERATOR = "symbolic-operator"
    BACKTICK = "backtick-infix"
    LITERAL = "literal"
    PUNCT = "punctuation"
    KEYWORD = "keyword"
    SPACE = "whitespace"
    COMMENT = "comment"


KEYWORDS = frozenset(
    "case class data default deriving do else foreign if import in infix infixl "
    "infixr instance let module newtype of then type where _".split()
)
RESERVED_OPS = frozenset(["..", ":", "::", "=", "\\", "|", "<-", "->", "@", "~", "=>"])
SYMBOL_CHARS = frozenset("!#$%&*+./<=>?@\\^|-~:")

_SPACE = re.compile(r"[ \t\r\n\f\v]+")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_NUMBER = re.compile(
    r"0[xX][0-9a-fA-F]+|0[oO][0-7]+|[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?"
)
_CHAR = re.compile(
    r"'(?:\\(?:[abfnrtv\\\"']|[0-9]+|x[0-9a-fA-F]+|o[0-7]+|\^[A-Z@\[\\\]^_]|[A-Z]{2,3})"
    r"|[^'\\\n])'"
)
_STRING_BODY = re.compile(r'(?:[^"\\\n]|\\.)*"')
_SYMBOLS = re.compile(r"[!#$%&*+./<=>?@\\^|\-~:]+")
_BACKTICK = re.compile(r"`([A-Za-z_][A-Za-z0-9_']*)`")


@dataclass(frozen=True)
class Token:
    kind: Kind
    text: str
    start: int

    @property
    def end(self) -> int:
        return self.start + len(self.text)

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def trivia(self) -> bool:
        return self.kind in (Kind.SPACE, Kind.COMMENT)

    @property
    def name(self) -> str:
        """Name carried by identifier-like tokens (backticks stripped)."""
        if self.kind is Kind.BACKTICK:
            return self.text[1:-1]
        return self.text


TokenStream = list  # list[Token], kept as a plain list


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into tokens; raises ParseError on bad literals."""
    tokens: list[Token] = []
    pos, n = 0, len(text)
    while pos < n:
        ch = text[pos]
        m = _SPACE.match(text, pos)
        if m:
            tokens.append(Token(Kind.SPACE, m.group(), pos))
            pos = m.end()
            continue
        if text.startswith("{-", pos):
            end = _block_comment_end(text, pos)
            tokens.append(Token(Kind.COMMENT, text[pos:end], pos))
            pos = end
            continue
        if text.startswith("--", pos):
            m = _SYMBOLS.match(text, pos)
            run = m.group()
            if set(run) == {"-"}:
                end = text.find("\n", pos)
                end = n if end < 0 else end
                tokens.append(Token(Kind.COMMENT, text[pos:end], pos))
                pos = end
                continue
        if ch.isascii() and (ch.isalpha() or ch == "_"):
            m = _IDENT.match(text, pos)
            word = m.group()
            kind = Kind.KEYWORD if word in KEYWORDS else Kind.IDENT
            tokens.append(Token(kind, word, pos))
            pos = m.end()
            continue
        if ch.isdigit() and ch.isascii():
            m = _NUMBER.match(text, pos)
            tokens.append(Token(Kind.LITERAL, m.group(), pos))
            pos = m.end()
            continue
        if ch == '"':
            m = _STRING_BODY.match(text, pos + 1)
            if not m:
                raise ParseError("unterminated string literal", pos, text)
            tokens.append(Token(Kind.LITERAL, text[pos:m.end()], pos))
            pos = m.end()
            continue
        if ch == "'":
            m = _CHAR.match(text, pos)
            if not m:
                raise ParseError("unterminated character literal", pos, text)
            tokens.append(Token(Kind.LITERAL, m.group(), pos))
            pos = m.end()
            continue
        if ch == "`":
            m = _BACKTICK.match(text, pos)
            if not m:
                raise ParseError("unterminated backtick", pos, text)
            tokens.append(Token(Kind.BACKTICK, m.group(), pos))
            pos = m.end()
            continue
        if ch in SYMBOL_CHARS:
            m = _SYMBOLS.match(text, pos)
            op = m.group()
            kind = Kind.PUNCT if op in RESERVED_OPS else Kind.OPERATOR
            tokens.append(Token(kind, op, pos))
            pos = m.end()
            continue
        if ch in "()[],;{}":
            tokens.append(Token(Kind.PUNCT, ch, pos))
            pos += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", pos, text)
    return tokens


def _block_comment_end(text: str, pos: int) -> int:
    depth, i = 0, pos
    while i < len(text):
        if text.startswith("{-", i):
            depth += 1
            i += 2
        elif text.startswith("-}", i):
            depth -= 1
            i += 2
            if depth == 0:
                return i
        else:
            i += 1
    raise ParseError("unterminated block comment", pos, text)


def tokenize_binding_source(text: str) -> list[Token]:
    """Tokenize one binding definition (equations, guards, where blocks)."""
    return tokenize(text)


def untokenize(tokens) -> str:
    return "".join(t.text for t in tokens)


def is_constructor_name(name: str) -> bool:
    """Uppercase identifiers and ``:``-operators live in the constructor namespace."""
    bare = name[1:-1] if name.startswith("(") and name.endswith(")") else name
    return bool(bare) and (bare[0].isupper() or bare[0] == ":")


def column_of(text: str, pos: int) -> int:
    return pos - (text.rfind("\n", 0, pos) + 1)
