"""Abstract syntax, parser and printer for type signatures.

Grammar subset::

    sig      ::= binding '::' qualtype
    qualtype ::= [ 'forall' var+ '.' ] [ context '=>' ] type
    context  ::= constraint | '(' [ constraint { ',' constraint } ] ')'
    type     ::= qualified forall | btype [ '->' type ]
    btype    ::= atype { atype }
    atype    ::= var | Con | '()' | '(' type ')' | '(' type ',' ... ')' | '[' type ']'

Anything else that is still valid Haskell raises UnsupportedSyntax.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

from .errors import ParseError, UnsupportedSyntax
from .lexer import Kind, Token, tokenize

MAX_TUPLE = 7
MAX_DEPTH = 200


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Con:
    name: str


@dataclass(frozen=True)
class App:
    head: "TypeExpr"
    arg: "TypeExpr"


@dataclass(frozen=True)
class Arrow:
    domain: "TypeExpr"
    codomain: "TypeExpr"


@dataclass(frozen=True)
class ListOf:
    elem: "TypeExpr"


@dataclass(frozen=True)
class Tuple:
    elems: tuple

    def __post_init__(self):
        if len(self.elems) < 2:
            raise ValueError("tuples need at least two elements")


@dataclass(frozen=True)
class Unit:
    pass


@dataclass(frozen=True)
class Constraint:
    class_name: str
    args: tuple

    def __post_init__(self):
        if not self.args:
            raise ValueError("constraint without arguments")


@dataclass(frozen=True)
class Forall:
    binders: tuple
    context: tuple
    body: "TypeExpr"

    def __post_init__(self):
        if len(set(self.binders)) != len(self.binders):
            raise ValueError("duplicate binder in forall")


TypeExpr = Union[Var, Con, App, Arrow, ListOf, Tuple, Unit, Forall]


@dataclass(frozen=True)
class TypeSignature:
    binding: str
    context: tuple
    body: TypeExpr

    def __str__(self) -> str:
        return print_signature(self)


def arrow(*parts: TypeExpr) -> TypeExpr:
    """Right-nested arrow chain: ``arrow(a, b, c)`` is ``a -> b -> c``."""
    result = parts[-1]
    for part in reversed(parts[:-1]):
        result = Arrow(part, result)
    return result


def apply(head: TypeExpr, *args: TypeExpr) -> TypeExpr:
    for a in args:
        head = App(head, a)
    return head


# ---------------------------------------------------------------- parsing


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks: list[Token] = [t for t in tokenize(text) if not t.trivia]
        self.i = 0
        self.depth = 0

    # token helpers
    def peek(self, k: int = 0) -> Token | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.text == text and t.kind in (Kind.PUNCT, Kind.OPERATOR)

    def pos(self) -> int:
        t = self.peek()
        return t.start if t else len(self.text)

    def fail(self, msg: str, tok: Token | None = None):
        p = tok.start if tok else self.pos()
        raise ParseError(msg, p, self.text)

    def unsupported(self, msg: str, tok: Token | None = None):
        p = tok.start if tok else self.pos()
        raise UnsupportedSyntax(msg, p, self.text)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            t = self.peek()
            self.fail(f"expected {text!r}, found {t.text if t else 'end of input'!r}")
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            self.fail("type nested too deeply")

    # grammar
    def binding(self) -> str:
        t = self.peek()
        if t is None:
            self.fail("expected a binding name")
        if t.kind is Kind.IDENT:
            self.i += 1
            return t.text
        if self.at("("):
            op = self.peek(1)
            if op is not None and (op.kind is Kind.OPERATOR or op.text == ":"):
                if self.at(")", 2):
                    self.i += 3
                    return f"({op.text})"
        self.fail("expected a binding name", t)

    def qualtype(self) -> tuple[tuple, TypeExpr]:
        """Context (possibly empty) plus body; a leading forall is kept in the body."""
        if self._at_forall():
            return (), self.forall_type()
        context = self.maybe_context()
        body = self.type_()
        if self.at("=>"):
            self.unsupported("only a single '=>' context is supported")
        return context, body

    def _at_forall(self) -> bool:
        t = self.peek()
        return t is not None and t.kind is Kind.IDENT and t.text == "forall"

    def forall_type(self) -> Forall:
        self.enter()
        self.i += 1
        binders = []
        while True:
            t = self.peek()
            if t is not None and t.kind is Kind.IDENT and t.text[0].islower() and t.text != "forall":
                binders.append(t.text)
                self.i += 1
                continue
            break
        if not binders:
            self.fail("forall without binders")
        dot = self.peek()
        if dot is None or dot.text != ".":
            self.fail("expected '.' after forall binders")
        self.i += 1
        if len(set(binders)) != len(binders):
            self.fail("duplicate binder in forall", dot)
        if self._at_forall():
            body: TypeExpr = self.forall_type()
            context: tuple = ()
        else:
            context = self.maybe_context()
            body = self.type_()
        if self.at("=>"):
            self.unsupported("only a single '=>' context is supported")
        self.depth -= 1
        return Forall(tuple(binders), context, body)

    def maybe_context(self) -> tuple:
        save = self.i
        try:
            ctx = self.context()
        except ParseError:
            self.i = save
            return ()
        if self.at("=>"):
            self.i += 1
            return ctx
        self.i = save
        return ()

    def context(self) -> tuple:
        if self.at("("):
            self.i += 1
            if self.at(")"):
                self.i += 1
                return ()
            items = [self.constraint()]
            while self.at(","):
                self.i += 1
                items.append(self.constraint())
            self.expect(")")
            return tuple(items)
        return (self.constraint(),)

    def constraint(self) -> Constraint:
        t = self.peek()
        if t is None or t.kind is not Kind.IDENT or not t.text[0].isupper():
            self.fail("expected a class name")
        self.i += 1
        args = []
        while self._atype_start():
            args.append(self.atype())
        if not args:
            self.fail("class constraint without arguments", t)
        return Constraint(t.text, tuple(args))

    def type_(self) -> TypeExpr:
        self.enter()
        if self._at_forall():
            result: TypeExpr = self.forall_type()
        else:
            result = self.btype()
            if self.at("->"):
                self.i += 1
                result = Arrow(result, self.type_())
        self.depth -= 1
        return result

    def _atype_start(self) -> bool:
        t = self.peek()
        if t is None:
            return False
        if t.kind is Kind.IDENT:
            return t.text != "forall"
        return t.kind is Kind.PUNCT and t.text in ("(", "[")

    def btype(self) -> TypeExpr:
        if not self._atype_start():
            t = self.peek()
            self._reject(t)
            self.fail("expected a type" if t else "unexpected end of type")
        head = self.atype()
        while self._atype_start():
            head = App(head, self.atype())
        return head

    def _reject(self, t: Token | None):
        if t is None:
            return
        if t.kind is Kind.OPERATOR or t.text in ("~", "@"):
            self.unsupported(f"type operator {t.text!r} is not supported", t)
        if t.kind is Kind.LITERAL:
            self.unsupported("type-level literals are not supported", t)
        if t.text == "::":
            self.unsupported("kind signatures are not supported", t)
        if t.kind is Kind.BACKTICK:
            self.unsupported("infix type constructors are not supported", t)
        if t.text == "_":
            self.unsupported("type wildcards are not supported", t)

    def atype(self) -> TypeExpr:
        self.enter()
        t = self.peek()
        if t.kind is Kind.IDENT:
            self.i += 1
            self.depth -= 1
            return Var(t.text) if t.text[0].islower() or t.text[0] == "_" else Con(t.text)
        if t.text == "[":
            self.i += 1
            if self.at("]"):
                self.unsupported("bare list constructor '[]' is not supported", t)
            inner = self.type_()
            self.expect("]")
            self.depth -= 1
            return ListOf(inner)
        # '('
        self.i += 1
        if self.at(")"):
            self.i += 1
            self.depth -= 1
            return Unit()
        nxt = self.peek()
        if nxt is not None and (nxt.text in (",", "->") or nxt.kind is Kind.OPERATOR):
            self.unsupported(f"prefix type constructor '({nxt.text})' is not supported", nxt)
        first = self.type_()
        if self.at(","):
            elems = [first]
            while self.at(","):
                self.i += 1
                elems.append(self.type_())
            if len(elems) > MAX_TUPLE:
                self.unsupported(f"tuples wider than {MAX_TUPLE} are not supported", t)
            self.expect(")")
            self.depth -= 1
            return Tuple(tuple(elems))
        self.expect(")")
        self.depth -= 1
        return first

    def done(self):
        t = self.peek()
        if t is not None:
            self._reject(t)
            if t.text == "=>":
                self.unsupported("only a single '=>' context is supported", t)
            self.fail(f"unexpected {t.text!r}", t)


def parse_signature(text: str) -> TypeSignature:
    """Parse ``name :: type`` into a TypeSignature.

    Raises ParseError (with offset) for malformed input and
    UnsupportedSyntax for valid Haskell outside the supported subset.
    """
    p = _Parser(text)
    name = p.binding()
    p.expect("::")
    if p.peek() is None:
        p.fail("empty type")
    context, body = p.qualtype()
    p.done()
    return TypeSignature(name, context, body)


def parse_type(text: str, binding: str = "_") -> TypeSignature:
    """Parse a bare (possibly qualified) type, as produced by a model answer."""
    p = _Parser(text)
    if p.peek() is None:
        p.fail("empty type")
    context, body = p.qualtype()
    p.done()
    return TypeSignature(binding, context, body)


# --------------------------------------------------------------- printing


def print_type(t: TypeExpr) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Con):
        return t.name
    if isinstance(t, Unit):
        return "()"
    if isinstance(t, ListOf):
        return f"[{print_type(t.elem)}]"
    if isinstance(t, Tuple):
        return "(" + ", ".join(print_type(e) for e in t.elems) + ")"
    if isinstance(t, Arrow):
        dom = print_type(t.domain)
        if isinstance(t.domain, (Arrow, Forall)):
            dom = f"({dom})"
        return f"{dom} -> {print_type(t.codomain)}"
    if isinstance(t, App):
        head = print_type(t.head)
        if isinstance(t.head, (Arrow, Forall)):
            head = f"({head})"
        return f"{head} {_print_arg(t.arg)}"
    if isinstance(t, Forall):
        return f"forall {' '.join(t.binders)}. {print_context(t.context)}{print_type(t.body)}"
    raise TypeError(f"not a type: {t!r}")


def _print_arg(t: TypeExpr) -> str:
    s = print_type(t)
    return f"({s})" if isinstance(t, (App, Arrow, Forall)) else s


def print_constraint(c: Constraint) -> str:
    return " ".join([c.class_name] + [_print_arg(a) for a in c.args])


def print_context(context) -> str:
    if not context:
        return ""
    if len(context) == 1:
        return f"{print_constraint(context[0])} => "
    return "(" + ", ".join(print_constraint(c) for c in context) + ") => "


def print_qualtype(context, body: TypeExpr) -> str:
    return print_context(context) + print_type(body)


def print_signature(sig: TypeSignature) -> str:
    return f"{sig.binding} :: {print_qualtype(sig.context, sig.body)}"


# ------------------------------------------------------------- analysis


def _walk_vars(t: TypeExpr, bound: frozenset) -> Iterator[str]:
    if isinstance(t, Var):
        if t.name not in bound:
            yield t.name
    elif isinstance(t, App):
        yield from _walk_vars(t.head, bound)
        yield from _walk_vars(t.arg, bound)
    elif isinstance(t, Arrow):
        yield from _walk_vars(t.domain, bound)
        yield from _walk_vars(t.codomain, bound)
    elif isinstance(t, ListOf):
        yield from _walk_vars(t.elem, bound)
    elif isinstance(t, Tuple):
        for e in t.elems:
            yield from _walk_vars(e, bound)
    elif isinstance(t, Forall):
        inner = bound | set(t.binders)
        for c in t.context:
            for a in c.args:
                yield from _walk_vars(a, inner)
        yield from _walk_vars(t.body, inner)


def _dedupe(names) -> list[str]:
    seen: dict[str, None] = {}
    for n in names:
        seen.setdefault(n, None)
    return list(seen)


def free_type_variables(expr: TypeExpr) -> list[str]:
    """Free variables in left-to-right first-occurrence order."""
    return _dedupe(_walk_vars(expr, frozenset()))


def signature_variables(sig: TypeSignature) -> list[str]:
    """Free variables of a whole signature: context first, then body."""
    names = [v for c in sig.context for a in c.args for v in _walk_vars(a, frozenset())]
    names += list(_walk_vars(sig.body, frozenset()))
    return _dedupe(names)


def constructors(expr: TypeExpr) -> list[str]:
    out = []

    def go(t):
        if isinstance(t, Con):
            out.append(t.name)
        elif isinstance(t, App):
            go(t.head)
            go(t.arg)
        elif isinstance(t, Arrow):
            go(t.domain)
            go(t.codomain)
        elif isinstance(t, ListOf):
            go(t.elem)
        elif isinstance(t, Tuple):
            for e in t.elems:
                go(e)
        elif isinstance(t, Forall):
            for c in t.context:
                for a in c.args:
                    go(a)
            go(t.body)

    go(expr)
    return _dedupe(out)


def map_type(t: TypeExpr, var=None, con=None) -> TypeExpr:
    """Rename variables and constructors; ``var``/``con`` are callables on names."""
    var = var or (lambda n: n)
    con = con or (lambda n: n)

    def go(t):
        if isinstance(t, Var):
            return Var(var(t.name))
        if isinstance(t, Con):
            return Con(con(t.name))
        if isinstance(t, App):
            return App(go(t.head), go(t.arg))
        if isinstance(t, Arrow):
            return Arrow(go(t.domain), go(t.codomain))
        if isinstance(t, ListOf):
            return ListOf(go(t.elem))
        if isinstance(t, Tuple):
            return Tuple(tuple(go(e) for e in t.elems))
        if isinstance(t, Unit):
            return t
        if isinstance(t, Forall):
            ctx = tuple(Constraint(con(c.class_name), tuple(go(a) for a in c.args)) for c in t.context)
            return Forall(tuple(var(b) for b in t.binders), ctx, go(t.body))
        raise TypeError(f"not a type: {t!r}")

    return go(t)


def expand_string(t: TypeExpr) -> TypeExpr:
    """Expand the Prelude string synonyms.

    ``String`` and ``FilePath`` become ``[Char]``, ``ShowS`` becomes
    ``[Char] -> [Char]`` and ``ReadS a`` becomes ``[Char] -> [(a, [Char])]``.
    """
    string = ListOf(Con("Char"))

    def go(t):
        if isinstance(t, Con):
            if t.name in ("String", "FilePath"):
                return string
            if t.name == "ShowS":
                return Arrow(string, string)
            return t
        if isinstance(t, App):
            if isinstance(t.head, Con) and t.head.name == "ReadS":
                return Arrow(string, ListOf(Tuple((go(t.arg), string))))
            return App(go(t.head), go(t.arg))
        if isinstance(t, Arrow):
            return Arrow(go(t.domain), go(t.codomain))
        if isinstance(t, ListOf):
            return ListOf(go(t.elem))
        if isinstance(t, Tuple):
            return Tuple(tuple(go(e) for e in t.elems))
        if isinstance(t, Forall):
            return Forall(t.binders, expand_context(t.context), go(t.body))
        return t

    return go(t)


def expand_context(context) -> tuple:
    return tuple(Constraint(c.class_name, tuple(expand_string(a) for a in c.args)) for c in context)


def arrow_parts(t: TypeExpr) -> list[TypeExpr]:
    """Split a top-level arrow chain into its arguments followed by the result."""
    parts = []
    while isinstance(t, Arrow):
        parts.append(t.domain)
        t = t.codomain
    parts.append(t)
    return parts
