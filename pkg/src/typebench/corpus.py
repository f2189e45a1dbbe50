"""Self-contained benchmark tasks built from a corpus and a signature database."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import MissingDeps, ParseError
from .lexer import Kind, Token, column_of, is_constructor_name, tokenize
from .types import (
    App,
    Con,
    Constraint,
    Forall,
    TypeSignature,
    Var,
    expand_context,
    expand_string,
    free_type_variables,
    parse_signature,
    parse_type,
    print_context,
    print_signature,
)

CATEGORIES = ("Monomorphic", "Parametric", "AdHoc")
VARIANTS = ("regular", "pure")


def normalize_signature(sig: TypeSignature) -> TypeSignature:
    """Expand string synonyms so every task spells ``[Char]`` the same way."""
    return TypeSignature(sig.binding, expand_context(sig.context), expand_string(sig.body))


# ------------------------------------------------------------ class defs


@dataclass(frozen=True)
class ClassDef:
    name: str
    var: str
    superclasses: tuple = ()
    methods: tuple = ()  # TypeSignature, without the class constraint

    def method_names(self) -> list[str]:
        return [m.binding for m in self.methods]

    def method_signature(self, name: str) -> TypeSignature:
        for m in self.methods:
            if m.binding == name:
                own = Constraint(self.name, (Var(self.var),))
                return TypeSignature(m.binding, (own,) + m.context, m.body)
        raise KeyError(name)

    def render(self, omit=()) -> str:
        head = f"class {print_context(self.superclasses)}{self.name} {self.var}"
        methods = [m for m in self.methods if m.binding not in omit]
        if not methods:
            return head
        return "\n".join([head + " where"] + ["  " + print_signature(m) for m in methods])


def parse_class_def(text: str) -> ClassDef:
    """Parse a ``class [ctx =>] C a where`` block with one method per line."""
    head, _, rest = text.partition("\n")
    head = head.strip()
    if not head.startswith("class "):
        raise ParseError("class definition must start with 'class'", 0, text)
    head = head[len("class "):]
    if head.endswith(" where") or head == "where":
        head = head[: -len("where")].rstrip()
    elif "where" in head.split():
        raise ParseError("methods must start on their own line", 0, text)
    hsig = parse_type(head)
    body = hsig.body
    if not (isinstance(body, App) and isinstance(body.head, Con) and isinstance(body.arg, Var)):
        raise ParseError(f"bad class head {head!r}", 0, text)
    methods = []
    for line in rest.splitlines():
        if not line.strip():
            continue
        names, sep, ty = line.partition("::")
        if not sep:
            raise ParseError(f"expected method signature, got {line.strip()!r}", 0, text)
        for name in names.split(","):
            methods.append(parse_signature(f"{name.strip()} :: {ty.strip()}"))
    return ClassDef(body.head.name, body.arg.name, hsig.context, tuple(methods))


def _normalize_class(c: ClassDef) -> ClassDef:
    return replace(c, superclasses=expand_context(c.superclasses),
                   methods=tuple(normalize_signature(m) for m in c.methods))


# ------------------------------------------------------------ dependencies


@dataclass(frozen=True)
class DependencyDecl:
    kind: str  # "signature" | "class-definition"
    text: str
    parsed: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("signature", "class-definition"):
            raise ValueError(f"unknown dependency kind {self.kind!r}")
        if self.parsed is None:
            parsed = parse_signature(self.text) if self.kind == "signature" else parse_class_def(self.text)
            object.__setattr__(self, "parsed", parsed)

    @property
    def names(self) -> list[str]:
        """Binding names this declaration provides."""
        if self.kind == "signature":
            return [self.parsed.binding]
        return self.parsed.method_names()


@dataclass
class SignatureDB:
    entries: dict = field(default_factory=dict)  # name -> "name :: type"
    class_defs: dict = field(default_factory=dict)  # class name -> block text

    @classmethod
    def parse(cls, text: str) -> "SignatureDB":
        db = cls()
        blocks: list[list[str]] = []
        for line in text.splitlines():
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if line[0].isspace():
                if not blocks or not blocks[-1][0].startswith("class "):
                    raise ParseError(f"indented line outside a class block: {line.strip()!r}", 0, text)
                blocks[-1].append(line)
            else:
                blocks.append([line])
        for block in blocks:
            if block[0].startswith("class "):
                cdef = parse_class_def("\n".join(block))
                if cdef.name in db.class_defs:
                    raise ValueError(f"duplicate class {cdef.name}")
                db.class_defs[cdef.name] = "\n".join(block)
                for m in cdef.method_names():
                    db._add(m, print_signature(cdef.method_signature(m)))
            else:
                sig = parse_signature(block[0])
                db._add(sig.binding, block[0].strip())
        return db

    @classmethod
    def load(cls, path) -> "SignatureDB":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def _add(self, name: str, text: str):
        if name in self.entries:
            raise ValueError(f"duplicate signature for {name}")
        self.entries[name] = text

    def signature(self, name: str) -> TypeSignature:
        return normalize_signature(parse_signature(self.entries[name]))

    def class_def(self, name: str) -> ClassDef:
        return _normalize_class(parse_class_def(self.class_defs[name]))


def _context_classes(sig: TypeSignature) -> list[str]:
    return [c.class_name for c in sig.context]


def resolve_dependencies(names, db: SignatureDB, classes=(), exclude_methods=()) -> list[DependencyDecl]:
    """One signature declaration per name, then the class definitions they use.

    ``classes`` adds further class definitions (for instance those in the
    ground truth).  Methods named in ``exclude_methods`` are left out of
    the rendered class bodies so a task never lists its own answer.
    Raises MissingDeps naming every unknown name.
    """
    missing = [n for n in names if n not in db.entries]
    if missing:
        raise MissingDeps(missing)
    decls, wanted = [], []
    for n in names:
        sig = db.signature(n)
        decls.append(DependencyDecl("signature", print_signature(sig), sig))
        wanted += _context_classes(sig)
    wanted += list(classes)
    for cname in dict.fromkeys(wanted):
        if cname not in db.class_defs:
            continue
        cdef = db.class_def(cname)
        decls.append(DependencyDecl("class-definition", cdef.render(omit=exclude_methods)))
    return decls


# ------------------------------------------------------- call extraction

_OPENERS = frozenset(["where", "let", "of", "do"])


@dataclass
class _Block:
    kind: str
    col: int
    depth: int
    anchor: int | None  # token that fixed the block's column


def _paren_name(tok: Token) -> str:
    if tok.kind is Kind.OPERATOR:
        return f"({tok.text})"
    return tok.name


def layout(toks: list[Token], text: str):
    """Bracket depth before each token, layout items, and line anchors.

    Items are returned as ``{token index: block kind}``.  Anchors map the
    first token of every line (after the first) to the token whose column
    it is laid out against, or None for top-level lines.
    """
    depth_at, items, anchors = [], {}, {}
    stack = [_Block("top", 0, 0, None)]
    depth, prev_line, pending = 0, -1, None
    for i, t in enumerate(toks):
        line = text.count("\n", 0, t.start)
        col = column_of(text, t.start)
        if line != prev_line:
            while len(stack) > 1 and col < stack[-1].col:
                stack.pop()
            if i > 0:
                anchors[i] = stack[-1].anchor
            if pending is None and col == stack[-1].col:
                items[i] = stack[-1].kind
        if pending is not None:
            stack.append(_Block(pending, col, depth, i))
            items[i] = pending
            pending = None
        depth_at.append(depth)
        if t.kind is Kind.KEYWORD and t.text == "in":
            while len(stack) > 1:
                if stack.pop().kind == "let":
                    break
        elif t.text in ("(", "["):
            depth += 1
        elif t.text in (")", "]"):
            depth -= 1
            while len(stack) > 1 and stack[-1].depth > depth:
                stack.pop()
        elif t.text == "," and depth > 0:
            while len(stack) > 1 and stack[-1].depth == depth:
                stack.pop()
        elif t.text == ";" and stack[-1].depth == depth and i + 1 < len(toks):
            items[i + 1] = stack[-1].kind
        if t.kind is Kind.KEYWORD and t.text in _OPENERS:
            pending = t.text
        prev_line = line
    return depth_at, items, anchors


def _lhs_end(toks, depth_at, items, start, kind):
    """Index one past an item's left-hand side, or None if it has none."""
    stops = {"top": ("=", "|"), "where": ("=", "|"), "let": ("=", "|"), "of": ("->", "|"), "do": ("<-",)}[kind]
    d = depth_at[start]
    for j in range(start, len(toks)):
        if j != start and j in items:
            return None
        t = toks[j]
        if depth_at[j] < d:
            return None
        if depth_at[j] == d and t.kind is Kind.PUNCT:
            if t.text == "::":
                return None
            if t.text in stops:
                return j
    return None


def _defined_name(lhs: list[Token], depth_at_lhs: list[int]) -> str | None:
    if not lhs:
        return None
    if len(lhs) >= 3 and lhs[0].text == "(" and lhs[1].kind is Kind.OPERATOR and lhs[2].text == ")":
        return f"({lhs[1].text})"
    base = depth_at_lhs[0]
    for t, d in zip(lhs, depth_at_lhs):
        if d == base and t.kind in (Kind.OPERATOR, Kind.BACKTICK):
            return _paren_name(t)
    if lhs[0].kind is Kind.IDENT and not is_constructor_name(lhs[0].text):
        return lhs[0].text
    return None


def _binders(tokens) -> set[str]:
    return {t.text for t in tokens if t.kind is Kind.IDENT and not is_constructor_name(t.text)}


def analyze_implementation(implementation: str):
    """Return (defined target, locally bound names, significant tokens)."""
    text = implementation
    toks = [t for t in tokenize(text) if not t.trivia]
    if not toks:
        return None, set(), []
    depth_at, items, _ = layout(toks, text)
    bound: set[str] = set()
    target = None
    for start, kind in sorted(items.items()):
        end = _lhs_end(toks, depth_at, items, start, kind)
        if end is None:
            continue
        lhs = toks[start:end]
        name = _defined_name(lhs, depth_at[start:end]) if kind in ("top", "where", "let") else None
        if kind == "top":
            target = target or name
        elif name:
            bound.add(name)
        bound |= _binders(lhs)
    for k, t in enumerate(toks):
        if t.text == "\\" and t.kind is Kind.PUNCT:
            j = k + 1
            while j < len(toks) and not (toks[j].text == "->" and depth_at[j] == depth_at[k]):
                j += 1
            bound |= _binders(toks[k + 1:j])
        elif t.text == "<-" and t.kind is Kind.PUNCT:
            d, j = depth_at[k], k - 1
            while j >= 0:
                if depth_at[j] < d or (depth_at[j] == d and toks[j].text in (",", "|", ";")):
                    break
                if j in items:
                    j -= 1
                    break
                j -= 1
            bound |= _binders(toks[j + 1:k])
    if target:
        bound.discard(target)
    return target, bound, toks


def extract_called_bindings(implementation: str, target: str | None = None) -> list[str]:
    """Free identifiers, constructors and operators in first-occurrence order.

    Operators are reported in parenthesized form, e.g. ``(.)``.  The target,
    its parameters and every locally bound name are excluded.
    """
    inferred, bound, toks = analyze_implementation(implementation)
    target = target or inferred
    out: dict[str, None] = {}
    for t in toks:
        if t.kind not in (Kind.IDENT, Kind.OPERATOR, Kind.BACKTICK):
            continue
        name = _paren_name(t)
        if name == target or name in bound:
            continue
        out.setdefault(name, None)
    return list(out)


def infer_target(implementation: str) -> str | None:
    return analyze_implementation(implementation)[0]


# ------------------------------------------------------------------ tasks


def categorize_task(truth: TypeSignature) -> str:
    body, context = truth.body, truth.context
    while isinstance(body, Forall):
        context = context + body.context
        body = body.body
    if context:
        return "AdHoc"
    if free_type_variables(body):
        return "Parametric"
    return "Monomorphic"


@dataclass(frozen=True)
class Task:
    id: str
    category: str
    dependencies: tuple
    implementation: str
    target: str
    truth: TypeSignature
    variant: str = "regular"

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "dependencies": [{"kind": d.kind, "text": d.text} for d in self.dependencies],
            "implementation": self.implementation,
            "target": self.target,
            "truth": print_signature(self.truth),
            "variant": self.variant,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Task":
        expected = {"id", "category", "dependencies", "implementation", "target", "truth", "variant"}
        if set(obj) != expected:
            raise ValueError(f"task fields must be exactly {sorted(expected)}")
        return cls(
            id=obj["id"],
            category=obj["category"],
            dependencies=tuple(DependencyDecl(d["kind"], d["text"]) for d in obj["dependencies"]),
            implementation=obj["implementation"],
            target=obj["target"],
            truth=parse_signature(obj["truth"]),
            variant=obj["variant"],
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False)


def write_tasks(path, tasks) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in tasks:
            fh.write(t.dumps() + "\n")


def read_tasks(path) -> list[Task]:
    with open(path, encoding="utf-8") as fh:
        return [Task.from_json(json.loads(line)) for line in fh if line.strip()]


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind}({self.detail})" if self.detail else self.kind


def provided_names(deps) -> set[str]:
    names: set[str] = set()
    for d in deps:
        names.update(d.names)
    return names


def validate_task(task: Task) -> list[Violation]:
    """Structural checks; an empty list means the task is well formed."""
    out: list[Violation] = []
    if task.variant not in VARIANTS:
        out.append(Violation("InvalidVariant", str(task.variant)))
    if task.category not in CATEGORIES:
        out.append(Violation("InvalidCategory", str(task.category)))
    if not isinstance(task.truth, TypeSignature):
        out.append(Violation("ParseFailure", "truth"))
        return out
    if task.truth.binding != task.target:
        out.append(Violation("TargetMismatch", f"{task.truth.binding} != {task.target}"))
    deps = []
    for d in task.dependencies:
        try:
            deps.append(DependencyDecl(d.kind, d.text))
        except (ParseError, ValueError) as exc:
            out.append(Violation("ParseFailure", f"dependency {d.text.splitlines()[0]!r}: {exc}"))
    try:
        called = extract_called_bindings(task.implementation, task.target)
    except ParseError as exc:
        out.append(Violation("ParseFailure", f"implementation: {exc}"))
        called = []
    have = provided_names(deps)
    for name in called:
        if name not in have:
            out.append(Violation("MissingDependency", name))
    expected = categorize_task(task.truth)
    if task.category != expected:
        out.append(Violation("CategoryMismatch", f"{task.category} != {expected}"))
    return out


# ----------------------------------------------------------------- corpus


@dataclass(frozen=True)
class CorpusEntry:
    signature: str
    implementation: str
    line: int


def parse_corpus(text: str) -> list[CorpusEntry]:
    """Split a corpus into blocks: a signature line followed by its equations.

    Blocks are separated by blank lines; column-0 ``--`` lines are notes.
    """
    entries, block, start = [], [], 0
    lines = text.splitlines()
    for no, line in enumerate(lines + [""], 1):
        if line.startswith("--"):
            continue
        if line.strip():
            if not block:
                start = no
            block.append(line.rstrip())
            continue
        if block:
            if len(block) < 2:
                raise ParseError(f"block at line {start} has no equations", 0, text)
            entries.append(CorpusEntry(block[0], "\n".join(block[1:]), start))
            block = []
    return entries


def build_task(entry: CorpusEntry, db: SignatureDB, source: str) -> Task:
    truth = normalize_signature(parse_signature(entry.signature))
    called = extract_called_bindings(entry.implementation, truth.binding)
    deps = resolve_dependencies(
        called, db, classes=_context_classes(truth), exclude_methods=(truth.binding,)
    )
    return Task(
        id=f"{truth.binding}@{source}:{entry.line}",
        category=categorize_task(truth),
        dependencies=tuple(deps),
        implementation=entry.implementation,
        target=truth.binding,
        truth=truth,
    )


def build_tasks(corpus_text: str, db: SignatureDB, source: str = "corpus.hs") -> list[Task]:
    """Build every task, reporting all unresolved names at once."""
    tasks, missing = [], []
    for entry in parse_corpus(corpus_text):
        try:
            tasks.append(build_task(entry, db, source))
        except MissingDeps as exc:
            missing += [n for n in exc.names if n not in missing]
    if missing:
        raise MissingDeps(missing)
    return tasks


def category_split(tasks) -> dict[str, int]:
    counts = {c: 0 for c in CATEGORIES}
    for t in tasks:
        counts[t.category] += 1
    return counts


DATA_DIR = Path(__file__).parent / "data"


def bundled_corpus() -> Path:
    return DATA_DIR / "prelude.hs"


def bundled_db() -> Path:
    return DATA_DIR / "prelude.sigdb"
