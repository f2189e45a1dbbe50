"""Renaming operators that strip natural-language names from a task.

Three operators each rename one namespace:

* ``rewrite_nl_types``: uppercase names (types, classes, data constructors)
  become ``T1, T2, ...``, numbered once for the whole task;
* ``rewrite_type_variables``: type variables become ``t1, t2, ...``,
  numbered independently inside every signature;
* ``rewrite_bindings``: the target becomes ``f1`` and every other global
  binding ``f2, f3, ...`` by first use in the implementation.

Every numbering is computed from a dependency order that none of the
operators can change, so the operators commute and are idempotent.
Failures raise RewriteError; chaining operators with ``compose`` stops at
the first failure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import reduce

from .corpus import (
    DependencyDecl,
    Task,
    layout,
    analyze_implementation,
    extract_called_bindings,
    provided_names,
)
from .errors import RewriteError
from .lexer import KEYWORDS, Kind, column_of, is_constructor_name, tokenize
from .types import parse_signature, print_signature

_UPPER = re.compile(r"[A-Z][A-Za-z0-9_']*\Z")
_LOWER = re.compile(r"[a-z_][A-Za-z0-9_']*\Z")


@dataclass(frozen=True)
class NamingScheme:
    """Fresh-name supply: a prefix plus counter, or an explicit dictionary."""

    type_prefix: str = "T"
    var_prefix: str = "t"
    binding_prefix: str = "f"
    type_names: tuple = ()
    var_names: tuple = ()
    binding_names: tuple = ()

    def __post_init__(self):
        checks = [
            (self.type_prefix, self.type_names, _UPPER),
            (self.var_prefix, self.var_names, _LOWER),
            (self.binding_prefix, self.binding_names, _LOWER),
        ]
        for prefix, names, pattern in checks:
            if not pattern.match(prefix + "1"):
                raise ValueError(f"invalid name prefix {prefix!r}")
            if len(set(names)) != len(names):
                raise ValueError("naming dictionary has duplicates")
            for n in names:
                if not pattern.match(n) or n in KEYWORDS or n == "forall":
                    raise ValueError(f"invalid dictionary name {n!r}")

    @staticmethod
    def _pick(names, prefix, n, operator):
        if names:
            if n > len(names):
                raise RewriteError(operator, f"naming dictionary exhausted after {len(names)} names")
            return names[n - 1]
        return f"{prefix}{n}"

    def type_name(self, n: int) -> str:
        return self._pick(self.type_names, self.type_prefix, n, "rewrite_nl_types")

    def var_name(self, n: int) -> str:
        return self._pick(self.var_names, self.var_prefix, n, "rewrite_type_variables")

    def binding_name(self, n: int) -> str:
        return self._pick(self.binding_names, self.binding_prefix, n, "rewrite_bindings")


DEFAULT_SCHEME = NamingScheme()


@dataclass
class RenamingPlan:
    nl_types: dict = field(default_factory=dict)
    type_vars: dict = field(default_factory=dict)  # (signature index, name) -> name
    bindings: dict = field(default_factory=dict)
    dependency_order: list = field(default_factory=list)  # original index per output position

    def to_json(self) -> dict:
        per_sig: dict = {}
        for (idx, name), new in sorted(self.type_vars.items(), key=lambda kv: kv[0][0]):
            per_sig.setdefault(str(idx), {})[name] = new
        return {
            "nl_types": dict(self.nl_types),
            "type_vars": per_sig,
            "bindings": dict(self.bindings),
            "dependency_order": list(self.dependency_order),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RenamingPlan":
        tv = {(int(i), k): v for i, m in obj["type_vars"].items() for k, v in m.items()}
        return cls(dict(obj["nl_types"]), tv, dict(obj["bindings"]), list(obj.get("dependency_order", [])))


# ------------------------------------------------------------ token regions


def _regions(tokens, kind: str) -> list:
    """Label each token as part of a binding name, a type, or term code."""
    out = []
    if kind == "term":
        return ["term"] * len(tokens)
    region, in_body = ("type", False) if kind == "class-definition" else ("binding", False)
    for t in tokens:
        if kind == "class-definition":
            if t.kind is Kind.KEYWORD and t.text == "where" and not in_body:
                out.append(None)
                region, in_body = "binding", True
                continue
            if in_body and t.kind is Kind.SPACE and "\n" in t.text:
                region = "binding"
        if t.kind is Kind.PUNCT and t.text == "::" and region == "binding":
            out.append(None)
            region = "type"
            continue
        out.append(region)
    return out


def _sig_tokens(text: str, kind: str):
    toks = tokenize(text)
    return toks, _regions(toks, kind)


def _is_upper_ident(t) -> bool:
    return t.kind is Kind.IDENT and is_constructor_name(t.text)


def _is_type_var(t) -> bool:
    return t.kind is Kind.IDENT and not is_constructor_name(t.text) and t.text != "forall"


# ------------------------------------------------------ canonical ordering


def _binding_order(task: Task) -> list[str]:
    """Target first, then body order, then unused declarations, then class methods."""
    order = [task.target]
    order += [n for n in extract_called_bindings(task.implementation, task.target) if not is_constructor_name(n)]
    for d in task.dependencies:
        if d.kind == "signature" and not is_constructor_name(d.parsed.binding):
            order.append(d.parsed.binding)
    for d in task.dependencies:
        if d.kind == "class-definition":
            order += d.parsed.method_names()
    return list(dict.fromkeys(order))


def canonical_dependency_order(task: Task) -> list[int]:
    """Indices of ``task.dependencies`` in the order the pure task lists them."""
    index = {n: i for i, n in enumerate(_binding_order(task))}

    def key(k):
        d = task.dependencies[k]
        if d.kind == "signature":
            if is_constructor_name(d.parsed.binding):
                return (1, k)
            return (0, index[d.parsed.binding])
        return (2, k)

    return sorted(range(len(task.dependencies)), key=key)


# ------------------------------------------------------------------ plans


def plan_nl_types(task: Task, scheme: NamingScheme = DEFAULT_SCHEME) -> dict:
    seen: dict = {}
    texts = [(task.dependencies[k].text) for k in canonical_dependency_order(task)]
    texts += [task.implementation, print_signature(task.truth)]
    for text in texts:
        for t in tokenize(text):
            if _is_upper_ident(t):
                seen.setdefault(t.text, None)
    return {name: scheme.type_name(i) for i, name in enumerate(seen, 1)}


def _scopes(task: Task):
    """(signature index, text, region kind); 0 is the truth."""
    yield 0, print_signature(task.truth), "signature"
    for pos, k in enumerate(canonical_dependency_order(task), 1):
        d = task.dependencies[k]
        yield pos, d.text, d.kind


def plan_type_variables(task: Task, scheme: NamingScheme = DEFAULT_SCHEME) -> dict:
    plan = {}
    for idx, text, kind in _scopes(task):
        toks, regions = _sig_tokens(text, kind)
        seen: dict = {}
        for t, r in zip(toks, regions):
            if r == "type" and _is_type_var(t):
                seen.setdefault(t.text, None)
        for i, name in enumerate(seen, 1):
            plan[(idx, name)] = scheme.var_name(i)
    return plan


def plan_bindings(task: Task, scheme: NamingScheme = DEFAULT_SCHEME) -> dict:
    have = provided_names(task.dependencies)
    for name in extract_called_bindings(task.implementation, task.target):
        if not is_constructor_name(name) and name not in have:
            raise RewriteError("rewrite_bindings", f"no dependency entry for {name}")
    plan = {name: scheme.binding_name(i) for i, name in enumerate(_binding_order(task), 1)}
    _, bound, toks = analyze_implementation(task.implementation)
    clashes = (set(plan.values()) & bound) - set(plan)
    if clashes:
        name = sorted(clashes)[0]
        span = next((t.span for t in toks if t.text == name), None)
        raise RewriteError("rewrite_bindings", f"new name {name} collides with a local binding", span)
    return plan


# ---------------------------------------------------------------- appliers


def _finish(text: str, toks, out: list, kind: str) -> str:
    """Join per-token output; term code is re-indented to keep its layout."""
    if kind != "term":
        return "".join(out)
    sig = [i for i, t in enumerate(toks) if not t.trivia]
    _, _, anchors = layout([toks[i] for i in sig], text)
    starts = {sig[k]: (None if a is None else sig[a]) for k, a in anchors.items()}
    res, new_col = "", {}
    for i, t in enumerate(toks):
        if i in starts:
            begin = res.rfind("\n") + 1
            if not res[begin:].strip():
                old = column_of(text, t.start)
                a = starts[i]
                want = old if a is None else new_col[a] + old - column_of(text, toks[a].start)
                res = res[:begin] + " " * want
        if not t.trivia:
            new_col[i] = len(res) - (res.rfind("\n") + 1)
        res += out[i]
    return res


def _rename_upper(text: str, mapping: dict, kind: str = "signature") -> str:
    toks = tokenize(text)
    out = [mapping[t.text] if _is_upper_ident(t) and t.text in mapping else t.text for t in toks]
    return _finish(text, toks, out, kind)


def _rename_vars(text: str, kind: str, mapping: dict) -> str:
    toks, regions = _sig_tokens(text, kind)
    out = [
        mapping[t.text] if r == "type" and _is_type_var(t) and t.text in mapping else t.text
        for t, r in zip(toks, regions)
    ]
    return _finish(text, toks, out, kind)


def _significant_neighbours(toks, i):
    j = i - 1
    while j >= 0 and toks[j].trivia:
        j -= 1
    k = i + 1
    while k < len(toks) and toks[k].trivia:
        k += 1
    return j, k


def _rename_bindings(text: str, kind: str, mapping: dict) -> str:
    toks, regions = _sig_tokens(text, kind)
    out = [t.text for t in toks]
    for i, (t, r) in enumerate(zip(toks, regions)):
        if r not in ("binding", "term"):
            continue
        if t.kind is Kind.IDENT and t.text in mapping:
            out[i] = mapping[t.text]
        elif t.kind is Kind.BACKTICK and t.name in mapping:
            out[i] = f"`{mapping[t.name]}`"
        elif t.kind is Kind.OPERATOR and f"({t.text})" in mapping:
            new = mapping[f"({t.text})"]
            j, k = _significant_neighbours(toks, i)
            if j >= 0 and k < len(toks) and toks[j].text == "(" and toks[k].text == ")":
                out[j:k + 1] = [new] + [""] * (k - j)
            else:
                out[i] = f"`{new}`"
    return _finish(text, toks, out, kind)


def _unrename_bindings(text: str, kind: str, inverse: dict) -> str:
    toks, regions = _sig_tokens(text, kind)
    out = [t.text for t in toks]
    for i, (t, r) in enumerate(zip(toks, regions)):
        if r not in ("binding", "term"):
            continue
        if t.kind is Kind.IDENT and t.text in inverse:
            out[i] = inverse[t.text]
        elif t.kind is Kind.BACKTICK and t.name in inverse:
            old = inverse[t.name]
            out[i] = old[1:-1] if old.startswith("(") else f"`{old}`"
    return _finish(text, toks, out, kind)


def _with_texts(task: Task, dep_texts, impl: str, truth_text: str, order=None, target=None) -> Task:
    deps = [DependencyDecl(d.kind, text) for d, text in zip(task.dependencies, dep_texts)]
    if order is not None:
        deps = [deps[k] for k in order]
    return replace(
        task,
        dependencies=tuple(deps),
        implementation=impl,
        truth=parse_signature(truth_text),
        target=target if target is not None else task.target,
    )


def _apply_nl(task: Task, mapping: dict) -> Task:
    return _with_texts(
        task,
        [_rename_upper(d.text, mapping) for d in task.dependencies],
        _rename_upper(task.implementation, mapping, "term"),
        _rename_upper(print_signature(task.truth), mapping),
    )


def _apply_type_vars(task: Task, plan: dict) -> Task:
    def scoped(idx):
        return {name: new for (i, name), new in plan.items() if i == idx}

    position = {k: pos for pos, k in enumerate(canonical_dependency_order(task), 1)}
    return _with_texts(
        task,
        [_rename_vars(d.text, d.kind, scoped(position[k])) for k, d in enumerate(task.dependencies)],
        task.implementation,
        _rename_vars(print_signature(task.truth), "signature", scoped(0)),
    )


def _apply_bindings(task: Task, mapping: dict) -> Task:
    order = canonical_dependency_order(task)
    return _with_texts(
        task,
        [_rename_bindings(d.text, d.kind, mapping) for d in task.dependencies],
        _rename_bindings(task.implementation, "term", mapping),
        _rename_bindings(print_signature(task.truth), "signature", mapping),
        order=order,
        target=mapping.get(task.target, task.target),
    )


# --------------------------------------------------------------- operators


def _guard(operator: str, fn, task: Task) -> Task:
    try:
        return fn()
    except RewriteError:
        raise
    except (SyntaxError, ValueError, KeyError) as exc:
        raise RewriteError(operator, f"{task.id}: {exc}") from exc


def rewrite_nl_types(task: Task, scheme: NamingScheme = DEFAULT_SCHEME) -> Task:
    return _guard("rewrite_nl_types", lambda: _apply_nl(task, plan_nl_types(task, scheme)), task)


def rewrite_type_variables(task: Task, scheme: NamingScheme = DEFAULT_SCHEME) -> Task:
    return _guard(
        "rewrite_type_variables", lambda: _apply_type_vars(task, plan_type_variables(task, scheme)), task
    )


def rewrite_bindings(task: Task, scheme: NamingScheme = DEFAULT_SCHEME) -> Task:
    return _guard("rewrite_bindings", lambda: _apply_bindings(task, plan_bindings(task, scheme)), task)


OPERATORS = (rewrite_nl_types, rewrite_type_variables, rewrite_bindings)


def compose(*operators):
    """Left-to-right chaining; the first RewriteError propagates."""
    return lambda task: reduce(lambda acc, op: op(acc), operators, task)


def alpha_rewrite_with_plan(task: Task, scheme: NamingScheme = DEFAULT_SCHEME) -> tuple[Task, RenamingPlan]:
    plan = RenamingPlan(
        nl_types=plan_nl_types(task, scheme),
        type_vars=plan_type_variables(task, scheme),
        bindings=plan_bindings(task, scheme),
        dependency_order=canonical_dependency_order(task),
    )
    pure = compose(*(lambda t, op=op: op(t, scheme) for op in OPERATORS))(task)
    return replace(pure, variant="pure"), plan


def alpha_rewrite(task: Task, scheme: NamingScheme = DEFAULT_SCHEME) -> Task:
    return alpha_rewrite_with_plan(task, scheme)[0]


def invert_rewrite(pure: Task, plan: RenamingPlan, variant: str = "regular") -> Task:
    """Undo ``alpha_rewrite``, restoring names and the original dependency order."""
    inv_b = {v: k for k, v in plan.bindings.items()}
    inv_t = {v: k for k, v in plan.nl_types.items()}
    inv_v: dict = {}
    for (idx, name), new in plan.type_vars.items():
        inv_v.setdefault(idx, {})[new] = name
    deps = []
    for pos, d in enumerate(pure.dependencies, 1):
        text = _unrename_bindings(d.text, d.kind, inv_b)
        text = _rename_upper(text, inv_t)
        text = _rename_vars(text, d.kind, inv_v.get(pos, {}))
        deps.append(DependencyDecl(d.kind, text))
    original = [None] * len(deps)
    for pos, k in enumerate(plan.dependency_order):
        original[k] = deps[pos]
    truth = _unrename_bindings(print_signature(pure.truth), "signature", inv_b)
    truth = _rename_vars(_rename_upper(truth, inv_t), "signature", inv_v.get(0, {}))
    impl = _rename_upper(_unrename_bindings(pure.implementation, "term", inv_b), inv_t, "term")
    return replace(
        pure,
        dependencies=tuple(original),
        implementation=impl,
        truth=parse_signature(truth),
        target=inv_b.get(pure.target, pure.target),
        variant=variant,
    )
