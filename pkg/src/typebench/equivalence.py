"""Alpha-equivalence, one-way subsumption, and proof-module synthesis."""

from __future__ import annotations

import itertools
import string
import warnings
from dataclasses import dataclass

from .errors import ArityConflict, DanglingConstraintVariable, PlaceholderUnfillable
from .types import (
    App,
    Arrow,
    Con,
    Constraint,
    Forall,
    ListOf,
    Tuple,
    TypeExpr,
    TypeSignature,
    Unit,
    Var,
    constructors,
    expand_context,
    expand_string,
    free_type_variables,
    print_qualtype,
    signature_variables,
)

# Names the proof template already defines.
PREDEFINED = frozenset(["Int_", "Bool_", "Char_", "Float_", "Double_", "Natural"])


@dataclass(frozen=True)
class CanonicalForm:
    context: tuple
    body: TypeExpr


def _strip_top_foralls(context: tuple, body: TypeExpr) -> tuple[tuple, TypeExpr]:
    # A top-level forall is the same as implicit quantification.
    while isinstance(body, Forall):
        context = context + body.context
        body = body.body
    return context, body


def _rename(t: TypeExpr, env: dict, depth: int) -> TypeExpr:
    if isinstance(t, Var):
        return Var(env.get(t.name, t.name))
    if isinstance(t, App):
        return App(_rename(t.head, env, depth), _rename(t.arg, env, depth))
    if isinstance(t, Arrow):
        return Arrow(_rename(t.domain, env, depth), _rename(t.codomain, env, depth))
    if isinstance(t, ListOf):
        return ListOf(_rename(t.elem, env, depth))
    if isinstance(t, Tuple):
        return Tuple(tuple(_rename(e, env, depth) for e in t.elems))
    if isinstance(t, Forall):
        inner = dict(env)
        binders = []
        for j, b in enumerate(t.binders, 1):
            inner[b] = f"q{depth + 1}_{j}"
            binders.append(inner[b])
        ctx = tuple(
            Constraint(c.class_name, tuple(_rename(a, inner, depth + 1) for a in c.args))
            for c in t.context
        )
        return Forall(tuple(binders), _sort_context(ctx), _rename(t.body, inner, depth + 1))
    return t


def _name_key(name: str) -> tuple:
    if name[0] == "v" and name[1:].isdigit():
        return (0, int(name[1:]))
    if name[0] == "q" and "_" in name:
        d, j = name[1:].split("_")
        if d.isdigit() and j.isdigit():
            return (1, int(d), int(j))
    return (2, name)


def type_key(t: TypeExpr) -> tuple:
    """Total order on types used to sort constraint contexts."""
    if isinstance(t, Var):
        return (0, _name_key(t.name))
    if isinstance(t, Con):
        return (1, t.name)
    if isinstance(t, App):
        return (2, type_key(t.head), type_key(t.arg))
    if isinstance(t, Arrow):
        return (3, type_key(t.domain), type_key(t.codomain))
    if isinstance(t, ListOf):
        return (4, type_key(t.elem))
    if isinstance(t, Tuple):
        return (5, tuple(type_key(e) for e in t.elems))
    if isinstance(t, Unit):
        return (6,)
    if isinstance(t, Forall):
        return (7, tuple(_name_key(b) for b in t.binders),
                tuple(constraint_key(c) for c in t.context), type_key(t.body))
    raise TypeError(f"not a type: {t!r}")


def constraint_key(c: Constraint) -> tuple:
    return (c.class_name, tuple(type_key(a) for a in c.args))


def _sort_context(context) -> tuple:
    return tuple(sorted(context, key=constraint_key))


def canonicalize(sig: TypeSignature, strict: bool = True) -> CanonicalForm:
    """Rename variables positionally (v1, v2, ... by first occurrence).

    Top-level variables are numbered by first occurrence in the body;
    variables bound by a nested forall get depth-indexed names so the
    result does not depend on how many outer variables exist.  Contexts
    are sorted, so they compare as multisets.

    A constraint on a variable that never occurs in the body raises
    DanglingConstraintVariable when ``strict``; otherwise such variables
    are numbered after the body variables, picking the numbering that
    gives the smallest sorted context.
    """
    context, body = _strip_top_foralls(expand_context(sig.context), expand_string(sig.body))
    body_vars = free_type_variables(body)
    ctx_vars = []
    for c in context:
        for a in c.args:
            ctx_vars += free_type_variables(a)
    dangling = [v for v in dict.fromkeys(ctx_vars) if v not in body_vars]
    if dangling and strict:
        raise DanglingConstraintVariable(
            f"constraint variable(s) {', '.join(dangling)} do not occur in the type"
        )
    env = {v: f"v{i}" for i, v in enumerate(body_vars, 1)}
    new_body = _rename(body, env, 0)

    def ctx_under(env):
        return _sort_context(
            Constraint(c.class_name, tuple(_rename(a, env, 0) for a in c.args)) for c in context
        )

    if not dangling:
        return CanonicalForm(ctx_under(env), new_body)
    best = None
    n = len(body_vars)
    for perm in itertools.permutations(dangling):
        trial = dict(env)
        trial.update({v: f"v{n + i}" for i, v in enumerate(perm, 1)})
        ctx = ctx_under(trial)
        key = tuple(constraint_key(c) for c in ctx)
        if best is None or key < best[0]:
            best = (key, ctx)
    return CanonicalForm(best[1], new_body)


def alpha_equivalent(truth: TypeSignature, answer: TypeSignature) -> bool:
    return canonicalize(truth, strict=False) == canonicalize(answer, strict=False)


# ------------------------------------------------------------ subsumption


def _has_bound(t: TypeExpr) -> bool:
    return any(v.startswith("q") for v in _all_var_names(t))


def _all_var_names(t: TypeExpr):
    if isinstance(t, Var):
        yield t.name
    elif isinstance(t, App):
        yield from _all_var_names(t.head)
        yield from _all_var_names(t.arg)
    elif isinstance(t, Arrow):
        yield from _all_var_names(t.domain)
        yield from _all_var_names(t.codomain)
    elif isinstance(t, ListOf):
        yield from _all_var_names(t.elem)
    elif isinstance(t, Tuple):
        for e in t.elems:
            yield from _all_var_names(e)
    elif isinstance(t, Forall):
        for c in t.context:
            for a in c.args:
                yield from _all_var_names(a)
        yield from _all_var_names(t.body)


def _match(pat: TypeExpr, target: TypeExpr, theta: dict) -> bool:
    if isinstance(pat, Var) and pat.name.startswith("v"):
        if pat.name in theta:
            return theta[pat.name] == target
        if _has_bound(target):
            return False
        theta[pat.name] = target
        return True
    if type(pat) is not type(target):
        return False
    if isinstance(pat, (Var, Con)):
        return pat == target
    if isinstance(pat, Unit):
        return True
    if isinstance(pat, App):
        return _match(pat.head, target.head, theta) and _match(pat.arg, target.arg, theta)
    if isinstance(pat, Arrow):
        return _match(pat.domain, target.domain, theta) and _match(pat.codomain, target.codomain, theta)
    if isinstance(pat, ListOf):
        return _match(pat.elem, target.elem, theta)
    if isinstance(pat, Tuple):
        return len(pat.elems) == len(target.elems) and all(
            _match(p, t, theta) for p, t in zip(pat.elems, target.elems)
        )
    if isinstance(pat, Forall):
        if pat.binders != target.binders or len(pat.context) != len(target.context):
            return False
        for pc, tc in zip(pat.context, target.context):
            if pc.class_name != tc.class_name or len(pc.args) != len(tc.args):
                return False
            if not all(_match(p, t, theta) for p, t in zip(pc.args, tc.args)):
                return False
        return _match(pat.body, target.body, theta)
    return False


def _substitute(t: TypeExpr, theta: dict) -> TypeExpr:
    if isinstance(t, Var):
        return theta.get(t.name, t)
    if isinstance(t, App):
        return App(_substitute(t.head, theta), _substitute(t.arg, theta))
    if isinstance(t, Arrow):
        return Arrow(_substitute(t.domain, theta), _substitute(t.codomain, theta))
    if isinstance(t, ListOf):
        return ListOf(_substitute(t.elem, theta))
    if isinstance(t, Tuple):
        return Tuple(tuple(_substitute(e, theta) for e in t.elems))
    if isinstance(t, Forall):
        ctx = tuple(Constraint(c.class_name, tuple(_substitute(a, theta) for a in c.args)) for c in t.context)
        return Forall(t.binders, ctx, _substitute(t.body, theta))
    return t


def subsumes(general: TypeSignature, specific: TypeSignature) -> bool:
    """One-way matching: can ``general`` be instantiated to ``specific``?

    The variables of ``specific`` are rigid.  After substitution every
    constraint of ``general`` must either appear in ``specific``'s
    context or mention no type variables at all (a ground constraint we
    assume an instance exists for).
    """
    g = canonicalize(general, strict=False)
    s = canonicalize(specific, strict=False)
    rigid = {v: f"s{v[1:]}" for v in signature_variables(TypeSignature("_", s.context, s.body))}
    s_body = _substitute(s.body, {k: Var(v) for k, v in rigid.items()})
    s_ctx = {
        Constraint(c.class_name, tuple(_substitute(a, {k: Var(v) for k, v in rigid.items()}) for a in c.args))
        for c in s.context
    }
    theta: dict = {}
    if not _match(g.body, s_body, theta):
        return False
    for c in g.context:
        args = []
        for a in c.args:
            for v in free_type_variables(a):
                theta.setdefault(v, Unit())
            args.append(_substitute(a, theta))
        inst = Constraint(c.class_name, tuple(args))
        if not any(True for a in args for _ in free_type_variables(a)):
            continue
        if inst not in s_ctx:
            return False
    return True


# ------------------------------------------------- definitions and proofs


@dataclass(frozen=True)
class TypeDefn:
    kind: str  # "empty-class" | "empty-data" | "constructor-data"
    name: str
    arity: int

    def __post_init__(self):
        if self.kind == "constructor-data" and self.arity < 1:
            raise ValueError("constructor-data needs arity >= 1")

    def render(self) -> str:
        if self.kind == "empty-class":
            return f"class {self.name} a"
        if self.kind == "empty-data":
            return f"data {self.name} = {self.name}"
        params = " ".join(f"t{i}" for i in range(1, self.arity + 1))
        return f"data {self.name} {params}"


def _collect_arities(t: TypeExpr, out: dict, partial: bool, parent_is_app_head: bool = False):
    """Depth-first walk recording, per constructor, (arity, partial?) pairs."""
    if isinstance(t, App):
        if not parent_is_app_head:
            cur, arity = t, 0
            while isinstance(cur, App):
                arity += 1
                cur = cur.head
            if isinstance(cur, Con):
                out.setdefault(cur.name, []).append((arity, partial))
            head_is_var = isinstance(cur, Var)
            # arguments along the spine
            node = t
            while isinstance(node, App):
                _collect_arities(node.arg, out, partial or head_is_var)
                node = node.head
            if not isinstance(cur, Con):
                _collect_arities(cur, out, partial)
        return
    if isinstance(t, Con):
        out.setdefault(t.name, []).append((0, partial))
    elif isinstance(t, Arrow):
        _collect_arities(t.domain, out, partial)
        _collect_arities(t.codomain, out, partial)
    elif isinstance(t, ListOf):
        _collect_arities(t.elem, out, partial)
    elif isinstance(t, Tuple):
        for e in t.elems:
            _collect_arities(e, out, partial)
    elif isinstance(t, Forall):
        for c in t.context:
            for a in c.args:
                _collect_arities(a, out, True)
        _collect_arities(t.body, out, partial)


def _class_names(context, body) -> list[str]:
    names = [c.class_name for c in context]

    def go(t):
        if isinstance(t, Forall):
            names.extend(c.class_name for c in t.context)
            go(t.body)
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

    go(body)
    return list(dict.fromkeys(names))


def synthesize_definitions(sig: TypeSignature, exclude=PREDEFINED) -> list[TypeDefn]:
    """Collect type constructors with their applied arity.

    Classes in the context become one-parameter empty classes.  A
    constructor applied to k arguments becomes ``data N t1 .. tk`` using
    the largest k seen; an unapplied one becomes ``data N = N``.
    Inconsistent arities (other than partial application in a context or
    under a higher-kinded variable) are reported with an ArityConflict
    warning.
    """
    defns = [TypeDefn("empty-class", n, 1) for n in _class_names(sig.context, sig.body) if n not in exclude]
    arities: dict = {}
    for c in sig.context:
        for a in c.args:
            _collect_arities(a, arities, True)
    _collect_arities(sig.body, arities, False)
    for name, seen in arities.items():
        if name in exclude:
            continue
        top = max(a for a, _ in seen)
        full = {a for a, p in seen if not p}
        if len(full) > 1 or any(a > top for a, p in seen):
            warnings.warn(
                f"constructor {name} used with arities {sorted(full)}; using {top}",
                ArityConflict,
                stacklevel=2,
            )
        if top > 0:
            defns.append(TypeDefn("constructor-data", name, top))
        else:
            defns.append(TypeDefn("empty-data", name, 0))
    return defns


def merge_definitions(*groups) -> list[TypeDefn]:
    merged: dict = {}
    for group in groups:
        for d in group:
            key = ("class" if d.kind == "empty-class" else "data", d.name)
            old = merged.get(key)
            if old is None or d.arity > old.arity:
                merged[key] = d
    return list(merged.values())


PROOF_TEMPLATE = string.Template(
    """{-# LANGUAGE TypeOperators #-}
{-# LANGUAGE ImpredicativeTypes #-}
module Check where

import Data.Type.Equality

-- Some predefined types synonyms to avoid name clashes
type Int_ = Int
type Bool_ = Bool
type Char_ = Char
type Float_ = Float
type Double_ = Double
data Natural = Natural

$new_types

type TRUTH $truth_vars = $truth_signature
type ANSWER $answer_vars = $answer_signature

proof :: TRUTH $truth_vars :~: ANSWER $truth_vars
proof = Refl
"""
)


def emit_proof_module(truth: TypeSignature, answer: TypeSignature, defns=None) -> str:
    """Fill the type-equality proof template for one truth/answer pair.

    Filling is total for well-formed signatures: a pair that is not
    alpha-equivalent still yields a module, which an external compiler
    would reject.  PlaceholderUnfillable is raised only when ``defns``
    misses a name the signatures reference.
    """
    if defns is None:
        defns = merge_definitions(synthesize_definitions(truth), synthesize_definitions(answer))
    defined = {d.name for d in defns} | PREDEFINED
    for sig in (truth, answer):
        needed = set(constructors(sig.body)) | set(_class_names(sig.context, sig.body))
        for c in sig.context:
            for a in c.args:
                needed |= set(constructors(a))
        missing = sorted(needed - defined)
        if missing:
            raise PlaceholderUnfillable(f"no definition for {', '.join(missing)}")
    return PROOF_TEMPLATE.substitute(
        new_types="\n".join(d.render() for d in defns),
        truth_vars=" ".join(signature_variables(truth)),
        answer_vars=" ".join(signature_variables(answer)),
        truth_signature=print_qualtype(truth.context, truth.body),
        answer_signature=print_qualtype(answer.context, answer.body),
    )
