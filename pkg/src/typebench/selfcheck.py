"""Independent oracles and whole-corpus consistency checks.

The oracle decides alpha-equivalence by brute force: it tries every
bijection between the two variable sets and every ordering of the
constraints.  It shares nothing with the canonical-form checker except
the syntax tree, which makes it a useful cross-check on small types.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field

from .equivalence import alpha_equivalent, canonicalize
from .types import App, Arrow, Con, Constraint, ListOf, Tuple, TypeSignature, Unit, Var


# ------------------------------------------------------------------ oracle


def _vars(t, out):
    if isinstance(t, Var):
        if t.name not in out:
            out.append(t.name)
    elif isinstance(t, App):
        _vars(t.head, out)
        _vars(t.arg, out)
    elif isinstance(t, Arrow):
        _vars(t.domain, out)
        _vars(t.codomain, out)
    elif isinstance(t, ListOf):
        _vars(t.elem, out)
    elif isinstance(t, Tuple):
        for e in t.elems:
            _vars(e, out)
    elif not isinstance(t, (Con, Unit)):
        raise TypeError(f"oracle does not handle {type(t).__name__}")
    return out


def _sig_vars(sig: TypeSignature) -> list[str]:
    out: list[str] = []
    _vars(sig.body, out)
    for c in sig.context:
        for a in c.args:
            _vars(a, out)
    return out


def _rename(t, m):
    if isinstance(t, Var):
        return Var(m[t.name])
    if isinstance(t, App):
        return App(_rename(t.head, m), _rename(t.arg, m))
    if isinstance(t, Arrow):
        return Arrow(_rename(t.domain, m), _rename(t.codomain, m))
    if isinstance(t, ListOf):
        return ListOf(_rename(t.elem, m))
    if isinstance(t, Tuple):
        return Tuple(tuple(_rename(e, m) for e in t.elems))
    return t


def skeleton(t):
    """The type with every variable replaced by a hole; renaming preserves it."""
    if isinstance(t, Var):
        return "_"
    if isinstance(t, Con):
        return t.name
    if isinstance(t, Unit):
        return "()"
    if isinstance(t, App):
        return ("@", skeleton(t.head), skeleton(t.arg))
    if isinstance(t, Arrow):
        return ("->", skeleton(t.domain), skeleton(t.codomain))
    if isinstance(t, ListOf):
        return ("[]", skeleton(t.elem))
    if isinstance(t, Tuple):
        return ("(,)",) + tuple(skeleton(e) for e in t.elems)
    raise TypeError(type(t).__name__)


def sig_skeleton(sig: TypeSignature):
    ctx = sorted((c.class_name, tuple(repr(skeleton(a)) for a in c.args)) for c in sig.context)
    return (skeleton(sig.body), tuple(ctx))


def oracle_equivalent(s1: TypeSignature, s2: TypeSignature) -> bool:
    """Is there a variable bijection and a constraint ordering making s2 equal s1?"""
    v1, v2 = _sig_vars(s1), _sig_vars(s2)
    if len(v1) != len(v2) or len(s1.context) != len(s2.context):
        return False
    if sig_skeleton(s1) != sig_skeleton(s2):
        return False  # no renaming changes the skeleton
    for image in itertools.permutations(v1):
        m = dict(zip(v2, image))
        if _rename(s2.body, m) != s1.body:
            continue
        renamed = [Constraint(c.class_name, tuple(_rename(a, m) for a in c.args)) for c in s2.context]
        for order in itertools.permutations(renamed):
            if list(order) == list(s1.context):
                return True
    return False


# --------------------------------------------------------------- universes

ATOMS = (Var("a"), Var("b"), Var("c"), Con("Int"))


def types_up_to(depth: int, atoms=ATOMS, unary=("Maybe",)) -> list:
    """All types over ``atoms`` built with the unary constructors and arrows."""
    levels = [list(atoms)]
    allt = list(atoms)
    for _ in range(depth - 1):
        prev = list(allt)
        new = [App(Con(u), t) for u in unary for t in prev]
        new += [Arrow(x, y) for x in prev for y in prev]
        seen = set(allt)
        for t in new:
            if t not in seen:
                seen.add(t)
                allt.append(t)
        levels.append(new)
    return allt


def type_universe(depth: int = 3) -> list[TypeSignature]:
    return [TypeSignature("f", (), t) for t in types_up_to(depth)]


def constrained_universe(depth: int = 2, classes=("Eq", "Ord"), names=("a", "b", "c"), max_constraints=2):
    """Bodies of the given depth paired with every ordered context of up to two constraints."""
    atoms = [Constraint(k, (Var(v),)) for k in classes for v in names]
    contexts = [()]
    for n in range(1, max_constraints + 1):
        contexts += [tuple(p) for p in itertools.product(atoms, repeat=n)]
    return [TypeSignature("f", ctx, t) for t in types_up_to(depth) for ctx in contexts]


@dataclass
class OracleReport:
    signatures: int
    pairs: int
    oracle_calls: int
    equivalent_pairs: int
    disagreements: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.disagreements


def check_oracle_agreement(sigs, limit: int = 20) -> OracleReport:
    """Compare the checker with the oracle on every ordered pair of ``sigs``.

    Pairs with different skeletons cannot be related by any renaming, so
    there the oracle answer is False without search; the checker must
    then agree, which is verified through its canonical forms.
    """
    start = time.perf_counter()
    sigs = list(sigs)
    buckets: dict = {}
    for i, s in enumerate(sigs):
        buckets.setdefault(sig_skeleton(s), []).append(i)
    canon = [canonicalize(s, strict=False) for s in sigs]
    bad, calls, eq = [], 0, 0
    for members in buckets.values():
        for i in members:
            for j in members:
                calls += 1
                expected = oracle_equivalent(sigs[i], sigs[j])
                got = alpha_equivalent(sigs[i], sigs[j])
                eq += expected
                if expected != got and len(bad) < limit:
                    bad.append((sigs[i], sigs[j], expected, got))
    # Across skeletons the oracle says no; the checker's canonical forms must differ.
    by_canon: dict = {}
    for i, c in enumerate(canon):
        by_canon.setdefault(c, set()).add(sig_skeleton(sigs[i]))
    for c, skels in by_canon.items():
        if len(skels) > 1 and len(bad) < limit:
            bad.append(("canonical form shared across skeletons", c, False, True))
    return OracleReport(len(sigs), len(sigs) ** 2, calls, eq, bad, time.perf_counter() - start)


def random_type(rng: random.Random, depth: int, names=("a", "b", "c")):
    if depth <= 1 or rng.random() < 0.3:
        pick = rng.randrange(len(names) + 2)
        if pick < len(names):
            return Var(names[pick])
        return Con("Int") if pick == len(names) else Con("Bool")
    kind = rng.randrange(4)
    if kind == 0:
        return Arrow(random_type(rng, depth - 1, names), random_type(rng, depth - 1, names))
    if kind == 1:
        return App(Con("Maybe"), random_type(rng, depth - 1, names))
    if kind == 2:
        return ListOf(random_type(rng, depth - 1, names))
    return Tuple((random_type(rng, depth - 1, names), random_type(rng, depth - 1, names)))


def random_signature(rng: random.Random, depth: int = 3) -> TypeSignature:
    body = random_type(rng, depth)
    names = _vars(body, [])
    ctx = ()
    if names and rng.random() < 0.5:
        ctx = tuple(
            Constraint(rng.choice(["Eq", "Ord", "Show"]), (Var(rng.choice(names)),))
            for _ in range(rng.randrange(1, 3))
        )
    return TypeSignature("f", ctx, body)


def random_renaming(rng: random.Random, sig: TypeSignature) -> TypeSignature:
    names = _sig_vars(sig)
    fresh = rng.sample(["x", "y", "z", "u", "w", "p", "q"], len(names))
    m = dict(zip(names, fresh))
    ctx = [Constraint(c.class_name, tuple(_rename(a, m) for a in c.args)) for c in sig.context]
    rng.shuffle(ctx)
    return TypeSignature(sig.binding, tuple(ctx), _rename(sig.body, m))


@dataclass
class LawReport:
    triples: int
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def check_equivalence_laws(n: int = 10_000, seed: int = 0) -> LawReport:
    """Reflexivity, symmetry, transitivity and renaming invariance on random triples."""
    rng = random.Random(seed)
    failures = []
    for _ in range(n):
        a = random_signature(rng)
        b = random_renaming(rng, a) if rng.random() < 0.5 else random_signature(rng)
        c = random_renaming(rng, b) if rng.random() < 0.5 else random_signature(rng)
        ab, bc, ac = alpha_equivalent(a, b), alpha_equivalent(b, c), alpha_equivalent(a, c)
        if not alpha_equivalent(a, a):
            failures.append(("reflexivity", a))
        if ab != alpha_equivalent(b, a):
            failures.append(("symmetry", a, b))
        if ab and bc and not ac:
            failures.append(("transitivity", a, b, c))
        if not alpha_equivalent(a, random_renaming(rng, a)):
            failures.append(("renaming", a))
        if len(failures) > 20:
            break
    return LawReport(n, failures)


# ----------------------------------------------------------- rewrite algebra


@dataclass
class AlgebraReport:
    tasks: int
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def check_rewrite_algebra(tasks) -> AlgebraReport:
    """Operator orderings agree, the rewrite is idempotent, and inversion restores the task."""
    from .corpus import validate_task
    from .rewrite import OPERATORS, alpha_rewrite, alpha_rewrite_with_plan, compose, invert_rewrite

    tasks = list(tasks)
    failures = []
    for task in tasks:
        pure, plan = alpha_rewrite_with_plan(task)
        outs = {compose(*perm)(task).dumps() for perm in itertools.permutations(OPERATORS)}
        if len(outs) != 1:
            failures.append((task.id, "orderings differ"))
        if alpha_rewrite(pure).dumps() != pure.dumps():
            failures.append((task.id, "not idempotent"))
        if invert_rewrite(pure, plan, task.variant).dumps() != task.dumps():
            failures.append((task.id, "inversion differs"))
        if validate_task(pure):
            failures.append((task.id, f"pure task invalid: {validate_task(pure)}"))
    return AlgebraReport(len(tasks), failures)
