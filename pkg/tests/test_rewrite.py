import dataclasses
import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from typebench.corpus import SignatureDB, build_tasks, bundled_corpus, bundled_db, validate_task
from typebench.errors import RewriteError
from typebench.lexer import Kind, tokenize
from typebench.rewrite import (
    OPERATORS,
    NamingScheme,
    RenamingPlan,
    alpha_rewrite,
    alpha_rewrite_with_plan,
    compose,
    invert_rewrite,
    rewrite_bindings,
    rewrite_nl_types,
    rewrite_type_variables,
)
from typebench.types import print_signature

CORPUS = build_tasks(bundled_corpus().read_text(encoding="utf-8"), SignatureDB.load(bundled_db()), "prelude.hs")


def small_task(db, text):
    (task,) = build_tasks(text, db)
    return task


def dep_texts(task):
    return [d.text for d in task.dependencies]


class TestBreakExample:
    def test_dependencies(self, pure_break):
        assert dep_texts(pure_break) == [
            "f2 :: (t1 -> T1) -> [t1] -> ([t1], [t1])",
            "f3 :: T1 -> T1",
            "f4 :: (t1 -> t2) -> (t3 -> t1) -> t3 -> t2",
        ]

    def test_implementation(self, pure_break):
        assert " ".join(pure_break.implementation.split()) == "f1 p = f2 (f3 `f4` p)"

    def test_truth(self, pure_break):
        assert print_signature(pure_break.truth) == "f1 :: (t1 -> T1) -> [t1] -> ([t1], [t1])"
        assert pure_break.target == "f1"
        assert pure_break.variant == "pure"

    def test_still_valid(self, pure_break):
        assert validate_task(pure_break) == []


class TestSingleOperators:
    def test_nl_type(self, break_task):
        out = rewrite_nl_types(break_task)
        assert "not :: T1 -> T1" in dep_texts(out)

    def test_no_nl_types_is_identity(self, db):
        task = small_task(db, "ident :: a -> a\nident x = x\n")
        assert rewrite_nl_types(task) == task

    def test_nl_types_keep_variables(self, db):
        task = small_task(db, "g :: Either a Char -> Char\ng e = either (\\_ -> 'x') id e\n")
        out = rewrite_nl_types(task)
        assert print_signature(out.truth) == "g :: T1 a T2 -> T2"

    def test_type_variables_per_signature(self, break_task):
        out = rewrite_type_variables(break_task)
        assert "(.) :: (t1 -> t2) -> (t3 -> t1) -> t3 -> t2" in dep_texts(out)
        assert "not :: Bool -> Bool" in dep_texts(out)

    def test_map_variables(self, db):
        task = small_task(db, "m :: (a -> b) -> [a] -> [b]\nm f xs = map f xs\n")
        assert print_signature(rewrite_type_variables(task).truth) == "m :: (t1 -> t2) -> [t1] -> [t2]"

    def test_bindings(self, break_task):
        out = rewrite_bindings(break_task)
        assert out.implementation == "f1 p =  f2 (f3 `f4` p)"

    def test_nothing_called(self, db):
        task = small_task(db, "loop :: a\nloop = loop\n")
        out = rewrite_bindings(task)
        assert out.implementation == "f1 = f1"
        assert out.dependencies == ()

    def test_operator_becomes_backtick_infix(self, db):
        task = small_task(db, "add :: Int -> Int -> Int\nadd x y = x + y\n")
        out = rewrite_bindings(task)
        assert out.implementation == "f1 x y = x `f2` y"
        toks = [t for t in tokenize(out.implementation) if not t.trivia]
        assert (toks[5].kind, toks[5].text) == (Kind.BACKTICK, "`f2`")
        assert dep_texts(out)[0].startswith("f2 :: ")

    def test_section_collapses(self, db):
        task = small_task(db, "inc :: [Int] -> [Int]\ninc xs = map (+ 1) xs\n")
        out = rewrite_bindings(task)
        assert out.implementation == "f1 xs = f2 (`f3` 1) xs"

    def test_layout_survives_renaming(self, tasks):
        for task in tasks:
            if "\n" in task.implementation:
                pure = alpha_rewrite(task)
                assert validate_task(pure) == [], task.id


class TestComposition:
    def test_all_orderings_agree_on_example(self, break_task):
        outs = {compose(*p)(break_task).dumps() for p in itertools.permutations(OPERATORS)}
        assert len(outs) == 1

    def test_idempotent(self, pure_break):
        assert alpha_rewrite(pure_break).dumps() == pure_break.dumps()

    def test_inversion(self, break_task):
        pure, plan = alpha_rewrite_with_plan(break_task)
        assert invert_rewrite(pure, plan) == break_task

    def test_plan_json_round_trip(self, break_task):
        _, plan = alpha_rewrite_with_plan(break_task)
        assert RenamingPlan.from_json(plan.to_json()) == plan
        assert plan.bindings == {"break": "f1", "span": "f2", "not": "f3", "(.)": "f4"}
        assert plan.nl_types == {"Bool": "T1"}

    def test_plan_maps_are_contiguous(self, tasks):
        for task in tasks[:60]:
            _, plan = alpha_rewrite_with_plan(task)
            nums = sorted(int(v[1:]) for v in plan.nl_types.values())
            assert nums == list(range(1, len(nums) + 1))
            nums = sorted(int(v[1:]) for v in plan.bindings.values())
            assert nums == list(range(1, len(nums) + 1))
            per_sig = {}
            for (idx, _), new in plan.type_vars.items():
                per_sig.setdefault(idx, []).append(int(new[1:]))
            for nums in per_sig.values():
                assert sorted(nums) == list(range(1, len(nums) + 1))


class TestNaming:
    def test_custom_prefixes(self, break_task):
        pure = alpha_rewrite(break_task, NamingScheme(type_prefix="Ty", var_prefix="v", binding_prefix="g"))
        assert print_signature(pure.truth) == "g1 :: (v1 -> Ty1) -> [v1] -> ([v1], [v1])"

    def test_dictionary(self, break_task):
        scheme = NamingScheme(binding_names=("alpha", "beta", "gamma", "delta"))
        assert alpha_rewrite(break_task, scheme).target == "alpha"

    def test_exhausted_dictionary(self, break_task):
        with pytest.raises(RewriteError) as info:
            alpha_rewrite(break_task, NamingScheme(binding_names=("alpha",)))
        assert info.value.operator == "rewrite_bindings"

    @pytest.mark.parametrize("kwargs", [{"type_prefix": "t"}, {"var_prefix": "T"}, {"binding_names": ("in",)}])
    def test_invalid_scheme(self, kwargs):
        with pytest.raises(ValueError):
            NamingScheme(**kwargs)

    def test_local_clash(self, db):
        task = small_task(db, "h :: Int -> Int\nh f2 = negate f2\n")
        with pytest.raises(RewriteError):
            rewrite_bindings(task)

    def test_missing_dependency_entry(self, break_task):
        broken = dataclasses.replace(break_task, dependencies=break_task.dependencies[1:])
        with pytest.raises(RewriteError):
            rewrite_bindings(broken)

    def test_error_needs_reason(self):
        with pytest.raises(ValueError):
            RewriteError("rewrite_bindings", "")


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(CORPUS), st.permutations(range(3)))
def test_any_ordering_matches_alpha_rewrite(task, order):
    ops = [OPERATORS[i] for i in order]
    assert dataclasses.replace(compose(*ops)(task), variant="pure").dumps() == alpha_rewrite(task).dumps()


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(CORPUS))
def test_single_operators_are_idempotent(task):
    for op in OPERATORS:
        once = op(task)
        assert op(once).dumps() == once.dumps()


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(CORPUS))
def test_truth_preserved_up_to_renaming(task):
    from typebench.equivalence import canonicalize

    pure, plan = alpha_rewrite_with_plan(task)
    assert pure.category == task.category
    assert len(pure.dependencies) == len(task.dependencies)
    # renaming NL types back must give an alpha-equivalent truth
    back = invert_rewrite(pure, plan)
    assert canonicalize(back.truth, strict=False) == canonicalize(task.truth, strict=False)
