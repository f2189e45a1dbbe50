import pytest

from typebench.corpus import SignatureDB, build_tasks, bundled_corpus, bundled_db
from typebench.rewrite import alpha_rewrite


@pytest.fixture(scope="session")
def db():
    return SignatureDB.load(bundled_db())


@pytest.fixture(scope="session")
def tasks(db):
    return build_tasks(bundled_corpus().read_text(encoding="utf-8"), db, "prelude.hs")


@pytest.fixture(scope="session")
def break_task(tasks):
    return next(t for t in tasks if t.target == "break")


@pytest.fixture(scope="session")
def pure_break(break_task):
    return alpha_rewrite(break_task)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
