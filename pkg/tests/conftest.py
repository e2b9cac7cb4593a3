from __future__ import annotations

from pathlib import Path

import pytest

from lexiswitch.ann_index import build_index
from lexiswitch.embedding import HashingEmbedder
from lexiswitch.lexicon import entry_text_for_embedding, load_lexicon

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

_criteria: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(code, title): acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    code, title = marker
    if report.when == "call" or report.outcome != "passed":
        status = "PASS" if report.outcome == "passed" else "FAIL"
        # a failure in any phase sticks
        if _criteria.get(code, ("", "PASS"))[1] != "FAIL":
            _criteria[code] = (title, status)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        report.criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for code in sorted(_criteria, key=lambda c: int(c[2:])):
        title, status = _criteria[code]
        terminalreporter.write_line(f"{code} {status}  {title}")


@pytest.fixture(scope="session")
def embedder():
    return HashingEmbedder(256)


@pytest.fixture(scope="session")
def lexicon198():
    return load_lexicon(FIXTURES / "lexicon_198.jsonl")


@pytest.fixture(scope="session")
def lexicon3():
    return load_lexicon(FIXTURES / "lexicon_3.jsonl")


def index_for(lexicon, embedder):
    vectors = embedder.embed([entry_text_for_embedding(e) for e in lexicon])
    return build_index(list(zip(lexicon.ids, vectors)), lexicon_checksum=lexicon.checksum)


@pytest.fixture(scope="session")
def index198(lexicon198, embedder):
    return index_for(lexicon198, embedder)


@pytest.fixture(scope="session")
def index3(lexicon3, embedder):
    return index_for(lexicon3, embedder)
