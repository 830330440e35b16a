from collections import defaultdict
from importlib import resources
from pathlib import Path

import pytest

from codemix_sentiment.corpus import load_split
from codemix_sentiment.embeddings import UnifiedLookup, train_codemixed
from codemix_sentiment.preprocess import load_emoji_lexicon, preprocess_split

TOY_DIR = Path(str(resources.files("codemix_sentiment").joinpath("data/toy")))

_criteria: dict[int, dict] = defaultdict(lambda: {"title": "", "outcomes": []})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, title = marker.args
        entry = _criteria[number]
        entry["title"] = title
        entry["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        outcomes = entry["outcomes"]
        if "failed" in outcomes:
            status = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['title']} ({len(outcomes)} checks)")


@pytest.fixture(scope="session")
def toy_dir():
    return TOY_DIR


@pytest.fixture(scope="session")
def emoji_lexicon():
    return load_emoji_lexicon()


@pytest.fixture(scope="session")
def toy_splits(emoji_lexicon):
    return {name: preprocess_split(load_split(TOY_DIR / f"{name}.tsv", name), emoji_lexicon)
            for name in ("train", "validation", "test")}


@pytest.fixture(scope="session")
def toy_lookup(toy_splits):
    table = train_codemixed([s.tokens for s in toy_splits["train"]], dim=16, epochs=20, seed=3)
    return UnifiedLookup(None, table)
