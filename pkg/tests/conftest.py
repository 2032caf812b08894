import json
import sys
from pathlib import Path

import pytest

from upcscan.chain import MockChainQuery
from upcscan.datastore import Datastore

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"
FAMILIES = FIXTURES / "families"
LISTINGS = FIXTURES / "listings"

sys.path.insert(0, str(Path(__file__).parent))


def family_dirs():
    return sorted(p for p in FAMILIES.iterdir() if p.is_dir())


def manifest(root=CORPUS):
    return json.loads((root / "manifest.json").read_text())


def listing(name):
    return (LISTINGS / f"{name}.pan").read_text()


@pytest.fixture(scope="session")
def corpus_store():
    return Datastore.open_dir(CORPUS)


@pytest.fixture(scope="session")
def corpus_chain():
    return MockChainQuery.from_file(CORPUS / "loupe.jsonl")


def open_family(name):
    root = FAMILIES / name
    store = Datastore.open_dir(root)
    loupe = root / "loupe.jsonl"
    return store, (MockChainQuery.from_file(loupe) if loupe.exists() else MockChainQuery())



def family_entries(name):
    return json.loads((FAMILIES / name / "manifest.json").read_text())


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance.RESULTS:
        terminalreporter.write_line(line)
