import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles / corpusgen helpers

from vgmine.dataset import load_dataset
from vgmine.lexicon import load_aliases, load_wordnet

FIXTURES = Path(__file__).parent / "fixtures"
WORDNET_DIR = FIXTURES / "wordnet"
ALIASES = FIXTURES / "aliases.txt"
FIG3 = FIXTURES / "fig3"
GOLDEN = FIXTURES / "golden"


@pytest.fixture(scope="session")
def lexicon():
    lex = load_wordnet(WORDNET_DIR)
    load_aliases(lex, ALIASES)
    return lex


@pytest.fixture(scope="session")
def fig3_dataset():
    dataset, report = load_dataset(FIG3 / "regions.json", FIG3 / "objects.json",
                                   FIG3 / "qa.json")
    assert report.clamped_boxes == 0 and report.dropped_triplets == 0
    return dataset


@pytest.fixture()
def run_cli(capsys):
    """Invoke the CLI in-process; returns (exit_code, stdout, stderr)."""
    from vgmine.cli import main

    def run(*argv):
        code = main([str(a) for a in argv])
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return run
