import pathlib

import pytest

from mvsl import apply_move_optimization, check_program, execute, lower_program, parse_source

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"


def lower_source(source, move_opt=True):
    ir = lower_program(check_program(parse_source(source)))
    return apply_move_optimization(ir) if move_opt else ir


def run_source(source, cow=True, move_opt=True, debug=False):
    """Full pipeline on a source string; returns (text, stats)."""
    return execute(lower_source(source, move_opt), cow=cow, debug=debug)


def corpus_files():
    files = sorted(CORPUS.glob("*.mvs"))
    assert files, f"no corpus programs under {CORPUS}"
    return files


def corpus_sources():
    return [(f.name, f.read_text()) for f in corpus_files()]


@pytest.fixture(scope="session")
def corpus():
    return corpus_sources()
