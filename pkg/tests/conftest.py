"""Shared fixtures: bundled corpora and a once-per-run trained model."""
import sys
from pathlib import Path

import pytest

from dairector.artifacts import Artifacts, load_artifacts
from dairector.corpus import PlotGraph, TropeCorpus, load_trope_corpus, parse_plotto
from dairector.embedding import (
    EmbeddingModel,
    TrainingConfig,
    save_model,
    train_from_corpora,
)
from dairector.engine import load_name_map

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def excerpt_graph() -> PlotGraph:
    return parse_plotto((DATA_DIR / "plotto_excerpt.plotto").read_text())


@pytest.fixture(scope="session")
def three_node_graph() -> PlotGraph:
    return parse_plotto((DATA_DIR / "three_node.plotto").read_text())


@pytest.fixture(scope="session")
def tropes() -> TropeCorpus:
    return load_trope_corpus((DATA_DIR / "tropes.json").read_text())


@pytest.fixture(scope="session")
def names() -> dict[str, str]:
    return load_name_map((DATA_DIR / "names.json").read_text())


@pytest.fixture(scope="session")
def excerpt_model(excerpt_graph, tropes) -> EmbeddingModel:
    # trained once for the whole run; ~4 s at the default config
    return train_from_corpora(excerpt_graph, tropes, TrainingConfig(seed=1))


@pytest.fixture(scope="session")
def model_file(excerpt_model, tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("artifacts") / "excerpt.dvec"
    save_model(excerpt_model, path)
    return path


@pytest.fixture(scope="session")
def artifacts(excerpt_graph, tropes, excerpt_model, names) -> Artifacts:
    return Artifacts(graph=excerpt_graph, tropes=tropes,
                     model=excerpt_model, names=names)


@pytest.fixture(scope="session")
def disk_artifacts(model_file) -> Artifacts:
    return load_artifacts(
        DATA_DIR / "plotto_excerpt.plotto",
        DATA_DIR / "tropes.json",
        model_file,
        DATA_DIR / "names.json",
    )


def pytest_terminal_summary(terminalreporter):
    # reach the instance pytest actually ran, whatever name it loaded under
    module = sys.modules.get("test_acceptance") \
        or sys.modules.get("tests.test_acceptance")
    if module is None or not module.CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.CRITERION_LINES:
        terminalreporter.write_line(line)
