"""Loading and cross-validating the corpus/model/name-map bundle."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .corpus import PlotGraph, TropeCorpus, load_trope_corpus, parse_plotto
from .embedding import EmbeddingModel, load_model
from .engine import load_name_map

DEFAULT_NAMES = {"A": "Alfred", "B": "Beatrice", "AUX": "Aunt Augusta"}


@dataclass(frozen=True)
class Artifacts:
    graph: PlotGraph
    tropes: TropeCorpus
    model: EmbeddingModel
    names: dict[str, str]

    @property
    def plot_corpus_hash(self) -> str:
        return self.graph.content_hash()

    @property
    def trope_corpus_hash(self) -> str:
        return self.tropes.content_hash()


def load_artifacts(plot_corpus: str | Path, trope_corpus: str | Path,
                   model_path: str | Path,
                   names_path: str | Path | None = None) -> Artifacts:
    """Load everything a show needs; the model must match both corpora.

    Raises ModelCorpusMismatch when the model file was trained on
    different corpus content than the files supplied here.
    """
    graph = parse_plotto(Path(plot_corpus).read_text(encoding="utf-8"))
    tropes = load_trope_corpus(Path(trope_corpus).read_text(encoding="utf-8"))
    model = load_model(
        str(model_path),
        expected_plot_hash=graph.content_hash(),
        expected_trope_hash=tropes.content_hash(),
    )
    if names_path is None:
        names = dict(DEFAULT_NAMES)
    else:
        names = load_name_map(Path(names_path).read_text(encoding="utf-8"))
    return Artifacts(graph=graph, tropes=tropes, model=model, names=names)
