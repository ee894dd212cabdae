"""Story generation: plot trees, platform advancement, naming, tilts.

Everything here is a pure function over immutable corpus/model inputs
plus an explicitly passed RNG, so identical seeds replay identical shows.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .corpus import (
    DEFAULT_ALPHABET,
    PlotFragment,
    PlotGraph,
    SymbolAlphabet,
    TropeCorpus,
    plot_trope_subset,
)
from .embedding import EmbeddingModel, infer_vector, nearest_documents, tokenize


class EngineError(Exception):
    """Invalid story-engine request (bad root, no candidates, ...)."""


# ---------------------------------------------------------------------------
# Name maps
# ---------------------------------------------------------------------------

def validate_name_map(names: dict[str, str]) -> None:
    """Display names must be non-empty and not shared between symbols."""
    seen: dict[str, str] = {}
    for symbol, name in names.items():
        if not name:
            raise EngineError(f"empty display name for symbol {symbol!r}")
        if name in seen:
            raise EngineError(
                f"symbols {seen[name]!r} and {symbol!r} share display name {name!r}"
            )
        seen[name] = symbol


def load_name_map(source: IO[str] | str) -> dict[str, str]:
    text = source if isinstance(source, str) else source.read()
    try:
        names = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EngineError(f"malformed name map: {exc}") from exc
    if not isinstance(names, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in names.items()
    ):
        raise EngineError("name map must be a flat JSON object of strings")
    validate_name_map(names)
    return names


# ---------------------------------------------------------------------------
# Plot trees
# ---------------------------------------------------------------------------

@dataclass
class PlotTreeNode:
    fragment_id: str
    depth: int
    accumulated_subs: dict[str, str] = field(default_factory=dict)
    children: list[PlotTreeNode] = field(default_factory=list)


def _compose_subs(accumulated: dict[str, str],
                  edge_subs: dict[str, str]) -> dict[str, str]:
    """Chain accumulated renames through one more edge's renames.

    Within a map all pairs apply simultaneously; between maps they chain
    (the edge applies to the accumulated map's output). Identity entries
    are dropped, keeping the map canonical.
    """
    composed: dict[str, str] = {}
    for old in accumulated.keys() | edge_subs.keys():
        mid = accumulated.get(old, old)
        new = edge_subs.get(mid, mid)
        if new != old:
            composed[old] = new
    return composed


def generate_plot_tree(graph: PlotGraph, root: str | None, max_depth: int,
                       rng: random.Random) -> PlotTreeNode:
    """Expand every successor, breadth-complete, for max_depth levels.

    max_depth of 1 yields the bare root. A fragment already on the path
    from the root is never expanded again (cycle guard). root=None draws
    uniformly from fragments that have at least one successor.
    """
    if max_depth < 1:
        raise EngineError("max_depth must be >= 1")
    if root is None:
        non_terminals = graph.non_terminal_ids()
        if not non_terminals:
            raise EngineError("random root requested but every fragment is terminal")
        root = non_terminals[rng.randrange(len(non_terminals))]
    elif root not in graph.fragments:
        raise EngineError(f"unknown root fragment id: {root!r}")

    def expand(node: PlotTreeNode, on_path: set[str]) -> None:
        if node.depth + 1 >= max_depth:
            return
        for edge in graph.successors(node.fragment_id):
            if edge.to_id in on_path:
                continue
            child = PlotTreeNode(
                fragment_id=edge.to_id,
                depth=node.depth + 1,
                accumulated_subs=_compose_subs(
                    node.accumulated_subs, edge.substitution_map()
                ),
            )
            node.children.append(child)
            expand(child, on_path | {edge.to_id})

    tree = PlotTreeNode(fragment_id=root, depth=0)
    expand(tree, {root})
    return tree


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RenderResult:
    text: str
    unnamed_symbols: tuple[str, ...]


def render_fragment(fragment: PlotFragment, subs: dict[str, str],
                    names: dict[str, str],
                    alphabet: SymbolAlphabet = DEFAULT_ALPHABET) -> RenderResult:
    """Apply symbol renames, then display names, in one token-boundary pass.

    A symbol that ends up with no display name is emitted verbatim and
    reported in unnamed_symbols. Pronouns are never touched.
    """
    unnamed: list[str] = []

    def replace(match) -> str:
        symbol = subs.get(match.group(0), match.group(0))
        if symbol in names:
            return names[symbol]
        if symbol not in unnamed:
            unnamed.append(symbol)
        return symbol

    text = alphabet.substitute(fragment.text, replace)
    return RenderResult(text=text, unnamed_symbols=tuple(unnamed))


# ---------------------------------------------------------------------------
# Platform advancement
# ---------------------------------------------------------------------------

def _context_vector(model: EmbeddingModel, context_text: str,
                    context_doc_id: str | None) -> np.ndarray:
    """Trained doc vector when the context is a known document, else infer."""
    if context_doc_id is not None and model.has_doc(context_doc_id):
        return model.doc_vector(context_doc_id)
    return infer_vector(model, tokenize(context_text)).vector


def next_platform(model: EmbeddingModel, node: PlotTreeNode, context_text: str,
                  context_doc_id: str | None = None) -> PlotTreeNode | None:
    """The child semantically closest to the context; None at a leaf."""
    if not context_text or not context_text.strip():
        raise EngineError("empty context text")
    if not node.children:
        return None
    if len(node.children) == 1:
        return node.children[0]
    query = _context_vector(model, context_text, context_doc_id)
    missing = [c.fragment_id for c in node.children
               if not model.has_doc(f"frag:{c.fragment_id}")]
    if missing:
        raise EngineError(f"children missing from model: {missing!r}")
    ranked = nearest_documents(
        model, query, [f"frag:{c.fragment_id}" for c in node.children], n=1
    )
    chosen_id = ranked[0][0].removeprefix("frag:")
    return next(c for c in node.children if c.fragment_id == chosen_id)


# ---------------------------------------------------------------------------
# Tilts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FilterDecision:
    keep: bool
    shared_words: tuple[str, ...]


def redundancy_filter(platform_text: str, trope_name: str) -> FilterDecision:
    """Discard a trope whose name repeats any >3-letter platform word."""
    platform_words = {t for t in tokenize(platform_text) if len(t) > 3}
    name_words = {t for t in tokenize(trope_name) if len(t) > 3}
    shared = tuple(sorted(name_words & platform_words))
    return FilterDecision(keep=not shared, shared_words=shared)


@dataclass(frozen=True)
class TiltResult:
    chosen: str
    candidates: tuple[tuple[str, float], ...]
    filtered_out: tuple[tuple[str, tuple[str, ...]], ...]


def tilt_candidates(model: EmbeddingModel, corpus: TropeCorpus,
                    platform_text: str, prompt: str | None = None,
                    context_doc_id: str | None = None, n: int = 5,
                    ) -> tuple[tuple[tuple[str, float], ...],
                               tuple[tuple[str, tuple[str, ...]], ...]]:
    """Ranked (candidates, filtered_out) without the random choice.

    The redundancy filter always runs against the platform text, over the
    whole plot-trope pool before the top-n cut, so every returned
    candidate is playable. The query context is the prompt when one is
    given, otherwise the platform.
    """
    pool = sorted(plot_trope_subset(corpus))
    kept: list[str] = []
    filtered_out: list[tuple[str, tuple[str, ...]]] = []
    for name in pool:
        decision = redundancy_filter(platform_text, name)
        if decision.keep:
            kept.append(name)
        else:
            filtered_out.append((name, decision.shared_words))
    if not kept:
        raise EngineError("no tilt candidates: plot-trope pool empty after filtering")

    if prompt:
        query = infer_vector(model, tokenize(prompt)).vector
    else:
        query = _context_vector(model, platform_text, context_doc_id)
    ranked = nearest_documents(model, query, [f"trope:{t}" for t in kept], n=n)
    candidates = tuple((d.removeprefix("trope:"), dist) for d, dist in ranked)
    return candidates, tuple(filtered_out)


def select_tilt(model: EmbeddingModel, corpus: TropeCorpus, platform_text: str,
                rng: random.Random, prompt: str | None = None,
                context_doc_id: str | None = None, n: int = 5) -> TiltResult:
    """Top-n nearest plot tropes to the context, one chosen uniformly."""
    candidates, filtered_out = tilt_candidates(
        model, corpus, platform_text, prompt=prompt,
        context_doc_id=context_doc_id, n=n,
    )
    chosen = candidates[rng.randrange(len(candidates))][0]
    return TiltResult(chosen=chosen, candidates=candidates,
                      filtered_out=filtered_out)


# ---------------------------------------------------------------------------
# Whole stories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StoryBeat:
    fragment_id: str
    text: str
    unnamed_symbols: tuple[str, ...]


def generate_story(graph: PlotGraph, model: EmbeddingModel,
                   names: dict[str, str], rng: random.Random,
                   length_limit: int = 5,
                   alphabet: SymbolAlphabet = DEFAULT_ALPHABET) -> list[StoryBeat]:
    """Walk from a random root, always taking the best-matching successor.

    Each beat's rendered text is the context for choosing the next one.
    Stops at length_limit beats or when the cycle guard and terminals
    leave nowhere to go.
    """
    if length_limit < 1:
        raise EngineError("length_limit must be >= 1")
    tree = generate_plot_tree(graph, root=None, max_depth=length_limit, rng=rng)
    beats: list[StoryBeat] = []
    node: PlotTreeNode | None = tree
    while node is not None:
        fragment = graph.fragments[node.fragment_id]
        rendered = render_fragment(fragment, node.accumulated_subs, names, alphabet)
        beats.append(StoryBeat(
            fragment_id=node.fragment_id,
            text=rendered.text,
            unnamed_symbols=rendered.unnamed_symbols,
        ))
        if len(beats) >= length_limit:
            break
        node = next_platform(
            model, node, rendered.text,
            context_doc_id=f"frag:{node.fragment_id}",
        )
    return beats
