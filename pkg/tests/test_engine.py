"""Tree expansion, rendering, filtering and tilt selection."""
import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dairector.corpus import parse_plotto
from dairector.embedding import EmbeddingModel, cosine_distance
from dairector.engine import (
    EngineError,
    generate_plot_tree,
    generate_story,
    load_name_map,
    next_platform,
    redundancy_filter,
    render_fragment,
    select_tilt,
    tilt_candidates,
    validate_name_map,
)

TESLA = ("Albert, an inefficient, futile sort of person, comes to believe "
         "that he is the reincarnation of Nicola Tesla")


# ---------------------------------------------------------------------------
# plot tree
# ---------------------------------------------------------------------------

def _oracle_tree(graph, root, max_depth):
    """Independent expansion: (id, depth, subs, [children]) tuples."""
    def compose(acc, edge_map):
        out = {}
        for old in set(acc) | set(edge_map):
            mid = acc.get(old, old)
            new = edge_map.get(mid, mid)
            if new != old:
                out[old] = new
        return out

    def build(fid, depth, subs, on_path):
        children = []
        if depth + 1 < max_depth:
            for edge in graph.successors(fid):
                if edge.to_id in on_path:
                    continue
                children.append(build(
                    edge.to_id, depth + 1,
                    compose(subs, edge.substitution_map()),
                    on_path | {edge.to_id},
                ))
        return (fid, depth, subs, children)

    return build(root, 0, {}, {root})


def _as_tuple(node):
    return (node.fragment_id, node.depth, node.accumulated_subs,
            [_as_tuple(c) for c in node.children])


def test_tree_matches_oracle_on_excerpt(excerpt_graph):
    rng = random.Random(0)
    for root in ("101", "200", "301", "501", "601", "746"):
        for depth in (1, 2, 4, 6):
            tree = generate_plot_tree(excerpt_graph, root, depth, rng)
            assert _as_tuple(tree) == _oracle_tree(excerpt_graph, root, depth)


def test_tree_depth_one_is_bare_root(three_node_graph):
    tree = generate_plot_tree(three_node_graph, "746", 1, random.Random(0))
    assert tree.fragment_id == "746"
    assert tree.children == []


def test_tree_cycle_guard(three_node_graph):
    # 746 -> 1441a -> 746 must be pruned at the second visit
    tree = generate_plot_tree(three_node_graph, "746", 6, random.Random(0))
    branch = next(c for c in tree.children if c.fragment_id == "1441a")
    assert [c.fragment_id for c in branch.children] == []


def test_tree_substitutions_compose_along_path(three_node_graph):
    tree = generate_plot_tree(three_node_graph, "1441a", 3, random.Random(0))
    # 1441a -> 746 renames B to A; 746 -> 1373 then renames A to B
    child_746 = next(c for c in tree.children if c.fragment_id == "746")
    assert child_746.accumulated_subs == {"B": "A"}
    grandchild = next(c for c in child_746.children
                      if c.fragment_id == "1373")
    # B -> A -> B collapses to identity; A -> B survives
    assert grandchild.accumulated_subs == {"A": "B"}


def test_tree_random_root_uniform(excerpt_graph):
    rng = random.Random(99)
    non_terminals = excerpt_graph.non_terminal_ids()
    draws = Counter(
        generate_plot_tree(excerpt_graph, None, 1, rng).fragment_id
        for _ in range(10_000)
    )
    assert set(draws) <= set(non_terminals)
    expected = 10_000 / len(non_terminals)
    sigma = (10_000 * (1 / len(non_terminals))
             * (1 - 1 / len(non_terminals))) ** 0.5
    for fid in non_terminals:
        assert abs(draws[fid] - expected) < 5 * sigma


def test_tree_rejects_bad_args(excerpt_graph):
    with pytest.raises(EngineError):
        generate_plot_tree(excerpt_graph, "101", 0, random.Random(0))
    with pytest.raises(EngineError):
        generate_plot_tree(excerpt_graph, "nope", 3, random.Random(0))


_sub_maps = st.dictionaries(
    st.sampled_from(["A", "B", "AUX", "FA"]),
    st.sampled_from(["A", "B", "AUX", "FA"]),
    max_size=4,
)


@settings(max_examples=200, deadline=None)
@given(m1=_sub_maps, m2=_sub_maps, m3=_sub_maps)
def test_sequential_edges_equal_composed_map(m1, m2, m3):
    """Applying edge maps one at a time matches the accumulated map."""
    def lookup(maps, symbol):
        for m in maps:
            symbol = m.get(symbol, symbol)
        return symbol

    def compose(acc, edge):
        out = {}
        for old in set(acc) | set(edge):
            mid = acc.get(old, old)
            new = edge.get(mid, mid)
            if new != old:
                out[old] = new
        return out

    acc = {}
    for m in (m1, m2, m3):
        acc = compose(acc, m)
    for symbol in ("A", "B", "AUX", "FA", "GOV"):
        assert acc.get(symbol, symbol) == lookup((m1, m2, m3), symbol)


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def test_render_applies_subs_then_names(three_node_graph):
    frag = three_node_graph.fragments["1441a"]
    result = render_fragment(frag, {"A": "B"}, {"B": "Lana"})
    assert result.text.startswith("Lana seeks to discover")
    assert result.unnamed_symbols == ()


def test_render_reports_unnamed_symbols(three_node_graph):
    frag = three_node_graph.fragments["1441a"]
    result = render_fragment(frag, {}, {})
    assert result.text == frag.text
    assert result.unnamed_symbols == ("A",)


def test_render_swap_is_simultaneous():
    graph = parse_plotto("FRAG s1: A accuses B while B shields A\n")
    result = render_fragment(graph.fragments["s1"], {"A": "B", "B": "A"},
                             {"A": "Ann", "B": "Bob"})
    assert result.text == "Bob accuses Ann while Ann shields Bob"


def test_render_leaves_prose_alone():
    graph = parse_plotto("FRAG s1: A warns the crew about an ambush\n")
    result = render_fragment(graph.fragments["s1"], {}, {"A": "Ann"})
    assert result.text == "Ann warns the crew about an ambush"


# ---------------------------------------------------------------------------
# name maps
# ---------------------------------------------------------------------------

def test_validate_name_map_rejects_shared_display_names():
    with pytest.raises(EngineError):
        validate_name_map({"A": "Sam", "B": "Sam"})
    with pytest.raises(EngineError):
        validate_name_map({"A": ""})
    validate_name_map({"A": "Sam", "B": "Kim"})


def test_load_name_map_rejects_non_flat():
    with pytest.raises(EngineError):
        load_name_map('{"A": {"nested": true}}')


# ---------------------------------------------------------------------------
# redundancy filter
# ---------------------------------------------------------------------------

def test_filter_discards_shared_long_word():
    decision = redundancy_filter(TESLA, "Reincarnation")
    assert decision.keep is False
    assert "reincarnation" in decision.shared_words


def test_filter_keeps_unrelated_trope():
    assert redundancy_filter(TESLA, "Deal With The Devil").keep is True


def test_filter_ignores_short_words():
    # "the" (3 letters) is shared but never counts
    assert redundancy_filter("the chase begins", "The Big Heist").keep is True


def test_filter_four_letter_words_count():
    assert redundancy_filter("a deal goes wrong", "Deal With The Devil").keep \
        is False


def test_filter_case_insensitive():
    assert redundancy_filter("A RECKONING arrives", "The Reckoning").keep \
        is False


# ---------------------------------------------------------------------------
# tilt candidates and selection
# ---------------------------------------------------------------------------

def test_tilt_candidates_returns_five(excerpt_model, tropes, excerpt_graph):
    platform = excerpt_graph.fragments["602"].text
    candidates, filtered = tilt_candidates(
        excerpt_model, tropes, platform, context_doc_id="frag:602")
    assert len(candidates) == 5
    assert any(name == "Reincarnation" for name, _ in filtered)
    kept_names = {name for name, _ in candidates}
    assert "Reincarnation" not in kept_names


def test_tilt_candidates_sorted_by_distance(excerpt_model, tropes,
                                            excerpt_graph):
    platform = excerpt_graph.fragments["305"].text
    candidates, _ = tilt_candidates(
        excerpt_model, tropes, platform, context_doc_id="frag:305")
    distances = [d for _, d in candidates]
    assert distances == sorted(distances)


def test_tilt_candidates_filter_runs_before_cut(excerpt_model, tropes):
    # a platform sharing words with many trope names still yields 5
    # candidates because the filter prunes the pool first
    platform = ("The secret identity of the runaway bride is a slander "
                "invented for revenge by a desperate impostor")
    candidates, filtered = tilt_candidates(
        excerpt_model, tropes, platform)
    assert len(candidates) == 5
    assert len(filtered) >= 4


def test_select_tilt_uniform_over_candidates(excerpt_model, tropes,
                                             excerpt_graph):
    platform = excerpt_graph.fragments["602"].text
    rng = random.Random(123)
    seen = Counter(
        select_tilt(excerpt_model, tropes, platform, rng=rng,
                    context_doc_id="frag:602").chosen
        for _ in range(500)
    )
    assert len(seen) == 5
    # 500 draws over 5 names: each expected 100, sigma ~ 8.9
    for count in seen.values():
        assert abs(count - 100) < 5 * 8.95


def test_prompt_steers_tilt_query(excerpt_model, tropes, excerpt_graph):
    # with a prompt the query is inferred from the prompt text, so the
    # ranking shifts relative to the platform-anchored query
    platform = excerpt_graph.fragments["101"].text
    base, _ = tilt_candidates(excerpt_model, tropes, platform,
                              context_doc_id="frag:101")
    steered, _ = tilt_candidates(
        excerpt_model, tropes, platform,
        prompt="a drowned sailor returns as a vengeful ghost ship omen")
    assert [n for n, _ in base] != [n for n, _ in steered]


# ---------------------------------------------------------------------------
# platform advancement
# ---------------------------------------------------------------------------

def _toy_model():
    return EmbeddingModel.from_doc_vectors({
        "frag:r": np.array([1.0, 0.0, 0.0]),
        "frag:x": np.array([0.9, 0.1, 0.0]),
        "frag:y": np.array([0.0, 1.0, 0.0]),
    })


def test_next_platform_none_at_leaf(excerpt_graph, excerpt_model):
    tree = generate_plot_tree(excerpt_graph, "113", 3, random.Random(0))
    assert next_platform(excerpt_model, tree, "anything at all") is None


def test_next_platform_single_child_shortcut(excerpt_graph):
    # 104 has exactly one successor; no model lookup is needed, so even
    # a model lacking those doc ids works
    (edge,) = excerpt_graph.successors("104")
    tree = generate_plot_tree(excerpt_graph, "104", 2, random.Random(0))
    chosen = next_platform(_toy_model(), tree, "context words")
    assert chosen.fragment_id == edge.to_id


def test_next_platform_picks_nearest_child(excerpt_model, excerpt_graph):
    tree = generate_plot_tree(excerpt_graph, "746", 2, random.Random(0))
    chosen = next_platform(
        excerpt_model, tree,
        excerpt_graph.fragments["746"].text, context_doc_id="frag:746")
    # oracle: nearest of the two children by direct cosine distance
    query = excerpt_model.doc_vector("frag:746")
    dists = {
        c.fragment_id: cosine_distance(
            query, excerpt_model.doc_vector(f"frag:{c.fragment_id}"))
        for c in tree.children
    }
    best = min(sorted(dists), key=lambda k: (dists[k], k))
    assert chosen.fragment_id == best


def test_next_platform_rejects_empty_context(excerpt_graph, excerpt_model):
    tree = generate_plot_tree(excerpt_graph, "746", 2, random.Random(0))
    with pytest.raises(EngineError):
        next_platform(excerpt_model, tree, "   ")


def test_prompt_steers_platform_choice(excerpt_graph, excerpt_model):
    # a prompt echoing one branch's text pulls the walk onto that branch
    for root in ("746", "602"):
        tree = generate_plot_tree(excerpt_graph, root, 2, random.Random(0))
        assert len(tree.children) == 2
        for child in tree.children:
            prompt = excerpt_graph.fragments[child.fragment_id].text
            chosen = next_platform(excerpt_model, tree, prompt)
            assert chosen.fragment_id == child.fragment_id


# ---------------------------------------------------------------------------
# story generation
# ---------------------------------------------------------------------------

def test_generate_story_shape(excerpt_graph, excerpt_model, names):
    story = generate_story(excerpt_graph, excerpt_model, names,
                           random.Random(5), length_limit=5)
    assert 1 <= len(story) <= 5
    ids = [beat.fragment_id for beat in story]
    assert len(ids) == len(set(ids))
    for beat in story:
        assert beat.unnamed_symbols == ()


def test_generate_story_rejects_zero_length(excerpt_graph, excerpt_model,
                                            names):
    with pytest.raises(EngineError):
        generate_story(excerpt_graph, excerpt_model, names,
                       random.Random(5), length_limit=0)
