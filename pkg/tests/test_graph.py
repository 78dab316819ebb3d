import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DictEmbedder, at_cos, triple, unit
from dialogkg.embedding import hash_embedder
from dialogkg.errors import EmptyLabel, NodeNotFound
from dialogkg.graph import (
    SemanticKnowledgeGraph,
    attach_embeddings,
    canonical_key,
    current_edges,
    edges_incident,
    historical_edges,
    quarantine_turn,
    update_graph,
)
from dialogkg.taxonomy import EdgeKind, EntityType, Intent, PropertyType, RelType


@pytest.mark.parametrize("label,key", [("  Metabolism ", "metabolism"), ("Morning Spark", "morning spark")])
def test_canonical_key(label, key):
    assert canonical_key(label) == key


def test_canonical_key_empty():
    with pytest.raises(EmptyLabel):
        canonical_key("   ")


def breakfast_embedder():
    return DictEmbedder(
        {
            "skipping breakfast": unit(0, 0, 0, 1),
            "metabolism": at_cos(1.0),
            "metabolic rate": at_cos(0.88),
            "conservation mode": unit(0, 0, 1),
        }
    )


def test_breakfast_growth():
    g = SemanticKnowledgeGraph()
    emb = breakfast_embedder()
    r1 = update_graph(
        g,
        [triple("skipping breakfast", "slows", "metabolism", type_sub=EntityType.CONDITION, importance=0.95)],
        1,
        emb,
    )
    assert r1.new_nodes == {"skipping breakfast", "metabolism"}
    assert [e.kind for e in g.edges] == [EdgeKind.FACT]

    r2 = update_graph(g, [triple("Skipping breakfast", "triggers", "conservation mode")], 2, emb)
    assert r2.new_nodes == {"conservation mode"}
    assert g.nodes["skipping breakfast"].importance == 0.95

    r3 = update_graph(g, [triple("skipping breakfast", "has no effect", "metabolic rate")], 3, emb)
    assert r3.new_nodes == {"metabolic rate"}
    sem = [e for e in g.edges if e.kind is EdgeKind.SEMANTIC]
    assert len(sem) == 1
    assert {sem[0].source_key, sem[0].target_key} == {"metabolic rate", "metabolism"}
    assert sem[0].semantic_similarity == pytest.approx(0.88)
    assert sem[0].attribute is None and sem[0].property_type is None


def test_subject_dedup_to_similar_prior_node():
    emb = DictEmbedder({"coffee": at_cos(1.0), "coffee drinks": at_cos(0.9), "sleep": unit(0, 0, 1)})
    g = SemanticKnowledgeGraph()
    update_graph(g, [triple("coffee", "affects", "sleep")], 1, emb)
    res = update_graph(g, [triple("coffee drinks", "disrupt", "sleep")], 2, emb)
    assert res.new_nodes == set()
    assert g.edges[-1].source_key == "coffee"


def test_objects_not_merged_by_default():
    emb = DictEmbedder({"a": unit(1), "b": unit(0, 1), "metabolism": at_cos(1.0), "metabolic rate": at_cos(0.88)})
    g = SemanticKnowledgeGraph()
    update_graph(g, [triple("a", "slows", "metabolism")], 1, emb)
    res = update_graph(g, [triple("b", "raises", "metabolic rate")], 2, emb)
    assert "metabolic rate" in res.new_nodes

    g2 = SemanticKnowledgeGraph()
    update_graph(g2, [triple("a", "slows", "metabolism")], 1, emb, dedup_objects=True)
    res2 = update_graph(g2, [triple("b", "raises", "metabolic rate")], 2, emb, dedup_objects=True)
    assert "metabolic rate" not in res2.new_nodes


def test_dedup_tie_breaks_on_earliest_turn():
    v = at_cos(1.0)
    emb = DictEmbedder({"x one": v, "x two": v, "x new": at_cos(0.95), "o": unit(0, 0, 0, 0, 1)})
    g = SemanticKnowledgeGraph()
    update_graph(g, [triple("x one", "r", "o")], 1, emb)
    # a later node with the very same vector: the earlier one must win the tie
    g.add_node(type(g.nodes["x one"])("x two", "x two", EntityType.CONCEPT, 0.5, 2, embedding=v))
    g.current_turn = 2
    update_graph(g, [triple("x new", "r", "o")], 3, emb)
    assert g.edges[-1].source_key == "x one"


def test_same_turn_duplicate_triples_collapsed():
    g = SemanticKnowledgeGraph()
    t = triple("a", "b", "c")
    update_graph(g, [t, t], 1, hash_embedder())
    assert len([e for e in g.edges if e.kind is EdgeKind.FACT]) == 1


def test_turn_order_enforced():
    g = SemanticKnowledgeGraph()
    with pytest.raises(ValueError):
        update_graph(g, [], 2, hash_embedder())


def test_fact_edge_carries_attributes():
    g = SemanticKnowledgeGraph()
    t = triple("x", " Recommends ", "y", rel_type=RelType.SOLUTION, property_type=PropertyType.EXCLUSIVE)
    update_graph(g, [t], 1, hash_embedder())
    e = g.edges[0]
    assert e.relation == "recommends"
    assert e.intent is Intent.ADVICE and e.property_type is PropertyType.EXCLUSIVE


def test_semantic_links_skip_quarantined_nodes():
    emb = DictEmbedder({"a": at_cos(1.0), "b": at_cos(0.7), "z": unit(0, 0, 1)})
    g = SemanticKnowledgeGraph()
    update_graph(g, [triple("z", "r", "a")], 1, emb)
    quarantine_turn(g, 1)
    update_graph(g, [triple("b", "r2", "z")], 2, emb)
    assert not [e for e in g.edges if e.kind is EdgeKind.SEMANTIC]


def test_quarantine_idempotent_and_empty():
    g = SemanticKnowledgeGraph()
    update_graph(g, [triple("a", "r", "b")], 1, hash_embedder())
    update_graph(g, [], 2, hash_embedder())
    quarantine_turn(g, 2)
    assert not any(n.quarantined for n in g.nodes.values())
    quarantine_turn(g, 1)
    snap = g.to_dict()
    quarantine_turn(g, 1)
    assert g.to_dict() == snap
    assert all(n.quarantined for n in g.nodes.values())
    with pytest.raises(ValueError):
        quarantine_turn(g, 5)


def test_edges_incident_filters():
    g = SemanticKnowledgeGraph()
    emb = hash_embedder()
    update_graph(g, [triple("u", "r1", "v1")], 1, emb)
    update_graph(g, [triple("u", "r2", "v2")], 2, emb)
    update_graph(g, [], 3, emb)
    assert [e.relation for e in historical_edges(g, "u", 4)] == ["r1", "r2"]
    assert [e.relation for e in current_edges(g, "u", 2)] == ["r2"]
    g.edges[0].quarantined = True
    g.edges[1].user_deprecated = True
    assert edges_incident(g, "u") == []
    assert len(edges_incident(g, "u", include_quarantined=True, include_deprecated=True)) == 2
    with pytest.raises(NodeNotFound):
        edges_incident(g, "missing")


def test_roundtrip_and_attach_embeddings():
    g = SemanticKnowledgeGraph()
    emb = hash_embedder()
    update_graph(g, [triple("soil", "holds", "water")], 1, emb)
    restored = SemanticKnowledgeGraph.from_dict(g.to_dict(include_embeddings=False))
    assert restored.to_dict(False) == g.to_dict(False)
    attach_embeddings(restored, emb)
    res = update_graph(restored, [triple("soil", "holds", "water")], 2, emb)
    assert res.new_nodes == set()


def test_empty_label_triple_skipped_with_warning():
    # Triple refuses blank fields itself, so blank one after construction
    t = triple("a", "r", "o")
    object.__setattr__(t, "sub", "  ")
    res = update_graph(SemanticKnowledgeGraph(), [t], 1, hash_embedder())
    assert res.warnings and not res.graph.edges


words = st.sampled_from(["soil", "water", "sun", "plant", "root", "leaf", "rain", "seed"])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.tuples(words, words, words), max_size=4), min_size=1, max_size=6))
def test_graph_invariants_hold(turns):
    g = SemanticKnowledgeGraph()
    emb = hash_embedder(32)
    before = {}
    for t, items in enumerate(turns, 1):
        update_graph(g, [triple(a, r, b) for a, r, b in items], t, emb)
        for key, node in g.nodes.items():
            if key in before:
                assert node.importance >= before[key][0]
                assert node.intro_turn == before[key][1]
            before[key] = (node.importance, node.intro_turn)
    for e in g.edges:
        assert e.source_key in g.nodes and e.target_key in g.nodes
        assert e.edge_id in g._incidence[e.source_key] and e.edge_id in g._incidence[e.target_key]
        if e.kind is EdgeKind.SEMANTIC:
            assert e.semantic_similarity >= 0.5
    assert np.all(np.isfinite(g._rows))
