"""Tests for the Agents' Cognition store"""

from datetime import date, datetime, timedelta

import numpy as np
import pytest

from src.errors import DimensionMismatch, DuplicateReflection, InvalidRange, SchemaViolation
from src.memory_engine import LayerKind, MemoryOrigin
from src.storage import (COGNITION_LOG_NAME, CognitionKind, CognitionRecord, CognitionStore,
                         ReflectionFlag)


@pytest.fixture
def store(warehouse):
    return warehouse.cognition


def remember(store, embedder, text, agent="alpha", layer=LayerKind.SHORT, when=datetime(2024, 1, 2, 16)):
    return store.add_memory(agent, layer, MemoryOrigin.MARKET_NEWS, text, embedder.embed_text(text), when)


class TestMemoryRecords:
    """Create and op records"""

    def test_memory_ids_follow_record_ids(self, store, embedder):
        first = remember(store, embedder, "oil rallies")
        second = remember(store, embedder, "chips slump")
        assert (first.id, second.id) == ("mem-00000001", "mem-00000002")

    def test_access_and_boost_update_counters(self, store, embedder):
        event = remember(store, embedder, "oil rallies")
        store.record_access("alpha", [event.id], {event.id: 0.9}, datetime(2024, 1, 3, 16))
        store.record_boost("alpha", [event.id], datetime(2024, 1, 3, 16, 15))

        live = store.get_memory("alpha", event.id)
        assert live.access_count == 2
        assert live.last_relevancy == 0.9

    def test_promote_resets_counter(self, store, embedder):
        event = remember(store, embedder, "oil rallies")
        store.record_boost("alpha", [event.id], datetime(2024, 1, 3))
        store.move_memory("alpha", event.id, LayerKind.MIDDLE, datetime(2024, 1, 3, 18))

        live = store.get_memory("alpha", event.id)
        assert live.layer is LayerKind.MIDDLE
        assert live.access_count == 0

    def test_illegal_transition(self, store, embedder):
        event = remember(store, embedder, "oil rallies")
        with pytest.raises(SchemaViolation):
            store.move_memory("alpha", event.id, LayerKind.LONG, datetime(2024, 1, 3))

    def test_purged_event_rejects_further_ops(self, store, embedder):
        event = remember(store, embedder, "oil rallies")
        store.purge_memory("alpha", event.id, datetime(2024, 1, 8))

        assert store.get_memory("alpha", event.id) is None
        assert event.id in store.purged["alpha"]
        with pytest.raises(SchemaViolation):
            store.record_boost("alpha", [event.id], datetime(2024, 1, 9))

    def test_ops_are_scoped_per_agent(self, store, embedder):
        event = remember(store, embedder, "oil rallies", agent="alpha")
        with pytest.raises(SchemaViolation):
            store.record_boost("beta", [event.id], datetime(2024, 1, 3))

    def test_unknown_op_rejected(self, store):
        record = CognitionRecord(CognitionKind.MEMORY, "alpha", datetime(2024, 1, 2), {}, op="forget")
        with pytest.raises(SchemaViolation):
            store.append(record)

    def test_layer_events_in_id_order(self, store, embedder):
        remember(store, embedder, "a one")
        remember(store, embedder, "b two", layer=LayerKind.LONG)
        remember(store, embedder, "c three")
        assert [e.id for e in store.layer_events("alpha", LayerKind.SHORT)] == ["mem-00000001", "mem-00000003"]


class TestReplay:
    """Materialized state is rebuilt from the log"""

    def test_snapshot_survives_reload(self, store, embedder, run_dir):
        a = remember(store, embedder, "oil rallies")
        b = remember(store, embedder, "chips slump", agent="beta")
        store.record_access("alpha", [a.id], {a.id: 0.7}, datetime(2024, 1, 3))
        store.move_memory("alpha", a.id, LayerKind.MIDDLE, datetime(2024, 1, 3, 18))
        store.pin_memory("beta", b.id, datetime(2024, 1, 3, 18))
        store.add_reflection("alpha", ReflectionFlag.IMMEDIATE,
                             {"ticker": "AAA", "date": "2024-01-03", "action": "Buy", "cited_ids": [a.id]},
                             datetime(2024, 1, 3, 16, 15))

        reloaded = CognitionStore(run_dir / COGNITION_LOG_NAME, embedder).load()

        assert reloaded.snapshot() == store.snapshot()
        assert np.allclose(reloaded.get_memory("alpha", a.id).embedding, a.embedding)

    def test_truncated_trailing_line(self, store, embedder, run_dir):
        remember(store, embedder, "oil rallies")
        remember(store, embedder, "chips slump")
        path = run_dir / COGNITION_LOG_NAME
        content = path.read_text(encoding="utf-8")
        path.write_text(content[:-20], encoding="utf-8")

        reloaded = CognitionStore(path, embedder).load()

        assert list(reloaded.memories["alpha"]) == ["mem-00000001"]
        assert reloaded.log.next_id() == 2

    def test_purge_survives_reload(self, store, embedder, run_dir):
        event = remember(store, embedder, "oil rallies")
        store.purge_memory("alpha", event.id, datetime(2024, 1, 8))

        reloaded = CognitionStore(run_dir / COGNITION_LOG_NAME, embedder).load()

        assert reloaded.memories["alpha"] == {}
        assert reloaded.purged == {"alpha": {event.id}}


class TestSimilaritySearch:
    """Exact cosine search over one layer"""

    def test_most_similar_first(self, store, embedder):
        remember(store, embedder, "oil supply shock hits energy")
        remember(store, embedder, "chip demand lifts semiconductors")
        remember(store, embedder, "energy stocks fall on oil glut")

        hits = store.similarity_search("alpha", LayerKind.SHORT, embedder.embed_text("chip demand"), 2)

        assert hits[0][0].id == "mem-00000002"
        assert len(hits) == 2
        assert hits[0][1] >= hits[1][1]

    def test_results_are_copies(self, store, embedder):
        event = remember(store, embedder, "oil rallies")
        hit, _ = store.similarity_search("alpha", LayerKind.SHORT, event.embedding, 1)[0]
        hit.access_count = 99
        assert store.get_memory("alpha", event.id).access_count == 0

    def test_empty_layer(self, store, embedder):
        assert store.similarity_search("alpha", LayerKind.LONG, embedder.embed_text("oil"), 3) == []

    def test_dimension_mismatch(self, store, embedder):
        remember(store, embedder, "oil rallies")
        with pytest.raises(DimensionMismatch):
            store.similarity_search("alpha", LayerKind.SHORT, np.ones(3), 1)

    def test_n_must_be_positive(self, store, embedder):
        with pytest.raises(ValueError):
            store.similarity_search("alpha", LayerKind.SHORT, embedder.embed_text("oil"), 0)


class TestReflectionsAndDebates:

    def test_second_immediate_reflection_rejected(self, store):
        body = {"ticker": "AAA", "date": "2024-01-03", "action": "Hold", "cited_ids": []}
        store.add_reflection("alpha", ReflectionFlag.IMMEDIATE, body, datetime(2024, 1, 3, 16, 15))

        with pytest.raises(DuplicateReflection):
            store.add_reflection("alpha", ReflectionFlag.IMMEDIATE, body, datetime(2024, 1, 3, 17))
        assert store.has_immediate_reflection("alpha", "AAA", date(2024, 1, 3))
        assert not store.has_immediate_reflection("beta", "AAA", date(2024, 1, 3))

    def test_extended_reflections_are_not_deduplicated(self, store):
        body = {"period_start": "2024-01-01", "period_end": "2024-01-05"}
        store.add_reflection("alpha", ReflectionFlag.EXTENDED, body, datetime(2024, 1, 5, 18, 30))
        store.add_reflection("alpha", ReflectionFlag.EXTENDED, body, datetime(2024, 1, 5, 18, 31))
        records = store.query_window(CognitionKind.REFLECTION, "alpha", datetime(2024, 1, 1), datetime(2024, 2, 1))
        assert len(records) == 2

    def test_debate_needs_distinct_receiver(self, store):
        with pytest.raises(SchemaViolation):
            store.add_debate("alpha", "alpha", {"session_id": "s1"}, datetime(2024, 1, 3, 16, 30))

    def test_debate_window_matches_sender_or_receiver(self, store):
        when = datetime(2024, 1, 3, 16, 30)
        store.add_debate("alpha", "beta", {"session_id": "s1"}, when)
        store.add_debate("gamma", "alpha", {"session_id": "s1"}, when + timedelta(minutes=5))
        store.add_debate("beta", "gamma", {"session_id": "s2"}, when)

        window = (datetime(2024, 1, 3), datetime(2024, 1, 4))
        assert len(store.query_window(CognitionKind.DEBATE, "alpha", *window)) == 2
        assert len(store.query_window(CognitionKind.DEBATE, None, *window)) == 3
        assert len(store.debates_for_session("s1")) == 2

    def test_inverted_window(self, store):
        with pytest.raises(InvalidRange):
            store.query_window(CognitionKind.DEBATE, None, datetime(2024, 2, 1), datetime(2024, 1, 1))
