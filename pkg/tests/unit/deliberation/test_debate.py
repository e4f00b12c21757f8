"""Tests for the debate coordinator"""

import json
from datetime import date, datetime

import pytest

from src.agent import Action, Phase, Recommendation, RiskPreference, TraderCharacter, TradingAgent
from src.debate import DebateCoordinator, DebateMessage, Participant, export_transcripts, is_eligible
from src.decision_cores import RuleBasedCore
from src.errors import IoError, SchemaViolation
from src.market_data import DataIngestor
from src.memory_engine import LayerKind, MemoryOrigin

DAY = date(2024, 1, 9)
DECISION = datetime(2024, 1, 9, 16, 0)
DEBATE = datetime(2024, 1, 9, 16, 30)
RISKS = {"alpha": RiskPreference.SEEKING, "beta": RiskPreference.NEUTRAL, "gamma": RiskPreference.AVERSE}


@pytest.fixture
def desk(warehouse, engine, write_prices):
    DataIngestor(warehouse).ingest_prices(write_prices({"AAA": [100, 100, 101, 99, 100, 102.5]}))
    agents = {}
    for agent_id, risk in RISKS.items():
        character = TraderCharacter(agent_id, risk, frozenset({"tech"}))
        agents[agent_id] = TradingAgent(character, engine, warehouse, {"AAA": "tech"}, 100_000.0)
    return agents


def seat(agent, core=None, action=None):
    core = core or RuleBasedCore()
    context = agent.build_context("AAA", DAY, Phase.TRAIN, DECISION)
    recommendation = Recommendation(action) if action else core.decide(context)
    return Participant(agent, core, context, recommendation)


def buy(agent):
    agent.execute(Recommendation(Action.SLIGHT_INCREASE), "AAA", 102.5, DECISION)


class TestEligibility:

    def test_holder_is_eligible(self, desk):
        buy(desk["alpha"])
        assert is_eligible(desk["alpha"], "AAA", DAY)
        assert is_eligible(desk["alpha"], "AAA", date(2024, 1, 10))

    def test_pending_buy_is_eligible(self, desk):
        assert is_eligible(desk["beta"], "AAA", DAY, Action.SLIGHT_INCREASE)
        assert not is_eligible(desk["beta"], "AAA", DAY, Action.SIG_DECREASE)
        assert not is_eligible(desk["beta"], "AAA", DAY)

    def test_convene_needs_two(self, warehouse, engine, desk):
        buy(desk["alpha"])
        coordinator = DebateCoordinator(warehouse, engine)
        seats = [seat(a) for a in desk.values()]
        assert coordinator.convene(DAY, "AAA", seats, Phase.TRAIN, DEBATE) is None

    def test_convene_sorts_participants(self, warehouse, engine, desk):
        for agent_id in ("gamma", "alpha"):
            buy(desk[agent_id])
        coordinator = DebateCoordinator(warehouse, engine)
        session = coordinator.convene(DAY, "AAA", [seat(desk["gamma"]), seat(desk["alpha"]), seat(desk["beta"])],
                                      Phase.TRAIN, DEBATE)
        assert session.participant_ids == ["alpha", "gamma"]
        assert session.session_id == "debate:2024-01-09:AAA"


class TestSession:
    """Complete-graph exchange"""

    @pytest.fixture
    def session(self, warehouse, engine, desk):
        for agent in desk.values():
            buy(agent)
        coordinator = DebateCoordinator(warehouse, engine, max_rounds=2)
        return coordinator, coordinator.convene(DAY, "AAA", [seat(a) for a in desk.values()], Phase.TRAIN, DEBATE)

    def test_message_conservation(self, session, warehouse):
        coordinator, s = session
        coordinator.run(s)

        # 3 agents, 2 rounds: n(n-1) messages per round
        assert len(s.messages) == 12
        assert len(warehouse.cognition.debates_for_session(s.session_id)) == 12
        for agent_id in RISKS:
            feedback = [
                e for e in warehouse.cognition.layer_events(agent_id, LayerKind.SHORT)
                if e.origin is MemoryOrigin.DEBATE_FEEDBACK
            ]
            assert len(feedback) == 4
            assert all(e.source_ref == s.session_id for e in feedback)

    def test_round_timestamps(self, session):
        coordinator, s = session
        coordinator.run(s)
        assert {m.timestamp for m in s.messages if m.round == 1} == {DEBATE}
        assert {m.timestamp for m in s.messages if m.round == 2} == {datetime(2024, 1, 9, 16, 35)}

    def test_message_order_and_payload(self, session):
        coordinator, s = session
        messages = coordinator.exchange_round(s)
        assert [(m.sender_id, m.receiver_id) for m in messages] == [
            ("alpha", "beta"), ("alpha", "gamma"),
            ("beta", "alpha"), ("beta", "gamma"),
            ("gamma", "alpha"), ("gamma", "beta"),
        ]
        shared = messages[0].payload["shared"]
        assert shared["agent_id"] == "beta"
        assert shared["ticker"] == "AAA"
        assert messages[0].payload["feedback_action"] in {a.value for a in Action}

    def test_every_participant_gets_a_revision(self, session):
        coordinator, s = session
        revised = coordinator.run(s)
        assert sorted(revised) == ["alpha", "beta", "gamma"]
        assert s.to_dict()["rounds"] == 2
        assert s.to_dict()["messages"] == 12

    def test_round_limit(self, session):
        coordinator, s = session
        coordinator.run(s)
        with pytest.raises(ValueError):
            coordinator.exchange_round(s)

    def test_finalize_too_early(self, session):
        coordinator, s = session
        with pytest.raises(ValueError):
            coordinator.finalize(s)

    def test_parallel_rounds_keep_pair_order(self, warehouse, engine, desk):
        for agent in desk.values():
            buy(agent)
        coordinator = DebateCoordinator(warehouse, engine, max_rounds=1, parallelism=4)
        s = coordinator.convene(DAY, "AAA", [seat(a) for a in desk.values()], Phase.TRAIN, DEBATE)
        coordinator.run(s)
        assert [(m.sender_id, m.receiver_id) for m in s.messages] == [
            ("alpha", "beta"), ("alpha", "gamma"),
            ("beta", "alpha"), ("beta", "gamma"),
            ("gamma", "alpha"), ("gamma", "beta"),
        ]


class TestMajorityRevision:

    def test_outnumbered_agent_moves_one_notch(self, warehouse, engine, desk):
        for agent in desk.values():
            buy(agent)
        seats = [seat(desk["alpha"], action=Action.SIG_DECREASE), seat(desk["beta"]), seat(desk["gamma"])]
        coordinator = DebateCoordinator(warehouse, engine)
        s = coordinator.convene(DAY, "AAA", seats, Phase.TRAIN, DEBATE)

        revised = coordinator.run(s)

        # beta and gamma both see +2.5% momentum and buy
        assert s.round == 2
        assert seats[1].recommendation.action.direction == 1
        assert seats[2].recommendation.action.direction == 1
        assert revised["alpha"].action is Action.SLIGHT_DECREASE

    @pytest.mark.parametrize("rounds", [1, 2, 3])
    def test_one_notch_whatever_the_round_count(self, warehouse, engine, desk, rounds):
        for agent in desk.values():
            buy(agent)
        seats = [seat(desk["alpha"], action=Action.SIG_DECREASE), seat(desk["beta"]), seat(desk["gamma"])]
        coordinator = DebateCoordinator(warehouse, engine, max_rounds=rounds)

        revised = coordinator.run(coordinator.convene(DAY, "AAA", seats, Phase.TRAIN, DEBATE))

        assert revised["alpha"].action is Action.SLIGHT_DECREASE
        # shared positions are not revised between rounds
        assert seats[0].recommendation.action is Action.SIG_DECREASE


class TestDebateMessage:

    def test_self_message_rejected(self):
        with pytest.raises(SchemaViolation):
            DebateMessage("s", 1, "alpha", "alpha", "AAA", DEBATE, {})

    def test_round_starts_at_one(self):
        with pytest.raises(SchemaViolation):
            DebateMessage("s", 0, "alpha", "beta", "AAA", DEBATE, {})

    def test_coordinator_needs_a_round(self, warehouse, engine):
        with pytest.raises(ValueError):
            DebateCoordinator(warehouse, engine, max_rounds=0)


class TestExportTranscripts:

    @pytest.fixture
    def debated(self, warehouse, engine, desk):
        for agent in desk.values():
            buy(agent)
        coordinator = DebateCoordinator(warehouse, engine)
        coordinator.run(coordinator.convene(DAY, "AAA", [seat(a) for a in desk.values()], Phase.TRAIN, DEBATE))
        return warehouse

    def test_one_line_per_message(self, debated, tmp_path):
        out = tmp_path / "out" / "debates.jsonl"
        assert export_transcripts(debated.cognition, out) == 12
        lines = out.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 12
        first = json.loads(lines[0])
        assert first["kind"] == "Debate"
        assert first["body"]["round"] == 1

    def test_window(self, debated, tmp_path):
        count = export_transcripts(debated.cognition, tmp_path / "d.jsonl",
                                   datetime(2024, 1, 9, 16, 31), datetime(2024, 1, 10))
        assert count == 6

    def test_same_store_same_bytes(self, debated, tmp_path):
        export_transcripts(debated.cognition, tmp_path / "a.jsonl")
        export_transcripts(debated.cognition, tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_unwritable_target(self, debated, tmp_path):
        with pytest.raises(IoError):
            export_transcripts(debated.cognition, tmp_path)
