"""Tests for the deterministic momentum core"""

import pytest

from src.agent import Action, Phase, Recommendation, RiskPreference
from src.decision_cores import RuleBasedCore, create_core
from src.decision_cores.base import DebatePackage, PeerFeedback
from src.decision_cores.rule_based import majority_notch, momentum_action
from src.errors import InsufficientHistory
from src.models.config import CoreConfig


def package(action, agent_id="beta"):
    return DebatePackage(agent_id, "AAA", action, "peer view", 0.0, 0, 0.0)


def peer(action, sender="beta"):
    return PeerFeedback(sender, "alpha", False, action, "peer says")


class TestMomentumAction:

    @pytest.mark.parametrize("momentum,expected", [
        (0.05, Action.SIG_INCREASE),
        (0.03, Action.SIG_INCREASE),
        (0.02, Action.SLIGHT_INCREASE),
        (0.0, Action.HOLD),
        (-0.015, Action.SLIGHT_DECREASE),
        (-0.03, Action.SIG_DECREASE),
    ])
    def test_symmetric_thresholds(self, momentum, expected):
        assert momentum_action(momentum, 0.01, 0.03) is expected


class TestDecide:
    """Momentum scaled by risk preference"""

    @pytest.mark.parametrize("risk,last,expected", [
        (RiskPreference.NEUTRAL, 104, Action.SIG_INCREASE),
        (RiskPreference.NEUTRAL, 102, Action.SLIGHT_INCREASE),
        (RiskPreference.SEEKING, 102, Action.SIG_INCREASE),
        (RiskPreference.AVERSE, 102, Action.SLIGHT_INCREASE),
        (RiskPreference.AVERSE, 104, Action.SLIGHT_INCREASE),
        (RiskPreference.NEUTRAL, 96, Action.SIG_DECREASE),
        (RiskPreference.NEUTRAL, 100.5, Action.HOLD),
    ])
    def test_thresholds_by_risk(self, make_context, risk, last, expected):
        context = make_context(closes=(100, 99, 101, 100, 98, last), phase=Phase.TEST, risk=risk)
        assert RuleBasedCore().decide(context).action is expected

    def test_momentum_uses_window_plus_one_closes(self, make_context):
        context = make_context(closes=(50, 100, 101, 102, 103, 104, 110))
        assert RuleBasedCore().momentum(context) == pytest.approx(0.10)

    def test_insufficient_history(self, make_context):
        with pytest.raises(InsufficientHistory):
            RuleBasedCore().decide(make_context(closes=(100, 101, 102)))

    def test_training_fund_records_move_one_notch(self, make_context):
        context = make_context(phase=Phase.TRAIN, fund_shares=(500, -100))
        recommendation = RuleBasedCore().decide(context)
        assert recommendation.action is Action.SLIGHT_INCREASE
        assert "fund records point up" in recommendation.rationale

    def test_agreeing_fund_records_change_nothing(self, make_context):
        context = make_context(closes=(100, 100, 100, 100, 100, 110), fund_shares=(500,))
        assert RuleBasedCore().decide(context).action is Action.SIG_INCREASE

    def test_test_phase_ignores_fund_records(self, make_context):
        context = make_context(phase=Phase.TEST, fund_shares=(500,))
        assert RuleBasedCore().decide(context).action is Action.HOLD

    def test_same_context_same_answer(self, make_context):
        context = make_context(closes=(100, 99, 101, 100, 98, 102))
        core = RuleBasedCore()
        assert core.decide(context) == core.decide(context)

    @pytest.mark.parametrize("kwargs", [{"window": 0}, {"slight_threshold": 0.05, "sig_threshold": 0.03}])
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(ValueError):
            RuleBasedCore(**kwargs)


class TestDebate:
    """Peer feedback and majority revision"""

    def test_feedback_states_agreement(self, make_context):
        context = make_context(closes=(100, 100, 100, 100, 100, 104), agent_id="gamma")
        reply = RuleBasedCore().feedback(context, package(Action.SLIGHT_INCREASE))
        assert reply.agrees
        assert (reply.sender_id, reply.receiver_id) == ("gamma", "beta")
        assert reply.action is Action.SIG_INCREASE
        assert reply.text.startswith("I agree")

    def test_feedback_with_short_history_holds(self, make_context):
        context = make_context(closes=(100, 104), agent_id="gamma")
        reply = RuleBasedCore().feedback(context, package(Action.SIG_DECREASE))
        assert reply.action is Action.HOLD
        assert not reply.agrees

    @pytest.mark.parametrize("own,peers,expected", [
        (Action.SLIGHT_INCREASE, [Action.SIG_DECREASE, Action.SLIGHT_DECREASE], Action.HOLD),
        (Action.HOLD, [Action.SIG_INCREASE, Action.SLIGHT_INCREASE], Action.SLIGHT_INCREASE),
        (Action.HOLD, [Action.SIG_INCREASE, Action.SIG_DECREASE], Action.HOLD),
        (Action.HOLD, [Action.SIG_INCREASE], Action.HOLD),
        (Action.SIG_DECREASE, [Action.HOLD, Action.HOLD], Action.SIG_DECREASE.notch(1)),
        (Action.SIG_INCREASE, [Action.SLIGHT_INCREASE, Action.SIG_DECREASE], Action.SIG_INCREASE),
    ])
    def test_majority_notch(self, own, peers, expected):
        assert majority_notch(own, peers) is expected

    def test_revise_keeps_original_when_not_outnumbered(self, make_context):
        original = Recommendation(Action.HOLD, "flat")
        revised = RuleBasedCore().revise(make_context(), original, [peer(Action.SIG_INCREASE)])
        assert revised is original

    def test_revise_moves_one_notch(self, make_context):
        original = Recommendation(Action.HOLD, "flat")
        feedback = [peer(Action.SIG_INCREASE, "beta"), peer(Action.SLIGHT_INCREASE, "gamma")]
        revised = RuleBasedCore().revise(make_context(), original, feedback)
        assert revised.action is Action.SLIGHT_INCREASE
        assert "outnumbered by peers" in revised.rationale


class TestCreateCore:

    def test_rule_based_from_config(self):
        core = create_core(CoreConfig(momentum_window=3, slight_threshold=0.02, sig_threshold=0.05))
        assert isinstance(core, RuleBasedCore)
        assert core.window == 3
        assert core.thresholds(RiskPreference.AVERSE) == pytest.approx((0.03, 0.075))
