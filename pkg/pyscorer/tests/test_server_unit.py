import json
import math

import pytest

from pyscorer.backends import BackendError, ConsensusBackend, make_backend
from pyscorer.server import ProtocolState

ENC = "text correction: a b </s> a c </s>"


@pytest.fixture()
def state():
    return ProtocolState(ConsensusBackend())


def call(state, **req):
    return json.loads(state.handle(json.dumps(req)))


class TestDispatch:
    def test_start_returns_session(self, state):
        reply = call(state, rid=1, op="start", encoder_input=ENC)
        assert reply == {"rid": 1, "ok": True, "session": "s1"}

    def test_malformed_json_mentions_parse(self, state):
        reply = json.loads(state.handle("{nope"))
        assert reply["ok"] is False
        assert "parse" in reply["error"]

    def test_unknown_op_fails_but_loop_survives(self, state):
        reply = call(state, rid=2, op="frobnicate")
        assert reply["ok"] is False and "unknown op" in reply["error"]
        assert call(state, rid=3, op="start", encoder_input=ENC)["ok"] is True

    def test_unknown_session_rejected(self, state):
        reply = call(state, rid=1, op="next_logprobs", session="nope",
                     history=[], candidates=["x"])
        assert reply["ok"] is False and "session" in reply["error"]

    def test_end_evicts_session(self, state):
        session = call(state, rid=1, op="start", encoder_input=ENC)["session"]
        assert call(state, rid=2, op="end", session=session)["ok"] is True
        reply = call(state, rid=3, op="next_logprobs", session=session,
                     history=[], candidates=["x"])
        assert reply["ok"] is False

    def test_missing_field_reports_name(self, state):
        session = call(state, rid=1, op="start", encoder_input=ENC)["session"]
        reply = call(state, rid=2, op="next_logprobs", session=session)
        assert reply["ok"] is False and '"history"' in reply["error"]

    def test_logprobs_align_with_candidates(self, state):
        session = call(state, rid=1, op="start", encoder_input=ENC)["session"]
        reply = call(state, rid=2, op="next_logprobs", session=session,
                     history=[], candidates=["▁a", "▁a", "▁zz"])
        assert reply["ok"] is True
        values = reply["logprobs"]
        assert len(values) == 3
        assert values[0] == values[1] > values[2]

    def test_rid_echoed_verbatim(self, state):
        assert call(state, rid=777, op="tokenize", word="x")["rid"] == 777


class TestConsensusBackend:
    def test_votes_prefer_majority_token(self):
        backend = ConsensusBackend()
        session = backend.start_session("text correction: a b </s> a c </s>")
        a, z = backend.next_logprobs(session, [], ["▁a", "▁z"])
        assert a > z
        b, c = backend.next_logprobs(session, ["▁a"], ["▁b", "▁c"])
        assert b == c  # one vote each

    def test_terminal_votes_at_hypothesis_end(self):
        backend = ConsensusBackend()
        session = backend.start_session("text correction: a b </s> a c </s>")
        early, = backend.next_logprobs(session, [], ["</s>"])
        atend, = backend.next_logprobs(session, ["▁a", "▁b"], ["</s>"])
        assert atend > early

    def test_score_sequence_is_sum_of_steps(self):
        backend = ConsensusBackend()
        target = ["▁a", "▁b", "</s>"]
        session = backend.start_session(ENC)
        summed = sum(backend.next_logprobs(session, target[:i], [t])[0]
                     for i, t in enumerate(target))
        assert backend.score_sequence(ENC, target) == pytest.approx(summed, abs=1e-12)

    def test_empty_encoder_input_is_error(self):
        with pytest.raises(BackendError):
            ConsensusBackend().start_session("text correction:")

    def test_all_scores_finite(self):
        backend = ConsensusBackend()
        session = backend.start_session(ENC)
        values = backend.next_logprobs(
            session, ["▁q"] * 30, ["▁zz", "</s>"])
        assert all(math.isfinite(v) for v in values)


class TestMakeBackend:
    def test_consensus(self):
        assert make_backend("consensus").name == "consensus"

    def test_unknown_spec(self):
        with pytest.raises(BackendError):
            make_backend("quantum")

    def test_hf_without_model_name(self):
        with pytest.raises(BackendError):
            make_backend("hf:")
