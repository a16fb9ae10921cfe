"""Response policy: act tagging, QA matching, statement tree, silence.

The six-response scripted exchange is pinned end to end at this level:
answer, focus question, partial repeat, follow-up after 5 s of silence,
topic introduction after 5 more, formulaic close.
"""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adlisten.errors import ClockRegression, EmptyUtterance
from adlisten.gru import init_classifier
from adlisten.language import build_vocabulary, tokenize
from adlisten.listener import (
    ActTaggerModel,
    DialogueAct,
    ListenerAction,
    ListenerConfig,
    ListenerState,
    QADatabase,
    QAEntry,
    ResponseType,
    TimerExpiredEvent,
    UserUtteranceEvent,
    load_qa_database,
    load_topics,
    on_silence_expiry,
    respond_to_question,
    respond_to_statement,
    step,
    tag_dialogue_act,
)

from conftest import EXPECTED_SEQUENCE, EXPECTED_TEXTS, EXTRA_TURNS, SCRIPT_TURNS


def biased_tagger(statement=True):
    """2-class tagger whose head always prefers one act."""
    vocab = build_vocabulary([["it", "is", "raining"]])
    model = init_classifier(vocab.size, 3, num_classes=2, seed=0)
    for p in model.parameters().values():
        p[:] = 0.0
    model.head_b = np.array([1.0, 0.0]) if statement else np.array([0.0, 1.0])
    return ActTaggerModel(model=model, vocab=vocab)


class TestActTagging:
    def test_question_mark_is_absolute(self):
        toks = tokenize("It is raining?")
        assert tag_dialogue_act(toks, "It is raining?") is DialogueAct.QUESTION
        # even a statement-biased model cannot override the mark
        assert (
            tag_dialogue_act(toks, "It is raining?", biased_tagger(statement=True))
            is DialogueAct.QUESTION
        )

    def test_starter_rule(self):
        assert tag_dialogue_act(tokenize("how are you"), "how are you") is (
            DialogueAct.QUESTION
        )
        assert tag_dialogue_act(tokenize("the sky is blue"), "the sky is blue") is (
            DialogueAct.STATEMENT
        )

    def test_model_overrides_starter_rule(self):
        toks = tokenize("is it raining")
        assert tag_dialogue_act(toks, "is it raining") is DialogueAct.QUESTION
        assert (
            tag_dialogue_act(toks, "is it raining", biased_tagger(statement=True))
            is DialogueAct.STATEMENT
        )
        toks = tokenize("it is raining")
        assert (
            tag_dialogue_act(toks, "it is raining", biased_tagger(statement=False))
            is DialogueAct.QUESTION
        )

    def test_tie_goes_to_question(self):
        vocab = build_vocabulary([["a"]])
        model = init_classifier(vocab.size, 2, num_classes=2, seed=0)
        for p in model.parameters().values():
            p[:] = 0.0
        tagger = ActTaggerModel(model=model, vocab=vocab)
        assert tagger.tag(["a"]) is DialogueAct.QUESTION

    def test_empty_utterance(self):
        with pytest.raises(EmptyUtterance):
            tag_dialogue_act([], "...")


class TestRespondToQuestion:
    def db(self):
        return QADatabase(entries=(
            QAEntry(patterns=(("what", "time"),), answer="A0"),
            QAEntry(patterns=(("what", "day"),), answer="A1"),
        ))

    def test_exact_match(self):
        rtype, text = respond_to_question(
            self.db(), ["what", "time"], ListenerConfig()
        )
        assert (rtype, text) == (ResponseType.ANSWER, "A0")

    def test_threshold_inclusive_and_tie_to_lower_index(self):
        # "what" covers half of both patterns: score 0.5 reaches the
        # default threshold and the earlier entry wins the tie
        rtype, text = respond_to_question(self.db(), ["what"], ListenerConfig())
        assert (rtype, text) == (ResponseType.ANSWER, "A0")

    def test_below_threshold_formulaic(self):
        rtype, text = respond_to_question(self.db(), ["zebra"], ListenerConfig())
        assert rtype is ResponseType.FORMULAIC_RESPONSE
        assert text == "That's good."
        _, text = respond_to_question(
            self.db(), ["zebra"], ListenerConfig(), formulaic_cursor=1
        )
        assert text == "I see."

    def test_multi_pattern_entry_takes_best(self):
        db = QADatabase(entries=(
            QAEntry(patterns=(("x", "y", "z", "q"), ("weather",)), answer="A"),
        ))
        rtype, text = respond_to_question(db, ["weather"], ListenerConfig())
        assert (rtype, text) == (ResponseType.ANSWER, "A")

    def test_packaged_database(self, resources):
        rtype, text = respond_to_question(
            resources.qa_db, tokenize("How is the weather?"), ListenerConfig()
        )
        assert (rtype, text) == (ResponseType.ANSWER, "It's raining outside.")


class TestRespondToStatement:
    def state(self, resources):
        return ListenerState(config=resources.listener_config)

    def test_focus_question(self, resources):
        state = self.state(resources)
        raw = "OK, I'll watch a movie then."
        rtype, text = respond_to_statement(
            state, resources.bigram, tokenize(raw), raw
        )
        assert (rtype, text) == (ResponseType.QUESTION_ON_FOCUS, "Which movie?")
        assert state.last_topic == "movie"

    def test_partial_repeat_keeps_topic(self, resources):
        state = self.state(resources)
        state.last_topic = "movie"
        raw = "Avengers, the newest one."
        rtype, text = respond_to_statement(
            state, resources.bigram, tokenize(raw), raw
        )
        assert (rtype, text) == (ResponseType.PARTIAL_REPEAT, "Avengers?")
        assert state.last_topic == "movie"

    def test_extension_statements_echo(self, resources):
        state = self.state(resources)
        state.last_topic = "movie"
        for (raw, _, _), echo in zip(EXTRA_TURNS, ("Sister?", "Home?")):
            rtype, text = respond_to_statement(
                state, resources.bigram, tokenize(raw), raw
            )
            assert (rtype, text) == (ResponseType.PARTIAL_REPEAT, echo)
        assert state.last_topic == "movie"

    def test_no_focus_formulaic(self, resources):
        state = self.state(resources)
        raw = "Yes, I like."
        rtype, text = respond_to_statement(
            state, resources.bigram, tokenize(raw), raw
        )
        assert (rtype, text) == (ResponseType.FORMULAIC_RESPONSE, "That's good.")
        assert state.last_topic is None

    def test_capitalization(self, resources):
        state = self.state(resources)
        raw = "I tended the garden."
        rtype, text = respond_to_statement(
            state, resources.bigram, tokenize(raw), raw
        )
        assert text[0].isupper()


class TestSilenceEscalation:
    def config(self):
        return ListenerConfig(topics=("T1?", "T2?", "T3?"))

    def test_stage0_with_topic(self):
        state = ListenerState(config=self.config())
        state.last_topic = "movie"
        rtype, text = on_silence_expiry(state)
        assert (rtype, text) == (
            ResponseType.FOLLOW_UP_QUESTION,
            "What's your favorite movie?",
        )
        assert state.silence_stage == 1
        assert state.topic_cursor == 0

    def test_stage0_without_topic_consumes_cursor(self):
        state = ListenerState(config=self.config())
        rtype, text = on_silence_expiry(state)
        assert (rtype, text) == (ResponseType.FOLLOW_UP_QUESTION, "T1?")
        assert state.topic_cursor == 1

    def test_round_robin_and_breakdown(self):
        state = ListenerState(config=self.config())
        seen = [on_silence_expiry(state) for _ in range(5)]
        assert [t for _, t in seen] == ["T1?", "T2?", "T3?", "T1?", "T2?"]
        assert [r for r, _ in seen] == [ResponseType.FOLLOW_UP_QUESTION] + (
            [ResponseType.TOPIC_INTRODUCTION] * 4
        )
        assert state.unanswered_prompts == 5
        assert state.breakdown


class TestStep:
    def run_script(self, resources):
        state = ListenerState(config=resources.listener_config)
        actions = []
        for text, t0, t1 in SCRIPT_TURNS[:3]:
            actions.append(
                step(state, UserUtteranceEvent(text, t0, t1),
                     resources.qa_db, resources.bigram)
            )
        for now in (14.0, 19.0):
            actions.append(
                step(state, TimerExpiredEvent(now),
                     resources.qa_db, resources.bigram)
            )
        text, t0, t1 = SCRIPT_TURNS[3]
        actions.append(
            step(state, UserUtteranceEvent(text, t0, t1),
                 resources.qa_db, resources.bigram)
        )
        return state, actions

    def test_scripted_sequence(self, resources):
        state, actions = self.run_script(resources)
        assert [a.response_type.value for a in actions] == list(EXPECTED_SEQUENCE)
        assert [a.text for a in actions] == list(EXPECTED_TEXTS)
        assert [a.emitted_at for a in actions] == [2.0, 6.0, 9.0, 14.0, 19.0, 21.0]
        assert [a.act for a in actions] == [
            DialogueAct.QUESTION,
            DialogueAct.STATEMENT,
            DialogueAct.STATEMENT,
            DialogueAct.SILENCE,
            DialogueAct.SILENCE,
            DialogueAct.STATEMENT,
        ]
        assert state.silence_deadline == 26.0
        assert state.silence_stage == 0
        assert state.formulaic_cursor == 1

    def test_deadline_rearms_after_every_event(self, resources):
        state = ListenerState(config=resources.listener_config)
        step(state, UserUtteranceEvent("How is the weather?", 0.0, 2.0),
             resources.qa_db, resources.bigram)
        assert state.silence_deadline == 7.0
        step(state, TimerExpiredEvent(7.0), resources.qa_db, resources.bigram)
        assert state.silence_deadline == 12.0
        assert state.silence_stage == 1

    def test_utterance_resets_escalation(self, resources):
        state = ListenerState(config=resources.listener_config)
        step(state, TimerExpiredEvent(5.0), resources.qa_db, resources.bigram)
        step(state, TimerExpiredEvent(10.0), resources.qa_db, resources.bigram)
        assert state.silence_stage == 2
        step(state, UserUtteranceEvent("I tended the garden.", 11.0, 12.0),
             resources.qa_db, resources.bigram)
        assert state.silence_stage == 0
        assert state.unanswered_prompts == 0

    def test_clock_regression(self, resources):
        state = ListenerState(config=resources.listener_config)
        step(state, UserUtteranceEvent("Yes, I like.", 19.0, 21.0),
             resources.qa_db, resources.bigram)
        with pytest.raises(ClockRegression):
            step(state, UserUtteranceEvent("again", 19.0, 20.0),
                 resources.qa_db, resources.bigram)
        with pytest.raises(ClockRegression):
            step(state, TimerExpiredEvent(20.999), resources.qa_db, resources.bigram)

    def test_same_instant_allowed(self, resources):
        state = ListenerState(config=resources.listener_config)
        step(state, UserUtteranceEvent("Yes, I like.", 0.0, 2.0),
             resources.qa_db, resources.bigram)
        action = step(state, TimerExpiredEvent(2.0), resources.qa_db, resources.bigram)
        assert isinstance(action, ListenerAction)

    def test_determinism(self, resources):
        _, first = self.run_script(resources)
        _, second = self.run_script(resources)
        assert first == second


TOKEN_ALPHABET = (
    "what which garden movie the a is very zebra music i yes no um".split()
)


class TestTypeDiscipline:
    @given(tokens=st.lists(st.sampled_from(TOKEN_ALPHABET), min_size=1, max_size=8))
    def test_question_path_never_repeats(self, resources, tokens):
        rtype, text = respond_to_question(resources.qa_db, tokens, ListenerConfig())
        assert rtype in (ResponseType.ANSWER, ResponseType.FORMULAIC_RESPONSE)
        assert text

    @given(tokens=st.lists(st.sampled_from(TOKEN_ALPHABET), min_size=1, max_size=8))
    def test_statement_path_never_answers(self, resources, tokens):
        state = ListenerState(config=resources.listener_config)
        rtype, text = respond_to_statement(
            state, resources.bigram, tokens, " ".join(tokens)
        )
        assert rtype in (
            ResponseType.QUESTION_ON_FOCUS,
            ResponseType.PARTIAL_REPEAT,
            ResponseType.FORMULAIC_RESPONSE,
        )
        assert text

    @given(stage=st.integers(min_value=0, max_value=3), with_topic=st.booleans())
    def test_silence_path_only_prompts(self, resources, stage, with_topic):
        state = ListenerState(config=resources.listener_config)
        state.silence_stage = stage
        state.last_topic = "movie" if with_topic else None
        rtype, text = on_silence_expiry(state)
        assert rtype in (
            ResponseType.FOLLOW_UP_QUESTION,
            ResponseType.TOPIC_INTRODUCTION,
        )
        assert text


class TestConfigAndLoading:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            ListenerConfig(silence_threshold_s=0.0)
        with pytest.raises(ValueError):
            ListenerConfig(wh_threshold=1.5)
        with pytest.raises(ValueError):
            ListenerConfig(topics=())
        with pytest.raises(ValueError):
            ListenerConfig(formulaic_responses=())

    def test_qa_database_validation(self):
        with pytest.raises(ValueError):
            QADatabase(entries=())
        with pytest.raises(ValueError):
            QADatabase(entries=(QAEntry(patterns=((),), answer="A"),))

    def test_load_qa_database(self, tmp_path):
        path = tmp_path / "qa.json"
        path.write_text(
            '{"entries": [{"patterns": ["What time is it?"], "answer": "Noon."}]}',
            encoding="utf-8",
        )
        db = load_qa_database(str(path))
        assert db.entries[0].patterns == (("what", "time", "is", "it"),)
        assert db.entries[0].answer == "Noon."

    def test_load_topics(self, tmp_path):
        path = tmp_path / "topics.txt"
        path.write_text("A?\n\n  \nB?\n", encoding="utf-8")
        assert load_topics(str(path)) == ("A?", "B?")
        empty = tmp_path / "none.txt"
        empty.write_text("\n\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_topics(str(empty))

    def test_packaged_topics_start_with_music(self, resources):
        assert resources.listener_config.topics[0] == "Do you like music?"
