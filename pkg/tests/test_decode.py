import pytest

from absakit.constrain import accepts
from absakit.decode import (
    AdversarialScorer,
    DecodeOutcome,
    SeededScorer,
    TabularScorer,
    greedy_decode,
    leaky_target,
    memorize_target,
    stable_seed,
    unconstrained_greedy_decode,
)
from absakit.grammar import parse_target
from absakit.model import Task
from absakit.tokens import EOS, build_session


@pytest.fixture
def tasd(catalog, demo_sentence):
    session, vocab = build_session(demo_sentence.text, Task.TASD, catalog)
    return session, vocab


class TestTabular:
    def test_reproduces_memorized_target(self, catalog, demo_sentence, tasd):
        session, vocab = tasd
        inputs, target = memorize_target(demo_sentence, Task.TASD, catalog, vocab)
        scorer = TabularScorer({tuple(inputs): target}, len(vocab), vocab.id(EOS))
        outcome = greedy_decode(scorer, inputs, session)
        assert outcome.terminated_by == "eos"
        assert list(outcome.tokens) == target
        assert vocab.decode(outcome.tokens) == (
            "[A] tea [C] drinks quality [P] great [;] [A] soup [C] food prices [P] bad"
        )

    def test_unconstrained_also_reproduces_memorized_target(self, catalog, demo_sentence, tasd):
        _, vocab = tasd
        inputs, target = memorize_target(demo_sentence, Task.TASD, catalog, vocab)
        scorer = TabularScorer({tuple(inputs): target}, len(vocab), vocab.id(EOS))
        outcome = unconstrained_greedy_decode(scorer, inputs, len(target) + 8, vocab.id(EOS))
        assert list(outcome.tokens) == target

    def test_unknown_input_terminates_immediately(self, tasd, catalog):
        session, vocab = tasd
        scorer = TabularScorer({}, len(vocab), vocab.id(EOS))
        outcome = unconstrained_greedy_decode(scorer, [0], 16, vocab.id(EOS))
        assert outcome.tokens == (vocab.id(EOS),)


class TestConstrainedAdversarial:
    def test_mask_dominates_scorer(self, tasd):
        session, vocab = tasd
        scorer = AdversarialScorer(session, len(vocab), seed=7)
        outcome = greedy_decode(scorer, [], session)
        if outcome.terminated_by == "eos":
            assert accepts(outcome.tokens, session)

    def test_eos_terminated_outputs_parse_cleanly(self, tasd, catalog):
        session, vocab = tasd
        hits = 0
        for seed in range(40):
            outcome = greedy_decode(AdversarialScorer(session, len(vocab), seed), [], session)
            if outcome.terminated_by != "eos":
                continue
            hits += 1
            assert accepts(outcome.tokens, session)
            _, diagnostics = parse_target(vocab.decode(outcome.tokens), Task.TASD, catalog)
            assert diagnostics.dropped_fragments == 0
        assert hits > 0

    def test_unconstrained_adversarial_is_garbage(self, tasd, catalog):
        session, vocab = tasd
        scorer = AdversarialScorer(session, len(vocab), seed=3)
        outcome = unconstrained_greedy_decode(scorer, [], 32, vocab.id(EOS))
        parsed, diagnostics = parse_target(vocab.decode(outcome.tokens), Task.TASD, catalog)
        assert parsed == frozenset() or not diagnostics.all_zero


class TestTermination:
    def test_max_len_truncates(self, catalog):
        session, vocab = build_session(
            "Delicious tea but pricey soup", Task.TASD, catalog, max_len=3
        )
        scorer = SeededScorer(len(vocab), seed=1)
        outcome = greedy_decode(scorer, [], session)
        assert outcome.terminated_by == "max_len"
        assert outcome.steps == 3

    def test_steps_equal_token_count(self):
        with pytest.raises(ValueError):
            DecodeOutcome(tokens=(1, 2), terminated_by="eos", steps=3)


class TestDeterminism:
    def test_identical_seeds_identical_outcomes(self, tasd):
        session, vocab = tasd
        a = greedy_decode(AdversarialScorer(session, len(vocab), 11), [], session)
        b = greedy_decode(AdversarialScorer(session, len(vocab), 11), [], session)
        assert a == b

    def test_different_seeds_usually_differ(self, tasd):
        session, vocab = tasd
        outcomes = {
            greedy_decode(AdversarialScorer(session, len(vocab), seed), [], session).tokens
            for seed in range(8)
        }
        assert len(outcomes) > 1

    def test_stable_seed_is_stable(self):
        assert stable_seed("x", 1) == stable_seed("x", 1)
        assert stable_seed("x", 1) != stable_seed("x", 2)


class TestLeakScenario:
    def test_constrained_blocks_out_of_sentence_aspects(self, catalog, demo_sentence):
        session, vocab = build_session(demo_sentence.text, Task.TASD, catalog)
        inputs, target = leaky_target(demo_sentence, Task.TASD, catalog, vocab, seed=5)
        scorer = TabularScorer({tuple(inputs): target}, len(vocab), vocab.id(EOS))
        input_words = set(demo_sentence.text.split()) | {"it"}

        unconstrained = unconstrained_greedy_decode(scorer, inputs, 64, vocab.id(EOS))
        parsed, _ = parse_target(vocab.decode(unconstrained.tokens), Task.TASD, catalog)
        leaked = {
            w
            for t in parsed
            if t.aspect is not None and not t.aspect.is_implicit
            for w in t.aspect.text.split()
        } - input_words
        assert leaked, "leaky tabular scorer should emit out-of-sentence aspect tokens"

        constrained = greedy_decode(scorer, inputs, session)
        parsed, diagnostics = parse_target(vocab.decode(constrained.tokens), Task.TASD, catalog)
        for t in parsed:
            if t.aspect is not None and not t.aspect.is_implicit:
                assert set(t.aspect.text.split()) <= input_words
