import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from absakit import constrain
from absakit.constrain import (
    BAG,
    TRIE,
    CandidateSets,
    ConstraintSession,
    IllFormedPrefix,
    InvalidSessionConfig,
    SpecialTokens,
    StateClass,
    accepts,
    allowed_tokens,
    classify_state,
)
from absakit.grammar import category_phrase
from absakit.model import LabelCatalog, Task
from absakit.tokens import EOS, Vocab, build_session, tokenize

DEMO_TEXT = "Delicious tea but pricey soup"


@pytest.fixture
def tasd(catalog):
    session, vocab = build_session(DEMO_TEXT, Task.TASD, catalog)
    return session, vocab


def encode(vocab: Vocab, text: str) -> list[int]:
    return [vocab.id(t) for t in tokenize(text)]


def names(vocab: Vocab, ids) -> set[str]:
    return {vocab.token(i) for i in ids}


class TestStateClassification:
    def test_empty_prefix_is_start(self, tasd):
        session, _ = tasd
        assert classify_state([], session).kind is StateClass.START

    def test_open_letter_awaits_close(self, tasd):
        session, vocab = tasd
        state = classify_state(encode(vocab, "[A"), session)
        assert state.kind is StateClass.AWAIT_CLOSE
        assert state.symbol == "A"

    def test_content_then_open_awaits_next_letter(self, tasd):
        session, vocab = tasd
        state = classify_state(encode(vocab, "[A] tea ["), session)
        assert state.kind is StateClass.AWAIT_LETTER
        assert state.symbol == "C"

    def test_separator_state(self, tasd):
        session, vocab = tasd
        prefix = encode(vocab, "[A] tea [C] drinks quality [P] great [;]")
        assert classify_state(prefix, session).kind is StateClass.AFTER_SEP

    def test_ill_formed_prefix_rejected(self, tasd):
        session, vocab = tasd
        with pytest.raises(IllFormedPrefix):
            classify_state(encode(vocab, "tea"), session)
        with pytest.raises(IllFormedPrefix):
            classify_state(encode(vocab, "[C"), session)  # first marker must be A

    def test_tokens_after_eos_rejected(self, tasd):
        session, vocab = tasd
        prefix = encode(vocab, "[A] tea [C] drinks quality [P] great") + [
            vocab.id(EOS),
            vocab.id("tea"),
        ]
        with pytest.raises(IllFormedPrefix):
            classify_state(prefix, session)


# The thirteen generation states and their candidate sets, for the full
# triplet task over the reference tokenizer. ``…`` rows are realized with a
# concrete well-formed prefix in that state class.
CONFORMANCE_ROWS = [
    ("", {"["}),
    ("[A", {"]"}),
    ("[A] tea [C", {"]"}),
    ("[A] tea [C] drinks quality [P", {"]"}),
    ("[A] tea [C] drinks quality [P] great [;", {"]"}),
    ("[A]", "INPUT"),
    ("[A] tea [C]", "CATEGORIES"),
    ("[A] tea [C] drinks quality [P]", {"great", "ok", "bad"}),
    ("[A] tea", "INPUT+OPEN"),
    ("[A] tea [C] drinks", "CATEGORIES+OPEN"),
    ("[A] tea [C] drinks quality [P] great", {"great", "ok", "bad", EOS, "["}),
    ("[A] tea [", {"C"}),
    ("[A] tea [C] drinks quality [", {"P"}),
    ("[A] tea [C] drinks quality [P] great [", {";"}),
    ("[A] tea [C] drinks quality [P] great [;]", {"["}),
    ("[A] tea [C] drinks quality [P] great [;] [", {"A"}),
]


class TestTableConformance:
    def expected_set(self, spec, catalog):
        input_words = set(DEMO_TEXT.split()) | {"it"}
        category_words = {w for c in catalog.categories for w in category_phrase(c).split()}
        if spec == "INPUT":
            return input_words
        if spec == "CATEGORIES":
            return category_words
        if spec == "INPUT+OPEN":
            return input_words | {"["}
        if spec == "CATEGORIES+OPEN":
            return category_words | {"["}
        return spec

    @pytest.mark.parametrize("prefix_text,expected", CONFORMANCE_ROWS)
    def test_row(self, tasd, catalog, prefix_text, expected):
        session, vocab = tasd
        allowed = allowed_tokens(encode(vocab, prefix_text), session)
        assert names(vocab, allowed) == self.expected_set(expected, catalog)

    def test_eos_only_after_last_marker_content(self, tasd, catalog):
        session, vocab = tasd
        for prefix_text, _ in CONFORMANCE_ROWS:
            allowed = names(vocab, allowed_tokens(encode(vocab, prefix_text), session))
            ends_in_p_content = prefix_text.endswith("great") and "[P]" in prefix_text
            assert (EOS in allowed) == ends_in_p_content


class TestAllowedTokens:
    def test_aspect_content_includes_implicit_word(self, tasd):
        session, vocab = tasd
        allowed = allowed_tokens(encode(vocab, "[A]"), session)
        assert names(vocab, allowed) == {"Delicious", "tea", "but", "pricey", "soup", "it"}

    def test_allow_empty_admits_eos_at_start(self, catalog):
        session, vocab = build_session(DEMO_TEXT, Task.TASD, catalog, allow_empty=True)
        assert names(vocab, allowed_tokens([], session)) == {"[", EOS}

    def test_non_last_marker_never_offers_eos(self, tasd):
        session, vocab = tasd
        allowed = allowed_tokens(encode(vocab, "[A] tea tea"), session)
        assert EOS not in names(vocab, allowed)


class TestAccepts:
    def test_worked_example_target_is_grammatical(self, tasd, catalog):
        session, vocab = tasd
        text = "[A] tea [C] drinks quality [P] great"
        assert accepts(encode(vocab, text) + [vocab.id(EOS)], session)

    def test_incomplete_tuple_rejected(self, tasd):
        session, vocab = tasd
        assert not accepts(encode(vocab, "[A] tea") + [vocab.id(EOS)], session)

    def test_out_of_sentence_aspect_rejected(self, tasd):
        session, vocab = tasd
        vocab.ensure("great")
        text = "[A] great [C] drinks quality [P] great"
        assert not accepts(encode(vocab, text) + [vocab.id(EOS)], session)

    def test_sequence_without_eos_rejected(self, tasd):
        session, vocab = tasd
        assert not accepts(encode(vocab, "[A] tea [C] drinks quality [P] great"), session)

    def test_empty_sequence_rejected(self, tasd):
        session, _ = tasd
        assert not accepts([], session)


class TestTrieMode:
    def test_only_contiguous_ngrams_continue(self, catalog):
        session, vocab = build_session("Green Curry Ramen", Task.ATE, catalog, mode=TRIE)
        allowed = allowed_tokens(encode(vocab, "[A] Green"), session)
        assert "Curry" in names(vocab, allowed)
        assert "Ramen" not in names(vocab, allowed)  # "Green Ramen" is not in the review

    def test_bag_mode_allows_blended_phrases(self, catalog):
        session, vocab = build_session("Green Curry Ramen", Task.ATE, catalog, mode=BAG)
        allowed = allowed_tokens(encode(vocab, "[A] Green"), session)
        assert "Ramen" in names(vocab, allowed)

    def test_open_only_at_phrase_boundaries(self, catalog):
        session, vocab = build_session("Green Curry Ramen", Task.ACTE, catalog, mode=TRIE)
        mid_category = encode(vocab, "[A] Green [C] drinks")
        allowed = names(vocab, allowed_tokens(mid_category, session))
        # "drinks" alone is no complete catalog phrase: must continue it.
        assert "[" not in allowed
        assert allowed == {"quality", "prices", "style_options"}
        done_category = encode(vocab, "[A] Green [C] drinks quality")
        assert "[" in names(vocab, allowed_tokens(done_category, session))

    def test_trie_accepts_exact_phrase_only(self, catalog):
        session, vocab = build_session("Green Curry Ramen", Task.ATE, catalog, mode=TRIE)
        good = encode(vocab, "[A] Green Curry Ramen") + [vocab.id(EOS)]
        blended = encode(vocab, "[A] Green Ramen") + [vocab.id(EOS)]
        assert accepts(good, session)
        assert not accepts(blended, session)


class TestSessionValidation:
    def test_overlapping_special_ids_rejected(self):
        with pytest.raises(InvalidSessionConfig):
            SpecialTokens(open=0, close=0, sep=2, eos=3, letters={"A": 4})

    def test_content_overlapping_specials_rejected(self):
        specials = SpecialTokens(open=0, close=1, sep=2, eos=3, letters={"A": 4})
        with pytest.raises(InvalidSessionConfig):
            ConstraintSession(
                marker_order=("A",),
                specials=specials,
                candidates=CandidateSets(mode=BAG, content={"A": frozenset({0, 9})}),
            )

    def test_empty_content_set_rejected(self):
        with pytest.raises(InvalidSessionConfig):
            CandidateSets(mode=BAG, content={"A": frozenset()})

    def test_marker_order_must_be_ordered_subset(self):
        specials = SpecialTokens(open=0, close=1, sep=2, eos=3, letters={"A": 4, "C": 5, "P": 6})
        candidates = CandidateSets(mode=BAG, content={"A": frozenset({7}), "P": frozenset({8})})
        with pytest.raises(InvalidSessionConfig):
            ConstraintSession(marker_order=("P", "A"), specials=specials, candidates=candidates)

    def test_missing_candidate_marker_rejected(self, catalog):
        specials = SpecialTokens(open=0, close=1, sep=2, eos=3, letters={"A": 4, "C": 5, "P": 6})
        candidates = CandidateSets(mode=BAG, content={"A": frozenset({7})})
        with pytest.raises(InvalidSessionConfig):
            ConstraintSession(marker_order=("A", "C"), specials=specials, candidates=candidates)

    def test_empty_phrase_rejected(self):
        with pytest.raises(InvalidSessionConfig):
            CandidateSets(mode=TRIE, phrases={"A": ((),)})

    def test_nonpositive_max_len_rejected(self, catalog):
        specials = SpecialTokens(open=0, close=1, sep=2, eos=3, letters={"A": 4})
        candidates = CandidateSets(mode=BAG, content={"A": frozenset({7})})
        with pytest.raises(InvalidSessionConfig):
            ConstraintSession(
                marker_order=("A",), specials=specials, candidates=candidates, max_len=0
            )


# --- properties ----------------------------------------------------------------


@st.composite
def random_walk(draw):
    catalog_words = draw(
        st.lists(st.sampled_from(["alpha", "beta", "gamma"]), min_size=1, max_size=3, unique=True)
    )
    steps = draw(st.lists(st.integers(min_value=0, max_value=10 ** 6), min_size=0, max_size=40))
    task = draw(st.sampled_from(list(Task)))
    mode = draw(st.sampled_from([BAG, TRIE]))
    return catalog_words, steps, task, mode


@settings(max_examples=200, deadline=None)
@given(case=random_walk())
def test_liveness_allowed_never_empty_before_eos(case):
    words, steps, task, mode = case
    catalog = LabelCatalog()
    session, vocab = build_session(" ".join(words), task, catalog, mode=mode)
    prefix: list[int] = []
    for pick in steps:
        allowed = allowed_tokens(prefix, session)
        assert allowed, f"dead end after {vocab.decode(prefix)!r}"
        token = sorted(allowed)[pick % len(allowed)]
        if token == vocab.id(EOS):
            break
        prefix.append(token)


@settings(max_examples=150, deadline=None)
@given(case=random_walk())
def test_leakage_exclusion_in_aspect_content(case):
    words, steps, task, mode = case
    catalog = LabelCatalog()
    if "A" not in task.marker_order or mode == TRIE:
        task = Task.TASD
        mode = BAG
    session, vocab = build_session(" ".join(words), task, catalog, mode=mode)
    aspect_content = session.candidates.content["A"]
    prefix: list[int] = []
    for pick in steps:
        state = classify_state(prefix, session)
        allowed = allowed_tokens(prefix, session)
        if state.kind is StateClass.CONTENT and state.symbol == "A":
            assert allowed <= aspect_content | {session.specials.open, session.specials.eos}
        token = sorted(allowed)[pick % len(allowed)]
        if token == vocab.id(EOS):
            break
        prefix.append(token)


@settings(max_examples=150, deadline=None)
@given(case=random_walk())
def test_every_walk_prefix_classifies_cleanly(case):
    words, steps, task, mode = case
    catalog = LabelCatalog()
    session, vocab = build_session(" ".join(words), task, catalog, mode=mode)
    prefix: list[int] = []
    for pick in steps:
        allowed = allowed_tokens(prefix, session)
        token = sorted(allowed)[pick % len(allowed)]
        prefix.append(token)
        classify_state(prefix, session)  # must never raise on reachable prefixes
        if token == vocab.id(EOS):
            break
