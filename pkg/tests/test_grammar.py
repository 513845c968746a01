import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from absakit.grammar import (
    ExamplePair,
    MalformedCategoryPhrase,
    TaskTuple,
    UnknownPolarityWord,
    aspect_phrase,
    build_corpus_pairs,
    build_input,
    category_phrase,
    linearize,
    marker_prompt,
    parse_target,
    phrase_to_aspect,
    phrase_to_category,
    polarity_word,
    project_tuples,
    project_tuples_ordered,
    word_to_polarity,
)
from absakit.model import (
    AspectTerm,
    Category,
    Corpus,
    LabelCatalog,
    Polarity,
    RawCategory,
    Sentence,
    SentimentTuple,
    Split,
    Task,
)

TARGET_32 = "[A] tea [C] drinks quality [P] great [;] [A] soup [C] food prices [P] bad"


class TestElementPhrases:
    @pytest.mark.parametrize(
        "polarity,word",
        [(Polarity.POSITIVE, "great"), (Polarity.NEUTRAL, "ok"), (Polarity.NEGATIVE, "bad")],
    )
    def test_polarity_words(self, catalog, polarity, word):
        assert polarity_word(polarity, catalog) == word
        assert word_to_polarity(word, catalog) == polarity

    def test_unknown_polarity_word(self, catalog):
        with pytest.raises(UnknownPolarityWord):
            word_to_polarity("fine", catalog)

    @pytest.mark.parametrize(
        "label,phrase",
        [
            ("FOOD#QUALITY", "food quality"),
            ("DRINKS#STYLE_OPTIONS", "drinks style_options"),
            ("RESTAURANT#GENERAL", "restaurant general"),
        ],
    )
    def test_category_phrase_roundtrip(self, label, phrase):
        assert category_phrase(Category.parse(label)) == phrase
        assert phrase_to_category(phrase) == Category.parse(label)

    def test_malformed_category_phrase(self):
        with pytest.raises(MalformedCategoryPhrase):
            phrase_to_category("food")

    def test_aspect_phrases(self, catalog):
        assert aspect_phrase(AspectTerm.explicit("tea"), catalog) == "tea"
        assert aspect_phrase(AspectTerm.implicit(), catalog) == "it"
        assert phrase_to_aspect("it", catalog) == AspectTerm.implicit()
        assert phrase_to_aspect("tea", catalog) == AspectTerm.explicit("tea")


class TestProjection:
    def test_ate_projection(self, demo_tuples):
        assert project_tuples(demo_tuples, Task.ATE) == frozenset(
            {
                TaskTuple(aspect=AspectTerm.explicit("tea")),
                TaskTuple(aspect=AspectTerm.explicit("soup")),
            }
        )

    def test_empty_projection(self):
        for task in Task:
            assert project_tuples((), task) == frozenset()

    def test_acsa_projection_deduplicates(self):
        triplets = [
            SentimentTuple(
                AspectTerm.explicit("tea"), Category.parse("DRINKS#QUALITY"), Polarity.POSITIVE
            ),
            SentimentTuple(
                AspectTerm.explicit("coffee"), Category.parse("DRINKS#QUALITY"), Polarity.POSITIVE
            ),
        ]
        assert project_tuples(triplets, Task.ACSA) == frozenset(
            {TaskTuple(category=Category.parse("DRINKS#QUALITY"), polarity=Polarity.POSITIVE)}
        )

    def test_projection_is_idempotent_and_order_independent(self, demo_tuples):
        once = project_tuples(demo_tuples, Task.ACTE)
        assert project_tuples(reversed(demo_tuples), Task.ACTE) == once


class TestBuildInput:
    @pytest.mark.parametrize(
        "task,expected",
        [
            (Task.TASD, "Delicious tea but pricey soup | [A] [C] [P]"),
            (Task.ATE, "Delicious tea but pricey soup | [A]"),
            (Task.ACSA, "Delicious tea but pricey soup | [C] [P]"),
        ],
    )
    def test_examples(self, task, expected):
        assert build_input("Delicious tea but pricey soup", task) == expected


class TestLinearize:
    def test_worked_example(self, catalog, demo_tuples):
        projected = project_tuples_ordered(demo_tuples, Task.TASD)
        assert linearize(projected, Task.TASD, catalog) == TARGET_32

    def test_single_tuple_has_no_separator(self, catalog, demo_tuples):
        projected = project_tuples_ordered(demo_tuples[:1], Task.TASD)
        assert linearize(projected, Task.TASD, catalog) == "[A] tea [C] drinks quality [P] great"

    def test_e2e_projection_of_worked_example(self, catalog, demo_tuples):
        projected = project_tuples_ordered(demo_tuples, Task.E2E)
        assert linearize(projected, Task.E2E, catalog) == "[A] tea [P] great [;] [A] soup [P] bad"

    def test_empty_list_gives_empty_string(self, catalog):
        assert linearize((), Task.TASD, catalog) == ""


class TestParseTarget:
    def test_worked_example_roundtrip(self, catalog, demo_tuples):
        parsed, diagnostics = parse_target(TARGET_32, Task.TASD, catalog)
        assert parsed == project_tuples(demo_tuples, Task.TASD)
        assert diagnostics.all_zero

    def test_duplicates_removed(self, catalog):
        text = "[A] tea [C] drinks quality [P] great [;] [A] tea [C] drinks quality [P] great"
        parsed, diagnostics = parse_target(text, Task.TASD, catalog)
        assert len(parsed) == 1
        assert diagnostics.duplicate_tuples_removed == 1
        assert diagnostics.dropped_fragments == 0

    def test_missing_marker_drops_fragment(self, catalog):
        parsed, diagnostics = parse_target("[A] tea [C] drinks quality", Task.TASD, catalog)
        assert parsed == frozenset()
        assert diagnostics.dropped_fragments == 1

    def test_markers_out_of_order_dropped(self, catalog):
        text = "[C] drinks quality [A] tea [P] great"
        parsed, diagnostics = parse_target(text, Task.TASD, catalog)
        assert parsed == frozenset()
        assert diagnostics.dropped_fragments == 1

    def test_unknown_polarity_word_drops_fragment(self, catalog):
        text = "[A] tea [C] drinks quality [P] fine"
        parsed, diagnostics = parse_target(text, Task.TASD, catalog)
        assert parsed == frozenset()
        assert diagnostics.dropped_fragments == 1
        assert diagnostics.unknown_polarity_words == 1

    def test_repeated_known_polarity_words_take_first(self, catalog):
        text = "[A] tea [C] drinks quality [P] great bad"
        parsed, diagnostics = parse_target(text, Task.TASD, catalog)
        assert parsed == frozenset(
            {
                TaskTuple(
                    aspect=AspectTerm.explicit("tea"),
                    category=Category.parse("DRINKS#QUALITY"),
                    polarity=Polarity.POSITIVE,
                )
            }
        )
        assert diagnostics.dropped_fragments == 0

    def test_noncatalog_category_retained_and_counted(self, catalog):
        parsed, diagnostics = parse_target("[A] tea [C] pet policy [P] great", Task.TASD, catalog)
        (only,) = parsed
        assert only.category == Category.parse("PET#POLICY")
        assert diagnostics.noncatalog_categories == 1
        assert diagnostics.dropped_fragments == 0

    def test_unmappable_category_phrase_becomes_raw(self, catalog):
        parsed, diagnostics = parse_target("[A] tea [C] drinks [P] great", Task.TASD, catalog)
        (only,) = parsed
        assert only.category == RawCategory("DRINKS")
        assert diagnostics.noncatalog_categories == 1

    def test_empty_content_drops_fragment(self, catalog):
        parsed, diagnostics = parse_target("[A] [C] drinks quality [P] great", Task.TASD, catalog)
        assert parsed == frozenset()
        assert diagnostics.dropped_fragments == 1

    def test_empty_string_parses_clean(self, catalog):
        parsed, diagnostics = parse_target("", Task.TASD, catalog)
        assert parsed == frozenset()
        assert diagnostics.all_zero

    def test_implicit_word_maps_to_implicit(self, catalog):
        parsed, _ = parse_target("[A] it [C] ambience general [P] ok", Task.TASD, catalog)
        (only,) = parsed
        assert only.aspect.is_implicit


# --- round-trip property ------------------------------------------------------

WORDS = ["Delicious", "tea", "but", "pricey", "soup", "Green", "Curry", "Ramen"]


@st.composite
def gold_tuples(draw):
    catalog = LabelCatalog()
    n = draw(st.integers(min_value=1, max_value=5))
    tuples = []
    for _ in range(n):
        if draw(st.booleans()):
            start = draw(st.integers(min_value=0, max_value=len(WORDS) - 1))
            length = draw(st.integers(min_value=1, max_value=3))
            aspect = AspectTerm.explicit(" ".join(WORDS[start : start + length]))
        else:
            aspect = AspectTerm.implicit()
        category = draw(st.sampled_from(sorted(catalog.categories, key=str)))
        polarity = draw(st.sampled_from(list(Polarity)))
        tuples.append(SentimentTuple(aspect, category, polarity))
    return tuples


@settings(max_examples=300, deadline=None)
@given(tuples=gold_tuples(), task=st.sampled_from(list(Task)))
def test_roundtrip_property(tuples, task):
    catalog = LabelCatalog()
    projected = project_tuples_ordered(tuples, task)
    text = linearize(projected, task, catalog)
    parsed, diagnostics = parse_target(text, task, catalog)
    assert parsed == frozenset(projected)
    assert diagnostics.all_zero


@settings(max_examples=200, deadline=None)
@given(tuples=gold_tuples(), task=st.sampled_from(list(Task)))
def test_linearized_targets_are_accepted_by_the_automaton(tuples, task):
    from absakit.constrain import accepts
    from absakit.tokens import EOS, build_session, tokenize

    catalog = LabelCatalog()
    projected = project_tuples_ordered(tuples, task)
    text = linearize(projected, task, catalog)
    session, vocab = build_session(" ".join(WORDS), task, catalog)
    sequence = vocab.ensure_all(tokenize(text))
    assert accepts(sequence + [vocab.id(EOS)], session)


# --- pair construction ---------------------------------------------------------


class TestBuildCorpusPairs:
    def test_single_task_worked_example(self, demo_corpus, catalog):
        pairs = build_corpus_pairs(demo_corpus, [Task.TASD], catalog)
        assert len(pairs) == 1
        assert pairs[0].input_text == "Delicious tea but pricey soup | [A] [C] [P]"
        assert pairs[0].target_text == TARGET_32
        assert pairs[0].task is Task.TASD
        assert pairs[0].language == "en"

    def test_all_six_tasks_have_distinct_prompts(self, demo_corpus, catalog):
        pairs = build_corpus_pairs(demo_corpus, list(Task), catalog)
        assert len(pairs) == 6
        prompts = {p.input_text for p in pairs}
        assert len(prompts) == 6

    def test_empty_sentences_excluded_by_default(self, catalog):
        corpus = Corpus(
            (Sentence(id="e", language="en", text="Nice.", tuples=()),), Split.TRAIN, "en"
        )
        assert build_corpus_pairs(corpus, [Task.TASD], catalog) == []
        pairs = build_corpus_pairs(corpus, [Task.TASD], catalog, include_empty=True)
        assert len(pairs) == 1
        assert pairs[0].target_text == ""

    def test_target_order_follows_gold_order(self, catalog, demo_tuples):
        reversed_sentence = Sentence(
            id="r", language="en", text="Delicious tea but pricey soup",
            tuples=tuple(reversed(demo_tuples)),
        )
        corpus = Corpus((reversed_sentence,), Split.TRAIN, "en")
        (pair,) = build_corpus_pairs(corpus, [Task.TASD], catalog)
        assert pair.target_text == (
            "[A] soup [C] food prices [P] bad [;] [A] tea [C] drinks quality [P] great"
        )

    def test_example_pair_validates_prompt_suffix(self):
        with pytest.raises(ValueError):
            ExamplePair(
                input_text="no prompt here",
                target_text="",
                source_sentence_id="x",
                task=Task.TASD,
                language="en",
            )

    def test_marker_prompt(self):
        assert marker_prompt(Task.E2E) == "[A] [P]"
