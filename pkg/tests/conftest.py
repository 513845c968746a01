import pytest

from absakit.model import (
    AspectTerm,
    Category,
    Corpus,
    LabelCatalog,
    Polarity,
    Sentence,
    SentimentTuple,
    Split,
)

DEMO_TEXT = "Delicious tea but pricey soup"

FIXTURE_XML = """<?xml version="1.0" encoding="UTF-8"?>
<Reviews>
  <Review rid="1">
    <sentences>
      <sentence id="1:0">
        <text>Delicious tea but pricey soup</text>
        <Opinions>
          <Opinion target="tea" category="DRINKS#QUALITY" polarity="positive" from="10" to="13"/>
          <Opinion target="soup" category="FOOD#PRICES" polarity="negative" from="25" to="29"/>
        </Opinions>
      </sentence>
      <sentence id="1:1">
        <text>Would not go back.</text>
        <Opinions>
          <Opinion target="NULL" category="RESTAURANT#GENERAL" polarity="negative" from="0" to="0"/>
        </Opinions>
      </sentence>
    </sentences>
  </Review>
</Reviews>
"""


@pytest.fixture
def catalog() -> LabelCatalog:
    return LabelCatalog()


@pytest.fixture
def demo_tuples() -> tuple[SentimentTuple, SentimentTuple]:
    return (
        SentimentTuple(
            AspectTerm.explicit("tea", (10, 13)),
            Category.parse("DRINKS#QUALITY"),
            Polarity.POSITIVE,
        ),
        SentimentTuple(
            AspectTerm.explicit("soup", (25, 29)),
            Category.parse("FOOD#PRICES"),
            Polarity.NEGATIVE,
        ),
    )


@pytest.fixture
def demo_sentence(demo_tuples) -> Sentence:
    return Sentence(id="s1", language="en", text=DEMO_TEXT, tuples=demo_tuples)


@pytest.fixture
def demo_corpus(demo_sentence) -> Corpus:
    return Corpus(sentences=(demo_sentence,), split=Split.TRAIN, language="en")
