import io
import json
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codemix_sentiment.corpus import (
    LABELS,
    Corpus,
    LabeledTweet,
    ParseError,
    SentimentLabel,
    filter_devanagari,
    parse_task_file,
    prepare_corpus,
    read_raw_tweets,
    read_tokenized,
    tokenize,
    unlabeled_corpus,
    write_task_file,
    write_tokenized,
)


def parse(text, split=None):
    return parse_task_file(io.StringIO(text), split)


class TestLabels:
    def test_three_values_in_fixed_order(self):
        assert [l.value for l in LABELS] == ["positive", "negative", "neutral"]
        assert sorted(reversed(LABELS)) == list(LABELS)

    def test_parse_rejects_unknown(self):
        with pytest.raises(ValueError):
            SentimentLabel.parse("happy")


class TestParseTaskFile:
    def test_single_record(self):
        corpus = parse("meta 1 positive\nnice\ten\ndin\thi\n")
        (tweet,) = corpus.tweets
        assert tweet == LabeledTweet("1", ("nice", "din"), ("en", "hi"), SentimentLabel.POSITIVE)
        assert corpus.split == "train"

    def test_empty_stream(self):
        assert len(parse("")) == 0

    def test_unknown_label_names_line(self):
        with pytest.raises(ParseError) as exc:
            parse("meta 1 positive\nok\ten\n\nmeta 2 happy\nwow\ten\n")
        assert exc.value.line == 4
        assert "line 4" in str(exc.value)

    def test_malformed_meta(self):
        with pytest.raises(ParseError) as exc:
            parse("metadata 1 positive\nx\ten\n")
        assert exc.value.line == 1

    def test_token_without_tag(self):
        with pytest.raises(ParseError) as exc:
            parse("meta 1 neutral\nalpha\ten\nbeta\n")
        assert exc.value.line == 3

    def test_unlabeled_inferred(self):
        corpus = parse("meta 7\nkya\thi\nbaat\thi\n")
        assert corpus.split == "unlabeled"
        assert corpus.tweets[0].label is None

    def test_labeled_split_requires_labels(self):
        with pytest.raises(ValueError):
            parse("meta 7\nkya\thi\n", split="validation")

    def test_order_preserved(self, synthetic):
        tweets = synthetic(20, seed=5)
        buf = io.StringIO()
        write_task_file(Corpus(tweets), buf)
        assert [t.id for t in parse(buf.getvalue())] == [t.id for t in tweets]

    def test_tag_aliases(self):
        corpus = parse("meta 3 negative\nye\tHin\nis\tEng\n!\tO\n")
        assert corpus.tweets[0].lang_tags == ("hi", "en", "univ")


_token = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Zs", "Zl", "Zp", "Cc")),
                 min_size=1, max_size=8)
_tweet = st.builds(
    lambda i, toks, tags, label: LabeledTweet(str(i), tuple(toks), tuple(tags[:len(toks)]), label),
    st.integers(0, 10 ** 6),
    st.lists(_token, min_size=1, max_size=6),
    st.lists(st.sampled_from(["en", "hi", "mixed", "univ"]), min_size=6, max_size=6),
    st.sampled_from(LABELS),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(_tweet, max_size=5))
def test_task_file_round_trip(tweets):
    corpus = Corpus(tweets, "train")
    buf = io.StringIO()
    write_task_file(corpus, buf)
    again = parse(buf.getvalue(), "train")
    assert again == corpus
    buf2 = io.StringIO()
    write_task_file(again, buf2)
    assert buf2.getvalue() == buf.getvalue()


class TestDevanagari:
    def test_examples(self):
        assert filter_devanagari(["main happy hoon", "मैं happy hoon"]) == ["main happy hoon"]
        assert filter_devanagari(["hello 😊 #yolo"]) == ["hello 😊 #yolo"]
        assert filter_devanagari([]) == []

    @given(st.lists(st.text(max_size=12)))
    def test_idempotent_and_order_preserving(self, tweets):
        once = filter_devanagari(tweets)
        assert filter_devanagari(once) == once
        assert once == [t for t in tweets if not re.search("[ऀ-ॿ]", t)]


class TestTokenize:
    def test_examples(self):
        assert tokenize("Nice DIN @raj http://x.co") == ["nice", "din", "<user>", "<url>"]
        assert tokenize("#Bharat zindabad!!") == ["bharat", "zindabad", "!!"]
        assert tokenize("") == []

    def test_www_url_and_trailing_punctuation(self):
        assert tokenize("dekho www.abc.com abhi, yaar...") == ["dekho", "<url>", "abhi", ",",
                                                              "yaar", "..."]

    def test_flooding_not_normalized(self):
        assert tokenize("sooooo good") == ["sooooo", "good"]

    @given(st.text(max_size=40))
    def test_no_whitespace_in_tokens(self, text):
        assert all(tok and not any(c.isspace() for c in tok) for tok in tokenize(text))

    @given(st.text(alphabet="abcXYZ @#!.:/ hw", max_size=40))
    def test_alphabetic_content_is_subsequence(self, text):
        letters = [c for tok in tokenize(text) if tok not in ("<url>", "<user>")
                   for c in tok if c.isalpha()]
        source = iter(c for c in text.lower() if c.isalpha())
        assert all(any(c == s for s in source) for c in letters)

    @given(st.text(max_size=40))
    def test_idempotent_on_joined_output(self, text):
        toks = tokenize(text)
        assert tokenize(" ".join(toks)) == toks


class TestRawAndCleaned:
    def test_json_records(self):
        lines = [json.dumps({"text": "Kya baat hai"}), "plain tweet", ""]
        assert read_raw_tweets(lines) == ["Kya baat hai", "plain tweet"]

    def test_cleaned_round_trip(self):
        sents = [["aaj", "mast", "!"], ["<user>", "ok"]]
        buf = io.StringIO()
        write_tokenized(sents, buf)
        assert read_tokenized(io.StringIO(buf.getvalue())) == sents

    def test_prepare_drops_empty_and_devanagari(self):
        out = prepare_corpus(["Hello @x", "नमस्ते", "   ", "Acha din"])
        assert out == [["hello", "<user>"], ["acha", "din"]]

    def test_unlabeled_corpus(self):
        corpus = unlabeled_corpus([["a", "b"], []])
        assert corpus.split == "unlabeled" and len(corpus) == 1
