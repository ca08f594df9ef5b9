import numpy as np
import pytest

import codemix_sentiment.alignment as alignment
from codemix_sentiment.corpus import Corpus, LabeledTweet, SentimentLabel, write_task_file

# Each class has its own cue words and its own context words, so distributional
# embeddings separate the classes even on a small corpus.
LEXICON = {
    SentimentLabel.POSITIVE: (["accha", "badhiya", "mast", "love", "great", "khush"],
                              ["smile", "party", "jeet", "celebrate"]),
    SentimentLabel.NEGATIVE: (["bura", "bekar", "ganda", "hate", "worst", "dukhi"],
                              ["rona", "gussa", "haar", "problem"]),
    SentimentLabel.NEUTRAL: (["kal", "office", "news", "train", "update", "match"],
                             ["time", "schedule", "report", "ghar"]),
}
SHARED = ["yaar", "bhai", "the", "is", "aaj", "hai", "ka", "ki", "so", "abhi"]
HINDI_WORDS = {"accha", "badhiya", "mast", "khush", "bura", "bekar", "ganda", "dukhi", "kal",
               "jeet", "rona", "gussa", "haar", "ghar", "yaar", "bhai", "aaj", "hai", "ka", "ki",
               "abhi"}


def make_tweets(n, seed=0, start_id=1):
    rng = np.random.default_rng(seed)
    labels = list(LEXICON)
    tweets = []
    for i in range(n):
        label = labels[i % 3]
        cues, context = LEXICON[label]
        length = int(rng.integers(5, 12))
        tokens = []
        for _ in range(length):
            r = rng.random()
            pool = cues if r < 0.35 else context if r < 0.65 else SHARED
            tokens.append(str(rng.choice(pool)))
        tags = ["hi" if t in HINDI_WORDS else "en" for t in tokens]
        tweets.append(LabeledTweet(str(start_id + i), tuple(tokens), tuple(tags), label))
    return tweets


def write_task(tweets, path, split="train"):
    with open(path, "w", encoding="utf-8") as fh:
        write_task_file(Corpus(list(tweets), split), fh)
    return path


@pytest.fixture
def synthetic():
    return make_tweets


@pytest.fixture
def task_files(tmp_path):
    train = write_task(make_tweets(90, seed=1), tmp_path / "train.txt", "train")
    val = write_task(make_tweets(30, seed=2, start_id=1000), tmp_path / "val.txt", "validation")
    return train, val


# Every orthogonal mapping fitted anywhere in the session, as max |W^T W - I|.
ORTHOGONALITY_ERRORS = []


@pytest.fixture(autouse=True)
def record_mappings(monkeypatch):
    fit = alignment.orthogonal_map
    seen = []

    def recording(X, Z, dictionary):
        W = fit(X, Z, dictionary)
        seen.append(alignment.orthogonality_error(W))
        return W

    monkeypatch.setattr(alignment, "orthogonal_map", recording)
    yield
    ORTHOGONALITY_ERRORS.extend(seen)
    assert all(e < 1e-5 for e in seen), f"non-orthogonal mapping: {max(seen):.2e}"


def pytest_collection_modifyitems(items):
    # the orthogonality criterion summarizes mappings from all other tests, so it goes last
    last = [i for i in items if i.name == "test_02_orthogonality"]
    items[:] = [i for i in items if i.name != "test_02_orthogonality"] + last
