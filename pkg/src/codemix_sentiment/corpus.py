"""Task-data parsing, raw tweet ingestion and tokenization."""

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Sequence, TextIO, Tuple

__all__ = [
    "SentimentLabel",
    "LabeledTweet",
    "Corpus",
    "ParseError",
    "parse_task_file",
    "write_task_file",
    "filter_devanagari",
    "has_devanagari",
    "tokenize",
    "read_raw_tweets",
    "read_tokenized",
    "write_tokenized",
]


class SentimentLabel(enum.Enum):
    """The three sentiment classes; definition order is the tie-break order."""

    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"

    @property
    def rank(self) -> int:
        return _LABEL_ORDER.index(self)

    def __lt__(self, other):
        if not isinstance(other, SentimentLabel):
            return NotImplemented
        return self.rank < other.rank

    @classmethod
    def parse(cls, value: str) -> "SentimentLabel":
        return cls(value.strip().lower())


_LABEL_ORDER = list(SentimentLabel)
LABELS: Tuple[SentimentLabel, ...] = tuple(_LABEL_ORDER)

LANG_TAGS = ("en", "hi", "mixed", "univ")
# aliases seen in the distributed shared-task files
_TAG_ALIASES = {
    "en": "en",
    "eng": "en",
    "hi": "hi",
    "hin": "hi",
    "mixed": "mixed",
    "univ": "univ",
    "o": "univ",
}

SPLITS = ("train", "validation", "test", "unlabeled")


class ParseError(ValueError):
    """Malformed input, optionally carrying the 1-based line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class LabeledTweet:
    id: str
    tokens: Tuple[str, ...]
    lang_tags: Optional[Tuple[str, ...]] = None
    label: Optional[SentimentLabel] = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.lang_tags is not None:
            object.__setattr__(self, "lang_tags", tuple(self.lang_tags))
            if len(self.lang_tags) != len(self.tokens):
                raise ValueError(
                    f"tweet {self.id}: {len(self.lang_tags)} language tags "
                    f"for {len(self.tokens)} tokens"
                )
        for tok in self.tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise ValueError(f"tweet {self.id}: invalid token {tok!r}")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def normalized_tokens(self) -> List[str]:
        """Tokens after re-running :func:`tokenize` over the joined text."""
        return tokenize(self.text)


@dataclass
class Corpus:
    tweets: List[LabeledTweet] = field(default_factory=list)
    split: str = "train"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}; expected one of {SPLITS}")
        labeled = self.split != "unlabeled"
        for tweet in self.tweets:
            if labeled and tweet.label is None:
                raise ValueError(f"{self.split} split requires a label on tweet {tweet.id}")
            if not labeled and tweet.label is not None:
                raise ValueError(f"unlabeled split carries a label on tweet {tweet.id}")

    def __len__(self):
        return len(self.tweets)

    def __iter__(self) -> Iterator[LabeledTweet]:
        return iter(self.tweets)

    def __getitem__(self, item):
        return self.tweets[item]

    @property
    def labels(self) -> List[SentimentLabel]:
        return [t.label for t in self.tweets]

    def token_lists(self, normalize: bool = True) -> List[List[str]]:
        if normalize:
            return [t.normalized_tokens() for t in self.tweets]
        return [list(t.tokens) for t in self.tweets]


def _normalize_tag(tag: str, lineno: int) -> str:
    try:
        return _TAG_ALIASES[tag.strip().lower()]
    except KeyError:
        raise ParseError(f"unknown language tag {tag!r}", lineno) from None


def _iter_records(stream: Iterable[str]) -> Iterator[List[Tuple[int, str]]]:
    record: List[Tuple[int, str]] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if record:
                yield record
                record = []
            continue
        record.append((lineno, line))
    if record:
        yield record


def parse_task_file(stream: Iterable[str], split: Optional[str] = None) -> Corpus:
    """Parse the shared-task CoNLL-like format into a :class:`Corpus`.

    Records are separated by blank lines. The first line of a record is
    ``meta <id> [<label>]`` and each following line is ``<token>\\t<tag>``.
    When ``split`` is None it is inferred: ``train`` if every record carries a
    label, ``unlabeled`` if none does.
    """
    tweets = []
    for record in _iter_records(stream):
        lineno, head = record[0]
        fields = head.split()
        if len(fields) not in (2, 3) or fields[0] != "meta":
            raise ParseError(f"malformed meta line {head!r}", lineno)
        label = None
        if len(fields) == 3:
            try:
                label = SentimentLabel.parse(fields[2])
            except ValueError:
                raise ParseError(f"unknown sentiment label {fields[2]!r}", lineno) from None
        tokens, tags = [], []
        for lineno, line in record[1:]:
            token, sep, tag = line.rpartition("\t")
            if not sep or not token or not tag.strip():
                raise ParseError(f"token line without language tag: {line!r}", lineno)
            if any(ch.isspace() for ch in token):
                raise ParseError(f"token contains whitespace: {token!r}", lineno)
            tokens.append(token)
            tags.append(_normalize_tag(tag, lineno))
        tweets.append(LabeledTweet(fields[1], tokens, tags, label))

    if split is None:
        n_labeled = sum(t.label is not None for t in tweets)
        if n_labeled and n_labeled != len(tweets):
            raise ParseError("file mixes labeled and unlabeled records")
        split = "unlabeled" if tweets and not n_labeled else "train"
    return Corpus(tweets, split)


def write_task_file(corpus: Corpus, stream: TextIO) -> None:
    for i, tweet in enumerate(corpus):
        if i:
            stream.write("\n")
        meta = f"meta\t{tweet.id}"
        if tweet.label is not None:
            meta += f"\t{tweet.label.value}"
        stream.write(meta + "\n")
        tags = tweet.lang_tags or ("univ",) * len(tweet.tokens)
        for tok, tag in zip(tweet.tokens, tags):
            stream.write(f"{tok}\t{tag}\n")


_DEVANAGARI = re.compile("[\u0900-\u097f]")


def has_devanagari(text: str) -> bool:
    return _DEVANAGARI.search(text) is not None


def filter_devanagari(tweets: Sequence[str]) -> List[str]:
    """Drop every tweet containing a code point from the Devanagari block."""
    return [t for t in tweets if not has_devanagari(t)]


_URL = re.compile(r"^(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION = re.compile(r"^@\w+")
_PIECES = re.compile(r"\w+|[^\w\s]+")

URL_TOKEN = "<url>"
USER_TOKEN = "<user>"


def tokenize(text: str) -> List[str]:
    """Rule-based tweet tokenizer.

    Lowercases, splits on whitespace, maps URLs to ``<url>`` and @-mentions to
    ``<user>``, strips the ``#`` of hashtags and detaches punctuation runs.

    >>> tokenize("Nice DIN @raj http://x.co")
    ['nice', 'din', '<user>', '<url>']
    >>> tokenize("#Bharat zindabad!!")
    ['bharat', 'zindabad', '!!']
    """
    out: List[str] = []
    for chunk in text.lower().split():
        if chunk in (URL_TOKEN, USER_TOKEN):
            out.append(chunk)
            continue
        if _URL.match(chunk):
            out.append(URL_TOKEN)
            continue
        m = _MENTION.match(chunk)
        if m:
            out.append(USER_TOKEN)
            chunk = chunk[m.end():]
        elif chunk.startswith("#") and len(chunk) > 1 and (chunk[1].isalnum() or chunk[1] == "_"):
            chunk = chunk[1:]
        out.extend(_PIECES.findall(chunk))
    return out


def read_raw_tweets(stream: Iterable[str]) -> List[str]:
    """Read one tweet per line; JSON-object lines contribute their ``text`` field."""
    tweets = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.lstrip().startswith("{"):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                obj = None
            if isinstance(obj, dict):
                if "text" not in obj:
                    raise ParseError("JSON record without a 'text' field", lineno)
                line = str(obj["text"])
        tweets.append(line)
    return tweets


def read_tokenized(stream: Iterable[str]) -> List[List[str]]:
    """Read a cleaned corpus: one tweet per line, tokens separated by spaces."""
    return [line.split() for line in stream if line.strip()]


def write_tokenized(sentences: Iterable[Sequence[str]], stream: TextIO) -> int:
    n = 0
    for tokens in sentences:
        stream.write(" ".join(tokens) + "\n")
        n += 1
    return n


def prepare_corpus(raw_tweets: Sequence[str]) -> List[List[str]]:
    """Devanagari filtering plus tokenization; tweets left empty are dropped."""
    kept = (tokenize(t) for t in filter_devanagari(raw_tweets))
    return [toks for toks in kept if toks]


def unlabeled_corpus(sentences: Iterable[Sequence[str]]) -> Corpus:
    tweets = [LabeledTweet(str(i), toks) for i, toks in enumerate(sentences) if toks]
    return Corpus(tweets, "unlabeled")
