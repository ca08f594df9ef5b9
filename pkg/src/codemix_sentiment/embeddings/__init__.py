"""Subword skip-gram embeddings: vocabularies, training, retraining and I/O."""

from .model import (
    EmbeddingMatrix,
    Embeddings,
    VecFormatError,
    load_embeddings,
    load_vec,
    read_vec_file,
    save_native,
    save_vec,
    word_vector,
    write_vec_file,
)
from .skipgram import (
    SkipGramConfig,
    SkipGramEmbedder,
    incremental_retrain,
    train_skipgram,
)
from .vocab import (
    EmptyVocabularyError,
    SubwordIndex,
    Vocabulary,
    build_vocab,
    extract_ngrams,
    hash_ngram,
)

__all__ = [
    "EmbeddingMatrix",
    "Embeddings",
    "EmptyVocabularyError",
    "SkipGramConfig",
    "SkipGramEmbedder",
    "SubwordIndex",
    "VecFormatError",
    "Vocabulary",
    "build_vocab",
    "extract_ngrams",
    "hash_ngram",
    "incremental_retrain",
    "load_embeddings",
    "load_vec",
    "read_vec_file",
    "save_native",
    "save_vec",
    "train_skipgram",
    "word_vector",
    "write_vec_file",
]
