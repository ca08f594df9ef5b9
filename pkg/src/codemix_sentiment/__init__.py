"""Sentiment analysis of code-mixed Hinglish tweets with subword and cross-lingual embeddings."""

__version__ = "0.1.0"
