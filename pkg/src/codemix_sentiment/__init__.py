"""Sentiment classification of code-mixed Hinglish text.

A Bi-LSTM classifier whose test-time predictions are refined by generating
phrase-inserted candidate sentences and voting over their predictions.
"""

__version__ = "0.1.0"
