"""Toolkit for preparing training data for, and evaluating, legal document
summarization systems covering English and Hindi.

Subpackages cover dataset ingestion and extractiveness statistics, sentence
segmentation and tokenization, ROUGE scoring, greedy extractive label
generation, document chunking with cross-lingual summary alignment,
span-corruption / next-token pre-training sample generation, relevance and
factual-consistency metrics with paired significance tests, and a client for
external embedding / NER / NLI backends.
"""

__version__ = "0.1.0"
