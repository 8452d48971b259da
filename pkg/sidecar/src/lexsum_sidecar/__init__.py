"""Reference provider backend: serves sentence/token embeddings, named
entity recognition, and NLI entailment scoring over the newline-delimited
JSON protocol expected by the summarization toolkit's provider client.

Model ids resolve through a registry. The built-in ids load deterministic,
dependency-free reference models so the protocol and pipeline can run on
any machine; ids prefixed ``st:``, ``hf-nli:``, and ``spacy:`` load real
checkpoints when the corresponding packages and weights are installed.
"""

__version__ = "0.1.0"
