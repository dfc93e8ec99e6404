"""Acrostic Chinese couplet generation.

Stages: pick two head characters from the user's request, generate first
clauses with a character language model under cluster-based beam search,
generate matching second clauses with an attention encoder-decoder, and
re-rank the pooled couplets with tone, length, repetition and sentiment rules.
"""

__version__ = "0.1.0"
