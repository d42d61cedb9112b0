"""Pinyin input method engine backed by a small character-level language model.

The package turns a pinyin key sequence (full syllables or first-letter
abbreviations) into ranked Chinese character candidates. A lexicon maps keys
to legitimate characters, a transformer scores continuations of the typed
context, and a constrained beam search keeps every emitted character
consistent with the keys the user typed.
"""

from pinyinlm.lexicon import (
    ABBREV,
    PERFECT,
    Lexicon,
    LexiconError,
    PinyinSyllable,
    PinyinToken,
    load_lexicon,
    default_lexicon_path,
)

__version__ = "0.1.0"

__all__ = [
    "ABBREV",
    "PERFECT",
    "Lexicon",
    "LexiconError",
    "PinyinSyllable",
    "PinyinToken",
    "load_lexicon",
    "default_lexicon_path",
    "__version__",
]
