"""Token id space shared by every model variant.

One flat inventory: special tokens first, then characters, then pinyin
tokens. The LM head ranges over the character block only (an input method
emits characters, never specials or pinyin). Pinyin tokens are typed by
mode ("p:wo" perfect, "a:w" abbreviated) so colliding texts such as the
syllable "a" and the key "a" stay distinct ids, and both inventories are
always registered so one checkpoint can be scored in either mode.

The embed-style pinyin channel uses its own compact id space: 0 means
"no pinyin here", ids 1.. mirror the pinyin token order.
"""
from __future__ import annotations

import json
from typing import Iterable, Sequence

from pinyinlm.lexicon import ABBREV, PERFECT, Lexicon, PinyinToken

BOS_TEXT = "[bos]"
SEP_TEXT = "[sep]"
UNK_TEXT = "[unk]"
SPECIALS = (BOS_TEXT, SEP_TEXT, UNK_TEXT)

_MODE_PREFIX = {PERFECT: "p", ABBREV: "a"}
_PREFIX_MODE = {v: k for k, v in _MODE_PREFIX.items()}


class VocabError(ValueError):
    """Raised for tokens outside the inventory or malformed vocab data."""


def pinyin_token_text(token: PinyinToken) -> str:
    return f"{_MODE_PREFIX[token.mode]}:{token.value}"


def parse_pinyin_token_text(text: str) -> PinyinToken:
    prefix, _, value = text.partition(":")
    if prefix not in _PREFIX_MODE or not value:
        raise VocabError(f"malformed pinyin token text {text!r}")
    return PinyinToken(_PREFIX_MODE[prefix], value)


class Vocab:
    """Immutable token inventory with id lookups in both directions."""

    def __init__(self, chars: Sequence[str], pinyin_texts: Sequence[str]):
        chars = tuple(chars)
        pinyin_texts = tuple(pinyin_texts)
        if len(set(chars)) != len(chars):
            raise VocabError("duplicate characters in vocab")
        if len(set(pinyin_texts)) != len(pinyin_texts):
            raise VocabError("duplicate pinyin tokens in vocab")
        for char in chars:
            if len(char) != 1:
                raise VocabError(f"character entry {char!r} must be one codepoint")
        for text in pinyin_texts:
            parse_pinyin_token_text(text)  # validates shape

        self.chars = chars
        self.pinyin_texts = pinyin_texts
        self.n_specials = len(SPECIALS)
        self.n_chars = len(chars)
        self.n_pinyin = len(pinyin_texts)
        self.n_tokens = self.n_specials + self.n_chars + self.n_pinyin

        self._char_to_id = {c: self.n_specials + i for i, c in enumerate(chars)}
        base = self.n_specials + self.n_chars
        self._pinyin_to_id = {t: base + i for i, t in enumerate(pinyin_texts)}

    bos_id = 0
    sep_id = 1
    unk_id = 2

    @classmethod
    def from_lexicon(cls, lexicon: Lexicon, extra_chars: Iterable[str] = ()) -> "Vocab":
        """Characters in lexicon order, then extras (corpus symbols without
        readings), then perfect and abbreviated pinyin tokens."""
        chars = list(lexicon.char_to_readings)
        known = set(chars)
        for char in dict.fromkeys(extra_chars):
            if char not in known:
                chars.append(char)
                known.add(char)
        pinyin = [f"p:{s}" for s in lexicon.perfect_to_chars]
        pinyin += [f"a:{k}" for k in lexicon.abbrev_to_chars]
        return cls(chars, pinyin)

    # -- character block ---------------------------------------------------

    @property
    def head_size(self) -> int:
        """The LM head scores the character block only."""
        return self.n_chars

    def char_id(self, char: str) -> int:
        token_id = self._char_to_id.get(char)
        if token_id is None:
            raise VocabError(f"character {char!r} not in vocab")
        return token_id

    def encode_char(self, char: str) -> int:
        """Lenient id lookup for input text: unknown characters map to [unk]."""
        return self._char_to_id.get(char, self.unk_id)

    def is_char_id(self, token_id: int) -> bool:
        return self.n_specials <= token_id < self.n_specials + self.n_chars

    def head_index(self, token_id: int) -> int:
        if not self.is_char_id(token_id):
            raise VocabError(f"token id {token_id} is not a character id")
        return token_id - self.n_specials

    def char_for_head(self, head_ix: int) -> str:
        return self.chars[head_ix]

    # -- pinyin block ------------------------------------------------------

    def pinyin_token_id(self, token: PinyinToken) -> int:
        token_id = self._pinyin_to_id.get(pinyin_token_text(token))
        if token_id is None:
            raise VocabError(f"pinyin token {pinyin_token_text(token)!r} not in vocab")
        return token_id

    def pinyin_embed_id(self, token: PinyinToken | None) -> int:
        """Id in the embed-channel space: 0 = no pinyin, 1.. mirror tokens."""
        if token is None:
            return 0
        base = self.n_specials + self.n_chars
        return self.pinyin_token_id(token) - base + 1

    @property
    def pinyin_embed_size(self) -> int:
        return self.n_pinyin + 1

    # -- debugging / serialization ------------------------------------------

    def token_text(self, token_id: int) -> str:
        if 0 <= token_id < self.n_specials:
            return SPECIALS[token_id]
        if self.is_char_id(token_id):
            return self.chars[token_id - self.n_specials]
        ix = token_id - self.n_specials - self.n_chars
        if 0 <= ix < self.n_pinyin:
            return self.pinyin_texts[ix]
        raise VocabError(f"token id {token_id} out of range")

    def to_json(self) -> str:
        payload = {"chars": "".join(self.chars), "pinyin": list(self.pinyin_texts)}
        return json.dumps(payload, ensure_ascii=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Vocab":
        try:
            payload = json.loads(text)
            chars = list(payload["chars"])
            pinyin = list(payload["pinyin"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise VocabError(f"malformed vocab payload: {exc}") from exc
        return cls(chars, pinyin)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocab):
            return NotImplemented
        return self.chars == other.chars and self.pinyin_texts == other.pinyin_texts

    def __repr__(self) -> str:
        return (
            f"Vocab(chars={self.n_chars}, pinyin={self.n_pinyin}, "
            f"tokens={self.n_tokens})"
        )
