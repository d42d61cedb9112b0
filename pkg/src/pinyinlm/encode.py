"""Builds model inputs for the three variants.

All variants share one convention: the logits at slot t score the token at
slot t+1, `target_mask[t]` says whether that prediction contributes to the
loss, and `pinyin_classes[t]` names the constraint class of the predicted
token (None = unconstrained, score over the whole character head).

Layouts:
  baseline  [BOS, w_1..w_n, t_1..t_k]            positions 0..len-1
  concat    [w_1..w_n, SEP, p_1..p_k, SEP, t_1..t_k]
            positions: w_i at i-1, SEP at n, p_j at n+j, SEP at n+k+1,
            and t_j at n+j, sharing its pinyin token's position id
  embed     [BOS, w_1..w_n, t_1..t_k] plus a parallel pinyin channel where
            slot t carries the pinyin of the NEXT character (0 when absent)

The concat layout has no BOS: the first separator anchors empty-context
instances, and adding one would shift every position id.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from pinyinlm.lexicon import Lexicon, PinyinToken
from pinyinlm.vocab import Vocab, VocabError, pinyin_token_text


class EncodeError(ValueError):
    """Raised for malformed or oversized encoder inputs."""


@dataclass(frozen=True)
class EncodedInput:
    """One model input: aligned id/position/mask/class sequences."""

    token_ids: np.ndarray
    position_ids: np.ndarray
    target_mask: np.ndarray
    pinyin_classes: tuple[PinyinToken | None, ...]
    pinyin_ids: np.ndarray | None = field(default=None)

    def __post_init__(self):
        n = len(self.token_ids)
        if not (len(self.position_ids) == len(self.target_mask) == len(self.pinyin_classes) == n):
            raise EncodeError("encoded sequences must share one length")
        if self.pinyin_ids is not None and len(self.pinyin_ids) != n:
            raise EncodeError("pinyin channel must match sequence length")
        if n == 0:
            raise EncodeError("empty encoding")

    def __len__(self) -> int:
        return len(self.token_ids)


def _as_ids(values: Sequence[int]) -> np.ndarray:
    return np.asarray(values, dtype=np.int64)


class InputEncoder:
    """Turns (context, pinyin, target) triples into EncodedInput per variant."""

    def __init__(self, lexicon: Lexicon, vocab: Vocab, max_positions: int):
        if max_positions < 2:
            raise EncodeError("max_positions must be at least 2")
        self.lexicon = lexicon
        self.vocab = vocab
        self.max_positions = max_positions

    # -- shared helpers ------------------------------------------------------

    def _context_ids(self, context: str) -> list[int]:
        # lenient: unknown context symbols become [unk] on the input side
        return [self.vocab.encode_char(c) for c in context]

    def _target_ids(self, target: str) -> list[int]:
        ids = []
        for j, char in enumerate(target):
            try:
                ids.append(self.vocab.char_id(char))
            except VocabError as exc:
                raise EncodeError(f"target char {j} ({char!r}) not scorable") from exc
        return ids

    def _pinyin_token_ids(self, pinyin: Sequence[PinyinToken]) -> list[int]:
        ids = []
        for j, token in enumerate(pinyin):
            try:
                ids.append(self.vocab.pinyin_token_id(token))
            except VocabError as exc:
                raise EncodeError(
                    f"pinyin token {j} ({pinyin_token_text(token)!r}) not in vocab"
                ) from exc
        return ids

    @staticmethod
    def _check_uniform_mode(pinyin: Sequence[PinyinToken]) -> None:
        modes = {t.mode for t in pinyin}
        if len(modes) > 1:
            raise EncodeError(f"pinyin tokens mix modes {sorted(modes)}")

    def _check_length(self, length: int, what: str) -> None:
        if length > self.max_positions:
            raise EncodeError(
                f"{what} needs {length} positions, exceeds limit {self.max_positions}"
            )

    # -- variants ------------------------------------------------------------

    def encode_baseline(
        self,
        context: str,
        target: str,
        pinyin: Sequence[PinyinToken] | None = None,
    ) -> EncodedInput:
        """[BOS, context, target]. Pinyin never enters the input; passing it
        only attaches constraint classes to the target predictions."""
        n, k = len(context), len(target)
        if pinyin is not None:
            if len(pinyin) != k:
                raise EncodeError(f"{len(pinyin)} pinyin tokens for {k} target chars")
            self._check_uniform_mode(pinyin)
        length = 1 + n + k
        self._check_length(length, "baseline encoding")

        token_ids = [self.vocab.bos_id] + self._context_ids(context) + self._target_ids(target)
        mask = np.zeros(length, dtype=bool)
        classes: list[PinyinToken | None] = [None] * length
        for j in range(k):
            slot = n + j  # predicts target char j sitting at index n+1+j
            mask[slot] = True
            if pinyin is not None:
                classes[slot] = pinyin[j]
        return EncodedInput(
            token_ids=_as_ids(token_ids),
            position_ids=np.arange(length, dtype=np.int64),
            target_mask=mask,
            pinyin_classes=tuple(classes),
        )

    def encode_concat(
        self,
        context: str,
        pinyin: Sequence[PinyinToken],
        target: str,
    ) -> EncodedInput:
        """[context, SEP, pinyin, SEP, target], target position ids copying
        their pinyin tokens'. A short (or empty) target encodes a decode
        prefix whose remaining characters arrive incrementally."""
        n, k = len(context), len(pinyin)
        if k == 0:
            raise EncodeError("concat encoding needs at least one pinyin token")
        if len(target) > k:
            raise EncodeError(f"{k} pinyin tokens for {len(target)} target chars")
        self._check_uniform_mode(pinyin)
        # the prefix must leave room for all k target characters
        self._check_length(n + 2 * k + 2, "concat encoding")

        token_ids = (
            self._context_ids(context)
            + [self.vocab.sep_id]
            + self._pinyin_token_ids(pinyin)
            + [self.vocab.sep_id]
            + self._target_ids(target)
        )
        positions = (
            list(range(n))                      # w_i at i-1 (0-based: i)
            + [n]                               # first SEP
            + [n + 1 + j for j in range(k)]     # p_j at n+j (1-based j)
            + [n + k + 1]                       # second SEP
            + [n + 1 + j for j in range(len(target))]  # t_j shares p_j
        )
        length = len(token_ids)
        mask = np.zeros(length, dtype=bool)
        classes: list[PinyinToken | None] = [None] * length
        for j in range(len(target)):
            slot = n + k + 1 + j  # SEP2 slot predicts t_1, then t_j predicts t_j+1
            mask[slot] = True
            classes[slot] = pinyin[j]
        return EncodedInput(
            token_ids=_as_ids(token_ids),
            position_ids=_as_ids(positions),
            target_mask=mask,
            pinyin_classes=tuple(classes),
        )

    def encode_embed(
        self,
        context: str,
        pinyin_of_next: Sequence[PinyinToken | None],
        target: str,
    ) -> EncodedInput:
        """Baseline layout plus a parallel channel carrying, at each slot,
        the pinyin of the next character (0 where there is none)."""
        n, k = len(context), len(target)
        length = 1 + n + k
        if len(pinyin_of_next) != length:
            raise EncodeError(
                f"pinyin_of_next has {len(pinyin_of_next)} entries for {length} slots"
            )
        self._check_length(length, "embed encoding")

        token_ids = [self.vocab.bos_id] + self._context_ids(context) + self._target_ids(target)
        pinyin_ids = []
        for i, token in enumerate(pinyin_of_next):
            try:
                pinyin_ids.append(self.vocab.pinyin_embed_id(token))
            except VocabError as exc:
                raise EncodeError(
                    f"pinyin_of_next[{i}] ({pinyin_token_text(token)!r}) not in vocab"
                ) from exc
        mask = np.zeros(length, dtype=bool)
        for i in range(length - 1):
            mask[i] = self.vocab.is_char_id(token_ids[i + 1])
        classes = tuple(pinyin_of_next[:-1]) + (None,)
        return EncodedInput(
            token_ids=_as_ids(token_ids),
            position_ids=np.arange(length, dtype=np.int64),
            target_mask=mask,
            pinyin_classes=classes,
            pinyin_ids=_as_ids(pinyin_ids),
        )

    # -- pinyin channel construction -----------------------------------------

    def tokens_for_target(self, target: str, mode: str) -> list[PinyinToken]:
        """Pinyin tokens for a target string via default readings."""
        tokens = []
        for j, reading in enumerate(self.lexicon.annotate(target)):
            if reading is None:
                raise EncodeError(f"target char {j} ({target[j]!r}) has no reading")
            tokens.append(self.lexicon.token_for(reading, mode))
        return tokens

    def build_pinyin_of_next(
        self,
        context: str,
        typed: Sequence[PinyinToken],
        target: str,
        mode: str,
    ) -> list[PinyinToken | None]:
        """Per-slot pinyin channel for the embed layout.

        Slot i carries the pinyin of the character at slot i+1: annotated
        default readings inside the context, the typed tokens across the
        target span, None where the next character has no reading or the
        sequence ends. `target` may be shorter than `typed` (inference
        prefix); extra typed tokens beyond the first unplaced one are
        ignored here and fed step by step during decoding.
        """
        if target and len(typed) < len(target):
            raise EncodeError(f"{len(typed)} typed tokens for {len(target)} target chars")
        n = len(context)
        length = 1 + n + len(target)
        readings = self.lexicon.annotate(context)
        out: list[PinyinToken | None] = []
        for i in range(length):
            next_pos = i + 1  # index into [BOS, context, target]
            if next_pos <= n:
                reading = readings[next_pos - 1]
                out.append(None if reading is None else self.lexicon.token_for(reading, mode))
            elif next_pos - n <= len(typed):
                out.append(typed[next_pos - n - 1])
            else:
                out.append(None)
        return out


class ClassIndex:
    """Caches, per pinyin token, the sorted LM-head indices of its
    legitimate characters. Shared by the training loss and the decoder."""

    def __init__(self, lexicon: Lexicon, vocab: Vocab):
        self.lexicon = lexicon
        self.vocab = vocab
        self._cache: dict[PinyinToken, np.ndarray] = {}

    def head_indices(self, token: PinyinToken) -> np.ndarray:
        cached = self._cache.get(token)
        if cached is None:
            chars = self.lexicon.legitimate_chars(token)
            ids = sorted(self.vocab.head_index(self.vocab.char_id(c)) for c in chars)
            cached = np.asarray(ids, dtype=np.int64)
            cached.flags.writeable = False
            self._cache[token] = cached
        return cached

    def class_size(self, token: PinyinToken) -> int:
        return len(self.head_indices(token))
