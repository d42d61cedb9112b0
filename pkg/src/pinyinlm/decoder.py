"""Fixed-length pinyin-constrained beam search.

Every step expands each live hypothesis by exactly the characters legitimate
for that step's pinyin token, scored by a softmax restricted to the class.
The output length always equals the number of typed tokens, so scores are
plain sums of per-step log-probabilities with no length normalization. Ties
break lexicographically on the candidate string, making results fully
deterministic for a fixed (model, request) pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from pinyinlm.encode import ClassIndex, EncodeError, InputEncoder
from pinyinlm.lexicon import MODES, Lexicon, LexiconError, PinyinToken
from pinyinlm.model import DecodeState, Model
from pinyinlm.vocab import Vocab, VocabError


class DecodeError(ValueError):
    """Raised for malformed requests and unresolvable pinyin tokens."""


class TokenResolutionError(DecodeError):
    """A pinyin token that the lexicon cannot resolve; carries the token
    text and its position for wire-level error reporting."""

    def __init__(self, message: str, token: str, position: int):
        super().__init__(message)
        self.token = token
        self.position = position


class CapacityError(DecodeError):
    """The decode would not fit the model's position budget."""


@dataclass(frozen=True)
class DecodeRequest:
    context: str
    pinyin: tuple[PinyinToken, ...]
    beam_size: int = 16
    top_k: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "pinyin", tuple(self.pinyin))
        if len(self.pinyin) < 1:
            raise DecodeError("pinyin must contain at least one token")
        if len({t.mode for t in self.pinyin}) > 1:
            raise DecodeError("mixed pinyin modes in one request")
        if self.beam_size < 1:
            raise DecodeError("beam_size must be positive")
        if self.top_k is None:
            object.__setattr__(self, "top_k", self.beam_size)
        if not 1 <= self.top_k <= self.beam_size:
            raise DecodeError(
                f"top_k must be in [1, beam_size]; got {self.top_k} with beam_size {self.beam_size}"
            )


@dataclass(frozen=True)
class Candidate:
    text: str
    score: float


@dataclass(frozen=True)
class PredictResult:
    candidates: tuple[Candidate, ...]
    tokens: tuple[PinyinToken, ...]


@dataclass
class _Beam:
    chars: str
    score: float
    state: DecodeState | None


class Decoder:
    """Bundles a model with the lexicon/vocab it was trained against."""

    def __init__(self, model: Model, lexicon: Lexicon, vocab: Vocab):
        self.model = model
        self.lexicon = lexicon
        self.vocab = vocab
        self.encoder = InputEncoder(lexicon, vocab, model.config.max_positions)
        self.classes = ClassIndex(lexicon, vocab)

    # -- per-step scoring ---------------------------------------------------

    def step_distribution(
        self, state: DecodeState, token: PinyinToken
    ) -> list[tuple[str, float]]:
        """(character, log-prob) for every legitimate character of `token`,
        scored from the state's last-slot logits. Probabilities sum to 1
        over the class; characters outside it are unreachable."""
        try:
            ixs = self.classes.head_indices(token)
        except (LexiconError, VocabError) as exc:
            raise DecodeError(str(exc)) from exc
        if len(ixs) == 0:
            raise DecodeError(f"empty constraint class for {token.value!r}")
        logits = state.logits[ixs]
        m = logits.max()
        logp = logits - m - math.log(np.exp(logits - m).sum())
        return [
            (self.vocab.char_for_head(int(ix)), float(lp)) for ix, lp in zip(ixs, logp)
        ]

    # -- prefix and extension plumbing ---------------------------------------

    def _prefix_state(self, req: DecodeRequest) -> DecodeState:
        variant = self.model.config.variant
        n, k = len(req.context), len(req.pinyin)
        limit = self.model.config.max_positions
        total = n + 2 * k + 2 if variant == "concat" else 1 + n + k
        if total > limit:
            raise CapacityError(f"decode needs {total} positions, exceeds limit {limit}")
        try:
            if variant == "concat":
                encoded = self.encoder.encode_concat(req.context, list(req.pinyin), "")
            elif variant == "embed":
                channel = self.encoder.build_pinyin_of_next(
                    req.context, list(req.pinyin), "", req.pinyin[0].mode
                )
                encoded = self.encoder.encode_embed(req.context, channel, "")
            else:
                encoded = self.encoder.encode_baseline(req.context, "")
        except EncodeError as exc:
            raise DecodeError(str(exc)) from exc
        return self.model.prefix_state(encoded)

    def _extend(self, beam: _Beam, req: DecodeRequest, j: int) -> DecodeState:
        """Feeds hypothesis character j into the model, producing the state
        that scores character j+1."""
        variant = self.model.config.variant
        n = len(req.context)
        if variant == "concat":
            position = n + 1 + j  # shares the j-th pinyin token's position
        else:
            position = 1 + n + j  # [BOS, context, target...] absolute slot
        pinyin_id = 0
        if variant == "embed" and j + 1 < len(req.pinyin):
            pinyin_id = self.vocab.pinyin_embed_id(req.pinyin[j + 1])
        token_id = self.vocab.char_id(beam.chars[j])
        return self.model.extend(beam.state, token_id, position, pinyin_id)

    # -- search ---------------------------------------------------------------

    def beam_search(self, req: DecodeRequest) -> list[Candidate]:
        """Exact fixed-length beam search over the per-position classes.

        Step j expands every live hypothesis by every legitimate character
        for pinyin[j] and keeps the beam_size best cumulative scores; ties
        break on the hypothesis string. Paths and strings are in bijection
        (each position's class is fixed), so no deduplication is needed.
        """
        beams = [_Beam(chars="", score=0.0, state=self._prefix_state(req))]
        k = len(req.pinyin)
        for j, token in enumerate(req.pinyin):
            expanded = []
            for beam in beams:
                for char, logp in self.step_distribution(beam.state, token):
                    expanded.append(
                        _Beam(chars=beam.chars + char, score=beam.score + logp, state=beam.state)
                    )
            expanded.sort(key=lambda b: (-b.score, b.chars))
            beams = expanded[: req.beam_size]
            if j + 1 < k:
                for beam in beams:
                    beam.state = self._extend(beam, req, j)
            else:
                for beam in beams:
                    beam.state = None  # caches are dead weight past the last step
        return [Candidate(text=b.chars, score=b.score) for b in beams[: req.top_k]]

    # -- string-level entry point ----------------------------------------------

    def predict(
        self,
        context: str,
        raw_pinyin: Sequence[str],
        mode: str,
        beam_size: int = 16,
        top_k: int | None = None,
    ) -> PredictResult:
        """Validates and normalizes raw pinyin strings, then beam-searches.

        Resolution errors name the offending token and its position. The
        normalized tokens are echoed for diagnostics.
        """
        if mode not in MODES:
            raise DecodeError(f"mode must be one of {MODES}; got {mode!r}")
        if not raw_pinyin:
            raise DecodeError("pinyin must contain at least one token")
        tokens = []
        for position, raw in enumerate(raw_pinyin):
            text = raw.strip().lower()
            if not text:
                raise DecodeError(f"pinyin token at position {position} is empty")
            token = PinyinToken(mode, text)
            try:
                self.lexicon.legitimate_chars(token)
            except LexiconError as exc:
                raise TokenResolutionError(
                    f"pinyin token {text!r} at position {position}: {exc}",
                    token=text,
                    position=position,
                ) from exc
            tokens.append(token)
        req = DecodeRequest(
            context=context, pinyin=tuple(tokens), beam_size=beam_size, top_k=top_k
        )
        return PredictResult(candidates=tuple(self.beam_search(req)), tokens=tuple(tokens))
