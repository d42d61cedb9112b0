"""Instance sampling, constrained losses, and the optimization loop.

A raw corpus line becomes a training example by sampling a contiguous
target span whose characters all have readings; everything before it is
context. The loss is the mean negative log-probability over masked
predictions, optionally restricted per position to the characters sharing
the typed pinyin (the constrained softmax). Gradients come from the model's
hand-written backward pass; the test suite checks them against central
differences.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from pinyinlm.encode import ClassIndex, EncodedInput, EncodeError, InputEncoder
from pinyinlm.lexicon import MODES, PERFECT, Lexicon, PinyinToken
from pinyinlm.model import Model, ModelConfig, VARIANTS, save_model
from pinyinlm.vocab import Vocab


class TrainError(ValueError):
    """Raised for corpus/config problems and non-finite losses."""


@dataclass(frozen=True)
class TrainingExample:
    encoded: EncodedInput
    mode: str
    variant: str


@dataclass(frozen=True)
class TrainConfig:
    steps: int
    batch_size_tokens: int = 2048
    learning_rate: float = 5e-5
    pc_loss: bool = True
    mode: str = PERFECT
    short_target_prob: float = 0.5
    short_range: tuple[int, int] = (1, 4)
    long_range: tuple[int, int] = (6, 25)
    warmup_steps: int = 0
    checkpoint_interval: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise TrainError("steps must be >= 0")
        if self.batch_size_tokens <= 0:
            raise TrainError("batch_size_tokens must be positive")
        if self.learning_rate <= 0:
            raise TrainError("learning_rate must be positive")
        if self.mode not in MODES:
            raise TrainError(f"mode must be one of {MODES}")
        if not 0.0 <= self.short_target_prob <= 1.0:
            raise TrainError("short_target_prob must be a probability")
        for name, (lo, hi) in (("short_range", self.short_range), ("long_range", self.long_range)):
            if lo < 1 or hi < lo:
                raise TrainError(f"{name} must be a non-empty positive interval")
        if self.short_range[1] >= self.long_range[0]:
            raise TrainError("short_range must sit strictly below long_range")
        if self.warmup_steps < 0 or self.checkpoint_interval < 0:
            raise TrainError("warmup_steps and checkpoint_interval must be >= 0")


# -- sampling -------------------------------------------------------------------


def readable_runs(lexicon: Lexicon, sentence: str) -> list[tuple[int, int]]:
    """Maximal [start, end) intervals where every character has a reading."""
    runs = []
    start = None
    readings = lexicon.annotate(sentence)
    for i, reading in enumerate(readings):
        if reading is not None:
            if start is None:
                start = i
        elif start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(sentence)))
    return runs


def sample_instance(
    lexicon: Lexicon,
    sentence: str,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple[str, list[PinyinToken], str] | None:
    """(context, pinyin, target) for one sentence, or None when the sentence
    has no run of readable characters.

    Target length is drawn from short_range with probability
    short_target_prob, otherwise from long_range, then clamped to the
    longest run; the placement is uniform over all windows of that length
    lying inside a single run. Context is everything before the target.
    """
    runs = readable_runs(lexicon, sentence)
    if not runs:
        return None
    if rng.random() < cfg.short_target_prob:
        lo, hi = cfg.short_range
    else:
        lo, hi = cfg.long_range
    length = int(rng.integers(lo, hi + 1))
    longest = max(end - start for start, end in runs)
    length = min(length, longest)

    starts = []
    for start, end in runs:
        starts.extend(range(start, end - length + 1))
    target_start = int(starts[rng.integers(0, len(starts))])
    target = sentence[target_start : target_start + length]
    context = sentence[:target_start]
    pinyin = [
        lexicon.token_for(reading, cfg.mode) for reading in lexicon.annotate(target)
    ]
    return context, pinyin, target


def make_example(
    encoder: InputEncoder,
    variant: str,
    mode: str,
    context: str,
    pinyin: Sequence[PinyinToken],
    target: str,
) -> TrainingExample:
    """Encodes one sampled instance, left-truncating the context when the
    layout would overflow the position budget."""
    if variant not in VARIANTS:
        raise TrainError(f"unknown variant {variant!r}")
    k = len(target)
    budget = encoder.max_positions
    if variant == "concat":
        room = budget - (2 * k + 2)
    else:
        room = budget - (1 + k)
    if room < 0:
        raise TrainError(f"target of {k} chars cannot fit {budget} positions")
    context = context[len(context) - room :] if room < len(context) else context

    if variant == "baseline":
        encoded = encoder.encode_baseline(context, target, pinyin=pinyin)
    elif variant == "concat":
        encoded = encoder.encode_concat(context, pinyin, target)
    else:
        channel = encoder.build_pinyin_of_next(context, pinyin, target, mode)
        encoded = encoder.encode_embed(context, channel, target)
    return TrainingExample(encoded=encoded, mode=mode, variant=variant)


# -- constrained softmax ----------------------------------------------------------


def constrained_log_prob(
    logits: np.ndarray, target_ix: int, class_ixs: np.ndarray | None
) -> float:
    """log p(target | class): softmax restricted to class members.
    class_ixs=None means the whole vocabulary (standard log-softmax)."""
    if class_ixs is None:
        m = logits.max()
        return float(logits[target_ix] - m - math.log(np.exp(logits - m).sum()))
    sub = logits[class_ixs]
    hits = np.nonzero(class_ixs == target_ix)[0]
    if hits.size == 0:
        raise TrainError(
            f"target index {target_ix} outside its constraint class "
            "(lexicon/annotation inconsistency)"
        )
    m = sub.max()
    return float(sub[hits[0]] - m - math.log(np.exp(sub - m).sum()))


def _dlogits_row(logits: np.ndarray, target_ix: int, class_ixs: np.ndarray | None, scale: float):
    """Gradient of -scale * constrained_log_prob w.r.t. the logits row,
    returned as (indices, values) touching only class members."""
    if class_ixs is None:
        m = logits.max()
        p = np.exp(logits - m)
        p /= p.sum()
        p[target_ix] -= 1.0
        return None, p * scale
    sub = logits[class_ixs]
    m = sub.max()
    p = np.exp(sub - m)
    p /= p.sum()
    p[class_ixs == target_ix] -= 1.0
    return class_ixs, p * scale


# -- loss ----------------------------------------------------------------------


def loss_and_grads(
    model: Model,
    class_index: ClassIndex,
    batch: Sequence[TrainingExample],
    pc_loss: bool,
    rng: np.random.Generator | None = None,
) -> tuple[float, dict[str, np.ndarray], int]:
    """Mean masked negative log-probability and its parameter gradients.

    Every masked slot t scores the token at t+1; with pc_loss the softmax is
    restricted to the slot's constraint class when one is present.
    """
    if not batch:
        raise TrainError("empty batch")
    variants = {ex.variant for ex in batch}
    modes = {ex.mode for ex in batch}
    if len(variants) > 1 or len(modes) > 1:
        raise TrainError(f"mixed batch: variants={variants}, modes={modes}")

    vocab = class_index.vocab
    total_positions = sum(int(ex.encoded.target_mask.sum()) for ex in batch)
    if total_positions == 0:
        raise TrainError("batch has no masked positions")
    scale = 1.0 / total_positions

    nll = 0.0
    grand: dict[str, np.ndarray] = {}
    for ex in batch:
        encoded = ex.encoded
        logits, tape = model.forward(encoded, collect_tape=True, rng=rng)
        dlogits = np.zeros_like(logits)
        for slot in np.nonzero(encoded.target_mask)[0]:
            target_ix = vocab.head_index(int(encoded.token_ids[slot + 1]))
            token = encoded.pinyin_classes[slot]
            class_ixs = (
                class_index.head_indices(token) if (pc_loss and token is not None) else None
            )
            nll -= constrained_log_prob(logits[slot], target_ix, class_ixs) * scale
            ixs, vals = _dlogits_row(logits[slot], target_ix, class_ixs, scale)
            if ixs is None:
                dlogits[slot] += vals
            else:
                dlogits[slot, ixs] += vals
        grads = model.backward(tape, dlogits)
        for name, g in grads.items():
            if name in grand:
                grand[name] += g
            else:
                grand[name] = g
    if not math.isfinite(nll):
        raise TrainError(f"non-finite loss {nll!r}; check data and learning rate")
    return nll, grand, total_positions


# -- optimizer -------------------------------------------------------------------


class Adam:
    """Standard Adam, beta=(0.9, 0.999), eps=1e-8."""

    def __init__(self, params: dict[str, np.ndarray]):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for name, g in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            params[name] -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


# -- corpus and loop ---------------------------------------------------------------


def read_corpus(path) -> list[str]:
    """UTF-8 text, one sentence per line; blank lines dropped."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise TrainError(f"cannot read corpus: {exc}") from exc
    sentences = [line.strip() for line in text.splitlines()]
    sentences = [s for s in sentences if s]
    if not sentences:
        raise TrainError(f"corpus {path} has no sentences")
    return sentences


def corpus_extra_chars(lexicon: Lexicon, sentences: Iterable[str]) -> list[str]:
    """Symbols without readings, in first-seen order, for vocab registration."""
    seen: dict[str, None] = {}
    for sentence in sentences:
        for char, reading in zip(sentence, lexicon.annotate(sentence)):
            if reading is None and char not in seen:
                seen[char] = None
    return list(seen)


def build_vocab(lexicon: Lexicon, sentences: Iterable[str]) -> Vocab:
    return Vocab.from_lexicon(lexicon, extra_chars=corpus_extra_chars(lexicon, sentences))


@dataclass
class StepMetrics:
    step: int
    loss: float
    lr: float
    examples_seen: int


def train(
    corpus,
    lexicon: Lexicon,
    model_config: ModelConfig,
    cfg: TrainConfig,
    log_path=None,
    checkpoint_path=None,
    on_step: Callable[[StepMetrics], None] | None = None,
) -> tuple[Model, Vocab, list[StepMetrics]]:
    """Runs Adam for cfg.steps over instances sampled from the corpus.

    `corpus` is a path or a sentence list. The vocab is derived from the
    lexicon plus corpus symbols and must match the model config's sizes.
    Fully seeded: same corpus + same seeds reproduce the run exactly.
    """
    sentences = read_corpus(corpus) if isinstance(corpus, (str, Path)) else list(corpus)
    if not sentences:
        raise TrainError("corpus has no sentences")
    vocab = build_vocab(lexicon, sentences)
    if model_config.n_tokens != vocab.n_tokens or model_config.head_size != vocab.head_size:
        raise TrainError(
            f"config sizes (n_tokens={model_config.n_tokens}, head_size="
            f"{model_config.head_size}) do not match the corpus vocab "
            f"(n_tokens={vocab.n_tokens}, head_size={vocab.head_size})"
        )
    if model_config.variant == "embed" and model_config.pinyin_embed_size != vocab.pinyin_embed_size:
        raise TrainError("config pinyin_embed_size does not match vocab")

    encoder = InputEncoder(lexicon, vocab, model_config.max_positions)
    class_index = ClassIndex(lexicon, vocab)
    model = Model.init(model_config)
    optimizer = Adam(model.params)
    rng = np.random.default_rng(cfg.seed)
    dropout_rng = np.random.default_rng(cfg.seed + 1) if model_config.dropout > 0 else None

    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    metrics: list[StepMetrics] = []
    examples_seen = 0
    try:
        for step in range(1, cfg.steps + 1):
            batch: list[TrainingExample] = []
            tokens = 0
            while tokens < cfg.batch_size_tokens:
                sentence = sentences[int(rng.integers(0, len(sentences)))]
                sampled = sample_instance(lexicon, sentence, cfg, rng)
                if sampled is None:
                    continue
                context, pinyin, target = sampled
                example = make_example(
                    encoder, model_config.variant, cfg.mode, context, pinyin, target
                )
                batch.append(example)
                tokens += len(example.encoded)
            loss, grads, _ = loss_and_grads(
                model, class_index, batch, cfg.pc_loss, rng=dropout_rng
            )
            if cfg.warmup_steps and step <= cfg.warmup_steps:
                lr = cfg.learning_rate * step / cfg.warmup_steps
            else:
                lr = cfg.learning_rate
            optimizer.step(model.params, grads, lr)
            examples_seen += len(batch)
            entry = StepMetrics(step=step, loss=loss, lr=lr, examples_seen=examples_seen)
            metrics.append(entry)
            if log_fh:
                log_fh.write(f"{entry.step}\t{entry.loss:.10f}\t{entry.lr:g}\t{entry.examples_seen}\n")
                log_fh.flush()
            if on_step:
                on_step(entry)
            if (
                checkpoint_path
                and cfg.checkpoint_interval
                and step % cfg.checkpoint_interval == 0
            ):
                save_model(model, vocab, checkpoint_path)
    finally:
        if log_fh:
            log_fh.close()
    if checkpoint_path:
        save_model(model, vocab, checkpoint_path)
    return model, vocab, metrics
