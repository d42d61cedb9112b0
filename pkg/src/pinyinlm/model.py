"""Character-level autoregressive transformer in plain numpy float64.

Pre-layer-norm blocks, learned absolute position embeddings, exact GELU,
and a hand-written backward pass (the gradient checks in the test suite
compare it against central differences, which needs double precision and
full control of the graph). The embed variant adds a third input table
indexed by the pinyin of the next character.

The forward pass can record a tape of intermediates; backward consumes it
and returns a gradient per parameter, keyed identically to the parameter
dict. Decoding uses an immutable per-layer key/value cache so beam search
can branch states without copying whole hypotheses.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import BinaryIO

import numpy as np
from scipy.special import erf

from pinyinlm import kernels
from pinyinlm.encode import EncodedInput
from pinyinlm.vocab import Vocab

VARIANTS = ("baseline", "concat", "embed")

_LN_EPS = 1e-5
_INIT_STD = 0.02


class ModelError(ValueError):
    """Raised for config/shape violations."""


class CheckpointError(ValueError):
    """Raised for unreadable, truncated, or mismatched checkpoint files."""


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int
    d_model: int
    n_heads: int
    d_ff: int
    n_tokens: int
    head_size: int
    variant: str = "baseline"
    pinyin_embed_size: int = 0
    max_positions: int = 128
    dropout: float = 0.0
    seed: int = 0

    def __post_init__(self):
        positive = {
            "n_layers": self.n_layers,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "d_ff": self.d_ff,
            "n_tokens": self.n_tokens,
            "head_size": self.head_size,
            "max_positions": self.max_positions,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ModelError(f"{name} must be positive, got {value}")
        if self.d_model % self.n_heads:
            raise ModelError(f"n_heads={self.n_heads} must divide d_model={self.d_model}")
        if self.variant not in VARIANTS:
            raise ModelError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ModelError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.variant == "embed":
            if self.pinyin_embed_size < 2:
                raise ModelError("embed variant needs a pinyin table (>= 2 rows)")
        elif self.pinyin_embed_size != 0:
            raise ModelError(f"{self.variant} variant must not carry a pinyin table")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        try:
            return cls(**data)
        except TypeError as exc:
            raise ModelError(f"bad config fields: {exc}") from exc


# -- primitives ---------------------------------------------------------------


def layernorm_forward(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    x_hat = xc * inv
    return x_hat * g + b, (x_hat, inv, g)


def layernorm_backward(dy, cache):
    x_hat, inv, g = cache
    dg = (dy * x_hat).sum(axis=0)
    db = dy.sum(axis=0)
    dxh = dy * g
    dx = inv * (
        dxh
        - dxh.mean(axis=-1, keepdims=True)
        - x_hat * (dxh * x_hat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def gelu(x):
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def gelu_grad(x):
    cdf = 0.5 * (1.0 + erf(x / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return cdf + x * pdf


def _split_heads(x, n_heads):
    t, d = x.shape
    return x.reshape(t, n_heads, d // n_heads).transpose(1, 0, 2)


def _merge_heads(x):
    h, t, d = x.shape
    return x.transpose(1, 0, 2).reshape(t, h * d)


def _dropout_mask(rng, p, shape):
    if rng is None or p == 0.0:
        return None
    return (rng.random(shape) >= p).astype(np.float64) / (1.0 - p)


def _apply_mask(x, mask):
    return x if mask is None else x * mask


# -- parameters ----------------------------------------------------------------


def init_params(config: ModelConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(config.seed)
    d, f = config.d_model, config.d_ff

    def normal(*shape):
        return rng.normal(0.0, _INIT_STD, size=shape)

    params: dict[str, np.ndarray] = {
        "tok_emb": normal(config.n_tokens, d),
        "pos_emb": normal(config.max_positions, d),
    }
    if config.variant == "embed":
        params["pin_emb"] = normal(config.pinyin_embed_size, d)
    for i in range(config.n_layers):
        params[f"l{i}.ln1.g"] = np.ones(d)
        params[f"l{i}.ln1.b"] = np.zeros(d)
        params[f"l{i}.attn.w"] = normal(d, 3 * d)
        params[f"l{i}.attn.b"] = np.zeros(3 * d)
        params[f"l{i}.attn.proj_w"] = normal(d, d)
        params[f"l{i}.attn.proj_b"] = np.zeros(d)
        params[f"l{i}.ln2.g"] = np.ones(d)
        params[f"l{i}.ln2.b"] = np.zeros(d)
        params[f"l{i}.mlp.w1"] = normal(d, f)
        params[f"l{i}.mlp.b1"] = np.zeros(f)
        params[f"l{i}.mlp.w2"] = normal(f, d)
        params[f"l{i}.mlp.b2"] = np.zeros(d)
    params["ln_f.g"] = np.ones(d)
    params["ln_f.b"] = np.zeros(d)
    params["head.w"] = normal(d, config.head_size)
    params["head.b"] = np.zeros(config.head_size)
    return params


@dataclass
class DecodeState:
    """Immutable-by-convention incremental decode state. extend() returns a
    fresh state; the cached arrays are never mutated in place, so beam
    hypotheses can share prefixes safely."""

    length: int
    keys: tuple[np.ndarray, ...]
    values: tuple[np.ndarray, ...]
    logits: np.ndarray  # head logits at the newest slot


class Model:
    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params

    @classmethod
    def init(cls, config: ModelConfig) -> "Model":
        return cls(config, init_params(config))

    # -- full forward/backward -------------------------------------------------

    def _validate(self, encoded: EncodedInput) -> None:
        cfg = self.config
        if len(encoded) > cfg.max_positions:
            raise ModelError(f"sequence of {len(encoded)} exceeds {cfg.max_positions} slots")
        if encoded.position_ids.max() >= cfg.max_positions:
            raise ModelError("position id out of range")
        if encoded.token_ids.max() >= cfg.n_tokens or encoded.token_ids.min() < 0:
            raise ModelError("token id out of range")
        if cfg.variant == "embed":
            if encoded.pinyin_ids is None:
                raise ModelError("embed variant needs the pinyin channel")
            if encoded.pinyin_ids.max() >= cfg.pinyin_embed_size:
                raise ModelError("pinyin channel id out of range")
        elif encoded.pinyin_ids is not None:
            raise ModelError(f"{cfg.variant} variant got an unexpected pinyin channel")

    def forward(self, encoded: EncodedInput, collect_tape: bool = False, rng=None):
        """Per-slot logits over the character head. Returns (logits, tape);
        tape is None unless collect_tape. Pass rng to enable dropout."""
        self._validate(encoded)
        cfg, p = self.config, self.params

        x = p["tok_emb"][encoded.token_ids] + p["pos_emb"][encoded.position_ids]
        if cfg.variant == "embed":
            x = x + p["pin_emb"][encoded.pinyin_ids]
        emb_mask = _dropout_mask(rng, cfg.dropout, x.shape)
        x = _apply_mask(x, emb_mask)

        layers = []
        for i in range(cfg.n_layers):
            x, layer_tape = self._layer_forward(i, x, rng)
            layers.append(layer_tape)

        final_in = x
        xf, ln_f_cache = layernorm_forward(x, p["ln_f.g"], p["ln_f.b"])
        logits = xf @ p["head.w"] + p["head.b"]

        tape = None
        if collect_tape:
            tape = {
                "encoded": encoded,
                "emb_mask": emb_mask,
                "layers": layers,
                "final_in": final_in,
                "ln_f_cache": ln_f_cache,
                "xf": xf,
            }
        return logits, tape

    def _layer_forward(self, i, x, rng):
        cfg, p = self.config, self.params
        h1, ln1_cache = layernorm_forward(x, p[f"l{i}.ln1.g"], p[f"l{i}.ln1.b"])
        qkv = h1 @ p[f"l{i}.attn.w"] + p[f"l{i}.attn.b"]
        d = cfg.d_model
        q = _split_heads(qkv[:, :d], cfg.n_heads)
        k = _split_heads(qkv[:, d : 2 * d], cfg.n_heads)
        v = _split_heads(qkv[:, 2 * d :], cfg.n_heads)
        ctx, probs = kernels.attn_forward(q, k, v)
        merged = _merge_heads(ctx)
        att = merged @ p[f"l{i}.attn.proj_w"] + p[f"l{i}.attn.proj_b"]
        att_mask = _dropout_mask(rng, cfg.dropout, att.shape)
        x_mid = x + _apply_mask(att, att_mask)

        h2, ln2_cache = layernorm_forward(x_mid, p[f"l{i}.ln2.g"], p[f"l{i}.ln2.b"])
        pre = h2 @ p[f"l{i}.mlp.w1"] + p[f"l{i}.mlp.b1"]
        act = gelu(pre)
        mlp = act @ p[f"l{i}.mlp.w2"] + p[f"l{i}.mlp.b2"]
        mlp_mask = _dropout_mask(rng, cfg.dropout, mlp.shape)
        x_out = x_mid + _apply_mask(mlp, mlp_mask)

        tape = {
            "ln1_cache": ln1_cache,
            "h1": h1,
            "q": q,
            "k": k,
            "v": v,
            "probs": probs,
            "merged": merged,
            "att_mask": att_mask,
            "ln2_cache": ln2_cache,
            "h2": h2,
            "pre": pre,
            "act": act,
            "mlp_mask": mlp_mask,
        }
        return x_out, tape

    def backward(self, tape, dlogits) -> dict[str, np.ndarray]:
        """Gradients for every parameter given d(loss)/d(logits)."""
        cfg, p = self.config, self.params
        encoded: EncodedInput = tape["encoded"]
        grads: dict[str, np.ndarray] = {}

        grads["head.w"] = tape["xf"].T @ dlogits
        grads["head.b"] = dlogits.sum(axis=0)
        dxf = dlogits @ p["head.w"].T
        dx, grads["ln_f.g"], grads["ln_f.b"] = layernorm_backward(dxf, tape["ln_f_cache"])

        for i in reversed(range(cfg.n_layers)):
            dx = self._layer_backward(i, tape["layers"][i], dx, grads)

        dx = _apply_mask(dx, tape["emb_mask"])
        grads["tok_emb"] = np.zeros_like(p["tok_emb"])
        np.add.at(grads["tok_emb"], encoded.token_ids, dx)
        grads["pos_emb"] = np.zeros_like(p["pos_emb"])
        np.add.at(grads["pos_emb"], encoded.position_ids, dx)
        if cfg.variant == "embed":
            grads["pin_emb"] = np.zeros_like(p["pin_emb"])
            np.add.at(grads["pin_emb"], encoded.pinyin_ids, dx)
        return grads

    def _layer_backward(self, i, t, dx_out, grads):
        p = self.params
        # mlp branch
        dmlp = _apply_mask(dx_out, t["mlp_mask"])
        grads[f"l{i}.mlp.w2"] = t["act"].T @ dmlp
        grads[f"l{i}.mlp.b2"] = dmlp.sum(axis=0)
        dact = dmlp @ p[f"l{i}.mlp.w2"].T
        dpre = dact * gelu_grad(t["pre"])
        grads[f"l{i}.mlp.w1"] = t["h2"].T @ dpre
        grads[f"l{i}.mlp.b1"] = dpre.sum(axis=0)
        dh2 = dpre @ p[f"l{i}.mlp.w1"].T
        dx_mid, grads[f"l{i}.ln2.g"], grads[f"l{i}.ln2.b"] = layernorm_backward(
            dh2, t["ln2_cache"]
        )
        dx_mid = dx_mid + dx_out

        # attention branch
        datt = _apply_mask(dx_mid, t["att_mask"])
        grads[f"l{i}.attn.proj_w"] = t["merged"].T @ datt
        grads[f"l{i}.attn.proj_b"] = datt.sum(axis=0)
        dmerged = datt @ p[f"l{i}.attn.proj_w"].T
        n_heads = self.config.n_heads
        dctx = _split_heads(dmerged, n_heads)
        dq, dk, dv = kernels.attn_backward(t["q"], t["k"], t["v"], t["probs"], dctx)
        dqkv = np.concatenate(
            [_merge_heads(dq), _merge_heads(dk), _merge_heads(dv)], axis=1
        )
        grads[f"l{i}.attn.w"] = t["h1"].T @ dqkv
        grads[f"l{i}.attn.b"] = dqkv.sum(axis=0)
        dh1 = dqkv @ p[f"l{i}.attn.w"].T
        dx_in, grads[f"l{i}.ln1.g"], grads[f"l{i}.ln1.b"] = layernorm_backward(
            dh1, t["ln1_cache"]
        )
        return dx_in + dx_mid

    # -- incremental decoding ----------------------------------------------------

    def prefix_state(self, encoded: EncodedInput) -> DecodeState:
        """Full forward over a prefix, keeping per-layer keys/values and the
        logits at the last slot."""
        logits, tape = self.forward(encoded, collect_tape=True)
        keys = tuple(layer["k"] for layer in tape["layers"])
        values = tuple(layer["v"] for layer in tape["layers"])
        return DecodeState(
            length=len(encoded), keys=keys, values=values, logits=logits[-1]
        )

    def extend(
        self, state: DecodeState, token_id: int, position_id: int, pinyin_id: int = 0
    ) -> DecodeState:
        """One more slot. Returns a new state; `state` stays valid."""
        cfg, p = self.config, self.params
        if state.length + 1 > cfg.max_positions:
            raise ModelError(f"decode exceeds {cfg.max_positions} slots")
        if not 0 <= position_id < cfg.max_positions:
            raise ModelError(f"position id {position_id} out of range")
        if not 0 <= token_id < cfg.n_tokens:
            raise ModelError(f"token id {token_id} out of range")

        x = p["tok_emb"][token_id] + p["pos_emb"][position_id]
        if cfg.variant == "embed":
            if not 0 <= pinyin_id < cfg.pinyin_embed_size:
                raise ModelError(f"pinyin channel id {pinyin_id} out of range")
            x = x + p["pin_emb"][pinyin_id]
        x = x[None, :]  # one slot

        d, n_heads, scale = cfg.d_model, cfg.n_heads, 1.0 / math.sqrt(cfg.head_dim)
        new_keys, new_values = [], []
        for i in range(cfg.n_layers):
            h1, _ = layernorm_forward(x, p[f"l{i}.ln1.g"], p[f"l{i}.ln1.b"])
            qkv = h1 @ p[f"l{i}.attn.w"] + p[f"l{i}.attn.b"]
            q = _split_heads(qkv[:, :d], n_heads)[:, 0, :]  # (H, Dh)
            k_new = _split_heads(qkv[:, d : 2 * d], n_heads)
            v_new = _split_heads(qkv[:, 2 * d :], n_heads)
            k_all = np.concatenate([state.keys[i], k_new], axis=1)
            v_all = np.concatenate([state.values[i], v_new], axis=1)
            scores = np.einsum("hsd,hd->hs", k_all, q) * scale
            scores -= scores.max(axis=-1, keepdims=True)
            probs = np.exp(scores)
            probs /= probs.sum(axis=-1, keepdims=True)
            ctx = np.einsum("hs,hsd->hd", probs, v_all)
            att = ctx.reshape(1, d) @ p[f"l{i}.attn.proj_w"] + p[f"l{i}.attn.proj_b"]
            x_mid = x + att
            h2, _ = layernorm_forward(x_mid, p[f"l{i}.ln2.g"], p[f"l{i}.ln2.b"])
            mlp = gelu(h2 @ p[f"l{i}.mlp.w1"] + p[f"l{i}.mlp.b1"]) @ p[f"l{i}.mlp.w2"]
            x = x_mid + mlp + p[f"l{i}.mlp.b2"]
            new_keys.append(k_all)
            new_values.append(v_all)

        xf, _ = layernorm_forward(x, p["ln_f.g"], p["ln_f.b"])
        logits = (xf @ p["head.w"] + p["head.b"])[0]
        return DecodeState(
            length=state.length + 1,
            keys=tuple(new_keys),
            values=tuple(new_values),
            logits=logits,
        )


# -- checkpoint io --------------------------------------------------------------

_MAGIC = "PYLM1"


def dumps_model(model: Model, vocab: Vocab) -> bytes:
    """Text header (magic, config, vocab, tensor manifest) then raw
    little-endian float64 tensor data in manifest order."""
    buf = io.BytesIO()
    names = sorted(model.params)
    manifest = [[name, list(model.params[name].shape)] for name in names]
    header = (
        f"{_MAGIC}\n"
        f"config={json.dumps(model.config.to_dict(), ensure_ascii=True, separators=(',', ':'))}\n"
        f"vocab={vocab.to_json()}\n"
        f"tensors={json.dumps(manifest, separators=(',', ':'))}\n"
        "---\n"
    )
    buf.write(header.encode("ascii"))
    for name in names:
        buf.write(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())
    return buf.getvalue()


def save_model(model: Model, vocab: Vocab, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_model(model, vocab))


def _read_header(fh: BinaryIO) -> dict[str, str]:
    magic = fh.readline().decode("ascii", errors="replace").rstrip("\n")
    if magic != _MAGIC:
        raise CheckpointError(f"not a {_MAGIC} checkpoint (got {magic!r})")
    fields: dict[str, str] = {}
    while True:
        line = fh.readline()
        if not line:
            raise CheckpointError("header ended before '---'")
        text = line.decode("ascii", errors="replace").rstrip("\n")
        if text == "---":
            return fields
        key, sep, value = text.partition("=")
        if not sep:
            raise CheckpointError(f"malformed header line {text!r}")
        fields[key] = value


def _parse_header(fields: dict[str, str]):
    for key in ("config", "vocab", "tensors"):
        if key not in fields:
            raise CheckpointError(f"header missing {key!r}")
    try:
        config = ModelConfig.from_dict(json.loads(fields["config"]))
        manifest = json.loads(fields["tensors"])
    except (json.JSONDecodeError, ModelError) as exc:
        raise CheckpointError(f"bad header: {exc}") from exc
    vocab = Vocab.from_json(fields["vocab"])
    return config, vocab, manifest


def load_checkpoint_header(path) -> tuple[ModelConfig, Vocab]:
    """Config and vocab without reading tensor data."""
    with open(path, "rb") as fh:
        config, vocab, _ = _parse_header(_read_header(fh))
    return config, vocab


def load_model(path) -> tuple[Model, Vocab]:
    with open(path, "rb") as fh:
        config, vocab, manifest = _parse_header(_read_header(fh))
        params: dict[str, np.ndarray] = {}
        for entry in manifest:
            try:
                name, shape = entry
                shape = tuple(int(s) for s in shape)
            except (ValueError, TypeError) as exc:
                raise CheckpointError(f"bad tensor manifest entry {entry!r}") from exc
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise CheckpointError(f"truncated tensor data for {name!r}")
            params[name] = np.frombuffer(raw, dtype="<f8").astype(
                np.float64, copy=True
            ).reshape(shape)
        if fh.read(1):
            raise CheckpointError("trailing data after last tensor")
    model = Model(config, params)
    _check_param_shapes(model)
    return model, vocab


def _check_param_shapes(model: Model) -> None:
    expect = {name: arr.shape for name, arr in init_params(model.config).items()}
    got = {name: arr.shape for name, arr in model.params.items()}
    if expect != got:
        missing = sorted(set(expect) - set(got))
        extra = sorted(set(got) - set(expect))
        wrong = sorted(
            name for name in set(expect) & set(got) if expect[name] != got[name]
        )
        raise CheckpointError(
            f"parameter mismatch: missing={missing} extra={extra} wrong_shape={wrong}"
        )
