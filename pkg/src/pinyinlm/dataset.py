"""Evaluation-set construction and loading.

Raw domain corpora are segmented into sentences, then sampled into a 3x3
grid of (context length, target length) buckets. Lengths are counted in
characters. Targets are contiguous spans in which every character has a
reading and sit immediately after their context; contexts may contain
anything. Output is one JSONL file per (domain, cell) plus a manifest, all
byte-reproducible from (spec, seed). A separate loader reads pre-segmented
perfect-pinyin files with empty context (`<syllables>\t<chars>` rows).
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from pinyinlm.lexicon import Lexicon, abbreviation_of, split_syllable

SENTENCE_ENDERS = "。！？；"

# context buckets cover 0-3, 4-9, 10+; targets 1-3, 4-9, 10+. The open
# buckets are capped to keep encodings inside the position budget.
CONTEXT_BUCKETS = (("0-3", 0, 3), ("4-9", 4, 9), ("10+", 10, 30))
TARGET_BUCKETS = (("1-3", 1, 3), ("4-9", 4, 9), ("10+", 10, 25))
CELLS = tuple(
    (cb[0], tb[0]) for cb in CONTEXT_BUCKETS for tb in TARGET_BUCKETS
)

_DOMAIN_RE = re.compile(r"^[A-Za-z0-9_-]+$")


class DatasetError(ValueError):
    """Raised for bad specs, unreadable corpora, and malformed files."""


def cell_label(context_bucket: str, target_bucket: str) -> str:
    return f"ctx{context_bucket}_tgt{target_bucket}"


def context_bucket_of(length: int) -> str:
    if length <= 3:
        return "0-3"
    return "4-9" if length <= 9 else "10+"


def target_bucket_of(length: int) -> str:
    if length < 1:
        raise DatasetError("target cannot be empty")
    if length <= 3:
        return "1-3"
    return "4-9" if length <= 9 else "10+"


@dataclass(frozen=True)
class EvalInstance:
    domain: str
    context: str
    target: str
    pinyin_perfect: tuple[str, ...]
    pinyin_abbrev: tuple[str, ...]
    context_bucket: str
    target_bucket: str

    def __post_init__(self):
        if not (len(self.pinyin_perfect) == len(self.pinyin_abbrev) == len(self.target)):
            raise DatasetError(
                f"misaligned instance: {len(self.target)} target chars, "
                f"{len(self.pinyin_perfect)} perfect / {len(self.pinyin_abbrev)} abbreviated tokens"
            )

    def to_obj(self) -> dict:
        return {
            "domain": self.domain,
            "context": self.context,
            "target": self.target,
            "pinyin_perfect": list(self.pinyin_perfect),
            "pinyin_abbrev": list(self.pinyin_abbrev),
            "context_bucket": self.context_bucket,
            "target_bucket": self.target_bucket,
        }

    @classmethod
    def from_obj(cls, obj: dict, where: str = "instance") -> "EvalInstance":
        try:
            return cls(
                domain=obj["domain"],
                context=obj["context"],
                target=obj["target"],
                pinyin_perfect=tuple(obj["pinyin_perfect"]),
                pinyin_abbrev=tuple(obj["pinyin_abbrev"]),
                context_bucket=obj["context_bucket"],
                target_bucket=obj["target_bucket"],
            )
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"{where}: malformed instance object ({exc!r})") from exc


@dataclass(frozen=True)
class BuildSpec:
    corpora: Mapping[str, str | Path]  # domain name -> corpus path
    instances_per_config: int
    seed: int = 0

    def __post_init__(self):
        if not self.corpora:
            raise DatasetError("spec needs at least one domain")
        if self.instances_per_config < 1:
            raise DatasetError("instances_per_config must be >= 1")
        for domain in self.corpora:
            if not _DOMAIN_RE.match(domain):
                raise DatasetError(
                    f"domain name {domain!r} must match {_DOMAIN_RE.pattern}"
                )


# -- sentence intake ----------------------------------------------------------


def split_sentences(text: str) -> list[str]:
    """Sentences are maximal substrings ending at one of 。！？； or at end
    of line; surrounding whitespace is stripped and empties dropped."""
    out = []
    for line in text.splitlines():
        buf = []
        for ch in line:
            buf.append(ch)
            if ch in SENTENCE_ENDERS:
                sentence = "".join(buf).strip()
                if sentence:
                    out.append(sentence)
                buf = []
        sentence = "".join(buf).strip()
        if sentence:
            out.append(sentence)
    return out


def read_domain_corpus(domain: str, path: str | Path) -> list[str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"domain {domain!r}: cannot read corpus ({exc})") from exc
    sentences = split_sentences(text)
    if not sentences:
        raise DatasetError(f"domain {domain!r}: corpus {path} has no sentences")
    return sentences


# -- sampling -----------------------------------------------------------------


def _bucket_range(buckets, label: str) -> tuple[int, int]:
    for name, lo, hi in buckets:
        if name == label:
            return lo, hi
    raise DatasetError(f"unknown bucket {label!r}")


def feasible_pairs(
    lexicon: Lexicon, sentence: str, context_bucket: str, target_bucket: str
) -> list[tuple[int, int]]:
    """All (split, target_length) pairs satisfying both buckets with a fully
    readable target window."""
    clo, chi = _bucket_range(CONTEXT_BUCKETS, context_bucket)
    tlo, thi = _bucket_range(TARGET_BUCKETS, target_bucket)
    n = len(sentence)
    readable = np.array(
        [reading is not None for reading in lexicon.annotate(sentence)], dtype=np.int64
    )
    prefix = np.concatenate([[0], np.cumsum(readable)])
    pairs = []
    for c in range(clo, min(chi, n - 1) + 1):
        for t in range(tlo, min(thi, n - c) + 1):
            if prefix[c + t] - prefix[c] == t:  # window fully readable
                pairs.append((c, t))
    return pairs


def sample_case(
    lexicon: Lexicon,
    sentence: str,
    context_bucket: str,
    target_bucket: str,
    rng: np.random.Generator,
    domain: str = "",
) -> EvalInstance | None:
    """Uniform draw over the sentence's feasible (split, length) pairs;
    None when the buckets cannot be satisfied."""
    pairs = feasible_pairs(lexicon, sentence, context_bucket, target_bucket)
    if not pairs:
        return None
    c, t = pairs[int(rng.integers(0, len(pairs)))]
    target = sentence[c : c + t]
    readings = lexicon.annotate(target)
    return EvalInstance(
        domain=domain,
        context=sentence[:c],
        target=target,
        pinyin_perfect=tuple(r.text for r in readings),
        pinyin_abbrev=tuple(abbreviation_of(r) for r in readings),
        context_bucket=context_bucket,
        target_bucket=target_bucket,
    )


# -- building -------------------------------------------------------------------


def _cell_rng(seed: int, domain: str, cell_index: int) -> np.random.Generator:
    # stable per (seed, domain, cell): domain order in BuildSpec cannot change
    # the stream, so per-domain builds are independent and parallelizable
    digest = hashlib.sha256(domain.encode("utf-8")).digest()
    domain_key = int.from_bytes(digest[:8], "big")
    return np.random.default_rng([seed, domain_key, cell_index])


def build(
    spec: BuildSpec, lexicon: Lexicon
) -> tuple[dict[tuple[str, str, str], list[EvalInstance]], dict]:
    """Fills the 9-cell grid for every domain.

    Returns ({(domain, context_bucket, target_bucket): instances}, manifest).
    Duplicate (context, target) pairs are rejected within a cell; when a
    corpus cannot fill a cell inside the attempt budget the manifest records
    the shortfall instead of failing.
    """
    dataset: dict[tuple[str, str, str], list[EvalInstance]] = {}
    manifest_domains: dict[str, dict] = {}
    total = 0
    budget = max(2000, 100 * spec.instances_per_config)

    for domain in spec.corpora:
        sentences = read_domain_corpus(domain, spec.corpora[domain])
        cells: dict[str, dict] = {}
        for cell_index, (cb, tb) in enumerate(CELLS):
            rng = _cell_rng(spec.seed, domain, cell_index)
            seen: set[tuple[str, str]] = set()
            instances: list[EvalInstance] = []
            attempts = 0
            while len(instances) < spec.instances_per_config and attempts < budget:
                attempts += 1
                sentence = sentences[int(rng.integers(0, len(sentences)))]
                instance = sample_case(lexicon, sentence, cb, tb, rng, domain=domain)
                if instance is None:
                    continue
                key = (instance.context, instance.target)
                if key in seen:
                    continue
                seen.add(key)
                instances.append(instance)
            dataset[(domain, cb, tb)] = instances
            cells[cell_label(cb, tb)] = {
                "count": len(instances),
                "shortfall": spec.instances_per_config - len(instances),
                "file": dataset_file_name(domain, cb, tb),
            }
            total += len(instances)
        manifest_domains[domain] = {"sentences": len(sentences), "cells": cells}

    manifest = {
        "seed": spec.seed,
        "instances_per_config": spec.instances_per_config,
        "bucket_caps": {"context": CONTEXT_BUCKETS[-1][2], "target": TARGET_BUCKETS[-1][2]},
        "domains": manifest_domains,
        "total_instances": total,
    }
    return dataset, manifest


# -- serialization -----------------------------------------------------------------


def dataset_file_name(domain: str, context_bucket: str, target_bucket: str) -> str:
    return f"{domain}__{cell_label(context_bucket, target_bucket)}.jsonl"


def _dump_obj(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def write_dataset(
    dataset: dict[tuple[str, str, str], list[EvalInstance]],
    manifest: dict,
    out_dir: str | Path,
) -> Path:
    """One JSONL file per cell plus manifest.json; returns the manifest path.
    Identical (dataset, manifest) always produce identical bytes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for (domain, cb, tb), instances in dataset.items():
        lines = [_dump_obj(inst.to_obj()) for inst in instances]
        path = out / dataset_file_name(domain, cb, tb)
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    manifest_path = out / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return manifest_path


def load_wd(path: str | Path) -> list[EvalInstance]:
    """Reads one cell file written by write_dataset."""
    instances = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read dataset file: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
        instances.append(EvalInstance.from_obj(obj, where=f"{path}:{lineno}"))
    return instances


# -- pre-segmented perfect-pinyin files ------------------------------------------


def load_pd(path: str | Path) -> list[EvalInstance]:
    """`<syllables space-separated>\t<target chars>` per line: perfect-mode
    instances with empty context. Reports malformed rows by line number."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read file: {exc}") from exc
    instances = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise DatasetError(
                f"{path}:{lineno}: expected 2 tab-separated fields, got {len(fields)}"
            )
        syllables = tuple(fields[0].split())
        target = fields[1]
        if not syllables or not target:
            raise DatasetError(f"{path}:{lineno}: empty pinyin or target")
        if len(syllables) != len(target):
            raise DatasetError(
                f"{path}:{lineno}: {len(syllables)} syllables for {len(target)} characters"
            )
        abbrev = []
        for syllable in syllables:
            parts = split_syllable(syllable)
            if parts is None:
                raise DatasetError(f"{path}:{lineno}: bad syllable {syllable!r}")
            initial, final = parts
            abbrev.append(initial if initial else final[0])
        instances.append(
            EvalInstance(
                domain="pd",
                context="",
                target=target,
                pinyin_perfect=syllables,
                pinyin_abbrev=tuple(abbrev),
                context_bucket="0-3",
                target_bucket=target_bucket_of(len(target)),
            )
        )
    if not instances:
        raise DatasetError(f"{path}: no instances")
    return instances
