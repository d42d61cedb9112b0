"""P@K evaluation, aggregation, hit logging, and latency comparison.

A decode hits at K when the ground-truth string appears among the first K
candidates (exact match, no partial credit). Hit flags are averaged per
(domain, context bucket, target bucket) cell; domain and overall scores are
instance-weighted means, identical to equal cell weighting when every cell
is full. Per-instance results stream to a JSONL hit log from which the whole
report can be replayed bit-for-bit. Latency timing covers tokenization,
encoding, and search for one instance at a time; model loading is excluded.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from pinyinlm.dataset import EvalInstance
from pinyinlm.decoder import Candidate, DecodeError, Decoder
from pinyinlm.lexicon import MODES, PERFECT


class EvalError(ValueError):
    """Raised for bad parameters and aborted decodes."""


DEFAULT_KS = (1, 5, 10)


def precision_at_k(
    candidates: Sequence[Candidate], truth: str, ks: Sequence[int]
) -> dict[int, bool]:
    """Hit flags per K: does `truth` appear among the first K candidate
    texts? Ks beyond the candidate count are judged on what exists."""
    for candidate in candidates:
        if len(candidate.text) != len(truth):
            raise EvalError(
                f"candidate {candidate.text!r} length {len(candidate.text)} "
                f"!= truth length {len(truth)}"
            )
    texts = [c.text for c in candidates]
    return {k: truth in texts[:k] for k in ks}


def rank_of_truth(candidates: Sequence[Candidate], truth: str) -> int:
    """1-based rank of the exact ground truth, or -1 when absent."""
    for i, candidate in enumerate(candidates):
        if candidate.text == truth:
            return i + 1
    return -1


@dataclass(frozen=True)
class Aggregate:
    count: int
    precision: dict[int, float]  # K -> percentage
    mean_ms: float

    def to_obj(self) -> dict:
        return {
            "count": self.count,
            "precision": {str(k): v for k, v in sorted(self.precision.items())},
            "mean_ms": self.mean_ms,
        }


@dataclass(frozen=True)
class EvalReport:
    metadata: dict
    cells: dict[tuple[str, str, str], Aggregate]
    domains: dict[str, Aggregate]
    overall: Aggregate

    def to_obj(self) -> dict:
        return {
            "metadata": self.metadata,
            "cells": [
                {
                    "domain": domain,
                    "context_bucket": cb,
                    "target_bucket": tb,
                    **agg.to_obj(),
                }
                for (domain, cb, tb), agg in sorted(self.cells.items())
            ],
            "domains": {d: agg.to_obj() for d, agg in sorted(self.domains.items())},
            "overall": self.overall.to_obj(),
        }

    def render(self) -> str:
        """Aligned plain-text tables, one grid per domain plus totals."""
        ks = sorted(self.overall.precision)
        header = ["domain", "context", "target", "n"]
        header += [f"P@{k}" for k in ks] + ["ms"]
        rows = []
        for (domain, cb, tb), agg in sorted(self.cells.items()):
            rows.append(
                [domain, cb, tb, str(agg.count)]
                + [f"{agg.precision[k]:.1f}" for k in ks]
                + [f"{agg.mean_ms:.2f}"]
            )
        for domain, agg in sorted(self.domains.items()):
            rows.append(
                [domain, "all", "all", str(agg.count)]
                + [f"{agg.precision[k]:.1f}" for k in ks]
                + [f"{agg.mean_ms:.2f}"]
            )
        rows.append(
            ["overall", "-", "-", str(self.overall.count)]
            + [f"{self.overall.precision[k]:.1f}" for k in ks]
            + [f"{self.overall.mean_ms:.2f}"]
        )
        widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
        def fmt(row):
            return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        lines = [fmt(header), fmt(["-" * w for w in widths])]
        lines += [fmt(r) for r in rows]
        return "\n".join(lines) + "\n"


def _aggregate(flags: list[dict[int, bool]], times: list[float], ks) -> Aggregate:
    n = len(flags)
    precision = {
        k: (100.0 * sum(1 for f in flags if f[k]) / n) if n else 0.0 for k in ks
    }
    mean_ms = (sum(times) / n) if n else 0.0
    return Aggregate(count=n, precision=precision, mean_ms=mean_ms)


def _build_report(entries, ks, metadata) -> EvalReport:
    """entries: (domain, cb, tb, flags, ms) in dataset order."""
    by_cell: dict[tuple[str, str, str], tuple[list, list]] = {}
    by_domain: dict[str, tuple[list, list]] = {}
    all_flags, all_times = [], []
    for domain, cb, tb, flags, ms in entries:
        cell = by_cell.setdefault((domain, cb, tb), ([], []))
        cell[0].append(flags)
        cell[1].append(ms)
        dom = by_domain.setdefault(domain, ([], []))
        dom[0].append(flags)
        dom[1].append(ms)
        all_flags.append(flags)
        all_times.append(ms)
    return EvalReport(
        metadata=metadata,
        cells={key: _aggregate(f, t, ks) for key, (f, t) in by_cell.items()},
        domains={d: _aggregate(f, t, ks) for d, (f, t) in by_domain.items()},
        overall=_aggregate(all_flags, all_times, ks),
    )


def _check_eval_args(instances, mode, beam_size, ks) -> tuple[int, ...]:
    if not instances:
        raise EvalError("dataset is empty")
    if mode not in MODES:
        raise EvalError(f"mode must be one of {MODES}; got {mode!r}")
    ks = tuple(sorted(set(int(k) for k in ks)))
    if not ks or ks[0] < 1:
        raise EvalError("ks must be positive integers")
    if beam_size < ks[-1]:
        raise EvalError(f"beam_size {beam_size} < max K {ks[-1]}")
    return ks


def evaluate(
    decoder: Decoder,
    instances: Sequence[EvalInstance],
    mode: str,
    beam_size: int = 16,
    ks: Sequence[int] = DEFAULT_KS,
    hit_log_path: str | Path | None = None,
    model_id: str = "",
    seed: int | None = None,
) -> EvalReport:
    """Decodes every instance and aggregates P@K per cell, domain, overall.

    Timing covers predict() only. With hit_log_path, a meta line plus one
    JSONL entry per instance (id, rank of truth or -1, ms) are written; the
    report can be rebuilt from that file alone via replay_hit_log."""
    ks = _check_eval_args(instances, mode, beam_size, ks)
    metadata = {
        "model_id": model_id,
        "mode": mode,
        "beam_size": beam_size,
        "ks": list(ks),
        "seed": seed,
    }
    log_fh = open(hit_log_path, "w", encoding="utf-8") if hit_log_path else None
    entries = []
    try:
        if log_fh:
            log_fh.write(json.dumps({"type": "meta", **metadata}) + "\n")
        counters: dict[tuple[str, str, str], int] = {}
        for instance in instances:
            cell = (instance.domain, instance.context_bucket, instance.target_bucket)
            index = counters.get(cell, 0)
            counters[cell] = index + 1
            instance_id = f"{instance.domain}:{cell_tag(instance)}:{index}"
            raw = instance.pinyin_perfect if mode == PERFECT else instance.pinyin_abbrev
            start = time.perf_counter()
            try:
                result = decoder.predict(
                    instance.context, list(raw), mode, beam_size=beam_size, top_k=beam_size
                )
            except DecodeError as exc:
                raise EvalError(f"decode failed for {instance_id}: {exc}") from exc
            ms = (time.perf_counter() - start) * 1000.0
            flags = precision_at_k(result.candidates, instance.target, ks)
            entries.append((*cell, flags, ms))
            if log_fh:
                log_fh.write(
                    json.dumps(
                        {
                            "type": "hit",
                            "id": instance_id,
                            "domain": instance.domain,
                            "context_bucket": instance.context_bucket,
                            "target_bucket": instance.target_bucket,
                            "rank": rank_of_truth(result.candidates, instance.target),
                            "ms": ms,
                        }
                    )
                    + "\n"
                )
    finally:
        if log_fh:
            log_fh.close()
    return _build_report(entries, ks, metadata)


def cell_tag(instance: EvalInstance) -> str:
    return f"ctx{instance.context_bucket}:tgt{instance.target_bucket}"


def replay_hit_log(path: str | Path) -> EvalReport:
    """Rebuilds the exact EvalReport from a hit log written by evaluate()."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise EvalError(f"cannot read hit log: {exc}") from exc
    if not lines:
        raise EvalError(f"{path}: empty hit log")
    meta = json.loads(lines[0])
    if meta.get("type") != "meta":
        raise EvalError(f"{path}:1: expected a meta line")
    metadata = {k: v for k, v in meta.items() if k != "type"}
    ks = tuple(metadata["ks"])
    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        obj = json.loads(line)
        if obj.get("type") != "hit":
            raise EvalError(f"{path}:{lineno}: expected a hit line")
        rank = obj["rank"]
        flags = {k: 0 < rank <= k for k in ks}
        entries.append(
            (obj["domain"], obj["context_bucket"], obj["target_bucket"], flags, obj["ms"])
        )
    if not entries:
        raise EvalError(f"{path}: no hit entries")
    return _build_report(entries, ks, metadata)


def latency_compare(
    decoders: Sequence[tuple[str, Decoder]],
    sample: Sequence[EvalInstance],
    mode: str,
    beam_size: int = 16,
    ks: Sequence[int] = (1, 5),
) -> list[dict]:
    """Times each model over the same sample, one model at a time, and
    reports (model id, layer count, mean ms, P@K) sorted by layer count."""
    if len(decoders) < 2:
        raise EvalError("latency comparison needs at least two models")
    rows = []
    for model_id, decoder in decoders:
        report = evaluate(decoder, sample, mode, beam_size=beam_size, ks=ks, model_id=model_id)
        rows.append(
            {
                "model_id": model_id,
                "n_layers": decoder.model.config.n_layers,
                "mean_ms": report.overall.mean_ms,
                "precision": dict(report.overall.precision),
            }
        )
    rows.sort(key=lambda r: (r["n_layers"], r["model_id"]))
    return rows
