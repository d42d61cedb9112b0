"""Acceptance suite: eleven checks covering constraint soundness, the
constrained softmax, gradients, search exactness, encoding invariants, and
the desk-scale directional experiments. Each test prints one PASS/FAIL line
with its measured numbers; the heavier experiments share session fixtures.

Budget note: the whole file trains one 2-layer model once (about five
minutes) and nine 1-layer ablation models (about ten minutes); everything
else is seconds.
"""
import itertools
import math
import statistics
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.special import log_softmax

from pinyinlm.dataset import (
    BuildSpec,
    build,
    context_bucket_of,
    target_bucket_of,
    write_dataset,
)
from pinyinlm.decoder import Candidate, DecodeRequest, Decoder
from pinyinlm.encode import ClassIndex, InputEncoder
from pinyinlm.evaluation import evaluate, latency_compare, replay_hit_log
from pinyinlm.lexicon import (
    ABBREV,
    PERFECT,
    Lexicon,
    PinyinToken,
    default_lexicon_path,
    load_lexicon,
)
from pinyinlm.model import Model, ModelConfig
from pinyinlm.training import (
    TrainConfig,
    build_vocab,
    constrained_log_prob,
    loss_and_grads,
    make_example,
    read_corpus,
    train,
)
from pinyinlm.vocab import Vocab

TOY = Path(__file__).parent / "data" / "toy"

# Ablation budget shared by all three arms (matched budgets, fixed seeds).
ABLATION_SEEDS = (0, 1, 2)
ABLATION_STEPS = 500
ABLATION_LR = 5e-4
ABLATION_EVAL_IPC = 25


@pytest.fixture()
def report(capsys):
    """Prints one visible PASS/FAIL line per criterion, then asserts."""

    def _report(label: str, ok: bool, detail: str = ""):
        verdict = "PASS" if ok else "FAIL"
        suffix = f"  [{detail}]" if detail else ""
        with capsys.disabled():
            print(f"{verdict}  {label}{suffix}", flush=True)
        assert ok, f"{label}{suffix}"

    return _report


@pytest.fixture(scope="module")
def lex():
    return load_lexicon(default_lexicon_path())


@pytest.fixture(scope="module")
def full_vocab(lex):
    return Vocab.from_lexicon(lex)


def syllable_inventory(lex):
    perfect = sorted({s.text for readings in lex.char_to_readings.values() for s in readings})
    abbrev = sorted({lex.abbreviation_key(s) for s in perfect})
    return perfect, abbrev


# -- P1: every emitted character matches its pinyin token ------------------------


def test_p1_constraint_soundness(report, lex, full_vocab):
    perfect, abbrev = syllable_inventory(lex)
    chars = sorted(lex.char_to_readings)
    rng = np.random.default_rng(101)
    models = [
        Model.init(
            ModelConfig(
                n_layers=1,
                d_model=16,
                n_heads=2,
                d_ff=32,
                n_tokens=full_vocab.n_tokens,
                head_size=full_vocab.head_size,
                variant=variant,
                pinyin_embed_size=full_vocab.pinyin_embed_size if variant == "embed" else 0,
                max_positions=32,
                seed=seed,
            )
        )
        for seed, variant in enumerate(("baseline", "concat", "embed", "concat", "baseline"))
    ]
    decoders = [Decoder(m, lex, full_vocab) for m in models]

    start = time.perf_counter()
    decodes = 0
    emitted = 0
    for i in range(1000):
        decoder = decoders[i % len(decoders)]
        mode = PERFECT if rng.integers(0, 2) == 0 else ABBREV
        pool = perfect if mode == PERFECT else abbrev
        k = int(rng.integers(1, 5))
        raw = [pool[int(rng.integers(0, len(pool)))] for _ in range(k)]
        n_ctx = int(rng.integers(0, 7))
        context = "".join(chars[int(rng.integers(0, len(chars)))] for _ in range(n_ctx))
        result = decoder.predict(context, raw, mode, beam_size=4)
        decodes += 1
        for cand in result.candidates:
            assert len(cand.text) == k
            for char, token in zip(cand.text, result.tokens):
                assert lex.readings_match(char, token), (char, token)
                emitted += 1
    elapsed = time.perf_counter() - start
    report(
        "P1 constraint soundness",
        decodes == 1000 and elapsed < 60.0,
        f"{decodes} decodes, {emitted} characters checked, {elapsed:.1f}s",
    )


# -- P2: constrained softmax ------------------------------------------------------


def test_p2_constrained_softmax(report):
    rng = np.random.default_rng(202)
    head = 50
    worst_sum = 0.0
    worst_full = 0.0
    worst_shift = 0.0
    singletons = 0
    for _ in range(10_000):
        logits = rng.normal(0.0, 5.0, size=head)
        size = int(rng.integers(1, head + 1))
        class_ixs = np.sort(rng.choice(head, size=size, replace=False))
        target = int(class_ixs[int(rng.integers(0, size))])

        total = sum(
            math.exp(constrained_log_prob(logits, int(m), class_ixs)) for m in class_ixs
        )
        worst_sum = max(worst_sum, abs(total - 1.0))

        full = constrained_log_prob(logits, target, None)
        worst_full = max(worst_full, abs(full - float(log_softmax(logits)[target])))

        if size == 1:
            singletons += 1
            assert constrained_log_prob(logits, target, class_ixs) == 0.0

        shift = float(rng.normal(0.0, 50.0))
        shifted = constrained_log_prob(logits + shift, target, class_ixs)
        worst_shift = max(
            worst_shift, abs(shifted - constrained_log_prob(logits, target, class_ixs))
        )
    report(
        "P2 constrained softmax",
        worst_sum < 1e-9 and worst_full < 1e-12 and worst_shift < 1e-12,
        f"sum err {worst_sum:.2e}, full-vocab err {worst_full:.2e}, "
        f"shift err {worst_shift:.2e}, {singletons} singleton classes exact",
    )


# -- P3: analytic gradients vs central differences --------------------------------


GRADCHECK_LEXICON = Lexicon(
    [
        ("我", "wo"),
        ("握", "wo"),
        ("们", "men"),
        ("门", "men"),
        ("他", "ta"),
        ("她", "ta"),
        ("好", "hao"),
        ("号", "hao"),
        ("妈", "ma"),
        ("马", "ma"),
        ("水", "shui"),
        ("说", "shuo"),
    ]
)


def gradcheck_model(vocab, variant, seed):
    return Model.init(
        ModelConfig(
            n_layers=1,
            d_model=8,
            n_heads=2,
            d_ff=16,
            n_tokens=vocab.n_tokens,
            head_size=vocab.head_size,
            variant=variant,
            pinyin_embed_size=vocab.pinyin_embed_size if variant == "embed" else 0,
            max_positions=32,
            seed=seed,
        )
    )


def max_relative_error(model, class_index, batch, pc_loss, samples_per_tensor=12, eps=1e-5):
    _, grads, _ = loss_and_grads(model, class_index, batch, pc_loss)
    rng = np.random.default_rng(303)
    worst = 0.0
    for name in sorted(model.params):
        param = model.params[name]
        flat = param.reshape(-1)
        gflat = grads[name].reshape(-1)
        ixs = np.arange(param.size)
        if param.size > samples_per_tensor:
            ixs = rng.choice(param.size, size=samples_per_tensor, replace=False)
        for ix in ixs:
            keep = flat[ix]
            flat[ix] = keep + eps
            up = loss_and_grads(model, class_index, batch, pc_loss)[0]
            flat[ix] = keep - eps
            down = loss_and_grads(model, class_index, batch, pc_loss)[0]
            flat[ix] = keep
            numeric = (up - down) / (2 * eps)
            analytic = gflat[ix]
            if max(abs(numeric), abs(analytic)) < 1e-6:
                continue  # below the finite-difference noise floor
            worst = max(worst, abs(numeric - analytic) / max(abs(numeric), abs(analytic)))
    return worst


def test_p3_gradient_check(report):
    lex = GRADCHECK_LEXICON
    vocab = build_vocab(lex, ["我们好", "他说她妈妈好", "马水门"])
    encoder = InputEncoder(lex, vocab, max_positions=32)
    class_index = ClassIndex(lex, vocab)

    start = time.perf_counter()
    worst = 0.0
    for variant, pc_loss in itertools.product(("baseline", "concat", "embed"), (True, False)):
        model = gradcheck_model(vocab, variant, seed=7)
        batch = []
        for context, target in (("他说", "我们好"), ("", "她妈妈")):
            tokens = encoder.tokens_for_target(target, PERFECT)
            batch.append(make_example(encoder, variant, PERFECT, context, tokens, target))
        worst = max(worst, max_relative_error(model, class_index, batch, pc_loss))
    elapsed = time.perf_counter() - start
    report(
        "P3 gradient check",
        worst < 1e-4 and elapsed < 120.0,
        f"max rel err {worst:.2e} over 3 variants x pc on/off, {elapsed:.1f}s",
    )


# -- P4: beam search equals brute-force enumeration -------------------------------


def teacher_forced_score(decoder, context, tokens, text):
    """Scores a full candidate through one plain forward pass (no cache, no
    search): the sum of constrained log-probabilities at each target slot."""
    encoder = decoder.encoder
    variant = decoder.model.config.variant
    if variant == "concat":
        encoded = encoder.encode_concat(context, list(tokens), text)
    elif variant == "embed":
        channel = encoder.build_pinyin_of_next(context, list(tokens), text, tokens[0].mode)
        encoded = encoder.encode_embed(context, channel, text)
    else:
        encoded = encoder.encode_baseline(context, text)
    logits, _ = decoder.model.forward(encoded)
    score = 0.0
    # embed marks context slots too (whole-sequence LM); the target slots
    # are always the trailing k masked positions
    slots = np.nonzero(encoded.target_mask)[0][-len(text):]
    assert len(slots) == len(text)
    for slot, token, char in zip(slots, tokens, text):
        ixs = decoder.classes.head_indices(token)
        target_ix = decoder.vocab.head_index(int(encoded.token_ids[slot + 1]))
        score += constrained_log_prob(logits[slot], target_ix, ixs)
    return score


def test_p4_beam_search_oracle(report, lex, full_vocab):
    perfect, abbrev = syllable_inventory(lex)
    small_perfect = [s for s in perfect if len(lex.legitimate_chars(PinyinToken(PERFECT, s))) <= 20]
    small_abbrev = [s for s in abbrev if len(lex.legitimate_chars(PinyinToken(ABBREV, s))) <= 20]
    chars = sorted(lex.char_to_readings)
    rng = np.random.default_rng(404)
    models = {
        variant: Model.init(
            ModelConfig(
                n_layers=1,
                d_model=16,
                n_heads=2,
                d_ff=32,
                n_tokens=full_vocab.n_tokens,
                head_size=full_vocab.head_size,
                variant=variant,
                pinyin_embed_size=full_vocab.pinyin_embed_size if variant == "embed" else 0,
                max_positions=32,
                seed=17,
            )
        )
        for variant in ("baseline", "concat", "embed")
    }
    decoders = {v: Decoder(m, lex, full_vocab) for v, m in models.items()}

    start = time.perf_counter()
    cases = 0
    while cases < 200:
        mode = PERFECT if rng.integers(0, 2) == 0 else ABBREV
        pool = small_perfect if mode == PERFECT else small_abbrev
        k = int(rng.integers(1, 4))
        values = [pool[int(rng.integers(0, len(pool)))] for _ in range(k)]
        tokens = [PinyinToken(mode, v) for v in values]
        classes = [lex.legitimate_chars(t) for t in tokens]
        product_size = math.prod(len(c) for c in classes)
        if product_size > 64:
            continue  # keep the enumeration affordable; sizes stay <= 20 each
        decoder = decoders[("baseline", "concat", "embed")[cases % 3]]
        context = "".join(chars[int(rng.integers(0, len(chars)))] for _ in range(int(rng.integers(0, 4))))

        got = decoder.beam_search(
            DecodeRequest(context=context, pinyin=tuple(tokens), beam_size=product_size)
        )
        want = []
        for combo in itertools.product(*classes):
            text = "".join(combo)
            want.append(
                Candidate(text=text, score=teacher_forced_score(decoder, context, tokens, text))
            )
        want.sort(key=lambda c: (-c.score, c.text))

        assert len(got) == len(want) == product_size
        for g, w in zip(got, want):
            assert g.text == w.text, (g, w)
            assert abs(g.score - w.score) < 1e-9, (g, w)
        cases += 1
    elapsed = time.perf_counter() - start
    report(
        "P4 beam-search oracle",
        cases == 200 and elapsed < 300.0,
        f"200 cases, beam == exhaustive enumeration rank-for-rank, {elapsed:.1f}s",
    )


# -- P5: target slots share their pinyin token's position id ----------------------


def test_p5_position_sharing(report, lex, full_vocab):
    encoder = InputEncoder(lex, full_vocab, max_positions=64)
    chars = sorted(lex.char_to_readings)
    rng = np.random.default_rng(505)
    checked = 0
    for _ in range(1000):
        n = int(rng.integers(0, 11))
        k = int(rng.integers(1, 9))
        context = "".join(chars[int(rng.integers(0, len(chars)))] for _ in range(n))
        target = "".join(chars[int(rng.integers(0, len(chars)))] for _ in range(k))
        mode = PERFECT if rng.integers(0, 2) == 0 else ABBREV
        tokens = encoder.tokens_for_target(target, mode)
        encoded = encoder.encode_concat(context, tokens, target)
        # layout: [context x n, SEP, pinyin x k, SEP, target x k]
        assert len(encoded.token_ids) == n + 2 * k + 2
        for j in range(k):
            pinyin_slot = n + 1 + j
            target_slot = n + k + 2 + j
            assert encoded.position_ids[target_slot] == encoded.position_ids[pinyin_slot]
            checked += 1
    report(
        "P5 position sharing",
        checked > 0,
        f"1000 encodings, {checked} target/pinyin position pairs equal",
    )


# -- P6 + P8: overfit sanity and the perfect-vs-abbreviated gap -------------------


@pytest.fixture(scope="session")
def overfit_run():
    lex = load_lexicon(default_lexicon_path())
    sentences = read_corpus(TOY / "overfit_200.txt")
    vocab = build_vocab(lex, sentences)
    config = ModelConfig(
        n_layers=2,
        d_model=128,
        n_heads=4,
        d_ff=512,
        n_tokens=vocab.n_tokens,
        head_size=vocab.head_size,
        variant="concat",
        max_positions=64,
        seed=0,
    )
    train_cfg = TrainConfig(steps=600, batch_size_tokens=2048, learning_rate=3e-4, seed=0)
    start = time.perf_counter()
    model, vocab, _ = train(sentences, lex, config, train_cfg)
    train_seconds = time.perf_counter() - start

    spec = BuildSpec(
        corpora={"train": TOY / "overfit_200.txt"}, instances_per_config=25, seed=5
    )
    dataset, _ = build(spec, lex)
    instances = [inst for cell in dataset.values() for inst in cell][:100]
    assert len(instances) == 100

    decoder = Decoder(model, lex, vocab)
    perfect_report = evaluate(decoder, instances, PERFECT, beam_size=8, ks=(1, 5))
    eval_seconds = time.perf_counter() - start - train_seconds
    return {
        "decoder": decoder,
        "instances": instances,
        "perfect_p1": perfect_report.overall.precision[1],
        "train_seconds": train_seconds,
        "total_seconds": train_seconds + eval_seconds,
    }


def test_p6_overfit_sanity(report, overfit_run):
    p1 = overfit_run["perfect_p1"]
    total = overfit_run["total_seconds"]
    report(
        "P6 overfit sanity",
        p1 >= 90.0 and total < 1800.0,
        f"P@1 {p1:.1f} on 100 training-drawn perfect instances, "
        f"600 steps in {overfit_run['train_seconds']:.0f}s, total {total:.0f}s",
    )


def test_p8_perfect_vs_abbreviated(report, overfit_run):
    abbrev_report = evaluate(
        overfit_run["decoder"], overfit_run["instances"], ABBREV, beam_size=8, ks=(1, 5)
    )
    perfect_p1 = overfit_run["perfect_p1"]
    abbrev_p1 = abbrev_report.overall.precision[1]
    report(
        "P8 perfect > abbreviated",
        perfect_p1 > abbrev_p1,
        f"P@1 perfect {perfect_p1:.1f} vs abbreviated {abbrev_p1:.1f} on the same instances",
    )


# -- P7: directional ablation ------------------------------------------------------


def ablation_arm(sentences, lex, heldout, variant, pc_loss, seed):
    vocab = build_vocab(lex, sentences)
    config = ModelConfig(
        n_layers=1,
        d_model=64,
        n_heads=4,
        d_ff=256,
        n_tokens=vocab.n_tokens,
        head_size=vocab.head_size,
        variant=variant,
        max_positions=96,
        seed=seed,
    )
    train_cfg = TrainConfig(
        steps=ABLATION_STEPS,
        batch_size_tokens=2048,
        learning_rate=ABLATION_LR,
        pc_loss=pc_loss,
        mode=ABBREV,
        seed=seed,
    )
    model, vocab, _ = train(sentences, lex, config, train_cfg)
    rep = evaluate(Decoder(model, lex, vocab), heldout, ABBREV, beam_size=8, ks=(5,))
    return rep.overall.precision[5]


def test_p7_directional_ablation(report, lex):
    sentences = read_corpus(TOY / "train_p7.txt")
    spec = BuildSpec(
        corpora={"heldout": TOY / "heldout_p7.txt"},
        instances_per_config=ABLATION_EVAL_IPC,
        seed=9,
    )
    dataset, _ = build(spec, lex)
    heldout = [inst for cell in dataset.values() for inst in cell]

    medians = {}
    for variant, pc_loss in (("baseline", False), ("concat", False), ("concat", True)):
        scores = [
            ablation_arm(sentences, lex, heldout, variant, pc_loss, seed)
            for seed in ABLATION_SEEDS
        ]
        medians[(variant, pc_loss)] = statistics.median(scores)

    b = medians[("baseline", False)]
    c = medians[("concat", False)]
    cpc = medians[("concat", True)]
    report(
        "P7 directional ablation",
        cpc >= c >= b and cpc - b >= 2.0,
        f"3-seed median P@5: baseline {b:.1f} <= concat {c:.1f} <= concat+pc {cpc:.1f}, "
        f"margin {cpc - b:.1f} >= 2.0",
    )


# -- P9: dataset builder ------------------------------------------------------------


def test_p9_dataset_builder(report, lex, tmp_path):
    spec = BuildSpec(
        corpora={name: TOY / f"wd_{name}.txt" for name in ("daily", "travel", "work")},
        instances_per_config=50,
        seed=11,
    )
    dataset, manifest = build(spec, lex)

    assert len(dataset) == 27  # 3 domains x 9 cells
    total = 0
    for (domain, cb, tb), instances in dataset.items():
        assert len(instances) == 50, (domain, cb, tb, len(instances))
        for inst in instances:
            assert context_bucket_of(len(inst.context)) == cb
            assert target_bucket_of(len(inst.target)) == tb
            assert len(inst.context) <= 30 and 1 <= len(inst.target) <= 25
            assert len(inst.pinyin_perfect) == len(inst.target) == len(inst.pinyin_abbrev)
            for char, syl, key in zip(inst.target, inst.pinyin_perfect, inst.pinyin_abbrev):
                assert lex.readings_match(char, PinyinToken(PERFECT, syl))
                assert lex.readings_match(char, PinyinToken(ABBREV, key))
            total += 1
    assert total == 1350
    assert manifest["total_instances"] == 1350
    shortfalls = [
        cell["shortfall"]
        for dom in manifest["domains"].values()
        for cell in dom["cells"].values()
    ]
    assert all(s == 0 for s in shortfalls)

    # byte-identical rebuild under the same seed
    first, second = tmp_path / "a", tmp_path / "b"
    write_dataset(dataset, manifest, first)
    dataset2, manifest2 = build(spec, lex)
    write_dataset(dataset2, manifest2, second)
    files1 = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
    files2 = sorted(p.relative_to(second) for p in second.rglob("*") if p.is_file())
    assert files1 == files2
    identical = all((first / f).read_bytes() == (second / f).read_bytes() for f in files1)
    assert identical

    documented = (Path(__file__).parents[1] / "README.md").read_text(encoding="utf-8")
    arithmetic_ok = 15 * 9 * 2000 == 270_000 and "270,000" in documented
    report(
        "P9 dataset builder",
        total == 1350 and identical and arithmetic_ok,
        "27 cells x 50 instances, invariants 100%, rebuild byte-identical, "
        "15 x 9 x 2000 = 270,000 documented",
    )


# -- P10: latency direction ---------------------------------------------------------


def test_p10_latency_direction(report, lex):
    sentences = read_corpus(TOY / "wd_daily.txt")
    vocab = build_vocab(lex, sentences)

    def init_model(n_layers):
        return Model.init(
            ModelConfig(
                n_layers=n_layers,
                d_model=128,
                n_heads=4,
                d_ff=512,
                n_tokens=vocab.n_tokens,
                head_size=vocab.head_size,
                variant="concat",
                max_positions=96,
                seed=21,
            )
        )

    spec = BuildSpec(corpora={"daily": TOY / "wd_daily.txt"}, instances_per_config=100, seed=3)
    dataset, _ = build(spec, lex)
    sample = dataset[("daily", "4-9", "4-9")]
    assert len(sample) == 100

    rows = latency_compare(
        [("2-layer", Decoder(init_model(2), lex, vocab)), ("4-layer", Decoder(init_model(4), lex, vocab))],
        sample,
        PERFECT,
        beam_size=16,
        ks=(1,),
    )
    shallow, deep = rows[0], rows[1]
    assert (shallow["n_layers"], deep["n_layers"]) == (2, 4)
    ratio = deep["mean_ms"] / shallow["mean_ms"]
    report(
        "P10 latency direction",
        shallow["mean_ms"] < deep["mean_ms"],
        f"2-layer {shallow['mean_ms']:.1f}ms vs 4-layer {deep['mean_ms']:.1f}ms "
        f"per instance, ratio {ratio:.2f}x",
    )


# -- P11: report invariants ----------------------------------------------------------


def test_p11_report_invariants(report, lex, overfit_run, tmp_path):
    spec = BuildSpec(corpora={"daily": TOY / "wd_daily.txt"}, instances_per_config=5, seed=13)
    dataset, _ = build(spec, lex)
    instances = [inst for cell in dataset.values() for inst in cell]
    log_path = tmp_path / "hits.jsonl"
    rep = evaluate(
        overfit_run["decoder"],
        instances,
        PERFECT,
        beam_size=16,
        ks=(1, 5, 10),
        hit_log_path=log_path,
        model_id="overfit-600",
    )

    monotone = all(
        agg.precision[1] <= agg.precision[5] <= agg.precision[10]
        for agg in list(rep.cells.values()) + [rep.overall]
    )
    weighted_err = max(
        abs(
            rep.overall.precision[k]
            - sum(a.count * a.precision[k] for a in rep.cells.values()) / rep.overall.count
        )
        for k in (1, 5, 10)
    )
    replayed = replay_hit_log(log_path)
    replay_ok = replayed.to_obj() == rep.to_obj()
    report(
        "P11 report invariants",
        monotone and weighted_err < 1e-12 and replay_ok,
        f"P@1<=P@5<=P@10 per cell, overall == weighted cell mean (err {weighted_err:.1e}), "
        "hit-log replay reproduces the report",
    )
