"""CLI contract: every subcommand's happy path, config-file defaults, and
error handling through main()'s exit codes."""
import json
from pathlib import Path

import pytest

from pinyinlm.cli import main
from pinyinlm.model import load_model

CORPUS = (
    "我们明天去学校。\n"
    "他说今天天气很好。\n"
    "妈妈在家做饭。\n"
    "老师给我们上课。\n"
    "朋友们都来了。\n"
    "我想喝水。\n"
    "他们在公园里玩。\n"
    "今天是个好日子。\n"
)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "corpus.txt"
    path.write_text(CORPUS, encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def checkpoint(corpus, tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "tiny.pylm"
    code = main([
        "train", "--corpus", str(corpus), "--out", str(path),
        "--steps", "3", "--batch-size-tokens", "64",
        "--n-layers", "1", "--d-model", "32", "--n-heads", "2",
        "--max-positions", "64", "--seed", "7",
    ])
    assert code == 0
    return path


@pytest.fixture(scope="module")
def dataset_dir(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "ds"
    code = main([
        "build-dataset", "--corpus", f"smoke={corpus}", "--out", str(out),
        "--instances-per-config", "3", "--seed", "1",
    ])
    assert code == 0
    return out


def _dir_bytes(path: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


# -- build-lexicon -------------------------------------------------------------


def test_build_lexicon_reports_stats(capsys):
    from pinyinlm.lexicon import default_lexicon_path

    assert main(["build-lexicon", "--input", str(default_lexicon_path())]) == 0
    out = capsys.readouterr().out
    assert "characters\t" in out and "syllables\t" in out


def test_build_lexicon_normalizes(tmp_path, capsys):
    raw = tmp_path / "raw.tsv"
    raw.write_text("# comment\n我\two\t3\n\n们\tmen\n", encoding="utf-8")
    out = tmp_path / "norm.tsv"
    assert main(["build-lexicon", "--input", str(raw), "--output", str(out)]) == 0
    assert out.read_text(encoding="utf-8") == "我\two\n们\tmen\n"


def test_build_lexicon_rejects_bad_rows(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("我们\two\n", encoding="utf-8")  # two-codepoint character field
    assert main(["build-lexicon", "--input", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err


# -- build-dataset -------------------------------------------------------------


def test_build_dataset_writes_manifest_and_cells(dataset_dir, capsys):
    manifest = json.loads((dataset_dir / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 1
    assert manifest["total_instances"] > 0
    cells = list(dataset_dir.glob("*.jsonl"))
    assert cells, "expected at least one cell file"


def test_build_dataset_rebuild_is_byte_identical(corpus, dataset_dir, tmp_path):
    again = tmp_path / "ds2"
    assert main([
        "build-dataset", "--corpus", f"smoke={corpus}", "--out", str(again),
        "--instances-per-config", "3", "--seed", "1",
    ]) == 0
    assert _dir_bytes(again) == _dir_bytes(dataset_dir)


def test_build_dataset_seed_changes_output(corpus, dataset_dir, tmp_path):
    other = tmp_path / "ds3"
    assert main([
        "build-dataset", "--corpus", f"smoke={corpus}", "--out", str(other),
        "--instances-per-config", "3", "--seed", "2",
    ]) == 0
    assert _dir_bytes(other) != _dir_bytes(dataset_dir)


def test_build_dataset_rejects_malformed_corpus_flag(capsys):
    assert main(["build-dataset", "--corpus", "no-equals-sign", "--out", "x"]) == 1
    assert "domain=path" in capsys.readouterr().err


# -- train ---------------------------------------------------------------------


def test_train_steps_zero_writes_init_checkpoint(corpus, tmp_path, capsys):
    out = tmp_path / "init.pylm"
    assert main([
        "train", "--corpus", str(corpus), "--out", str(out), "--steps", "0",
        "--n-layers", "1", "--d-model", "32", "--n-heads", "2",
        "--max-positions", "64",
    ]) == 0
    model, vocab = load_model(out)
    assert model.config.n_layers == 1
    assert vocab.n_tokens > 0
    assert "checkpoint\t" in capsys.readouterr().out


def test_train_writes_metrics_log(corpus, tmp_path):
    out = tmp_path / "m.pylm"
    log = tmp_path / "metrics.tsv"
    assert main([
        "train", "--corpus", str(corpus), "--out", str(out), "--steps", "2",
        "--batch-size-tokens", "64", "--n-layers", "1", "--d-model", "32",
        "--n-heads", "2", "--max-positions", "64", "--log", str(log),
    ]) == 0
    lines = log.read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == 2
    step, loss, lr, seen = lines[0].split("\t")
    assert step == "1" and float(loss) > 0 and float(lr) > 0 and int(seen) > 0


def test_train_missing_corpus_fails(tmp_path, capsys):
    assert main([
        "train", "--corpus", str(tmp_path / "nope.txt"),
        "--out", str(tmp_path / "x.pylm"), "--steps", "1",
    ]) == 1
    assert "error:" in capsys.readouterr().err


def test_train_requires_steps(corpus, tmp_path, capsys):
    assert main([
        "train", "--corpus", str(corpus), "--out", str(tmp_path / "x.pylm"),
    ]) == 1
    assert "--steps" in capsys.readouterr().err


# -- predict -------------------------------------------------------------------


def test_predict_prints_ranked_rows(checkpoint, capsys):
    assert main([
        "predict", "--model", str(checkpoint), "--context", "我们",
        "--pinyin", "ming tian", "--top-k", "3", "--beam-size", "8",
    ]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3
    ranks, texts, scores = zip(*(line.split("\t") for line in lines))
    assert list(ranks) == ["1", "2", "3"]
    assert all(len(t) == 2 for t in texts)
    values = [float(s) for s in scores]
    assert values == sorted(values, reverse=True)


def test_predict_abbrev_mode(checkpoint, capsys):
    assert main([
        "predict", "--model", str(checkpoint), "--pinyin", "w m",
        "--mode", "abbrev", "--top-k", "2",
    ]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 2


def test_predict_unknown_token_fails(checkpoint, capsys):
    assert main(["predict", "--model", str(checkpoint), "--pinyin", "blarg"]) == 1
    assert "blarg" in capsys.readouterr().err


def test_predict_config_file_fills_unset_flags(checkpoint, tmp_path, capsys):
    cfg = tmp_path / "pred.cfg"
    cfg.write_text("mode=abbrev\ntop-k=4\nbeam-size=8\n", encoding="utf-8")
    assert main([
        "predict", "--model", str(checkpoint), "--pinyin", "w m",
        "--config", str(cfg),
    ]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 4
    # explicit flag beats the config value
    assert main([
        "predict", "--model", str(checkpoint), "--pinyin", "w m",
        "--config", str(cfg), "--top-k", "2",
    ]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 2


def test_config_file_rejects_unknown_key(checkpoint, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("mystery=1\n", encoding="utf-8")
    assert main([
        "predict", "--model", str(checkpoint), "--pinyin", "ma",
        "--config", str(cfg),
    ]) == 1
    assert "mystery" in capsys.readouterr().err


def test_json_config_supplies_lists(corpus, tmp_path, capsys):
    cfg = tmp_path / "ds.cfg"
    cfg.write_text(
        json.dumps({"corpus": [f"smoke={corpus}"], "instances-per-config": 2}),
        encoding="utf-8",
    )
    out = tmp_path / "ds"
    assert main(["build-dataset", "--out", str(out), "--config", str(cfg)]) == 0
    assert (out / "manifest.json").exists()


# -- eval / replay / latency ----------------------------------------------------


def test_eval_renders_report_and_writes_artifacts(checkpoint, dataset_dir, tmp_path, capsys):
    report_path = tmp_path / "report.json"
    hit_log = tmp_path / "hits.jsonl"
    assert main([
        "eval", "--model", str(checkpoint), "--dataset", str(dataset_dir),
        "--ks", "1,5", "--beam-size", "8",
        "--json", str(report_path), "--hit-log", str(hit_log),
    ]) == 0
    out = capsys.readouterr().out
    assert "overall" in out and "P@1" in out
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["overall"]["count"] > 0
    first = json.loads(hit_log.read_text(encoding="utf-8").splitlines()[0])
    assert first["type"] == "meta"


def test_replay_matches_eval_output(checkpoint, dataset_dir, tmp_path, capsys):
    hit_log = tmp_path / "hits.jsonl"
    assert main([
        "eval", "--model", str(checkpoint), "--dataset", str(dataset_dir),
        "--ks", "1,5", "--beam-size", "8", "--hit-log", str(hit_log),
    ]) == 0
    eval_out = capsys.readouterr().out
    assert main(["replay", "--hit-log", str(hit_log)]) == 0
    assert capsys.readouterr().out == eval_out


def test_eval_accepts_single_jsonl_file(checkpoint, dataset_dir, capsys):
    cell = sorted(dataset_dir.glob("*.jsonl"))[0]
    assert main([
        "eval", "--model", str(checkpoint), "--dataset", str(cell),
        "--ks", "1", "--beam-size", "4",
    ]) == 0
    assert "overall" in capsys.readouterr().out


def test_eval_accepts_pinyin_tsv(checkpoint, tmp_path, capsys):
    tsv = tmp_path / "pd.tsv"
    tsv.write_text("wo men\t我们\nhao\t好\n", encoding="utf-8")
    assert main([
        "eval", "--model", str(checkpoint), "--dataset", str(tsv),
        "--ks", "1", "--beam-size", "4",
    ]) == 0
    assert "pd" in capsys.readouterr().out


def test_eval_bad_ks_fails(checkpoint, dataset_dir, capsys):
    assert main([
        "eval", "--model", str(checkpoint), "--dataset", str(dataset_dir),
        "--ks", "one,two",
    ]) == 1
    assert "--ks" in capsys.readouterr().err


def test_eval_missing_model_fails(dataset_dir, tmp_path, capsys):
    assert main([
        "eval", "--model", str(tmp_path / "ghost.pylm"), "--dataset", str(dataset_dir),
    ]) == 1
    assert "error:" in capsys.readouterr().err


def test_latency_compares_two_models(checkpoint, corpus, dataset_dir, tmp_path, capsys):
    deep = tmp_path / "deep.pylm"
    assert main([
        "train", "--corpus", str(corpus), "--out", str(deep), "--steps", "0",
        "--n-layers", "2", "--d-model", "32", "--n-heads", "2",
        "--max-positions", "64",
    ]) == 0
    capsys.readouterr()
    assert main([
        "latency", "--model", str(checkpoint), "--model", str(deep),
        "--dataset", str(dataset_dir), "--limit", "3",
        "--beam-size", "4", "--ks", "1",
    ]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("model_id\tn_layers\tmean_ms")
    layer_counts = [int(line.split("\t")[1]) for line in lines[1:]]
    assert layer_counts == sorted(layer_counts)
    assert layer_counts == [1, 2]


def test_latency_needs_two_models(checkpoint, dataset_dir, capsys):
    assert main([
        "latency", "--model", str(checkpoint), "--dataset", str(dataset_dir),
    ]) == 1
    assert "two" in capsys.readouterr().err


# -- parser behavior -------------------------------------------------------------


def test_unknown_flag_exits_nonzero(capsys):
    assert main(["predict", "--bogus"]) != 0
    assert capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    for command in ("build-lexicon", "build-dataset", "train", "eval",
                    "latency", "predict", "serve"):
        assert command in out


def test_every_subcommand_takes_seed_and_config(capsys):
    for command in ("build-lexicon", "build-dataset", "train", "eval",
                    "latency", "predict", "replay", "serve"):
        assert main([command, "--help"]) == 0
        out = capsys.readouterr().out
        assert "--seed" in out and "--config" in out
