"""Command-line entry point for every pipeline stage.

Subcommands: build-lexicon, build-dataset, train, eval, latency, predict,
serve. Every subcommand accepts --seed and --config. A config file (JSON
object or key=value lines) supplies defaults for any flag not given on the
command line, keyed by the flag's long name; list-valued keys take a JSON
array or a comma-separated string. serve's --config is the service config
file described in service.py. Errors go to standard error with exit 1.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from pinyinlm.dataset import (
    BuildSpec,
    DatasetError,
    build,
    load_pd,
    load_wd,
    write_dataset,
)
from pinyinlm.decoder import DecodeError, Decoder
from pinyinlm.evaluation import EvalError, evaluate, latency_compare, replay_hit_log
from pinyinlm.lexicon import (
    Lexicon,
    LexiconError,
    default_lexicon_path,
    load_lexicon,
    parse_lexicon_rows,
)
from pinyinlm.model import ModelConfig, ModelError, load_model
from pinyinlm.service import (
    ConfigError,
    checkpoint_id,
    load_app_config,
    parse_config_text,
)
from pinyinlm.training import TrainConfig, TrainError, build_vocab, read_corpus, train

_UNSET = argparse.SUPPRESS


class CliError(Exception):
    """User-facing failure; main() prints it to stderr and exits 1."""


# -- config merging -----------------------------------------------------------


def _coerce(action: argparse.Action, value, where: str):
    """Convert a config-file value to the type the flag would produce."""
    if isinstance(action.const, bool):  # store_true / store_false
        if isinstance(value, bool):
            return value
        lowered = str(value).strip().lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise CliError(f"{where}: key {action.dest!r} needs a boolean, got {value!r}")
    convert = action.type or str
    values = value if isinstance(value, list) else None
    if isinstance(action, argparse._AppendAction):
        if values is None:
            values = [part.strip() for part in str(value).split(",") if part.strip()]
        return [convert(item) for item in values]
    if values is not None:
        raise CliError(f"{where}: key {action.dest!r} takes a single value")
    try:
        return convert(value)
    except (TypeError, ValueError) as exc:
        raise CliError(f"{where}: bad value for {action.dest!r}: {exc}") from exc


def _suppress_defaults(parser: argparse.ArgumentParser):
    """Make parse_args record only flags the user actually typed; the real
    defaults move to action.real_default for _merge_config to apply."""
    for action in parser._actions:
        if action.dest == "help":
            continue
        action.real_default = action.default
        action.default = _UNSET


def _merge_config(parser: argparse.ArgumentParser, args: argparse.Namespace):
    """defaults < config file < explicit flags, resolved per flag."""
    actions = {
        action.dest: action
        for action in parser._actions
        if action.dest not in ("help", "config")
    }
    values = {
        dest: action.real_default
        for dest, action in actions.items()
        if getattr(action, "real_default", _UNSET) is not _UNSET
    }
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            text = Path(config_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}") from exc
        try:
            entries = parse_config_text(text, where=str(config_path))
        except ConfigError as exc:
            raise CliError(str(exc)) from exc
        for key, value in entries.items():
            dest = key.replace("-", "_")
            if dest not in actions:
                raise CliError(f"{config_path}: unknown key {key!r}")
            values[dest] = _coerce(actions[dest], value, str(config_path))
    for dest, value in vars(args).items():
        if dest != "config":
            values[dest] = value
    for dest in actions:
        values.setdefault(dest, None)
    return argparse.Namespace(**values)


def _require(ns: argparse.Namespace, command: str, *dests: str):
    for dest in dests:
        if getattr(ns, dest) in (None, []):
            flag = "--" + dest.replace("_", "-")
            raise CliError(f"{command}: {flag} is required (flag or config)")


# -- shared helpers -----------------------------------------------------------


def _load_lexicon_arg(path) -> Lexicon:
    return load_lexicon(path if path else default_lexicon_path())


def _parse_ks(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise CliError(f"--ks must be comma-separated integers, got {text!r}") from None
    if not ks:
        raise CliError("--ks must name at least one cutoff")
    return ks


def load_instances(path: str | Path):
    """A .jsonl file, a .tsv/.txt file (pinyin\\tchars rows), or a directory
    of .jsonl cell files."""
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.jsonl"))
        if not files:
            raise CliError(f"{p}: no .jsonl files")
        instances = []
        for file in files:
            instances.extend(load_wd(file))
        return instances
    if p.suffix in (".tsv", ".txt"):
        return load_pd(p)
    return load_wd(p)


def _load_decoder(model_path, lexicon: Lexicon) -> tuple[Decoder, str]:
    model, vocab = load_model(model_path)
    return Decoder(model, lexicon, vocab), checkpoint_id(model_path)


# -- subcommands --------------------------------------------------------------


def cmd_build_lexicon(ns) -> int:
    _require(ns, "build-lexicon", "input")
    try:
        with open(ns.input, encoding="utf-8") as fh:
            rows = parse_lexicon_rows(fh)
        lexicon = Lexicon(rows)
    except OSError as exc:
        raise CliError(f"cannot read lexicon: {exc}") from exc
    if ns.output:
        out = Path(ns.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(
            "".join(f"{char}\t{syllable}\n" for char, syllable in rows),
            encoding="utf-8",
        )
    stats = lexicon.stats()
    print(
        f"rows\t{len(rows)}\n"
        f"characters\t{stats['characters']}\n"
        f"syllables\t{stats['syllables']}\n"
        f"abbreviation_keys\t{stats['abbreviation_keys']}"
    )
    return 0


def cmd_build_dataset(ns) -> int:
    _require(ns, "build-dataset", "corpus", "out")
    corpora = {}
    for item in ns.corpus:
        domain, sep, path = item.partition("=")
        if not sep or not domain or not path:
            raise CliError(f"--corpus needs domain=path, got {item!r}")
        if domain in corpora:
            raise CliError(f"duplicate domain {domain!r}")
        corpora[domain] = path
    spec = BuildSpec(
        corpora=corpora, instances_per_config=ns.instances_per_config, seed=ns.seed
    )
    lexicon = _load_lexicon_arg(ns.lexicon)
    dataset, manifest = build(spec, lexicon)
    manifest_path = write_dataset(dataset, manifest, ns.out)
    print(f"instances\t{manifest['total_instances']}")
    print(f"manifest\t{manifest_path}")
    return 0


def cmd_train(ns) -> int:
    _require(ns, "train", "corpus", "out", "steps")
    lexicon = _load_lexicon_arg(ns.lexicon)
    sentences = read_corpus(ns.corpus)
    vocab = build_vocab(lexicon, sentences)
    d_ff = ns.d_ff if ns.d_ff is not None else 4 * ns.d_model
    model_config = ModelConfig(
        n_layers=ns.n_layers,
        d_model=ns.d_model,
        n_heads=ns.n_heads,
        d_ff=d_ff,
        n_tokens=vocab.n_tokens,
        head_size=vocab.head_size,
        variant=ns.variant,
        pinyin_embed_size=vocab.pinyin_embed_size if ns.variant == "embed" else 0,
        max_positions=ns.max_positions,
        dropout=ns.dropout,
        seed=ns.seed,
    )
    train_config = TrainConfig(
        steps=ns.steps,
        batch_size_tokens=ns.batch_size_tokens,
        learning_rate=ns.learning_rate,
        pc_loss=not ns.no_pc_loss,
        mode=ns.mode,
        short_target_prob=ns.short_target_prob,
        warmup_steps=ns.warmup_steps,
        checkpoint_interval=ns.checkpoint_interval,
        seed=ns.seed,
    )
    Path(ns.out).parent.mkdir(parents=True, exist_ok=True)
    interval = max(1, ns.steps // 10) if ns.steps else 0

    def report(entry):
        if entry.step == 1 or entry.step % interval == 0 or entry.step == ns.steps:
            print(
                f"step {entry.step}/{ns.steps}\tloss {entry.loss:.6f}\t"
                f"lr {entry.lr:g}\texamples {entry.examples_seen}"
            )

    _, _, metrics = train(
        sentences,
        lexicon,
        model_config,
        train_config,
        log_path=ns.log,
        checkpoint_path=ns.out,
        on_step=report if ns.steps else None,
    )
    final = f"{metrics[-1].loss:.6f}" if metrics else "n/a (no steps)"
    print(f"checkpoint\t{ns.out}\nfinal_loss\t{final}")
    return 0


def cmd_eval(ns) -> int:
    _require(ns, "eval", "model", "dataset")
    lexicon = _load_lexicon_arg(ns.lexicon)
    decoder, model_id = _load_decoder(ns.model, lexicon)
    instances = load_instances(ns.dataset)
    report = evaluate(
        decoder,
        instances,
        ns.mode,
        beam_size=ns.beam_size,
        ks=_parse_ks(ns.ks),
        hit_log_path=ns.hit_log,
        model_id=model_id,
        seed=ns.seed,
    )
    print(report.render())
    if ns.json:
        Path(ns.json).write_text(
            json.dumps(report.to_obj(), ensure_ascii=False, sort_keys=True, indent=2)
            + "\n",
            encoding="utf-8",
        )
        print(f"report\t{ns.json}")
    return 0


def cmd_latency(ns) -> int:
    _require(ns, "latency", "model", "dataset")
    if len(ns.model) < 2:
        raise CliError("latency needs at least two --model checkpoints")
    lexicon = _load_lexicon_arg(ns.lexicon)
    decoders = []
    for path in ns.model:
        decoder, model_id = _load_decoder(path, lexicon)
        decoders.append((model_id, decoder))
    instances = load_instances(ns.dataset)[: ns.limit]
    ks = _parse_ks(ns.ks)
    rows = latency_compare(
        decoders, instances, ns.mode, beam_size=ns.beam_size, ks=ks
    )
    header = ["model_id", "n_layers", "mean_ms"] + [f"P@{k}" for k in ks]
    print("\t".join(header))
    for row in rows:
        cells = [row["model_id"], str(row["n_layers"]), f"{row['mean_ms']:.3f}"]
        cells += [f"{row['precision'][k]:.2f}" for k in ks]
        print("\t".join(cells))
    if ns.json:
        payload = [
            {**row, "precision": {str(k): v for k, v in row["precision"].items()}}
            for row in rows
        ]
        Path(ns.json).write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
    return 0


def cmd_predict(ns) -> int:
    _require(ns, "predict", "model", "pinyin")
    lexicon = _load_lexicon_arg(ns.lexicon)
    decoder, _ = _load_decoder(ns.model, lexicon)
    result = decoder.predict(
        ns.context,
        ns.pinyin.split(),
        ns.mode,
        beam_size=ns.beam_size,
        top_k=ns.top_k,
    )
    for rank, candidate in enumerate(result.candidates, start=1):
        print(f"{rank}\t{candidate.text}\t{candidate.score!r}")
    return 0


def cmd_replay(ns) -> int:
    _require(ns, "replay", "hit_log")
    report = replay_hit_log(ns.hit_log)
    print(report.render())
    return 0


def cmd_serve(ns) -> int:
    from pinyinlm.service import run

    cors = None
    if ns.cors_origins is not None:
        cors = tuple(part.strip() for part in ns.cors_origins.split(",") if part.strip())
    config = load_app_config(
        ns.config,
        model_path=ns.model,
        lexicon_path=ns.lexicon,
        host=ns.host,
        port=ns.port,
        beam_size=ns.beam_size,
        top_k=ns.top_k,
        log_level=ns.log_level,
        cors_origins=cors,
    )
    run(config)
    return 0


# -- parser -------------------------------------------------------------------


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=0, help="base RNG seed")
    parser.add_argument(
        "--config", default=None, help="config file supplying defaults for flags"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pinyinlm", description="pinyin-to-characters model pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-lexicon", help="validate and normalize a lexicon file")
    p.add_argument("--input", help="lexicon TSV to validate")
    p.add_argument("--output", default=None, help="write normalized two-field TSV here")
    _common(p)
    p.set_defaults(func=cmd_build_lexicon)

    p = sub.add_parser("build-dataset", help="sample an evaluation dataset from corpora")
    p.add_argument(
        "--corpus",
        action="append",
        metavar="DOMAIN=PATH",
        help="domain corpus, repeatable",
    )
    p.add_argument("--out", help="output directory for JSONL cells + manifest")
    p.add_argument("--instances-per-config", type=int, default=2000)
    p.add_argument("--lexicon", default=None, help="lexicon path (default: bundled)")
    _common(p)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="train a model from a sentence corpus")
    p.add_argument("--corpus", help="UTF-8 corpus, one sentence per line")
    p.add_argument("--out", help="checkpoint output path")
    p.add_argument("--lexicon", default=None)
    p.add_argument("--variant", choices=("baseline", "concat", "embed"), default="concat")
    p.add_argument("--mode", choices=("perfect", "abbrev"), default="perfect")
    p.add_argument("--steps", type=int, help="optimizer steps (0 = init-only checkpoint)")
    p.add_argument("--batch-size-tokens", type=int, default=2048)
    p.add_argument("--learning-rate", type=float, default=5e-5)
    p.add_argument("--warmup-steps", type=int, default=0)
    p.add_argument("--checkpoint-interval", type=int, default=0)
    p.add_argument("--short-target-prob", type=float, default=0.5)
    p.add_argument("--no-pc-loss", action="store_true", help="drop the pinyin constraint from the loss")
    p.add_argument("--n-layers", type=int, default=2)
    p.add_argument("--d-model", type=int, default=128)
    p.add_argument("--n-heads", type=int, default=4)
    p.add_argument("--d-ff", type=int, default=None, help="default: 4 * d_model")
    p.add_argument("--max-positions", type=int, default=128)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--log", default=None, help="step metrics TSV path")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a model on a dataset")
    p.add_argument("--model", help="checkpoint path")
    p.add_argument("--dataset", help="JSONL file, dataset directory, or pinyin TSV")
    p.add_argument("--mode", choices=("perfect", "abbrev"), default="perfect")
    p.add_argument("--ks", default="1,5,10", help="comma-separated precision cutoffs")
    p.add_argument("--beam-size", type=int, default=16)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--hit-log", default=None, help="write per-instance JSONL hits here")
    p.add_argument("--json", default=None, help="write the JSON report here")
    _common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("latency", help="compare decode latency across checkpoints")
    p.add_argument("--model", action="append", help="checkpoint path, repeatable")
    p.add_argument("--dataset", help="instances to decode")
    p.add_argument("--limit", type=int, default=50, help="instances per model")
    p.add_argument("--mode", choices=("perfect", "abbrev"), default="perfect")
    p.add_argument("--ks", default="1,5")
    p.add_argument("--beam-size", type=int, default=16)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--json", default=None)
    _common(p)
    p.set_defaults(func=cmd_latency)

    p = sub.add_parser("predict", help="one-shot decode to stdout")
    p.add_argument("--model", help="checkpoint path")
    p.add_argument("--context", default="")
    p.add_argument("--pinyin", help='space-separated tokens, e.g. "l b y y d s"')
    p.add_argument("--mode", choices=("perfect", "abbrev"), default="perfect")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--beam-size", type=int, default=16)
    p.add_argument("--lexicon", default=None)
    _common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("replay", help="rebuild an eval report from a hit log")
    p.add_argument("--hit-log", help="JSONL hit log written by eval")
    _common(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="run the HTTP prediction service")
    p.add_argument("--model", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--beam-size", type=int, default=None)
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--log-level", default=None)
    p.add_argument("--cors-origins", default=None, help="comma-separated origins")
    _common(p)
    p.set_defaults(func=cmd_serve)

    for name, sub_parser in sub.choices.items():
        if name != "serve":
            _suppress_defaults(sub_parser)
    return parser


_ERRORS = (
    CliError,
    ConfigError,
    DatasetError,
    DecodeError,
    EvalError,
    LexiconError,
    ModelError,
    TrainError,
    OSError,
)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    command = args.command
    func = args.func
    if command == "serve":
        ns = args  # load_app_config owns config/env/flag precedence
    else:
        sub = next(
            action
            for action in parser._actions
            if isinstance(action, argparse._SubParsersAction)
        ).choices[command]
        try:
            ns = _merge_config(sub, args)
        except _ERRORS as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    try:
        return func(ns)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
