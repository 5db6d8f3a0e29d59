"""Pipeline command line: stats, augment, train, predict, prompt, ensemble,
evaluate, report.

Every subcommand is re-runnable: identical inputs and seed produce
byte-identical artifacts, with timestamps confined to the run manifest.
Exit codes: 0 success, 2 usage error, 3 data error, 4 backend error, each
with a single-line JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, augment, config, corpus, ensemble, evaluate, prompting, train
from .errors import BackendError, ClientFailure, DataError, StancekitError, UsageError
from .manifest import RunManifest, append_manifest, new_run_id
from .predictions import read_predictions, write_predictions
from .tasks import SPLITS, get_task

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_BACKEND = 4

MT_ENDPOINT_VAR = "STANCEKIT_MT_ENDPOINT"
MT_API_KEY_VAR = "STANCEKIT_MT_API_KEY"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line machine-parseable errors
        raise UsageError(message)


def _translation_client(name: str) -> augment.TranslationClient:
    if name == "marker":
        return augment.MarkerTranslationClient()
    if name == "identity":
        return augment.IdentityTranslationClient()
    if name == "reversing":
        return augment.ReversingTranslationClient()
    if name == "http":
        endpoint = os.environ.get(MT_ENDPOINT_VAR)
        if not endpoint:
            raise UsageError(f"set {MT_ENDPOINT_VAR} to use the HTTP translator")
        return augment.HttpTranslationClient(
            endpoint, os.environ.get(MT_API_KEY_VAR)
        )
    raise UsageError(f"unknown translation client {name!r}")


def _llm_client(spec: str, cfg) -> prompting.LLMClient:
    if spec.startswith("constant:"):
        return prompting.ConstantLLMClient(spec[len("constant:"):])
    if spec == "http":
        temperature = float(cfg.get("llm.temperature", "0"))
        return prompting.HttpLLMClient.from_env(temperature)
    raise UsageError(f"unknown LLM client {spec!r}; use constant:<response> or http")


def _parse_report_row(raw: str) -> evaluate.ReportEntry:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) not in (3, 4):
        raise UsageError(
            f"bad --row {raw!r}; expected model_key,eval.json,test.json[,aug]"
        )
    augmented = False
    if len(parts) == 4:
        if parts[3] != "aug":
            raise UsageError(f"bad --row flag {parts[3]!r}; only 'aug' is known")
        augmented = True
    eval_report = evaluate.load_report(parts[1]) if parts[1] != "-" else None
    test_report = evaluate.load_report(parts[2]) if parts[2] != "-" else None
    return evaluate.ReportEntry(parts[0], eval_report, test_report, augmented)


# --- subcommands ---------------------------------------------------------
# Each returns (task_id, input paths, artifact paths) for the manifest.


def cmd_stats(args, cfg):
    task = get_task(args.task)
    examples = []
    inputs = []
    for split in SPLITS:
        path = getattr(args, split)
        if path:
            examples.extend(corpus.load_dataset(path, task, split))
            inputs.append(path)
    if not inputs:
        raise UsageError("need at least one of --train/--eval/--test")
    report = corpus.distribution(examples, task)
    table = corpus.format_distribution_table(report, task)
    sys.stdout.write(table)
    artifacts = []
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
        artifacts.append(args.out)
    return task.task_id, inputs, artifacts


def cmd_augment(args, cfg):
    task = get_task(args.task)
    examples = corpus.load_dataset(args.train, task, "train")
    chains = config.chains_from_config(cfg)
    if args.chains:
        wanted = [c.strip() for c in args.chains.split(",")]
        by_id = {c.chain_id: c for c in chains}
        missing = [w for w in wanted if w not in by_id]
        if missing:
            raise UsageError(f"unknown chain ids: {missing}")
        chains = [by_id[w] for w in wanted]
    client = _translation_client(args.client)
    result = augment.augment_training_set(
        examples, task, chains, client, max_copies_per_example=args.max_copies
    )
    # mirror the input's delimiter in the augmented output
    with open(args.train, encoding="utf-8-sig") as fh:
        delimiter = "\t" if "\t" in fh.readline() else ","
    corpus.write_dataset(result.examples, args.out, delimiter=delimiter)
    for chain_id, outcome in result.summary.items():
        print(
            f"chain {chain_id}: attempted={outcome.attempted} "
            f"succeeded={outcome.succeeded} failed={outcome.failed} "
            f"duplicates={outcome.duplicate_filtered}"
        )
    print(f"wrote {len(result.examples)} examples ({result.added()} augmented) to {args.out}")
    return task.task_id, [args.train], [args.out]


def cmd_train(args, cfg):
    task = get_task(args.task)
    registry = config.registry_from_config(cfg)
    if args.model not in registry:
        raise UsageError(
            f"unknown model {args.model!r}; registry has {sorted(registry)}"
        )
    entry = registry[args.model]
    train_cfg = train.TrainConfig(
        learning_rate=args.lr,
        train_batch=args.train_batch,
        eval_batch=args.eval_batch,
        epochs=args.epochs,
        dropout=args.dropout,
        max_seq_len=args.max_seq_len,
        seed=args.seed,
    )
    train_examples = corpus.load_dataset(args.train, task, "train")
    dev_examples = corpus.load_dataset(args.dev, task, "eval")
    model, trace = train.fine_tune(train_examples, dev_examples, task, entry, train_cfg)
    for epoch, f1 in enumerate(trace, 1):
        print(f"epoch {epoch}: dev macro F1 {f1:.4f}")
    run_id = args.run_id or new_run_id("train")
    out_dir = Path(args.runs_dir) / task.task_id / args.model / run_id
    train.save_model(model, out_dir)
    if trace:
        print(f"best epoch {model.best_epoch + 1} (dev macro F1 {max(trace):.4f})")
    print(f"checkpoint: {out_dir}")
    artifacts = sorted(str(p) for p in out_dir.iterdir())
    return task.task_id, [args.train, args.dev], artifacts


def cmd_predict(args, cfg):
    task = get_task(args.task)
    model = train.load_model(args.model_dir)
    examples = corpus.load_dataset(args.input, task, args.split)
    pset = train.predict(model, examples, task)
    write_predictions(pset, args.out)
    print(f"wrote {len(pset.rows)} predictions to {args.out}")
    meta = str(Path(args.out).with_suffix(".meta.json"))
    return task.task_id, [args.input], [args.out, meta]


def cmd_prompt(args, cfg):
    task = get_task(args.task)
    examples = corpus.load_dataset(args.input, task, args.split)
    pool = None
    inputs = [args.input]
    if args.shots > 0:
        if not args.exemplars:
            raise UsageError("--shots > 0 needs --exemplars")
        pool = corpus.load_dataset(args.exemplars, task, "train")
        inputs.append(args.exemplars)
    client = _llm_client(args.client, cfg)
    definitions = config.definitions_from_config(cfg)
    try:
        pset = prompting.classify_with_llm(
            examples, task, client,
            shots=args.shots, exemplar_pool=pool, seed=args.seed,
            model_key=args.model_key, log_path=args.log, definitions=definitions,
        )
    except ClientFailure as exc:
        if exc.partial is not None and exc.partial.rows:
            write_predictions(exc.partial, args.out)
            print(f"aborted; wrote {len(exc.partial.rows)} partial predictions to {args.out}",
                  file=sys.stderr)
        raise
    write_predictions(pset, args.out)
    print(
        f"wrote {len(pset.rows)} predictions to {args.out} "
        f"(fallbacks: {pset.metadata['fallbacks']})"
    )
    artifacts = [args.out, str(Path(args.out).with_suffix(".meta.json"))]
    if args.log:
        artifacts.append(args.log)
    return task.task_id, inputs, artifacts


def cmd_ensemble(args, cfg):
    task = get_task(args.task)
    if args.weights and args.weights_from:
        raise UsageError("--weights and --weights-from are mutually exclusive")
    weights = [float(w) for w in args.weights.split(",")] if args.weights else None
    if args.preset:
        econfig = config.ensemble_from_config(
            cfg, args.preset, mode=args.mode, weights=weights, tie_break=args.tie_break
        )
    elif args.members:
        keys = [k.strip() for k in args.members.split(",")]
        if weights is None:
            weights = [1.0] * len(keys)
        econfig = ensemble.EnsembleConfig(
            args.mode or "weighted",
            tuple(zip(keys, weights)),
            args.tie_break or "highest_weight_member",
        )
    else:
        raise UsageError("need --preset or --members")
    if args.weights_from:
        # dev-split metrics per member, in member order
        paths = [p.strip() for p in args.weights_from.split(",")]
        if len(paths) != len(econfig.members):
            raise UsageError(
                f"--weights-from needs {len(econfig.members)} metric files"
            )
        dev_f1 = {
            key: evaluate.load_report(path).macro_f1
            for key, path in zip(econfig.member_keys(), paths)
        }
        econfig = ensemble.weights_from_dev_f1(econfig, dev_f1)
    sets = [read_predictions(p) for p in args.inputs]
    combined = ensemble.ensemble_predictions(sets, econfig, task)
    write_predictions(combined, args.out)
    print(f"wrote {len(combined.rows)} combined predictions to {args.out}")
    meta = str(Path(args.out).with_suffix(".meta.json"))
    return task.task_id, list(args.inputs), [args.out, meta]


def cmd_evaluate(args, cfg):
    task = get_task(args.task)
    gold = corpus.load_dataset(args.gold, task, args.gold_split)
    pset = read_predictions(args.pred)
    report = evaluate.score(gold, pset, task)
    print(f"macro_f1 {report.macro_f1:.4f}")
    artifacts = []
    if args.report:
        evaluate.write_report(report, args.report)
        artifacts.append(args.report)
    if args.figure:
        evaluate.confusion_figure(report, task, args.figure)
        artifacts.append(args.figure)
    return task.task_id, [args.gold, args.pred], artifacts


def cmd_report(args, cfg):
    entries = [_parse_report_row(raw) for raw in args.row]
    table = evaluate.report_table(entries, fmt=args.format)
    artifacts = []
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
        artifacts.append(args.out)
    else:
        sys.stdout.write(table)
    inputs = []
    for raw in args.row:
        parts = raw.split(",")
        inputs.extend(p.strip() for p in parts[1:3] if p.strip() != "-")
    return None, inputs, artifacts


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stancekit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"stancekit {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--runs-dir", default="runs", help="artifact root (default: runs)")
    common.add_argument("--run-id", help="override the timestamped run id")
    common.add_argument("--manifest", help="manifest path (default: <runs-dir>/manifest.jsonl)")
    common.add_argument("--no-manifest", action="store_true", help="skip manifest writing")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[common], help="audit label distributions")
    p.add_argument("--task", required=True)
    p.add_argument("--train")
    p.add_argument("--eval")
    p.add_argument("--test")
    p.add_argument("--out", help="also write the table to a file")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("augment", parents=[common],
                       help="back-translate minority-label training data")
    p.add_argument("--task", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--client", default="marker",
                   choices=["marker", "identity", "reversing", "http"])
    p.add_argument("--chains", help="comma-separated chain ids (default: all configured)")
    p.add_argument("--max-copies", type=int, help="cap augmented copies per example")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", parents=[common], help="fine-tune one registry model")
    p.add_argument("--task", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--train-batch", type=int, default=8)
    p.add_argument("--eval-batch", type=int, default=8)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--max-seq-len", type=int, default=128)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict with a checkpoint")
    p.add_argument("--task", required=True)
    p.add_argument("--model-dir", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--split", default="test", choices=list(SPLITS))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("prompt", parents=[common], help="LLM prompting baseline")
    p.add_argument("--task", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--split", default="test", choices=list(SPLITS))
    p.add_argument("--out", required=True)
    p.add_argument("--client", default="http",
                   help="constant:<response> or http (default)")
    p.add_argument("--shots", type=int, default=0)
    p.add_argument("--exemplars", help="train file for few-shot exemplars")
    p.add_argument("--log", help="JSON-lines prompt/response audit log")
    p.add_argument("--model-key", help="override the prediction-set model key")
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("ensemble", parents=[common], help="combine prediction sets")
    p.add_argument("--task", required=True)
    p.add_argument("--preset", help="configured ensemble name (ensemble1, ensemble2)")
    p.add_argument("--members", help="comma-separated member keys (alternative to --preset)")
    p.add_argument("--mode", choices=list(ensemble.MODES))
    p.add_argument("--weights", help="comma-separated member weights")
    p.add_argument("--weights-from",
                   help="comma-separated dev metrics JSONs; weights become the "
                        "members' dev macro F1, normalized")
    p.add_argument("--tie-break", choices=list(ensemble.TIE_BREAKS))
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against gold")
    p.add_argument("--task", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--gold-split", default="eval", choices=list(SPLITS))
    p.add_argument("--pred", required=True)
    p.add_argument("--report", help="write the metrics report JSON here")
    p.add_argument("--figure", help="write the confusion-matrix PNG here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="F1 summary table")
    p.add_argument("--row", action="append", required=True,
                   help="model_key,eval.json,test.json[,aug]; '-' skips a column")
    p.add_argument("--format", default="text", choices=["text", "markdown"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def _error_line(code: str, exc: Exception) -> str:
    return json.dumps(
        {"error": code, "type": type(exc).__name__, "message": str(exc)},
        sort_keys=True,
    )


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("STANCEKIT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = config.effective_config(args.config)
        task_id, inputs, artifacts = args.func(args, cfg)
        if artifacts and not args.no_manifest:
            run = RunManifest(
                run_id=args.run_id or new_run_id(args.command),
                command=args.command,
                task_id=task_id,
                config_hash=config.config_hash(cfg),
            )
            for path in inputs:
                run.add_input(path)
            for path in artifacts:
                run.add_artifact(path)
            manifest_path = args.manifest or Path(args.runs_dir) / "manifest.jsonl"
            append_manifest(run, manifest_path)
        return EXIT_OK
    except UsageError as exc:
        print(_error_line("usage", exc), file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(_error_line("data", exc), file=sys.stderr)
        return EXIT_DATA
    except BackendError as exc:
        print(_error_line("backend", exc), file=sys.stderr)
        return EXIT_BACKEND
    except StancekitError as exc:  # base-class fallback
        print(_error_line("error", exc), file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
