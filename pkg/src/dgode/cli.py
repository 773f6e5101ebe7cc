"""Command line entry point: ``dgode {verify,gen,train,eval,sweep}``.

Exit status: 0 on success, 1 when a check or input validation fails, 2 for
usage and configuration errors.  All files are written under ``--out``.
"""
import argparse
import json
import os
import sys

from . import dataio, paramio, training, verify
from . import model as M
from .config import dump_config, load_config
from .errors import ConfigError, DgodeError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def _write_text(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _dataset_path(cfg):
    return cfg.run.dataset or os.path.join(cfg.run.out, "dataset.jsonl")


def _params_path(cfg):
    return cfg.run.params or os.path.join(cfg.run.out, "params.txt")


def _splits(cfg):
    path = _dataset_path(cfg)
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset not found: {path} (run 'dgode gen' first)")
    return dataio.split_dataset(dataio.load_dataset(path), cfg.run.split, cfg.run.split_seed)


def cmd_verify(cfg, fault_inject=False):
    results = verify.run_suite(seed=cfg.run.seed, fault_inject=fault_inject)
    for r in results:
        print(r.line())
    ok = verify.all_passed(results)
    report = [{"name": r.name, "passed": r.passed, "residual": r.residual,
               "tolerance": r.tolerance, "detail": r.detail, "report_only": r.report_only}
              for r in results]
    _write_jsonl(os.path.join(cfg.run.out, "verify.jsonl"), report)
    print("verify:", "all checks passed" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_gen(cfg):
    ds = dataio.gen_synthetic(cfg.synthetic)
    path = os.path.join(cfg.run.out, "dataset.jsonl")
    dataio.save_dataset(ds, path)
    print(f"wrote {path}: {len(ds)} conversations, {ds.utterance_count} utterances, "
          f"classes {', '.join(ds.classes)}")
    return EXIT_OK


def cmd_train(cfg):
    train_set, val_set, _ = _splits(cfg)
    params = training.fresh_params(cfg.model, train_set, cfg.run.seed)
    result = training.train(train_set, val_set, params, cfg.train)
    out = cfg.run.out
    paramio.save_params(result.params, os.path.join(out, "params.txt"))
    _write_jsonl(os.path.join(out, "train_log.jsonl"), result.log)
    _write_jsonl(os.path.join(out, "timing.jsonl"), result.timings)
    _write_text(os.path.join(out, "config_used.ini"), dump_config(cfg))
    best = result.log[result.best_epoch - 1]["val_wf1"] if result.log else float("nan")
    print(f"trained {cfg.train.epochs} epochs; best validation W-F1 {best:.4f} "
          f"at epoch {result.best_epoch}; params in {os.path.join(out, 'params.txt')}")
    return EXIT_OK


def _embedding_rows(split, params, prepared):
    probs, _ = training.predict(prepared, params)
    emb = training.embeddings(prepared, params)
    lines = ["conversation_id\tutterance_index\tlabel\tpredicted\t"
             + "\t".join(f"e{k}" for k in range(emb.shape[1]))]
    row = 0
    for conv in split.conversations:
        for u in conv.utterances:
            pred = params.classes[M.predict_label(probs[row])]
            values = "\t".join(repr(float(v)) for v in emb[row])
            lines.append(f"{conv.conversation_id}\t{u.utterance_index}\t{u.label}\t{pred}\t{values}")
            row += 1
    return "\n".join(lines) + "\n"


def cmd_eval(cfg):
    train_set, _, test_set = _splits(cfg)
    if cfg.run.params == "init":
        params = training.fresh_params(cfg.model, train_set, cfg.run.seed)
    else:
        path = _params_path(cfg)
        if not os.path.exists(path):
            raise FileNotFoundError(f"parameters not found: {path} (run 'dgode train' first)")
        params = paramio.load_params(path)
    dataio.require_nonempty(test_set, "test split")
    prepared = M.prepare_dataset(test_set, params)
    report = training.evaluate(prepared, params)
    out = cfg.run.out
    _write_text(os.path.join(out, "metrics.json"),
                json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    _write_text(os.path.join(out, "metrics_table.tsv"), report.table())
    _write_text(os.path.join(out, "confusion.tsv"), report.confusion_text())
    _write_text(os.path.join(out, "embeddings.tsv"), _embedding_rows(test_set, params, prepared))
    print(report.table(), end="")
    print(f"accuracy {report.accuracy:.4f}")
    return EXIT_OK


def cmd_sweep(cfg):
    splits = _splits(cfg)
    seeds = tuple(int(s) + cfg.run.seed for s in cfg.sweep.seeds)
    records = training.depth_sweep(splits, cfg.model, cfg.train, cfg.sweep.depths, seeds,
                                   cfg.sweep.method)
    path = os.path.join(cfg.run.out, "sweep.jsonl")
    _write_jsonl(path, records)
    for rec in records:
        print(f"{rec['method']:<12} depth {rec['depth']:>3}  W-F1 {rec['w_f1']:.4f}")
    print(f"wrote {len(records)} records to {path}")
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "gen": cmd_gen, "train": cmd_train,
            "eval": cmd_eval, "sweep": cmd_sweep}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI configuration file")
    common.add_argument("--seed", type=int, help="overrides [run] seed")
    common.add_argument("--out", metavar="DIR", help="overrides [run] out")
    parser = argparse.ArgumentParser(prog="dgode", description="Graph ODE emotion recognition")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"verify": "run the numerical verification suite",
             "gen": "write a synthetic dataset",
             "train": "train and save parameters",
             "eval": "score the test split",
             "sweep": "depth sweep for DGODE and a stacked GCN"}
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        if name == "verify":
            p.add_argument("--fault-inject", action="store_true",
                           help="perturb the ODE right-hand side; checks should fail")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.out is not None:
            cfg = cfg.with_out(args.out)
        os.makedirs(cfg.run.out, exist_ok=True)
        if args.command == "verify":
            return cmd_verify(cfg, args.fault_inject)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"dgode: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DgodeError, OSError) as exc:
        print(f"dgode: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
