"""Command-line entry point: synth, train, score, eval, inspect-branches."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .ingest import check_homogeneous, load_corpus, save_corpus
from .metrics import branch_report
from .model import BRANCHES
from .scoring import score_corpus, write_scores
from .synth import SynthConfig, generate_corpus
from .training import TrainConfig, train

log = logging.getLogger("vqrank")


def _read_json(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _dump(obj) -> str:
    def fix(x):
        if isinstance(x, float) and math.isinf(x):
            return "inf"
        if isinstance(x, dict):
            return {k: fix(v) for k, v in x.items()}
        if isinstance(x, list):
            return [fix(v) for v in x]
        return x

    return json.dumps(fix(obj), indent=2, sort_keys=True)


def _write_text(path: str | Path, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")


def cmd_synth(args) -> int:
    fields = _read_json(args.config)
    overrides = {
        "n_records": args.n,
        "seed": args.seed,
        "d_t": args.d_t,
        "d_f": args.d_f,
        "m": args.m,
        "defect_probabilities": args.defect_probs,
        "defect_magnitude": args.magnitude,
        "noise": args.noise,
    }
    fields.update({k: v for k, v in overrides.items() if v is not None})
    corpus = generate_corpus(SynthConfig(**fields))
    save_corpus(corpus.records, args.out)
    log.info("wrote %d records to %s", len(corpus.records), args.out)
    return 0


def cmd_train(args) -> int:
    fields = _read_json(args.config)
    model_fields = dict(fields.pop("model", {}))
    overrides = {
        "learning_rate": args.lr,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "dropout": args.dropout,
        "alpha": args.alpha,
        "tau": args.tau,
        "seed": args.seed,
    }
    fields.update({k: v for k, v in overrides.items() if v is not None})
    if args.d is not None:
        model_fields["d"] = args.d
    if args.branches:
        model_fields["branches"] = args.branches
    config = TrainConfig(**fields, model=model_fields)
    corpus = load_corpus(args.corpus, require_grades=True)
    validation = load_corpus(args.validation, require_grades=True) if args.validation else None
    if validation:
        check_homogeneous(corpus + validation)
    result = train(corpus, config, validation=validation)
    save_checkpoint(result.params, result.state, args.out_checkpoint)
    history_path = args.history or f"{args.out_checkpoint}.history.json"
    _write_text(history_path, _dump({"config": config.to_dict(), "history": result.history,
                                     "pairwise_degenerate": result.pairwise_degenerate}))
    return 0


def cmd_score(args) -> int:
    params, _ = load_checkpoint(args.checkpoint)
    records = load_corpus(args.corpus)
    write_scores(score_corpus(records, params, workers=args.workers), args.out)
    return 0


def cmd_eval(args) -> int:
    params, _ = load_checkpoint(args.checkpoint)
    records = load_corpus(args.corpus, require_grades=True)
    text = _dump(branch_report(records, params).to_json())
    print(text)
    if args.out:
        _write_text(args.out, text)
    return 0


def cmd_inspect(args) -> int:
    params, _ = load_checkpoint(args.checkpoint)
    records = load_corpus(args.corpus, require_grades=True)
    report = branch_report(records, params)
    print(_dump(report.to_json()) if args.json else report.format_table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqrank", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus with planted defects")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON file of generator settings; flags win")
    p.add_argument("--d-t", type=int)
    p.add_argument("--d-f", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--defect-probs", type=float, nargs=4, metavar=("INCOH", "MISMATCH", "VISUAL", "TEXT"))
    p.add_argument("--magnitude", type=float)
    p.add_argument("--noise", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--config", help="JSON file of training settings (with optional 'model' object); flags win")
    p.add_argument("--validation", help="held-out corpus; default splits the training corpus")
    p.add_argument("--history", help="history JSON path (default: <checkpoint>.history.json)")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--d", type=int, help="model dimension")
    p.add_argument("--branches", nargs="+", choices=BRANCHES)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a corpus, one JSON object per line")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="print ranking metrics for a graded corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="also write the JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect-branches", help="per-branch mean logits by grade and branch PNR")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"vqrank {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
