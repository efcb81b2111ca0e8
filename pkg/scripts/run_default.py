"""Train on the default synthetic task and print held-out metrics and the branch table."""

import argparse
import json
import time

from vqrank.metrics import branch_report
from vqrank.model import ModelConfig
from vqrank.synth import SynthConfig, generate_corpus
from vqrank.training import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--n-train", type=int, default=2000)
    ap.add_argument("--n-held-out", type=int, default=500)
    args = ap.parse_args()

    corpus = generate_corpus(SynthConfig(n_records=args.n_train + args.n_held_out, seed=args.seed)).records
    train_set, held_out = corpus[: args.n_train], corpus[args.n_train :]
    start = time.perf_counter()
    result = train(train_set, TrainConfig(epochs=args.epochs, seed=args.seed, model=ModelConfig(d=32)),
                   validation=held_out)
    for entry in result.history:
        print(json.dumps(entry))
    print(f"trained in {time.perf_counter() - start:.1f}s")
    print(branch_report(held_out, result.params).format_table())


if __name__ == "__main__":
    main()
