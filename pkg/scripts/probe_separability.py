"""Linear-probe AUC of the synthetic task on raw embeddings and on the defect statistics."""

import numpy as np
from sklearn.linear_model import LogisticRegression

from vqrank.ingest import is_positive
from vqrank.metrics import auc
from vqrank.synth import SynthConfig, defect_statistics, generate_corpus


def raw(c):
    return np.array([np.concatenate([r.frame_embeddings.mean(0), r.text_embedding]) for r in c.records])


def stats(c):
    return np.array([defect_statistics(r, c.world) for r in c.records])


def main():
    train_c = generate_corpus(SynthConfig(n_records=2000))
    test_c = generate_corpus(SynthConfig(n_records=1000), start=2000)
    y_tr = [is_positive(r.grade) for r in train_c.records]
    y_te = [is_positive(r.grade) for r in test_c.records]
    for name, feats in (("raw (mean frame, text)", raw), ("defect statistics", stats)):
        probe = LogisticRegression(max_iter=5000).fit(feats(train_c), y_tr)
        print(f"{name:24s} AUC {auc(y_te, probe.decision_function(feats(test_c))):.4f}")


if __name__ == "__main__":
    main()
