"""Synthetic labeled corpora for demos and trainability checks.

Fake documents carry marker tokens with high probability, real ones with
low probability, giving a nearly separable task a working pipeline must
learn quickly.
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, Document

MARKERS = ("hoax", "shocking", "exposed", "conspiracy", "clickbait")
FILLERS = ("government", "report", "market", "city", "weather", "council",
           "economy", "health", "science", "school", "team", "budget")


def make_synthetic_corpus(n_docs: int, name: str, seed: int,
                          marker_prob_fake: float = 0.9,
                          marker_prob_real: float = 0.1,
                          doc_len: int = 8) -> Corpus:
    """Balanced corpus where fake documents contain 2 of 5 marker tokens
    with probability `marker_prob_fake`, real with `marker_prob_real`."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    docs = []
    for i in range(n_docs):
        label = i % 2
        words = list(rng.choice(FILLERS, size=doc_len))
        prob = marker_prob_fake if label == 1 else marker_prob_real
        if rng.random() < prob:
            picks = rng.choice(len(MARKERS), size=2, replace=False)
            for k, pos in zip(picks, rng.choice(doc_len, size=2, replace=False)):
                words[pos] = MARKERS[k]
        docs.append(Document(text=" ".join(words), label=label, source=name))
    return Corpus(docs=tuple(docs), name=name)


def write_synthetic_csv(corpus: Corpus, path) -> None:
    """Dump a synthetic corpus as a loadable delimited file."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["title", "text", "label"])
        for doc in corpus:
            head, _, rest = doc.text.partition(" ")
            writer.writerow([head, rest, "FAKE" if doc.label else "REAL"])
