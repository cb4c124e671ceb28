#!/usr/bin/env python3
# Copyright 2026 The MoralBench Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes tests/data/ra_golden.json.

Recall accuracy computed from first principles: multiset token F1 and either
a pinned cosine (served by a lookup-table embedder in the test) or the cosine
of hashed character-trigram count vectors.
"""

import json
import math
import string
from collections import Counter
from pathlib import Path


def normalize(text):
    out = []
    for ch in text.replace("’", ""):
        if ch == "'":
            continue
        if ch in string.whitespace or ch in string.punctuation:
            out.append(" ")
        else:
            out.append(ch.lower() if "A" <= ch <= "Z" else ch)
    return "".join(out).split()


def f1(answer, truth):
    a, t = Counter(normalize(answer)), Counter(normalize(truth))
    tp = sum((a & t).values())
    fp = sum(a.values()) - tp
    fn = sum(t.values()) - tp
    denom = tp + 0.5 * (fp + fn)
    return tp, fp, fn, (tp / denom if denom else 0.0)


def fnv1a64(data):
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) % (1 << 64)
    return h


def trigram_vector(text, dim=256):
    lowered = "".join(c.lower() if "A" <= c <= "Z" else c for c in text)
    padded = (" " + lowered + " ").encode("utf-8")
    counts = Counter(fnv1a64(padded[i:i + 3]) % dim for i in range(len(padded) - 2))
    return counts


def trigram_cosine(a, b):
    va, vb = trigram_vector(a), trigram_vector(b)
    num = sum(va[k] * vb[k] for k in va)
    return num / math.sqrt(sum(v * v for v in va.values()) * sum(v * v for v in vb.values()))


PINNED = [
    ("a b x y", "a b c d", 1, 1, 0.5),
    ("a b c d", "a b c d", 1, 1, 1.0),
    ("x y z", "a b c", 1, 1, 0.0),
    ("The router uses softmax.", "the router uses softmax", 1, 1, 0.9),
    ("a a b", "a b b", 1, 1, 0.3),
    ("one two three", "one two three four five six", 2, 1, 0.7),
    ("one two three", "one two three four five six", 1, 0, 0.7),
    ("one two three", "one two three four five six", 0, 1, 0.7),
    ("I don't know", "i dont know", 1, 3, 0.25),
    ("alpha beta gamma delta", "beta", 1, 1, -0.4),
]

TRIGRAM = [
    ("The router uses softmax gating.", "The router uses softmax gating.", 1, 1),
    ("The router uses softmax gating.", "softmax gating", 1, 1),
    ("Paris is the capital of France.", "The capital of France is Paris.", 1, 1),
    ("blue", "The sky is blue.", 1, 1),
    ("I don't know", "The answer is forty two.", 1, 1),
    ("Experts are low rank matrices.", "An expert is a pair of low rank matrices.", 3, 1),
    ("Adam keeps running averages.", "The optimizer keeps running averages of the gradient.", 1, 2),
    ("zzz qqq", "The router uses softmax gating.", 1, 1),
    ("Bias correction removes drift.", "Bias correction removes the drift toward zero.", 0.5, 0.5),
    ("Chunks overlap by one hundred characters.", "Neighbouring chunks share a short overlap.", 1, 1),
]


def main():
    cases = []
    for answer, truth, w0, w1, cos in PINNED:
        tp, fp, fn, f = f1(answer, truth)
        ra = (w0 * f + w1 * min(max(cos, 0.0), 1.0)) / (w0 + w1)
        cases.append(dict(answer=answer, ground_truth=truth, w0=w0, w1=w1, embedder="pinned", cosine=cos,
                          tp=tp, fp=fp, fn=fn, f1=f, ra=ra))
    for answer, truth, w0, w1 in TRIGRAM:
        tp, fp, fn, f = f1(answer, truth)
        cos = trigram_cosine(answer, truth)
        ra = (w0 * f + w1 * min(max(cos, 0.0), 1.0)) / (w0 + w1)
        cases.append(dict(answer=answer, ground_truth=truth, w0=w0, w1=w1, embedder="trigram", cosine=cos,
                          tp=tp, fp=fp, fn=fn, f1=f, ra=ra))
    out = Path(__file__).resolve().parent.parent / "data" / "ra_golden.json"
    out.write_text(json.dumps(cases, indent=2) + "\n")
    print(f"wrote {len(cases)} cases to {out}")


if __name__ == "__main__":
    main()
