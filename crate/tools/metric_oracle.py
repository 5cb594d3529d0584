"""Brute-force NLL / Brier / ECE for the hand-built prediction sets used by the
acceptance suite. Brier and ECE are computed in exact rational arithmetic."""
from fractions import Fraction
import math

CLIP = 1e-12
BINS = 15

SETS = [
    ([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.25, 0.35, 0.4], [0.5, 0.3, 0.2]], [0, 1, 0, 2]),
    ([[0.55, 0.45], [0.9, 0.1], [0.3, 0.7], [0.02, 0.98], [0.62, 0.38], [0.45, 0.55],
      [0.81, 0.19], [0.12, 0.88], [0.5001, 0.4999], [0.77, 0.23]], [0, 0, 1, 1, 1, 0, 0, 1, 1, 0]),
    ([[1.0, 0.0, 0.0, 0.0], [0.0, 0.3, 0.3, 0.4], [0.26, 0.24, 0.25, 0.25]], [1, 3, 0]),
    ([[0.05, 0.15, 0.8]], [1]),
    ([[0.34, 0.33, 0.33], [0.2, 0.21, 0.59], [0.97, 0.02, 0.01], [0.1, 0.6, 0.3],
      [0.44, 0.12, 0.44001], [0.3, 0.3, 0.4]], [0, 2, 0, 2, 2, 1]),
]


def nll(p, y):
    return math.fsum(-math.log(max(row[t], CLIP)) for row, t in zip(p, y)) / len(y)


def brier(p, y):
    total = Fraction(0)
    for row, t in zip(p, y):
        for c, v in enumerate(row):
            total += (Fraction(v) - (1 if c == t else 0)) ** 2
    return total / len(y)


def ece(p, y):
    bins = [[] for _ in range(BINS)]
    for row, t in zip(p, y):
        conf = max(row)
        pred = row.index(conf)
        c = Fraction(conf)
        k = next(k for k in range(BINS) if c <= Fraction(k + 1, BINS))
        assert c == 1 or c != Fraction(k + 1, BINS), "confidence on an inner bin edge"
        bins[k].append((c, pred == t))
    total = Fraction(0)
    for b in bins:
        if b:
            total += abs(sum(1 for _, hit in b if hit) - sum(c for c, _ in b))
    return total / len(y)


for i, (p, y) in enumerate(SETS):
    print(f"set {i}: nll {nll(p, y)!r} brier {float(brier(p, y))!r} ece {float(ece(p, y))!r}")
