"""Pairwise and BCubed clustering scores.

Both are computed from the contingency table with exact rational
arithmetic, then rounded once to float.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass
class PairwiseScore:
    precision: float
    recall: float
    f_score: float  # harmonic mean, reported as F_P
    fowlkes_mallows: float  # geometric mean
    degenerate: bool = False


@dataclass
class BCubedScore:
    precision: float
    recall: float
    f_score: float


def _pairs(count: int) -> int:
    return count * (count - 1) // 2


def _contingency(pred, true):
    pred = np.asarray(pred).tolist()
    true = np.asarray(true).tolist()
    if len(pred) != len(true):
        raise ValueError(f"label arrays differ in length: {len(pred)} vs {len(true)}")
    return Counter(zip(pred, true)), Counter(pred), Counter(true), len(pred)


def _harmonic(p: Fraction, r: Fraction) -> Fraction:
    return Fraction(0) if p + r == 0 else 2 * p * r / (p + r)


def pairwise_f(pred, true) -> PairwiseScore:
    cells, pred_sizes, true_sizes, n = _contingency(pred, true)
    if n < 2:
        raise ValueError("pairwise F needs at least two samples")
    tp = sum(_pairs(c) for c in cells.values())
    same_pred = sum(_pairs(c) for c in pred_sizes.values())
    same_true = sum(_pairs(c) for c in true_sizes.values())
    if same_pred == 0 or same_true == 0:
        return PairwiseScore(0.0, 0.0, 0.0, 0.0, degenerate=True)
    p = Fraction(tp, same_pred)
    r = Fraction(tp, same_true)
    return PairwiseScore(
        precision=float(p),
        recall=float(r),
        f_score=float(_harmonic(p, r)),
        fowlkes_mallows=float(np.sqrt(float(p * r))),
    )


def bcubed_f(pred, true) -> BCubedScore:
    cells, pred_sizes, true_sizes, n = _contingency(pred, true)
    if n < 1:
        raise ValueError("BCubed needs at least one sample")
    # every item in cell (c, l) has precision n_cl/|c| and recall n_cl/|l|
    p = sum(Fraction(cnt * cnt, pred_sizes[c]) for (c, _), cnt in cells.items()) / n
    r = sum(Fraction(cnt * cnt, true_sizes[lab]) for (_, lab), cnt in cells.items()) / n
    return BCubedScore(float(p), float(r), float(_harmonic(p, r)))
