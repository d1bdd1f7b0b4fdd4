"""Ridge-regression surrogate scorer on one-hot sequence features.

The scorer is trained only on training-region data and is deliberately a
linear model: on an epistatic landscape it is mis-specified, so its guidance
degrades outside the region it was fit on. It must never be confused with the
landscape oracle.

Feature layout: position i with token t lights coordinate ``i * |alphabet| + t``;
the final coordinate is a constant bias of 1. The bias is unregularized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence as PySequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .landscape import DatasetSplit, LabeledExample, spearman
from .seqs import Sequence

RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class ScorerModel:
    """Fitted ridge weights: length*alphabet_size one-hot weights plus bias."""

    weights: np.ndarray
    ridge_lambda: float
    length: int
    alphabet_size: int

    def __post_init__(self) -> None:
        self.weights.setflags(write=False)
        expected = self.length * self.alphabet_size + 1
        if self.weights.shape != (expected,):
            raise ValueError(f"weight count {self.weights.shape} != ({expected},)")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    @cached_property
    def weight_matrix(self) -> np.ndarray:
        return self.weights[:-1].reshape(self.length, self.alphabet_size)

    @property
    def bias(self) -> float:
        return float(self.weights[-1])

    @property
    def layout(self) -> tuple[int, int]:
        return (self.length, self.alphabet_size)


def featurize(seq: Sequence, layout: tuple[int, int]) -> np.ndarray:
    """Binary one-hot vector with exactly one 1 per position, plus bias 1."""
    length, size = layout
    if len(seq.tokens) != length:
        raise ValueError(f"sequence length {len(seq.tokens)} != layout length {length}")
    v = np.zeros(length * size + 1, dtype=np.float64)
    for i, t in enumerate(seq.tokens):
        if not 0 <= t < size:
            raise ValueError(f"token {t} at position {i} outside layout alphabet")
        v[i * size + t] = 1.0
    v[-1] = 1.0
    return v


def _design_matrix(examples: PySequence[LabeledExample], layout: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    length, size = layout
    n = len(examples)
    X = np.zeros((n, length * size + 1), dtype=np.float64)
    y = np.empty(n, dtype=np.float64)
    cols = np.arange(length) * size
    for r, ex in enumerate(examples):
        if len(ex.seq.tokens) != length:
            raise ValueError("example length mismatch")
        X[r, cols + np.array(ex.seq.tokens)] = 1.0
        X[r, -1] = 1.0
        y[r] = ex.z
    return X, y


def fit_ridge(
    examples: PySequence[LabeledExample],
    ridge_lambda: float,
    alphabet_size: int,
) -> ScorerModel:
    """Closed-form ridge via Cholesky on (X'X + lambda*D), bias unregularized.

    The solution is checked against the normal-equation residual
    ``max|X'(y - Xw) - lambda*D*w| <= 1e-8 * max(1, max|y|)``; one step of
    iterative refinement is applied first if needed.
    """
    if len(examples) < 2:
        raise ValueError("need at least 2 examples")
    if ridge_lambda <= 0:
        raise ValueError("ridge_lambda must be > 0")
    length = len(examples[0].seq.tokens)
    layout = (length, alphabet_size)
    X, y = _design_matrix(examples, layout)
    d = X.shape[1]
    reg = np.full(d, ridge_lambda)
    reg[-1] = 0.0
    A = X.T @ X + np.diag(reg)
    rhs = X.T @ y
    try:
        factor = cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            f"ridge system numerically singular (condition estimate {np.linalg.cond(A):.3e})"
        ) from exc
    w = cho_solve(factor, rhs)

    def residual(weights: np.ndarray) -> np.ndarray:
        return X.T @ (y - X @ weights) - reg * weights

    bound = RESIDUAL_RTOL * max(1.0, float(np.abs(y).max()))
    r = residual(w)
    if np.abs(r).max() > bound:
        w = w + cho_solve(factor, r)
        r = residual(w)
    if np.abs(r).max() > bound:
        raise ValueError(
            f"normal-equation residual {np.abs(r).max():.3e} exceeds bound {bound:.3e} "
            f"(condition estimate {np.linalg.cond(A):.3e})"
        )
    return ScorerModel(weights=w, ridge_lambda=ridge_lambda, length=length, alphabet_size=alphabet_size)


def predict_tokens(model: ScorerModel, tokens: np.ndarray) -> np.ndarray:
    """Predictions for a (n, length) int token matrix."""
    tokens = np.asarray(tokens)
    if tokens.ndim != 2 or tokens.shape[1] != model.length:
        raise ValueError(f"token matrix must be (n, {model.length})")
    if tokens.size and (tokens.min() < 0 or tokens.max() >= model.alphabet_size):
        raise ValueError("token out of layout range")
    pos = np.arange(model.length)
    return model.weight_matrix[pos, tokens].sum(axis=1) + model.bias


def predict(model: ScorerModel, seq: Sequence) -> float:
    """Scorer value for one sequence (bit-identical to the batch path)."""
    return float(predict_tokens(model, np.array([seq.tokens]))[0])


def correlation_report(
    model: ScorerModel,
    split: DatasetSplit,
    heldout: PySequence[LabeledExample],
) -> tuple[float | None, float | None]:
    """(train Spearman, heldout Spearman) of predictions vs true labels.

    Returns None for a side whose predictions are constant.
    """
    if not split.sup_train or not heldout:
        raise ValueError("empty inputs")

    def corr(examples: PySequence[LabeledExample]) -> float | None:
        toks = np.array([ex.seq.tokens for ex in examples])
        preds = predict_tokens(model, toks)
        return spearman(preds, [ex.z for ex in examples])

    return corr(split.sup_train), corr(heldout)


def save_scorer(model: ScorerModel, path: str, meta: dict | None = None) -> None:
    doc = {
        "format": "ice-scorer",
        "version": 1,
        "length": model.length,
        "alphabet_size": model.alphabet_size,
        "ridge_lambda": model.ridge_lambda,
        "weights": model.weights.tolist(),
    }
    if meta:
        doc.update(meta)
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_scorer(path: str) -> ScorerModel:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != "ice-scorer":
        raise ValueError(f"{path} is not a scorer file")
    return ScorerModel(
        weights=np.array(doc["weights"], dtype=np.float64),
        ridge_lambda=float(doc["ridge_lambda"]),
        length=int(doc["length"]),
        alphabet_size=int(doc["alphabet_size"]),
    )
