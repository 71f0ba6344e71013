"""Figures of merit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def nmse(predicted, target) -> float:
    """Mean squared error over the population variance of ``target``.

    1.0 is what predicting the target mean scores.
    """
    p = np.asarray(predicted, dtype=float).ravel()
    t = np.asarray(target, dtype=float).ravel()
    if p.shape != t.shape:
        raise ValidationError(f"predicted and target lengths differ: {p.shape} vs {t.shape}")
    if t.size < 2:
        raise ValidationError("nmse needs at least two samples")
    # ratio of sums; the 1/K factors of MSE and variance cancel
    spread = np.sum((t - t.mean()) ** 2)
    if spread == 0:
        raise ValidationError("target is constant; NMSE is undefined")
    return float(np.sum((p - t) ** 2) / spread)


@dataclass(frozen=True)
class ErrorRate:
    n_correct: int
    n_total: int

    @property
    def value(self) -> float:
        return 1.0 - self.n_correct / self.n_total

    def __float__(self):
        return self.value


def error_rate(predictions, labels) -> ErrorRate:
    p = np.asarray(predictions).ravel()
    y = np.asarray(labels).ravel()
    if p.shape != y.shape:
        raise ValidationError(f"{p.size} predictions for {y.size} labels")
    if p.size == 0:
        raise ValidationError("error_rate needs at least one prediction")
    return ErrorRate(int(np.sum(p == y)), int(p.size))
