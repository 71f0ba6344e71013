"""Linear readout training and the utterance-classification protocols."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import SingularSystemError, ValidationError
from .metrics import ErrorRate, error_rate


@dataclass(frozen=True)
class TrainedReadout:
    """Output weights (C_out x N, or C_out x (N+1) with a bias column)."""

    weights: np.ndarray
    ridge_lambda: float
    bias: bool = False

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        if w.shape[0] < 1 or not np.all(np.isfinite(w)):
            raise ValidationError("readout weights must be finite with at least one output")
        object.__setattr__(self, "weights", w)

    @property
    def n_outputs(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1] - (1 if self.bias else 0)


def _design(states: np.ndarray, bias: bool) -> np.ndarray:
    x = np.asarray(states, dtype=float)
    if x.ndim != 2:
        raise ValidationError(f"states must be 2-D (timesteps x N), got shape {x.shape}")
    if bias:
        x = np.hstack([x, np.ones((x.shape[0], 1))])
    return x


def train_ridge(states, targets, ridge_lambda: float, bias: bool = False) -> TrainedReadout:
    """Ridge regression: minimise ||X W^T - Y||^2 + lambda ||W||^2.

    Solves (X^T X + lambda I) W^T = X^T Y by Cholesky factorisation.

    Args:
        states: Design matrix X, one row per timestep.
        targets: Y, shape (timesteps,) or (timesteps, C_out).
        ridge_lambda: Regularisation strength, >= 0.
        bias: Append a constant column (also regularised).

    Raises:
        SingularSystemError: lambda = 0 and X^T X is rank deficient.
    """
    x = _design(states, bias)
    y = np.asarray(targets, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[0] != x.shape[0]:
        raise ValidationError(f"targets have {y.shape[0]} rows, states have {x.shape[0]}")
    if not ridge_lambda >= 0:
        raise ValidationError(f"ridge_lambda must be >= 0, got {ridge_lambda!r}")
    n = x.shape[1]
    if ridge_lambda == 0 and np.linalg.matrix_rank(x) < n:
        raise SingularSystemError(
            "X^T X is rank deficient with ridge_lambda = 0; use ridge_lambda > 0"
        )
    gram = x.T @ x
    gram[np.diag_indices(n)] += ridge_lambda
    try:
        factor = scipy.linalg.cho_factor(gram, lower=False, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"normal equations not positive definite (ridge_lambda={ridge_lambda}); "
            "increase ridge_lambda"
        ) from exc
    w_t = scipy.linalg.cho_solve(factor, x.T @ y)
    return TrainedReadout(w_t.T, float(ridge_lambda), bias)


def predict(readout: TrainedReadout, states) -> np.ndarray:
    x = _design(states, readout.bias)
    if x.shape[1] != readout.weights.shape[1]:
        raise ValidationError(
            f"states have {x.shape[1] - readout.bias} features, readout expects {readout.n_features}"
        )
    return x @ readout.weights.T


# --- utterance datasets ----------------------------------------------------

@dataclass(frozen=True)
class Utterance:
    id: str
    label: int
    features: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        if f.ndim == 1:
            f = f[:, None]
        if f.ndim != 2 or f.shape[0] < 1:
            raise ValidationError(f"utterance {self.id!r} needs a (T >= 1, C) feature block")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "label", int(self.label))

    @property
    def length(self) -> int:
        return self.features.shape[0]


class UtteranceDataset:
    """Labelled multichannel utterances, fed to the reservoir back to back."""

    def __init__(self, utterances: Sequence[Utterance], n_classes: int):
        self.utterances = list(utterances)
        self.n_classes = int(n_classes)
        if not self.utterances:
            raise ValidationError("dataset has no utterances")
        if self.n_classes < 1:
            raise ValidationError("n_classes must be >= 1")
        channels = {u.features.shape[1] for u in self.utterances}
        if len(channels) != 1:
            raise ValidationError(f"utterances disagree on channel count: {sorted(channels)}")
        for u in self.utterances:
            if not 0 <= u.label < self.n_classes:
                raise ValidationError(
                    f"utterance {u.id!r} has label {u.label} outside [0, {self.n_classes})"
                )
        self.channels = channels.pop()
        lengths = np.array([u.length for u in self.utterances])
        self.offsets = np.concatenate([[0], np.cumsum(lengths)])

    def __len__(self):
        return len(self.utterances)

    def __eq__(self, other):
        if not isinstance(other, UtteranceDataset):
            return NotImplemented
        return self.n_classes == other.n_classes and len(self) == len(other) and all(
            a.id == b.id and a.label == b.label and np.array_equal(a.features, b.features)
            for a, b in zip(self.utterances, other.utterances)
        )

    @property
    def labels(self) -> np.ndarray:
        return np.array([u.label for u in self.utterances])

    @property
    def total_length(self) -> int:
        return int(self.offsets[-1])

    def concatenate(self) -> np.ndarray:
        """All feature blocks stacked in dataset order (total_length x C)."""
        return np.vstack([u.features for u in self.utterances])

    def rows(self, index: int) -> slice:
        return slice(int(self.offsets[index]), int(self.offsets[index + 1]))

    def row_indices(self, indices) -> np.ndarray:
        return np.concatenate([np.arange(self.offsets[i], self.offsets[i + 1]) for i in indices])


def make_classification_targets(dataset: UtteranceDataset, concatenated_length: int) -> np.ndarray:
    """One-vs-rest targets: +1 in the label column, -1 elsewhere, per timestep."""
    if concatenated_length != dataset.total_length:
        raise ValidationError(
            f"concatenated length {concatenated_length} != dataset total {dataset.total_length}"
        )
    targets = -np.ones((dataset.total_length, dataset.n_classes))
    for i, u in enumerate(dataset.utterances):
        if not 0 <= u.label < dataset.n_classes:
            raise ValidationError(f"label {u.label} out of range")
        targets[dataset.rows(i), u.label] = 1.0
    return targets


def winner_takes_all(scores) -> int:
    """Majority over timesteps of the per-timestep argmax; ties go to the lowest class."""
    s = np.asarray(scores, dtype=float)
    if s.ndim == 1:
        s = s[None, :]
    if s.ndim != 2 or s.shape[0] == 0 or s.shape[1] == 0:
        raise ValidationError("winner_takes_all needs a non-empty (T, n_classes) score matrix")
    votes = np.argmax(s, axis=1)
    return int(np.argmax(np.bincount(votes, minlength=s.shape[1])))


# --- evaluation protocols --------------------------------------------------

Pipeline = Callable[[Sequence[int], Sequence[int]], ErrorRate]


@dataclass(frozen=True)
class EvaluationSummary:
    error_rates: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.error_rates))

    @property
    def std(self) -> float:
        # population convention; 0 for a single repeat
        return float(np.std(self.error_rates))


def make_readout_pipeline(dataset: UtteranceDataset, states, ridge_lambda: float,
                          bias: bool = False) -> Pipeline:
    """Closure training on some utterances and scoring others by winner-takes-all.

    ``states`` are the reservoir states of the whole concatenated stream; they
    are computed once and shared by every split.
    """
    states = np.asarray(states, dtype=float)
    if states.shape[0] != dataset.total_length:
        raise ValidationError(
            f"states have {states.shape[0]} rows, dataset has {dataset.total_length} timesteps"
        )
    targets = make_classification_targets(dataset, states.shape[0])

    def pipeline(train_ids, test_ids) -> ErrorRate:
        rows = dataset.row_indices(train_ids)
        readout = train_ridge(states[rows], targets[rows], ridge_lambda, bias)
        predicted = [winner_takes_all(predict(readout, states[dataset.rows(i)])) for i in test_ids]
        return error_rate(predicted, dataset.labels[list(test_ids)])

    return pipeline


def kfold_indices(n_items: int, k: int) -> list[np.ndarray]:
    """Round-robin fold assignment: item i belongs to fold i mod k."""
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    if n_items < k:
        raise ValidationError(f"cannot split {n_items} utterances into {k} folds")
    idx = np.arange(n_items)
    return [idx[f::k] for f in range(k)]


def kfold_evaluate(dataset: UtteranceDataset, k: int, pipeline: Pipeline) -> EvaluationSummary:
    folds = kfold_indices(len(dataset), k)
    rates = []
    for f, test_ids in enumerate(folds):
        train_ids = np.concatenate([folds[g] for g in range(k) if g != f])
        rates.append(pipeline(train_ids, test_ids).value)
    return EvaluationSummary(np.array(rates))


def resplit_indices(n_items: int, train_count: int, repeats: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    if not 0 < train_count < n_items:
        raise ValidationError(f"train_count must be in (0, {n_items}), got {train_count}")
    if repeats < 1:
        raise ValidationError("repeats must be >= 1")
    rng = np.random.default_rng(seed)
    splits = []
    for _ in range(repeats):
        perm = rng.permutation(n_items)
        splits.append((np.sort(perm[:train_count]), np.sort(perm[train_count:])))
    return splits


def random_resplit_evaluate(dataset: UtteranceDataset, train_count: int, repeats: int, seed: int,
                            pipeline: Pipeline) -> EvaluationSummary:
    rates = [pipeline(tr, te).value
             for tr, te in resplit_indices(len(dataset), train_count, repeats, seed)]
    return EvaluationSummary(np.array(rates))
