"""Benchmark data: NARMA10, Mackey-Glass forecasting, synthetic utterances.

Every generator is a pure function of its parameters.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .errors import IntegrationError, NarmaDivergenceError, ValidationError
from .masking import InputSequence
from .readout import Utterance, UtteranceDataset

NARMA_DIVERGENCE_BOUND = 10.0


@dataclass(frozen=True)
class SplitSpec:
    """Washout / train / washout / test lengths, consumed in that order."""

    washout1: int = 500
    train_len: int = 10000
    washout2: int = 500
    test_len: int = 10000

    def __post_init__(self):
        for name, value in asdict(self).items():
            if int(value) != value or value < 0:
                raise ValidationError(f"split.{name} must be a non-negative integer, got {value!r}")
        if self.train_len == 0 or self.test_len == 0:
            raise ValidationError("split needs non-empty train and test windows")

    @property
    def total(self) -> int:
        return self.washout1 + self.train_len + self.washout2 + self.test_len

    @classmethod
    def scaled(cls, length: int) -> "SplitSpec":
        """Split ``length`` in the 500/10000/500/10000 proportions."""
        if length == 21000:
            return cls()
        w = round(length * 500 / 21000)
        train = (length - 2 * w) // 2
        return cls(w, train, w, length - 2 * w - train)


@dataclass(frozen=True)
class SeriesTask:
    """Scalar time series with a per-timestep regression target."""

    input: InputSequence
    target: np.ndarray
    split: SplitSpec
    name: str = "series"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        target = np.asarray(self.target, dtype=float)
        if target.ndim != 1 or target.shape[0] != self.input.timesteps:
            raise ValidationError(
                f"target length {target.shape} does not match input length {self.input.timesteps}"
            )
        object.__setattr__(self, "target", target)
        if self.split.total != target.shape[0]:
            raise ValidationError(
                f"split covers {self.split.total} steps but series has {target.shape[0]}"
            )


def apply_split(task_or_length, split: Optional[SplitSpec] = None) -> tuple[range, range]:
    """Index ranges of the train and test windows.

    Accepts either a SeriesTask (using its own split) or a series length plus
    an explicit SplitSpec.
    """
    if isinstance(task_or_length, SeriesTask):
        length = task_or_length.target.shape[0]
        split = split or task_or_length.split
    else:
        length = int(task_or_length)
    if split is None:
        raise ValidationError("apply_split needs a SplitSpec")
    if split.total != length:
        raise ValidationError(f"split covers {split.total} steps but series has {length}")
    train_start = split.washout1
    test_start = train_start + split.train_len + split.washout2
    return (range(train_start, train_start + split.train_len),
            range(test_start, test_start + split.test_len))


# --- NARMA10 ---------------------------------------------------------------

@dataclass(frozen=True)
class Narma10Params:
    """NARMA10 generation parameters.

    ``target_offset`` aligns the readout target with the input:
    target(n) = q(n + target_offset). The default of 1 pairs u(n) with
    q(n+1), the output the system produces in response to u(n).
    ``summand="printed"`` replaces the 10-lag sum by ten copies of q(n-1).
    """

    length: int = 21000
    input_seed: int = 0
    input_lo: float = 0.0
    input_hi: float = 0.5
    target_offset: int = 1
    summand: str = "lagged"

    def __post_init__(self):
        if self.length <= 10:
            raise ValidationError(f"NARMA10 length must exceed 10, got {self.length}")
        if not self.input_lo < self.input_hi:
            raise ValidationError("input_lo must be < input_hi")
        if self.target_offset < 0:
            raise ValidationError("target_offset must be >= 0")
        if self.summand not in ("lagged", "printed"):
            raise ValidationError(f"summand must be 'lagged' or 'printed', got {self.summand!r}")


def narma10_recursion(u: np.ndarray, summand: str = "lagged", seed=None) -> np.ndarray:
    """Run q(n+1) = 0.3 q(n) + 0.05 q(n) S(n) + 1.5 u(n-9) u(n) + 0.1.

    S(n) is the sum of q(n-i) for i = 0..9 (or 10 q(n-1) for the printed
    variant). History before n = 0 is zero and q(0) = 0.

    Raises:
        NarmaDivergenceError: if any |q| exceeds 10.
    """
    u = [float(v) for v in u]
    q = [0.0] * len(u)
    for n in range(len(u) - 1):
        if summand == "lagged":
            s = 0.0
            for i in range(10):
                if n - i >= 0:
                    s += q[n - i]
        else:
            s = 10.0 * q[n - 1] if n >= 1 else 0.0
        u_lag = u[n - 9] if n >= 9 else 0.0
        nxt = 0.3 * q[n] + 0.05 * q[n] * s + 1.5 * u_lag * u[n] + 0.1
        if not abs(nxt) <= NARMA_DIVERGENCE_BOUND:
            raise NarmaDivergenceError(seed, n + 1, nxt)
        q[n + 1] = nxt
    return np.array(q)


def generate_narma10(params: Narma10Params = Narma10Params(), split: Optional[SplitSpec] = None) -> SeriesTask:
    rng = np.random.default_rng(params.input_seed)
    u = rng.uniform(params.input_lo, params.input_hi, params.length + params.target_offset)
    q = narma10_recursion(u, params.summand, seed=params.input_seed)
    k = params.length
    target = q[params.target_offset: params.target_offset + k]
    return SeriesTask(
        InputSequence(u[:k]), target, split or SplitSpec.scaled(k),
        name="narma10", params=asdict(params),
    )


# --- Mackey-Glass ----------------------------------------------------------

@dataclass(frozen=True)
class MackeyGlassParams:
    """Mackey-Glass integration and sampling parameters.

    ``history_interpolation`` selects how the delayed term is read between
    fine-grid points: "hermite" (cubic, fourth-order overall) or "linear"
    (second-order overall).
    """

    mg_beta: float = 0.2
    mg_tau: float = 17.0
    mg_exponent: float = 10.0
    mg_gamma: float = 0.1
    sample_dt: float = 1.0
    substeps: int = 10
    history_value: float = 1.2
    transient_samples: int = 1000
    length: int = 21000
    horizon: int = 10
    history_interpolation: str = "hermite"

    def __post_init__(self):
        for name in ("mg_beta", "mg_tau", "mg_exponent", "mg_gamma", "sample_dt"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.substeps < 1 or self.horizon < 1 or self.length < 1 or self.transient_samples < 0:
            raise ValidationError("substeps, horizon, length must be >= 1 and transient_samples >= 0")
        if self.mg_tau < self.sample_dt / self.substeps:
            raise ValidationError("mg_tau must be at least one internal step")
        if self.history_interpolation not in ("hermite", "linear"):
            raise ValidationError("history_interpolation must be 'hermite' or 'linear'")


@njit(cache=True)
def _mg_rhs(x, xd, beta, exponent, gamma):
    return beta * xd / (1.0 + xd ** exponent) - gamma * x


@njit(cache=True)
def _mg_delayed(x, dx, pos, start, h, hermite):
    # x and dx live on the fine grid; index ``start`` is t = 0 and everything
    # before it is the constant history
    if pos <= start:
        return x[start]
    j = int(math.floor(pos))
    s = pos - j
    if s == 0.0:
        return x[j]
    if not hermite:
        return (1.0 - s) * x[j] + s * x[j + 1]
    s2 = s * s
    s3 = s2 * s
    return ((2 * s3 - 3 * s2 + 1) * x[j] + (s3 - 2 * s2 + s) * h * dx[j]
            + (-2 * s3 + 3 * s2) * x[j + 1] + (s3 - s2) * h * dx[j + 1])


@njit(cache=True)
def _mg_integrate(n_fine, h, lag, history, beta, exponent, gamma, hermite):
    start = int(math.floor(lag)) + 2
    x = np.empty(start + n_fine + 1)
    dx = np.zeros(start + n_fine + 1)
    x[: start + 1] = history
    for k in range(start, start + n_fine):
        y = x[k]
        xd0 = _mg_delayed(x, dx, k - lag, start, h, hermite)
        xdm = _mg_delayed(x, dx, k + 0.5 - lag, start, h, hermite)
        xd1 = _mg_delayed(x, dx, k + 1.0 - lag, start, h, hermite)
        k1 = _mg_rhs(y, xd0, beta, exponent, gamma)
        dx[k] = k1
        k2 = _mg_rhs(y + 0.5 * h * k1, xdm, beta, exponent, gamma)
        k3 = _mg_rhs(y + 0.5 * h * k2, xdm, beta, exponent, gamma)
        k4 = _mg_rhs(y + h * k3, xd1, beta, exponent, gamma)
        x[k + 1] = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(x[k + 1]):
            return x[start: k + 2], k + 1 - start
    return x[start:], -1


def mackey_glass_trajectory(params: MackeyGlassParams, n_samples: int) -> np.ndarray:
    """Sample x(n * sample_dt) for n = 0..n_samples-1, starting at t = 0."""
    h = params.sample_dt / params.substeps
    n_fine = (n_samples - 1) * params.substeps
    fine, failed_at = _mg_integrate(
        n_fine, h, params.mg_tau / h, float(params.history_value),
        float(params.mg_beta), float(params.mg_exponent), float(params.mg_gamma),
        params.history_interpolation == "hermite",
    )
    if failed_at >= 0:
        raise IntegrationError(f"non-finite Mackey-Glass state at t = {failed_at * h:g}")
    return fine[:: params.substeps].copy()


def generate_mackey_glass(params: MackeyGlassParams = MackeyGlassParams(),
                          split: Optional[SplitSpec] = None) -> SeriesTask:
    """Mackey-Glass series with input x(n) and target x(n + horizon)."""
    total = params.transient_samples + params.length + params.horizon
    x = mackey_glass_trajectory(params, total)[params.transient_samples:]
    k = params.length
    return SeriesTask(
        InputSequence(x[:k]), x[params.horizon: params.horizon + k],
        split or SplitSpec.scaled(k), name="mackey-glass", params=asdict(params),
    )


# --- synthetic utterances --------------------------------------------------

def _lengths(rng, count, min_len, max_len):
    if not 1 <= min_len <= max_len:
        raise ValidationError("need 1 <= min_len <= max_len")
    return rng.integers(min_len, max_len + 1, count)


def _balanced_labels(rng, count, n_classes):
    if count < n_classes:
        raise ValidationError("need at least one utterance per class")
    labels = np.arange(count) % n_classes
    rng.shuffle(labels)
    return labels


def generate_separable_utterances(n_classes: int = 3, count: int = 60, channels: int = 3,
                                  min_len: int = 8, max_len: int = 15, noise: float = 0.02,
                                  seed: int = 0) -> UtteranceDataset:
    """Each class is a fixed random channel pattern plus small noise.

    With distinct patterns and a sine reservoir the per-class states are
    distinct points, so a linear readout separates them.
    """
    if n_classes < 2 or channels < 1:
        raise ValidationError("need n_classes >= 2 and channels >= 1")
    rng = np.random.default_rng(seed)
    patterns = rng.uniform(0.0, 1.0, (n_classes, channels))
    labels = _balanced_labels(rng, count, n_classes)
    lengths = _lengths(rng, count, min_len, max_len)
    utts = []
    for i, (label, t) in enumerate(zip(labels, lengths)):
        feats = patterns[label] + noise * rng.standard_normal((t, channels))
        utts.append(Utterance(f"utt{i:04d}", int(label), feats))
    return UtteranceDataset(utts, n_classes)


def generate_temporal_context_utterances(lag: int, count: int = 120, min_len: Optional[int] = None,
                                         max_len: Optional[int] = None, noise: float = 0.05,
                                         seed: int = 0) -> UtteranceDataset:
    """Two classes that differ only in how u(n) relates to u(n - lag).

    Each utterance starts with ``lag`` random +/-1 values; afterwards
    class 0 repeats them (u(n) = u(n-lag)) and class 1 flips them
    (u(n) = -u(n-lag)). The marginal distribution of u(n) is identical for
    both classes, so only a reservoir that sees u(n) and u(n-lag) together
    can tell them apart.
    """
    if lag < 1:
        raise ValidationError("lag must be >= 1")
    min_len = min_len or 4 * lag
    max_len = max_len or 6 * lag
    rng = np.random.default_rng(seed)
    labels = _balanced_labels(rng, count, 2)
    lengths = _lengths(rng, count, min_len, max_len)
    utts = []
    for i, (label, t) in enumerate(zip(labels, lengths)):
        sign = 1.0 if label == 0 else -1.0
        u = np.empty(t)
        u[:lag] = rng.choice((-1.0, 1.0), min(lag, t))
        for n in range(lag, t):
            u[n] = sign * u[n - lag]
        u += noise * rng.standard_normal(t)
        utts.append(Utterance(f"ctx{i:04d}", int(label), u[:, None]))
    return UtteranceDataset(utts, 2)
