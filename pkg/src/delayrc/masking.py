"""Input masks and the two-branch delayed-input drive.

The drive fed to every virtual node is::

    J(n) = beta1 * M1 u(n) + beta2 * M2 u(n - d) + J0

with masks constant in time (N x C) and ``u(n - d) = 0`` before the series
starts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError


class MaskDistribution(str, enum.Enum):
    UNIFORM01 = "uniform01"
    UNIFORM_SYM = "uniform_sym"

    @property
    def bounds(self) -> tuple[float, float]:
        return (0.0, 1.0) if self is MaskDistribution.UNIFORM01 else (-1.0, 1.0)


@dataclass(frozen=True)
class MaskPair:
    m1: np.ndarray
    m2: np.ndarray
    seed: int
    distribution: MaskDistribution = MaskDistribution.UNIFORM01

    @property
    def n_nodes(self) -> int:
        return self.m1.shape[0]

    @property
    def channels(self) -> int:
        return self.m1.shape[1]


@dataclass(frozen=True)
class InputSequence:
    """K timesteps of C-channel input."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] == 0:
            raise ValidationError(f"input must be a non-empty (K, C) array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValidationError("input contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def timesteps(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class DelayedInputSpec:
    beta1: float
    beta2: float
    delay_d: int
    bias_j0: float
    masks: MaskPair

    def __post_init__(self):
        if self.beta1 < 0 or self.beta2 < 0:
            raise ValidationError("beta1 and beta2 must be >= 0")
        if int(self.delay_d) != self.delay_d or self.delay_d < 0:
            raise ValidationError(f"delay_d must be a non-negative integer, got {self.delay_d!r}")

    def with_delay(self, beta2: float, delay_d: int) -> "DelayedInputSpec":
        return replace(self, beta2=beta2, delay_d=delay_d)


def generate_masks(n_nodes: int, channels: int, seed: int,
                   distribution=MaskDistribution.UNIFORM01) -> MaskPair:
    """Draw the (M1, M2) pair for a reservoir of ``n_nodes`` and ``channels`` inputs.

    M1 and M2 come from two independent child streams of ``seed`` so each
    mask is reproducible on its own.
    """
    if n_nodes < 1 or channels < 1:
        raise ValidationError(f"mask dimensions must be >= 1, got ({n_nodes}, {channels})")
    distribution = MaskDistribution(distribution)
    lo, hi = distribution.bounds
    s1, s2 = np.random.SeedSequence(seed).spawn(2)
    m1 = np.random.default_rng(s1).uniform(lo, hi, (n_nodes, channels))
    m2 = np.random.default_rng(s2).uniform(lo, hi, (n_nodes, channels))
    return MaskPair(m1, m2, seed, distribution)


def _as_input(data) -> InputSequence:
    return data if isinstance(data, InputSequence) else InputSequence(data)


def delayed(u: np.ndarray, d: int) -> np.ndarray:
    """Shift rows of ``u`` down by ``d``, zero-filling the first ``d`` rows."""
    out = np.zeros_like(u)
    if d < u.shape[0]:
        out[d:] = u[: u.shape[0] - d]
    return out


def build_drive(inputs, spec: DelayedInputSpec) -> np.ndarray:
    """Return the K x N drive sequence for ``inputs`` under ``spec``."""
    seq = _as_input(inputs)
    masks = spec.masks
    if seq.channels != masks.channels:
        raise ValidationError(
            f"input has {seq.channels} channels but masks expect {masks.channels}"
        )
    u = seq.data
    drive = spec.beta1 * (u @ masks.m1.T)
    if spec.beta2 != 0:
        drive += spec.beta2 * (delayed(u, spec.delay_d) @ masks.m2.T)
    drive += spec.bias_j0
    return drive


def calibrate_input_range(inputs, masks: MaskPair, target_lo: float = 0.2,
                          target_hi: float = 1.4) -> tuple[float, float]:
    """Find (beta1, J0) mapping the undelayed drive onto [target_lo, target_hi].

    The map is affine in the empirical extrema of ``M1 u(n)`` taken over all
    timesteps and all nodes (one global range, not per channel).
    """
    seq = _as_input(inputs)
    if not target_lo < target_hi:
        raise ValidationError(f"need target_lo < target_hi, got ({target_lo}, {target_hi})")
    if seq.channels != masks.channels:
        raise ValidationError(
            f"input has {seq.channels} channels but masks expect {masks.channels}"
        )
    masked = seq.data @ masks.m1.T
    lo, hi = float(masked.min()), float(masked.max())
    if not hi > lo:
        raise ValidationError("masked input is constant; cannot calibrate its range")
    beta1 = (target_hi - target_lo) / (hi - lo)
    bias = target_lo - beta1 * lo
    return beta1, bias
