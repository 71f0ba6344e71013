"""Discrete-time ring reservoir (time-multiplexed single nonlinear node).

Virtual node ``i`` is driven by its ring predecessor ``i-1`` one step back;
node 0 closes the ring by reading node ``N-1`` *two* steps back, which is why
the state carries a ``previous`` vector alongside ``current``::

    x_0(n+1) = f(alpha * x_{N-1}(n-1) + J_0(n+1))
    x_i(n+1) = f(alpha * x_{i-1}(n)   + J_i(n+1))     i = 1..N-1
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .errors import ValidationError

logger = logging.getLogger(__name__)


class Nonlinearity(str, enum.Enum):
    SINE = "sine"
    TANH = "tanh"
    IDENTITY = "identity"

    @property
    def code(self) -> int:
        return _NONLINEARITY_CODES[self]

    def __call__(self, v):
        if self is Nonlinearity.SINE:
            return np.sin(v)
        if self is Nonlinearity.TANH:
            return np.tanh(v)
        return np.asarray(v, dtype=float).copy()


_NONLINEARITY_CODES = {Nonlinearity.SINE: 0, Nonlinearity.TANH: 1, Nonlinearity.IDENTITY: 2}


@dataclass(frozen=True)
class ReservoirParams:
    """Fixed reservoir hyperparameters.

    Attributes:
        n_nodes: Number of virtual nodes N.
        feedback_alpha: Ring coupling strength. Values above 1 are accepted
            but the reservoir is then not guaranteed to be contractive.
        nonlinearity: Node activation; sine models the Mach-Zehnder
            modulator response.
        initial_seed: None starts from the all-zero state. An integer draws
            both ``current`` and ``previous`` uniformly from [-1, 1] with that
            seed (used for echo-state tests).
    """

    n_nodes: int
    feedback_alpha: float
    nonlinearity: Nonlinearity = Nonlinearity.SINE
    initial_seed: Optional[int] = None

    def __post_init__(self):
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 1:
            raise ValidationError(f"n_nodes must be a positive integer, got {self.n_nodes!r}")
        if not np.isfinite(self.feedback_alpha) or self.feedback_alpha < 0:
            raise ValidationError(f"feedback_alpha must be finite and >= 0, got {self.feedback_alpha!r}")
        object.__setattr__(self, "nonlinearity", Nonlinearity(self.nonlinearity))
        if self.feedback_alpha > 1:
            logger.warning(
                "feedback_alpha=%g > 1: reservoir is not guaranteed to be contractive",
                self.feedback_alpha,
            )

    @property
    def is_contractive(self) -> bool:
        # all three activations are 1-Lipschitz
        return self.feedback_alpha < 1


@dataclass(frozen=True)
class ReservoirState:
    current: np.ndarray
    previous: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        cur = np.asarray(self.current, dtype=float)
        prev = np.asarray(self.previous, dtype=float)
        if cur.ndim != 1 or cur.shape != prev.shape:
            raise ValidationError(
                f"current and previous must be 1-D of equal length, got {cur.shape} and {prev.shape}"
            )
        object.__setattr__(self, "current", cur)
        object.__setattr__(self, "previous", prev)

    @classmethod
    def initial(cls, params: ReservoirParams) -> "ReservoirState":
        n = params.n_nodes
        if params.initial_seed is None:
            return cls(np.zeros(n), np.zeros(n), 0)
        rng = np.random.default_rng(params.initial_seed)
        current = rng.uniform(-1.0, 1.0, n)
        previous = rng.uniform(-1.0, 1.0, n)
        return cls(current, previous, 0)


@dataclass(frozen=True)
class StateMatrix:
    """Retained reservoir states, one row per timestep (timesteps x N).

    ``timestep_offset`` is the index in the driving sequence of row 0.
    """

    data: np.ndarray
    timestep_offset: int

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def step(state: ReservoirState, drive, params: ReservoirParams) -> ReservoirState:
    """Advance the reservoir by one timestep."""
    drive = np.asarray(drive, dtype=float)
    n = params.n_nodes
    if drive.shape != (n,):
        raise ValidationError(f"drive must have shape ({n},), got {drive.shape}")
    if state.current.shape != (n,):
        raise ValidationError(f"state has {state.current.shape[0]} nodes, params say {n}")
    alpha = params.feedback_alpha
    pre = np.empty(n)
    pre[0] = alpha * state.previous[n - 1] + drive[0]
    pre[1:] = alpha * state.current[:-1] + drive[1:]
    return ReservoirState(params.nonlinearity(pre), state.current, state.step_index + 1)


@njit(cache=True, nogil=True)
def _ring_kernel(drive, alpha, kind, current, previous, washout):
    k, n = drive.shape
    out = np.empty((k - washout, n))
    cur = current.copy()
    prev = previous.copy()
    new = np.empty(n)
    for t in range(k):
        new[0] = alpha * prev[n - 1] + drive[t, 0]
        for i in range(1, n):
            new[i] = alpha * cur[i - 1] + drive[t, i]
        if kind == 0:
            for i in range(n):
                new[i] = np.sin(new[i])
        elif kind == 1:
            for i in range(n):
                new[i] = np.tanh(new[i])
        # rotate buffers: prev <- cur <- new
        tmp = prev
        prev = cur
        cur = new
        new = tmp
        if t >= washout:
            out[t - washout, :] = cur
    return out


def run(drive_sequence, params: ReservoirParams, washout: int = 0,
        state: Optional[ReservoirState] = None) -> StateMatrix:
    """Drive the reservoir with a K x N sequence and collect its states.

    Args:
        drive_sequence: Array of shape (K, N); row n is the drive J(n).
        params: Reservoir hyperparameters.
        washout: Number of leading states to discard.
        state: Starting state; defaults to ``ReservoirState.initial(params)``.

    Returns:
        StateMatrix with K - washout rows.
    """
    drive = np.ascontiguousarray(drive_sequence, dtype=float)
    if drive.ndim != 2 or drive.shape[0] == 0:
        raise ValidationError("drive_sequence must be a non-empty (K, N) array")
    if drive.shape[1] != params.n_nodes:
        raise ValidationError(
            f"drive has {drive.shape[1]} columns, reservoir has {params.n_nodes} nodes"
        )
    if washout < 0 or washout >= drive.shape[0]:
        raise ValidationError(
            f"washout must be in [0, {drive.shape[0]}), got {washout}"
        )
    if state is None:
        state = ReservoirState.initial(params)
    data = _ring_kernel(drive, float(params.feedback_alpha), params.nonlinearity.code,
                        state.current, state.previous, int(washout))
    return StateMatrix(data, int(washout))
