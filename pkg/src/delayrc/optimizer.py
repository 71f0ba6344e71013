"""Experiment drivers: (beta2, d) grid scans and feedback-attenuation sweeps.

Only the delayed branch (beta2, d) is searched in delayed-input mode; the
reservoir itself keeps the fixed preset values. The standard-no-delay mode is
the comparison baseline that instead grid-searches beta1 and the ridge
parameter with beta2 = 0.
"""

from __future__ import annotations

import bisect
import enum
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import ValidationError
from .masking import (DelayedInputSpec, InputSequence, MaskDistribution, build_drive,
                      generate_masks)
from .metrics import nmse
from .readout import (UtteranceDataset, kfold_evaluate, make_readout_pipeline, predict,
                      random_resplit_evaluate, train_ridge)
from .reservoir import Nonlinearity, ReservoirParams, run
from .tasks import SeriesTask, apply_split

logger = logging.getLogger(__name__)

DEFAULT_BETA2_GRID = tuple(0.25 * i for i in range(13))
DEFAULT_D_GRID = tuple(range(26))
DEFAULT_BETA1_FACTORS = (0.1, 0.3, 1.0, 3.0, 10.0)
DEFAULT_LAMBDA_GRID = (1e-7, 1e-5, 1e-3, 1e-1)


# --- presets ---------------------------------------------------------------

@dataclass(frozen=True)
class TaskPreset:
    """Fixed input scaling and reservoir settings for one task.

    ``attenuations_db`` lists the feedback attenuations the task is run at;
    the first entry is the default operating point.
    """

    name: str
    beta1: float
    bias_j0: float
    attenuations_db: tuple[float, ...]
    ridge_lambda: float
    n_nodes: int

    @property
    def attenuation_db(self) -> float:
        return self.attenuations_db[0]


PRESETS = {
    "narma10": TaskPreset("narma10", 1.8, 0.4, (2.0, 15.0), 1e-5, 50),
    "mackey-glass": TaskPreset("mackey-glass", 1.0, 0.0, (2.0, 15.0), 1e-5, 50),
    "spoken-digits": TaskPreset("spoken-digits", 10.0, 0.0, (2.0,), 1e-5, 100),
    "speakers": TaskPreset("speakers", 0.3, 0.8, (2.0,), 1e-5, 100),
}


def get_preset(name: str) -> TaskPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}") from None


# --- attenuation -> alpha --------------------------------------------------

class AlphaLookup(NamedTuple):
    alpha: float
    interpolated: bool


@dataclass(frozen=True)
class AttenuationMap:
    """Anchor table from optical attenuation (dB) to feedback strength alpha.

    Between anchors alpha is interpolated linearly in (dB, log alpha).
    """

    anchors: tuple[tuple[float, float], ...] = ((2.0, 0.15), (15.0, 1e-4))

    def __post_init__(self):
        anchors = tuple(sorted((float(db), float(a)) for db, a in self.anchors))
        if not anchors:
            raise ValidationError("attenuation map needs at least one anchor")
        if any(a <= 0 for _, a in anchors):
            raise ValidationError("anchor alphas must be positive for log interpolation")
        if len({db for db, _ in anchors}) != len(anchors):
            raise ValidationError("duplicate attenuation anchors")
        object.__setattr__(self, "anchors", anchors)

    def lookup(self, db: float, extrapolate: bool = False) -> AlphaLookup:
        dbs = [a[0] for a in self.anchors]
        for anchor_db, alpha in self.anchors:
            if db == anchor_db:
                return AlphaLookup(alpha, False)
        if len(self.anchors) < 2 or (not extrapolate and not dbs[0] < db < dbs[-1]):
            known = ", ".join(f"{d:g} dB" for d in dbs)
            raise ValidationError(
                f"attenuation {db:g} dB is not covered by the anchors ({known}); "
                "pass extrapolate=True or set alpha directly"
            )
        i = min(max(bisect.bisect_left(dbs, db), 1), len(dbs) - 1)
        (d0, a0), (d1, a1) = self.anchors[i - 1], self.anchors[i]
        w = (db - d0) / (d1 - d0)
        return AlphaLookup(math.exp((1 - w) * math.log(a0) + w * math.log(a1)), True)


DEFAULT_ATTENUATION_MAP = AttenuationMap()


def map_attenuation(db: float, amap: AttenuationMap = DEFAULT_ATTENUATION_MAP,
                    extrapolate: bool = False) -> AlphaLookup:
    return amap.lookup(db, extrapolate)


# --- objectives ------------------------------------------------------------

class SeriesObjective:
    """Test-window NMSE of a ridge readout trained on the train window."""

    metric = "nmse"

    def __init__(self, task: SeriesTask, bias: bool = False):
        self.task = task
        self.bias = bias
        self.train, self.test = apply_split(task)

    @property
    def inputs(self) -> InputSequence:
        return self.task.input

    @property
    def name(self) -> str:
        return self.task.name

    def score(self, states: np.ndarray, ridge_lambda: float) -> float:
        tr = slice(self.train.start, self.train.stop)
        te = slice(self.test.start, self.test.stop)
        readout = train_ridge(states[tr], self.task.target[tr], ridge_lambda, self.bias)
        return nmse(predict(readout, states[te])[:, 0], self.task.target[te])


class ClassificationObjective:
    """Mean winner-takes-all error rate under k-fold or random resplits."""

    metric = "error_rate"

    def __init__(self, dataset: UtteranceDataset, protocol: str = "kfold", k: int = 10,
                 train_count: Optional[int] = None, repeats: int = 10, seed: int = 0,
                 name: str = "utterances", bias: bool = False):
        if protocol not in ("kfold", "resplit"):
            raise ValidationError(f"protocol must be 'kfold' or 'resplit', got {protocol!r}")
        if protocol == "resplit" and train_count is None:
            raise ValidationError("resplit protocol needs train_count")
        self.dataset = dataset
        self.protocol = protocol
        self.k = k
        self.train_count = train_count
        self.repeats = repeats
        self.seed = seed
        self.name = name
        self.bias = bias
        self._inputs = InputSequence(dataset.concatenate())

    @property
    def inputs(self) -> InputSequence:
        return self._inputs

    def score(self, states: np.ndarray, ridge_lambda: float) -> float:
        pipeline = make_readout_pipeline(self.dataset, states, ridge_lambda, self.bias)
        if self.protocol == "kfold":
            summary = kfold_evaluate(self.dataset, self.k, pipeline)
        else:
            summary = random_resplit_evaluate(self.dataset, self.train_count, self.repeats,
                                              self.seed, pipeline)
        return summary.mean


Objective = Union[SeriesObjective, ClassificationObjective]


# --- grid scan -------------------------------------------------------------

def cell_seed(experiment_seed: int, beta2: float, d: int, mask_seed: int) -> int:
    """Per-cell seed keyed on grid *values*, so extending a grid leaves old cells alone."""
    bits = int(np.float64(beta2).view(np.uint64))
    key = [int(experiment_seed), bits >> 32, bits & 0xFFFFFFFF, int(d), int(mask_seed)]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


class BestCell(NamedTuple):
    beta2: float
    d: int
    metric: float


@dataclass
class GridResult:
    """Metric surface over (beta2, d).

    ``surface[i, j]`` is the metric at ``beta2_values[i]``, ``d_values[j]``,
    averaged over mask seeds; ``per_seed[s]`` holds the individual surfaces.
    """

    beta2_values: np.ndarray
    d_values: np.ndarray
    surface: np.ndarray
    per_seed: np.ndarray
    mask_seeds: tuple
    cell_seeds: np.ndarray
    metric: str
    alpha: float
    preset: TaskPreset
    timings: np.ndarray = field(default=None, repr=False)

    @property
    def best_cell(self) -> BestCell:
        # ties -> smallest d, then smallest beta2
        best = None
        for j in np.argsort(self.d_values, kind="stable"):
            for i in np.argsort(self.beta2_values, kind="stable"):
                v = self.surface[i, j]
                v = v if np.isfinite(v) else math.inf
                if best is None or v < best[2]:
                    best = (i, j, v)
        i, j, v = best
        return BestCell(float(self.beta2_values[i]), int(self.d_values[j]), float(v))

    def baseline(self) -> float:
        """Metric of the beta2 = 0 row (constant in d)."""
        i = int(np.flatnonzero(self.beta2_values == 0)[0])
        return float(self.surface[i, 0])


def _check_grids(beta2_grid, d_grid):
    beta2 = np.asarray(beta2_grid, dtype=float)
    d = np.asarray(d_grid)
    if beta2.size == 0 or d.size == 0:
        raise ValidationError("beta2 and d grids must be non-empty")
    if np.any(beta2 < 0) or not np.all(np.isfinite(beta2)):
        raise ValidationError("beta2 grid values must be finite and >= 0")
    if not np.any(beta2 == 0):
        raise ValidationError("beta2 grid must contain 0 (the no-delay baseline)")
    if not np.issubdtype(d.dtype, np.integer) or np.any(d < 0):
        raise ValidationError("d grid must hold non-negative integers")
    return beta2, d.astype(int)


def _map(fn, items, parallelism):
    if parallelism and parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _resolve_alpha(preset: TaskPreset, alpha: Optional[float], amap: AttenuationMap) -> float:
    return float(alpha) if alpha is not None else amap.lookup(preset.attenuation_db).alpha


def scan_beta2_delay(objective: Objective, preset: TaskPreset, beta2_grid=DEFAULT_BETA2_GRID,
                     d_grid=DEFAULT_D_GRID, seeds: Sequence[int] = (0,), *,
                     alpha: Optional[float] = None,
                     attenuation_map: AttenuationMap = DEFAULT_ATTENUATION_MAP,
                     nonlinearity=Nonlinearity.SINE,
                     mask_distribution=MaskDistribution.UNIFORM01,
                     experiment_seed: int = 0, seeded_initial_state: bool = False,
                     parallelism: int = 1) -> GridResult:
    """Evaluate the objective on every (beta2, d) cell.

    All cells share the task data and, per mask seed, the same mask pair;
    only beta2 and d change. ``alpha`` overrides the preset's attenuation.
    With ``seeded_initial_state`` each cell starts from a random state drawn
    from its cell seed instead of zeros.
    """
    beta2, d = _check_grids(beta2_grid, d_grid)
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise ValidationError("need at least one mask seed")
    alpha = _resolve_alpha(preset, alpha, attenuation_map)
    inputs = objective.inputs
    masks = {s: generate_masks(preset.n_nodes, inputs.channels, s, mask_distribution) for s in seeds}
    seed_grid = np.array([[[cell_seed(experiment_seed, b, dd, s) for s in seeds] for dd in d]
                          for b in beta2], dtype=np.int64)

    def evaluate(cell):
        i, j = cell
        t0 = time.perf_counter()
        values = []
        for k, s in enumerate(seeds):
            spec = DelayedInputSpec(preset.beta1, float(beta2[i]), int(d[j]), preset.bias_j0, masks[s])
            params = ReservoirParams(preset.n_nodes, alpha, nonlinearity,
                                     int(seed_grid[i, j, k]) if seeded_initial_state else None)
            states = run(build_drive(inputs, spec), params).data
            values.append(objective.score(states, preset.ridge_lambda))
        return values, time.perf_counter() - t0

    cells = [(i, j) for i in range(beta2.size) for j in range(d.size)]
    outcomes = _map(evaluate, cells, parallelism)
    per_seed = np.empty((len(seeds), beta2.size, d.size))
    timings = np.empty((beta2.size, d.size))
    for (i, j), (values, dt) in zip(cells, outcomes):
        per_seed[:, i, j] = values
        timings[i, j] = dt
    return GridResult(beta2, d, per_seed.mean(axis=0), per_seed, seeds, seed_grid,
                      objective.metric, alpha, preset, timings)


# --- attenuation sweep -----------------------------------------------------

class Mode(str, enum.Enum):
    DELAYED_INPUT = "delayed-input"
    STANDARD_NO_DELAY = "standard-no-delay"


@dataclass(frozen=True)
class SweepPoint:
    attenuation_db: float
    alpha: float
    interpolated: bool
    metric: float
    params: dict


@dataclass
class SweepCurve:
    mode: Mode
    metric: str
    points: list
    scans: list = field(default_factory=list, repr=False)

    @property
    def metrics(self) -> np.ndarray:
        return np.array([p.metric for p in self.points])


def _standard_point(objective, preset, alpha, seeds, beta1_factors, lambda_grid, nonlinearity,
                    mask_distribution, parallelism):
    inputs = objective.inputs
    masks = {s: generate_masks(preset.n_nodes, inputs.channels, s, mask_distribution) for s in seeds}
    params = ReservoirParams(preset.n_nodes, alpha, nonlinearity)

    def evaluate(factor):
        rows = []
        for s in seeds:
            spec = DelayedInputSpec(preset.beta1 * factor, 0.0, 0, preset.bias_j0, masks[s])
            states = run(build_drive(inputs, spec), params).data
            rows.append([objective.score(states, lam) for lam in lambda_grid])
        return np.mean(rows, axis=0)

    table = np.array(_map(evaluate, list(beta1_factors), parallelism))
    best = None
    for a in range(table.shape[0]):
        for b in range(table.shape[1]):
            v = table[a, b] if np.isfinite(table[a, b]) else math.inf
            if best is None or v < best[2]:
                best = (a, b, v)
    a, b, v = best
    return v, {"beta1": preset.beta1 * beta1_factors[a], "bias_j0": preset.bias_j0,
               "ridge_lambda": float(lambda_grid[b]), "beta2": 0.0, "d": 0}


def sweep_attenuation(objective: Objective, preset: TaskPreset, mode, attenuation_grid_db, *,
                      attenuation_map: AttenuationMap = DEFAULT_ATTENUATION_MAP,
                      beta2_grid=DEFAULT_BETA2_GRID, d_grid=DEFAULT_D_GRID,
                      seeds: Sequence[int] = (0,), beta1_factors=DEFAULT_BETA1_FACTORS,
                      lambda_grid=DEFAULT_LAMBDA_GRID, nonlinearity=Nonlinearity.SINE,
                      mask_distribution=MaskDistribution.UNIFORM01, experiment_seed: int = 0,
                      parallelism: int = 1) -> SweepCurve:
    """Best achievable metric at each feedback attenuation.

    Delayed-input mode keeps the preset's beta1, J0 and lambda and scans
    (beta2, d). Standard-no-delay mode fixes beta2 = 0 and grid-searches
    beta1 (as multiples of the preset value) and lambda.
    """
    mode = Mode(mode)
    grid = [float(db) for db in attenuation_grid_db]
    if not grid:
        raise ValidationError("attenuation grid is empty")
    lookups = [attenuation_map.lookup(db) for db in grid]
    seeds = tuple(int(s) for s in seeds)
    if mode is Mode.STANDARD_NO_DELAY and (not len(beta1_factors) or not len(lambda_grid)):
        raise ValidationError("standard mode needs non-empty beta1_factors and lambda_grid")
    points, scans = [], []
    for db, lk in zip(grid, lookups):
        if mode is Mode.DELAYED_INPUT:
            res = scan_beta2_delay(objective, preset, beta2_grid, d_grid, seeds, alpha=lk.alpha,
                                   nonlinearity=nonlinearity, mask_distribution=mask_distribution,
                                   experiment_seed=experiment_seed, parallelism=parallelism)
            scans.append(res)
            best = res.best_cell
            metric = best.metric
            params = {"beta1": preset.beta1, "bias_j0": preset.bias_j0,
                      "ridge_lambda": preset.ridge_lambda, "beta2": best.beta2, "d": best.d}
        else:
            metric, params = _standard_point(objective, preset, lk.alpha, seeds, beta1_factors,
                                             lambda_grid, nonlinearity, mask_distribution,
                                             parallelism)
        logger.info("%s @ %g dB (alpha=%.3g): %s=%.4g", mode.value, db, lk.alpha,
                    objective.metric, metric)
        points.append(SweepPoint(db, lk.alpha, lk.interpolated, float(metric), params))
    return SweepCurve(mode, objective.metric, points, scans)


def with_overrides(preset: TaskPreset, **overrides) -> TaskPreset:
    """Copy of ``preset`` with the non-None overrides applied."""
    clean = {k: v for k, v in overrides.items() if v is not None}
    if "attenuation_db" in clean:
        clean["attenuations_db"] = (float(clean.pop("attenuation_db")),)
    return replace(preset, **clean)
