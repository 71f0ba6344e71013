import math

import numpy as np
import pytest

from delayrc import (AttenuationMap, Mode, Narma10Params, PRESETS, SeriesObjective, TaskPreset,
                     ValidationError, generate_narma10, map_attenuation, scan_beta2_delay,
                     sweep_attenuation)
from delayrc.optimizer import GridResult, cell_seed, get_preset, with_overrides

SMALL = TaskPreset("small", 1.8, 0.4, (2.0,), 1e-5, 12)


@pytest.fixture(scope="module")
def objective():
    return SeriesObjective(generate_narma10(Narma10Params(length=800, input_seed=4)))


# --- attenuation map ---------------------------------------------------------

def test_anchor_values_are_exact():
    assert map_attenuation(2.0) == (0.15, False)
    assert map_attenuation(15.0) == (1e-4, False)


def test_midpoint_is_geometric_mean():
    lk = map_attenuation(8.5)
    assert lk.interpolated
    assert lk.alpha == pytest.approx(math.sqrt(0.15 * 1e-4), rel=1e-12)
    assert lk.alpha == pytest.approx(3.873e-3, rel=1e-3)


def test_map_is_monotone_between_anchors():
    alphas = [map_attenuation(db).alpha for db in np.linspace(2, 15, 27)]
    assert all(a > b for a, b in zip(alphas, alphas[1:]))


def test_out_of_range_attenuation():
    with pytest.raises(ValidationError, match="2 dB, 15 dB"):
        map_attenuation(20.0)
    lk = map_attenuation(20.0, extrapolate=True)
    assert lk.interpolated and lk.alpha < 1e-4
    with pytest.raises(ValidationError):
        AttenuationMap(((1.0, 0.0), (2.0, 0.1)))


# --- presets -----------------------------------------------------------------

def test_preset_values():
    n = get_preset("narma10")
    assert (n.beta1, n.bias_j0, n.attenuations_db, n.ridge_lambda) == (1.8, 0.4, (2.0, 15.0), 1e-5)
    m = get_preset("mackey-glass")
    assert (m.beta1, m.bias_j0) == (1.0, 0.0)
    assert (PRESETS["spoken-digits"].beta1, PRESETS["spoken-digits"].bias_j0) == (10.0, 0.0)
    assert (PRESETS["speakers"].beta1, PRESETS["speakers"].bias_j0) == (0.3, 0.8)
    with pytest.raises(ValidationError):
        get_preset("nope")


def test_with_overrides():
    p = with_overrides(SMALL, beta1=None, attenuation_db=15, n_nodes=7)
    assert p.beta1 == SMALL.beta1 and p.attenuations_db == (15.0,) and p.n_nodes == 7


# --- scans -------------------------------------------------------------------

def test_cell_seed_is_value_keyed():
    seeds = {cell_seed(0, b, d, s) for b in (0.0, 0.25, 0.5, 0.75) for d in range(5) for s in (0, 1)}
    assert len(seeds) == 40
    assert cell_seed(3, 0.5, 2, 1) == cell_seed(3, 0.5, 2, 1)


def test_baseline_row_is_constant_in_d(objective):
    res = scan_beta2_delay(objective, SMALL, [0.0], range(6))
    assert res.surface.shape == (1, 6)
    assert np.all(res.surface == res.surface[0, 0])


def test_duplicate_cells_are_identical(objective):
    res = scan_beta2_delay(objective, SMALL, [0.0, 0.5, 0.5], [3, 3, 4], seeds=(0, 1))
    assert res.surface[1, 0] == res.surface[2, 1]
    np.testing.assert_array_equal(res.per_seed[:, 1, :], res.per_seed[:, 2, :])
    np.testing.assert_array_equal(res.surface, res.per_seed.mean(axis=0))


def test_best_cell_is_minimum(objective):
    res = scan_beta2_delay(objective, SMALL, [0.0, 0.5, 1.0], range(0, 12, 2))
    best = res.best_cell
    assert best.metric == res.surface.min()
    assert np.all(best.metric <= res.surface)
    assert best.metric <= res.baseline()


def test_best_cell_tie_breaking():
    surface = np.array([[1.0, 1.0, 1.0], [0.5, 0.2, 0.2], [0.2, 0.9, 0.2]])
    res = GridResult(np.array([0.0, 0.5, 1.0]), np.array([0, 1, 2]), surface, surface[None],
                     (0,), None, "nmse", 0.1, SMALL)
    assert res.best_cell == (1.0, 0, 0.2)
    surface = np.array([[1.0, 1.0], [0.3, np.nan], [0.3, 0.4]])
    res = GridResult(np.array([0.0, 0.7, 0.2]), np.array([5, 1]), surface, surface[None],
                     (0,), None, "nmse", 0.1, SMALL)
    assert res.best_cell == (0.2, 5, 0.3)


def test_evaluation_order_invariance(objective):
    a = scan_beta2_delay(objective, SMALL, [0.0, 0.5, 1.0], [2, 5, 9], seeds=(0, 1))
    b = scan_beta2_delay(objective, SMALL, [1.0, 0.0, 0.5], [9, 2, 5], seeds=(0, 1), parallelism=3)
    perm_b, perm_d = [1, 2, 0], [1, 2, 0]
    np.testing.assert_array_equal(a.surface, b.surface[np.ix_(perm_b, perm_d)])
    np.testing.assert_array_equal(a.cell_seeds, b.cell_seeds[np.ix_(perm_b, perm_d)])


def test_seeded_initial_state_is_reproducible(objective):
    kw = dict(seeded_initial_state=True, experiment_seed=7)
    a = scan_beta2_delay(objective, SMALL, [0.0, 1.0], [3], **kw)
    b = scan_beta2_delay(objective, SMALL, [0.0, 1.0], [3], **kw)
    np.testing.assert_array_equal(a.surface, b.surface)


def test_grid_validation(objective):
    with pytest.raises(ValidationError):
        scan_beta2_delay(objective, SMALL, [], [1])
    with pytest.raises(ValidationError):
        scan_beta2_delay(objective, SMALL, [0.0], [])
    with pytest.raises(ValidationError):
        scan_beta2_delay(objective, SMALL, [0.5, 1.0], [1])
    with pytest.raises(ValidationError):
        scan_beta2_delay(objective, SMALL, [0.0], [-1])
    with pytest.raises(ValidationError):
        scan_beta2_delay(objective, SMALL, [0.0], [1], seeds=())


# --- sweeps ------------------------------------------------------------------

def test_delayed_sweep_matches_scan(objective):
    beta2, d = [0.0, 0.5], [0, 4, 9]
    curve = sweep_attenuation(objective, SMALL, Mode.DELAYED_INPUT, [2.0, 8.5],
                              beta2_grid=beta2, d_grid=d)
    scan = scan_beta2_delay(objective, SMALL, beta2, d, alpha=0.15)
    assert curve.points[0].metric == scan.best_cell.metric
    assert curve.points[0].params["d"] == scan.best_cell.d
    assert not curve.points[0].interpolated and curve.points[1].interpolated


def test_standard_sweep_searches_scaling(objective):
    curve = sweep_attenuation(objective, SMALL, "standard-no-delay", [2.0],
                              beta1_factors=(1.0,), lambda_grid=(1e-5,))
    scan = scan_beta2_delay(objective, SMALL, [0.0], [0], alpha=0.15)
    assert curve.points[0].metric == scan.baseline()
    wider = sweep_attenuation(objective, SMALL, "standard-no-delay", [2.0],
                              beta1_factors=(0.3, 1.0, 3.0), lambda_grid=(1e-7, 1e-5, 1e-3))
    assert wider.points[0].metric <= curve.points[0].metric
    p = wider.points[0].params
    assert p["beta2"] == 0.0 and p["bias_j0"] == SMALL.bias_j0


def test_sweep_errors(objective):
    with pytest.raises(ValidationError):
        sweep_attenuation(objective, SMALL, Mode.DELAYED_INPUT, [])
    with pytest.raises(ValidationError):
        sweep_attenuation(objective, SMALL, Mode.DELAYED_INPUT, [30.0])
    with pytest.raises(ValueError):
        sweep_attenuation(objective, SMALL, "bogus", [2.0])
