import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delayrc import (SingularSystemError, TrainedReadout, Utterance, UtteranceDataset,
                     ValidationError, kfold_evaluate, make_classification_targets,
                     make_readout_pipeline, predict, random_resplit_evaluate, train_ridge,
                     winner_takes_all)
from delayrc.readout import kfold_indices, resplit_indices
from oracles import lstsq_qr_oracle


def normal_residual(x, y, readout):
    w_t = readout.weights.T
    r = x.T @ (x @ w_t - y[:, None] if y.ndim == 1 else x @ w_t - y) + readout.ridge_lambda * w_t
    return np.linalg.norm(r) / np.linalg.norm(x.T @ y)


def test_identity_design():
    y = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(train_ridge(np.eye(3), y, 0.0).weights, [y])
    np.testing.assert_allclose(train_ridge(np.eye(3), y, 1.0).weights, [y / 2])


@pytest.mark.parametrize("lam", [1e-5, 1e-2, 1.0])
def test_normal_equation_residual(lam):
    rng = np.random.default_rng(int(lam * 1e5))
    x = rng.normal(size=(200, 50))
    y = rng.normal(size=200)
    assert normal_residual(x, y, train_ridge(x, y, lam)) <= 1e-8


def test_rank_deficient_without_regularisation():
    x = np.random.default_rng(0).normal(size=(20, 3))
    x = np.hstack([x, x[:, :1]])
    with pytest.raises(SingularSystemError):
        train_ridge(x, np.ones(20), 0.0)
    train_ridge(x, np.ones(20), 1e-6)


def test_shape_errors():
    with pytest.raises(ValidationError):
        train_ridge(np.ones((5, 2)), np.ones(4), 1.0)
    with pytest.raises(ValidationError):
        train_ridge(np.ones((5, 2)), np.ones(5), -1.0)
    with pytest.raises(ValidationError):
        predict(TrainedReadout(np.ones((1, 3)), 0.0), np.ones((4, 2)))


def test_predict_basics():
    s = np.random.default_rng(2).normal(size=(10, 4))
    assert np.all(predict(TrainedReadout(np.zeros((1, 4)), 0.0), s) == 0)
    np.testing.assert_array_equal(predict(TrainedReadout(np.eye(4)[2:3], 0.0), s)[:, 0], s[:, 2])


def test_fit_matches_qr_least_squares():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(300, 20))
    y = x @ rng.normal(size=20) + 0.1 * rng.normal(size=300)
    ours = predict(train_ridge(x, y, 1e-14), x)[:, 0] - y
    ref = x @ lstsq_qr_oracle(x, y) - y
    np.testing.assert_allclose(ours, ref, atol=1e-8)


def test_bias_column():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(100, 3))
    y = x @ [1.0, 2.0, -1.0] + 5.0
    r = train_ridge(x, y, 1e-10, bias=True)
    assert r.n_features == 3
    np.testing.assert_allclose(predict(r, x)[:, 0], y, atol=1e-6)


def test_monotone_shrinkage():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(80, 10))
    y = rng.normal(size=80)
    norms = [np.linalg.norm(train_ridge(x, y, lam).weights) for lam in (1e-5, 1e-2, 1, 10, 100)]
    assert all(a >= b for a, b in zip(norms, norms[1:]))


# --- classification ----------------------------------------------------------

def test_classification_targets():
    ds = UtteranceDataset([Utterance("a", 2, np.zeros((2, 1)))], 3)
    np.testing.assert_array_equal(make_classification_targets(ds, 2), [[-1, -1, 1], [-1, -1, 1]])
    ds = UtteranceDataset([Utterance(str(i), i % 4, np.zeros((i + 1, 2))) for i in range(9)], 4)
    t = make_classification_targets(ds, ds.total_length)
    assert t.shape[0] == sum(i + 1 for i in range(9))
    np.testing.assert_array_equal(t.sum(axis=1), 2 - 4)
    with pytest.raises(ValidationError):
        make_classification_targets(ds, ds.total_length + 1)


def test_dataset_validation():
    with pytest.raises(ValidationError):
        UtteranceDataset([Utterance("a", 3, np.zeros((2, 1)))], 3)
    with pytest.raises(ValidationError):
        UtteranceDataset([Utterance("a", 0, np.zeros((2, 1))), Utterance("b", 0, np.zeros((2, 2)))], 1)
    with pytest.raises(ValidationError):
        Utterance("a", 0, np.zeros((0, 2)))


def votes(seq, n_classes=3):
    return np.eye(n_classes)[seq]


def test_winner_takes_all_examples():
    assert winner_takes_all(votes([1, 1, 2])) == 1
    assert winner_takes_all(votes([0, 1])) == 0
    assert winner_takes_all([[0.1, 0.9, 0.3]]) == 1
    assert winner_takes_all([[0.5, 0.5, 0.1]]) == 0
    with pytest.raises(ValidationError):
        winner_takes_all(np.empty((0, 3)))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), t=st.integers(1, 20), k=st.integers(2, 6))
def test_winner_takes_all_monotone_invariance(seed, t, k):
    s = np.random.default_rng(seed).normal(size=(t, k))
    assert winner_takes_all(s) == winner_takes_all(np.exp(3 * s) + 7) == winner_takes_all(np.arctan(s))


def test_kfold_partition():
    folds = kfold_indices(500, 10)
    assert [len(f) for f in folds] == [50] * 10
    allidx = np.concatenate(folds)
    assert sorted(allidx) == list(range(500))
    assert all(np.array_equal(a, b) for a, b in zip(folds, kfold_indices(500, 10)))
    with pytest.raises(ValidationError):
        kfold_indices(10, 1)


def _separable_dataset(n=30, n_classes=3):
    utts = [Utterance(f"u{i}", i % n_classes, np.tile(np.eye(n_classes)[i % n_classes], (5, 1)))
            for i in range(n)]
    return UtteranceDataset(utts, n_classes)


def test_kfold_perfect_separation():
    ds = _separable_dataset()
    # one-hot features are trivially separable by a linear readout
    pipeline = make_readout_pipeline(ds, ds.concatenate(), 1e-6)
    summary = kfold_evaluate(ds, 10, pipeline)
    assert len(summary.error_rates) == 10 and summary.mean == 0.0


def test_resplit():
    splits = resplit_indices(640, 270, 10, seed=3)
    assert all(len(tr) == 270 and len(te) == 370 for tr, te in splits)
    assert all(not set(tr) & set(te) for tr, te in splits)
    again = resplit_indices(640, 270, 1, seed=3)
    np.testing.assert_array_equal(splits[0][0], again[0][0])
    ds = _separable_dataset()
    summary = random_resplit_evaluate(ds, 20, 3, 0, make_readout_pipeline(ds, ds.concatenate(), 1e-6))
    assert summary.mean == 0.0 and summary.std == 0.0
    with pytest.raises(ValidationError):
        resplit_indices(10, 0, 1, 0)
    with pytest.raises(ValidationError):
        resplit_indices(10, 10, 1, 0)
