import numpy as np
import pytest

from cascadesvm import synthetic
from cascadesvm.dataset import Dataset, SparseVector
from cascadesvm.kernel import KernelSpec
from cascadesvm.solver import (
    SolverConfig,
    SvmModel,
    TrainingError,
    accuracy,
    decision_value,
    predict,
    smo_train,
)
from oracles import brute_force_dual, dual_objective, rbf_gram

LINEAR = KernelSpec("linear")


@pytest.fixture
def line_model():
    ds = Dataset.from_arrays(np.array([[-1.0], [1.0]]), [-1, 1])
    return smo_train(ds, SolverConfig(C=10, kernel=LINEAR))


def test_two_point_analytic_solution(line_model):
    # dual: max 2a - 2a^2  ->  a = 1/2, w = 1, b = 0
    m = line_model
    assert sorted(m.support) == [0, 1]
    assert np.allclose(np.abs(m.coef), 0.5, atol=1e-12)
    assert m.bias == pytest.approx(0.0, abs=1e-12)
    assert decision_value(m, SparseVector.from_dict({1: 0.25})) == pytest.approx(0.25, abs=1e-12)
    xs = np.linspace(-3, 3, 13)[:, None]
    assert np.allclose(m.decision_function(xs), xs.ravel(), atol=1e-12)


def test_empty_model_returns_bias():
    m = SvmModel(svs=Dataset.empty(3), coef=[], bias=-0.7, kernel=KernelSpec())
    assert decision_value(m, SparseVector.from_dict({2: 1.0})) == -0.7
    assert predict(m, SparseVector()) == -1


@pytest.mark.parametrize("f, label", [(2.3, 1), (-0.1, -1), (0.0, 1)])
def test_predict_sign_and_tie(f, label):
    m = SvmModel(svs=Dataset.empty(1), coef=[], bias=f, kernel=KernelSpec())
    assert predict(m, f) == label
    assert predict(m, SparseVector()) == label


def test_xor_all_points_are_svs_and_classified():
    ds = synthetic.xor()
    cfg = SolverConfig(C=10, kernel=KernelSpec("rbf", gamma=1.0), tol=1e-8)
    m, state = smo_train(ds, cfg, return_state=True)
    assert sorted(m.support) == [0, 1, 2, 3]
    assert accuracy(m, ds) == 1.0
    X = ds.X.toarray()
    oracle = brute_force_dual(rbf_gram(X, 1.0), ds.y.astype(float), 10.0)
    assert np.all(oracle.alpha > 0)
    assert np.allclose(state.alpha, oracle.alpha, atol=1e-6)


def test_duplicated_dataset_gives_same_decision_function():
    ds = synthetic.separable(60, seed=2)
    dup = Dataset(
        ds.X[np.repeat(np.arange(len(ds)), 2)],
        np.repeat(ds.y, 2),
    )
    cfg = SolverConfig(C=1000.0, tol=1e-10, kernel=LINEAR)
    a, b = smo_train(ds, cfg), smo_train(dup, cfg)
    grid = np.stack(np.meshgrid(np.linspace(-1, 1, 25), np.linspace(-1, 1, 25)), -1).reshape(-1, 2)
    assert np.max(np.abs(a.decision_function(grid) - b.decision_function(grid))) < 1e-6


def test_hard_margin_svs_sit_on_the_margin():
    ds = synthetic.separable(300, seed=7)
    cfg = SolverConfig(C=1e4, tol=1e-3, kernel=LINEAR)
    m = smo_train(ds, cfg)
    f = m.decision_function(m.svs)
    assert np.all(np.abs(np.abs(f) - 1.0) <= cfg.tol)
    assert np.all(np.abs(m.coef) < cfg.C)


def test_hard_margin_ordering_nonsvs_farther_than_svs():
    ds = synthetic.separable(400, seed=8)
    cfg = SolverConfig(C=1e4, tol=1e-3, kernel=LINEAR)
    m = smo_train(ds, cfg)
    f = np.abs(m.decision_function(ds))
    is_sv = np.zeros(len(ds), bool)
    is_sv[m.support] = True
    free = is_sv.copy()
    free[m.support[np.abs(m.coef) >= cfg.C]] = False
    assert f[~is_sv].min() >= f[free].max() - cfg.tol


def test_every_coef_nonzero_and_bounded(blobs):
    cfg = SolverConfig(C=0.7, kernel=KernelSpec("rbf", gamma=0.5))
    m = smo_train(blobs, cfg)
    assert np.all(m.coef != 0)
    assert np.all(np.abs(m.coef) <= cfg.C)
    assert np.array_equal(np.sign(m.coef), blobs.y[m.support])


def test_bias_falls_back_to_interval_midpoint_without_free_svs():
    # tiny C forces every alpha to the bound
    ds = synthetic.noisy_blobs(40, seed=1, spread=3.0)
    m, state = smo_train(ds, SolverConfig(C=1e-4, kernel=KernelSpec("rbf", gamma=0.1)), return_state=True)
    assert np.all((state.alpha == 0) | (state.alpha == 1e-4))
    y = ds.y.astype(float)
    score = -y * state.grad
    up = ((y > 0) & (state.alpha < 1e-4)) | ((y < 0) & (state.alpha > 0))
    low = ((y > 0) & (state.alpha > 0)) | ((y < 0) & (state.alpha < 1e-4))
    assert m.bias == pytest.approx((score[up].max() + score[low].min()) / 2)


def test_single_class_is_an_error():
    ds = Dataset.from_arrays(np.array([[0.0], [1.0]]), [1, 1])
    with pytest.raises(TrainingError):
        smo_train(ds, SolverConfig())


def test_max_iter_flags_nonconverged(blobs):
    m = smo_train(blobs, SolverConfig(max_iter=3))
    assert not m.converged and m.iterations == 3


def test_config_validation():
    for kw in (dict(C=0), dict(tol=0), dict(max_iter=0), dict(cache_mb=-1)):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


def test_accuracy_examples():
    ds = synthetic.separable(10, seed=0)
    m = smo_train(ds, SolverConfig(C=1e3, kernel=LINEAR))
    assert accuracy(m, ds) == 1.0
    flipped = Dataset(ds.X, -ds.y)
    assert accuracy(m, flipped) == 0.0
    with pytest.raises(ValueError):
        accuracy(m, Dataset.empty(2))


def test_model_json_roundtrip_exact(tmp_path, blobs):
    m = smo_train(blobs, SolverConfig(C=2.0, kernel=KernelSpec("polynomial", gamma=0.3, degree=2, coef0=1.0)))
    path = tmp_path / "model.json"
    m.save(path)
    back = SvmModel.load(path)
    assert np.array_equal(back.coef, m.coef)
    assert back.bias == m.bias and back.kernel == m.kernel and back.C == m.C
    assert back.svs.same_samples(m.svs)
    assert np.array_equal(back.sv_ids, m.sv_ids)
    assert np.array_equal(back.decision_function(blobs), m.decision_function(blobs))


def test_decision_value_matches_batch(blobs):
    m = smo_train(blobs, SolverConfig(kernel=KernelSpec("rbf", gamma=0.5)))
    batch = m.decision_function(blobs)
    for k in (0, 17, 99):
        assert decision_value(m, blobs.row(k)) == pytest.approx(batch[k], abs=1e-12)


def test_unseen_feature_indices_are_zeros():
    ds = Dataset.from_arrays(np.array([[-1.0], [1.0]]), [-1, 1])
    m = smo_train(ds, SolverConfig(C=10, kernel=LINEAR))
    assert decision_value(m, SparseVector.from_dict({1: 0.5, 9: 4.0})) == pytest.approx(0.5)


@pytest.mark.parametrize("trial", range(20))
def test_matches_brute_force_dual(trial):
    rng = np.random.default_rng(1000 + trial)
    n = int(rng.integers(2, 7))
    X = rng.uniform(-1, 1, size=(n, 2))
    y = rng.choice([-1, 1], size=n)
    y[0], y[-1] = 1, -1
    C = float(rng.uniform(0.5, 10))
    gamma = float(rng.uniform(0.5, 3))
    m, state = smo_train(Dataset.from_arrays(X, y), SolverConfig(C=C, kernel=KernelSpec("rbf", gamma=gamma)),
                         return_state=True)
    K = rbf_gram(X, gamma)
    oracle = brute_force_dual(K, y.astype(float), C)
    assert dual_objective(state.alpha, y.astype(float), K) == pytest.approx(oracle.objective, abs=1e-3)
    assert set(m.support) == set(np.flatnonzero(oracle.alpha > 1e-12))
