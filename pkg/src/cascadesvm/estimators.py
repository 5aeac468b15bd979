"""scikit-learn compatible estimators wrapping the SMO solver and the cascades."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets, type_of_target
from sklearn.utils.validation import check_is_fitted, validate_data

from .cascade import CascadePlan, run_cascade, validate_plan
from .dataset import Dataset
from .kernel import KernelSpec
from .solver import SolverConfig, smo_train

__all__ = ["SMOClassifier", "CascadeSVC"]


class _SVMBase(ClassifierMixin, BaseEstimator):
    def _solver_config(self, n_features: int) -> SolverConfig:
        gamma = self.gamma
        if gamma in (None, "auto"):
            gamma = 1.0 / max(n_features, 1)
        return SolverConfig(
            C=self.C,
            tol=self.tol,
            max_iter=self.max_iter,
            cache_mb=self.cache_mb,
            kernel=KernelSpec(self.kernel, float(gamma), self.degree, self.coef0),
        )

    def _prepare_fit(self, X, y) -> Dataset:
        X, y = validate_data(self, X, y, accept_sparse="csr", dtype=np.float64)
        check_classification_targets(y)
        y_type = type_of_target(y, input_name="y")
        if y_type != "binary":
            raise ValueError(f"Only binary classification is supported. The type of the target is {y_type}.")
        self.classes_ = np.unique(y)
        if self.classes_.size < 2:
            raise ValueError("training data holds only one class; a binary SVM needs 2 (got 1 class)")
        signed = np.where(y == self.classes_[1], 1, -1)
        return Dataset.from_arrays(X, signed)

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = validate_data(self, X, accept_sparse="csr", dtype=np.float64, reset=False)
        return self.model_.decision_function(X)

    def predict(self, X):
        f = self.decision_function(X)
        return self.classes_[(f >= 0).astype(int)]

    @property
    def support_vectors_(self):
        check_is_fitted(self, "model_")
        return self.model_.svs.X

    @property
    def dual_coef_(self):
        check_is_fitted(self, "model_")
        return self.model_.coef.reshape(1, -1)

    @property
    def intercept_(self):
        check_is_fitted(self, "model_")
        return np.array([self.model_.bias])

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.classifier_tags.multi_class = False
        tags.input_tags.sparse = True
        return tags


class SMOClassifier(_SVMBase):
    """Binary kernel SVM trained directly on the whole training set.

    ``gamma="auto"`` uses ``1 / n_features``.  The larger of the two class
    labels (after sorting) plays the role of the +1 class.
    """

    def __init__(self, C=1.0, kernel="rbf", gamma="auto", degree=3, coef0=0.0,
                 tol=1e-3, max_iter=10_000_000, cache_mb=100):
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.degree = degree
        self.coef0 = coef0
        self.tol = tol
        self.max_iter = max_iter
        self.cache_mb = cache_mb

    def fit(self, X, y):
        ds = self._prepare_fit(X, y)
        self.model_ = smo_train(ds, self._solver_config(ds.dim))
        self.support_ = self.model_.support
        self.n_iter_ = self.model_.iterations
        return self


class CascadeSVC(_SVMBase):
    """Grouped SVM training with a layer plan such as ``(8, 1)``.

    ``partition="random"`` gives CSVM, ``"balanced"`` BCSVM.  After fitting,
    ``layer_reports_`` holds one :class:`~cascadesvm.cascade.LayerReport` per
    layer and ``support_`` the final support vectors' row indices in ``X``.
    """

    def __init__(self, layers=(8, 1), partition="balanced", merge="pooled", C=1.0,
                 kernel="rbf", gamma="auto", degree=3, coef0=0.0, tol=1e-3,
                 max_iter=10_000_000, cache_mb=100, random_state=0, n_workers=1):
        self.layers = layers
        self.partition = partition
        self.merge = merge
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.degree = degree
        self.coef0 = coef0
        self.tol = tol
        self.max_iter = max_iter
        self.cache_mb = cache_mb
        self.random_state = random_state
        self.n_workers = n_workers

    def fit(self, X, y):
        plan = CascadePlan(tuple(self.layers), self.partition, self.merge)
        validate_plan(plan)
        ds = self._prepare_fit(X, y)
        seed = 0 if self.random_state is None else int(self.random_state)
        result = run_cascade(ds, plan, self._solver_config(ds.dim), seed, workers=self.n_workers)
        self.model_ = result.model
        self.layer_reports_ = result.reports
        self.support_ = np.sort(result.model.sv_ids)
        self.n_iter_ = sum(sum(r.iterations) for r in result.reports)
        return self
