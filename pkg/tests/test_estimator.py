import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from activepde import DeepLeastSquaresSolver

SMALL = dict(problem="elliptic", dim=2, epochs=3, n_interior=40, width=8, annuli=4,
             test_size=200, eval_every=1, random_state=5)


def test_get_params_and_clone():
    est = DeepLeastSquaresSolver(**SMALL)
    assert est.get_params()["dim"] == 2
    twin = clone(est)
    assert twin.get_params() == est.get_params() and twin is not est


def test_fit_predict_score():
    est = DeepLeastSquaresSolver(**SMALL).fit()
    X = np.random.default_rng(0).uniform(-0.5, 0.5, (7, 2))
    assert est.predict(X).shape == (7,)
    assert est.n_features_in_ == 2
    assert est.score() == pytest.approx(-est.history_.rel_l2[-1], rel=1e-12)
    assert est.score(X) <= 0


def test_fit_is_deterministic():
    a = DeepLeastSquaresSolver(**SMALL).fit()
    b = DeepLeastSquaresSolver(**SMALL).fit()
    assert np.array_equal(a.network_.theta, b.network_.theta)


def test_unfitted_and_wrong_width():
    est = DeepLeastSquaresSolver(**SMALL)
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((1, 2)))
    est.fit()
    with pytest.raises(ValueError):
        est.predict(np.zeros((1, 3)))
