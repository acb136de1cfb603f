"""scikit-learn style front end for the least-squares solver.

The training data are generated from the PDE itself, so ``fit`` takes no
samples; ``X`` and ``y`` are accepted (and ignored) only so the estimator
slots into pipelines and ``clone``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .config import default_n_boundary
from .metrics import TestSet, rel_l2_error
from .problems import get_problem
from .trainer import TrainingConfig, train


class DeepLeastSquaresSolver(BaseEstimator):
    """Solve one of the benchmark PDEs with a ReLU^3 network.

    Parameters mirror :class:`~activepde.trainer.TrainingConfig`, plus the
    problem selection (``problem``, ``dim``, ``kink_width``) and
    ``random_state`` for the seed. ``n_boundary=None`` picks the problem's
    default boundary batch.

    Attributes
    ----------
    network_ : SolutionNetwork
    history_ : TrainingHistory
    problem_ : PdeProblem
    n_features_in_ : int
    """

    def __init__(self, problem="elliptic", dim=2, kink_width=0.0, depth=3, width=100,
                 epochs=20000, n_interior=12000, n_boundary=None, lam=10.0,
                 sampler="self_normalized", p=1.0, burn_in=0, annuli=10, pool_size=None,
                 rar_base=None, rar_top=None, adaptive_boundary=True, stencil_h=1e-4,
                 stencil_first="central", lr_schedule="staircase", lr=1e-3, eval_every=100,
                 test_size=10000, random_state=0):
        self.problem = problem
        self.dim = dim
        self.kink_width = kink_width
        self.depth = depth
        self.width = width
        self.epochs = epochs
        self.n_interior = n_interior
        self.n_boundary = n_boundary
        self.lam = lam
        self.sampler = sampler
        self.p = p
        self.burn_in = burn_in
        self.annuli = annuli
        self.pool_size = pool_size
        self.rar_base = rar_base
        self.rar_top = rar_top
        self.adaptive_boundary = adaptive_boundary
        self.stencil_h = stencil_h
        self.stencil_first = stencil_first
        self.lr_schedule = lr_schedule
        self.lr = lr
        self.eval_every = eval_every
        self.test_size = test_size
        self.random_state = random_state

    def _problem(self):
        options = {"kink_width": self.kink_width} if self.kink_width else {}
        return get_problem(self.problem, self.dim, **options)

    def _config(self, problem) -> TrainingConfig:
        n_boundary = self.n_boundary
        if n_boundary is None:
            n_boundary = default_n_boundary(problem, self.n_interior)
        return TrainingConfig(
            epochs=self.epochs, n_interior=self.n_interior, n_boundary=n_boundary,
            lam=self.lam, sampler=self.sampler, p=self.p, burn_in=self.burn_in,
            annuli=self.annuli, pool_size=self.pool_size, rar_base=self.rar_base,
            rar_top=self.rar_top, adaptive_boundary=self.adaptive_boundary,
            stencil_h=self.stencil_h, stencil_first=self.stencil_first, depth=self.depth,
            width=self.width, seed=int(self.random_state), eval_every=self.eval_every,
            lr_schedule=self.lr_schedule, lr=self.lr, test_size=self.test_size,
        )

    def fit(self, X=None, y=None):
        problem = self._problem()
        config = self._config(problem)
        self.network_, self.history_ = train(problem, config)
        self.problem_ = problem
        self.n_features_in_ = problem.input_dim
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but {type(self).__name__} "
                f"is expecting {self.n_features_in_} features as input"
            )
        return self.network_.forward(X)

    def score(self, X=None, y=None):
        """Negative relative l2 error (higher is better).

        Without ``X`` the problem's fixed test set is used; without ``y`` the
        exact solution at ``X`` is the reference.
        """
        check_is_fitted(self, "network_")
        if X is None:
            test = TestSet.for_problem(self.problem_, size=self.test_size)
        else:
            X = check_array(X, dtype=np.float64)
            ref = self.problem_.exact(X) if y is None else np.asarray(y, dtype=np.float64).ravel()
            test = TestSet(X, ref, seed=-1)
        return -rel_l2_error(self.predict, test)
