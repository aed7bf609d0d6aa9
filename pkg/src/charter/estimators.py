"""Estimator-style wrappers.

``fit`` takes a :class:`~charter.problems.Problem` instead of ``(X, y)``:
the data are generated per client from seeded streams, so there is no
design matrix to pass in.  Hyperparameters live in ``__init__`` and
``get_params``/``set_params``/``clone`` work as usual.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_positive
from .baseline import run_dpsgd
from .exceptions import InvalidInput
from .mechanisms import PrivacyParams
from .orchestrator import excess_risk, run_charter
from .problems import Problem
from .vaidya import VaidyaConfig, run_cutting_plane


def _check_problem(problem):
    if not isinstance(problem, Problem):
        raise InvalidInput(f"expected a Problem, got {type(problem).__name__}")
    return problem


class _ProblemEstimator(BaseEstimator):
    def score(self, problem):
        """Negative excess risk of ``solution_`` (higher is better)."""
        return -excess_risk(_check_problem(problem), self.solution_)


class CharterOptimizer(_ProblemEstimator):
    """Private federated minimizer.

    Parameters
    ----------
    n_clients, n_samples : int
        ``M`` and the per-client dataset size ``N``.
    eps_dp : float
        Privacy budget; ``inf`` disables the noise.
    delta_dp, delta_err : float
    gamma, eta, center_tol : float
        Cutting-plane hyperparameters.
    n_iter : int or None
        Overrides the derived iteration count ``K``.
    override_n_floor : bool
    random_state : int

    Attributes
    ----------
    solution_ : ndarray of shape (d,)
    transcript_ : RunTranscript
    params_ : DerivedParams
    k_star_ : int
    cc_bits_ : float
    """

    def __init__(self, n_clients=4, n_samples=10_000, eps_dp=math.inf, delta_dp=1e-5, delta_err=0.1,
                 gamma=0.05, eta=0.9, center_tol=1e-8, n_iter=None, override_n_floor=False,
                 random_state=0):
        self.n_clients = n_clients
        self.n_samples = n_samples
        self.eps_dp = eps_dp
        self.delta_dp = delta_dp
        self.delta_err = delta_err
        self.gamma = gamma
        self.eta = eta
        self.center_tol = center_tol
        self.n_iter = n_iter
        self.override_n_floor = override_n_floor
        self.random_state = random_state

    def fit(self, problem):
        problem = _check_problem(problem)
        M = check_positive(self.n_clients, "n_clients", integer=True)
        N = check_positive(self.n_samples, "n_samples", integer=True)
        cfg = VaidyaConfig(eta=self.eta, gamma=self.gamma, center_tol=self.center_tol)
        privacy = PrivacyParams(self.eps_dp, self.delta_dp, self.delta_err)
        tr = run_charter(problem, M, N, privacy, cfg, seed=self.random_state, K=self.n_iter,
                         override_n_floor=self.override_n_floor)
        self.transcript_ = tr
        self.params_ = tr.params
        self.k_star_ = tr.k_star
        self.cc_bits_ = tr.cc_bits
        self.solution_ = tr.output
        return self


class VaidyaMinimizer(_ProblemEstimator):
    """Non-private cutting-plane minimizer using exact subgradients.

    Attributes
    ----------
    solution_ : ndarray
        Iterate with the smallest true loss.
    iterates_ : ndarray of shape (n_iter + 1, d)
    step_kinds_ : list of str
    """

    def __init__(self, n_iter=200, gamma=0.05, eta=0.9, center_tol=1e-8):
        self.n_iter = n_iter
        self.gamma = gamma
        self.eta = eta
        self.center_tol = center_tol

    def fit(self, problem):
        problem = _check_problem(problem)
        cfg = VaidyaConfig(eta=self.eta, gamma=self.gamma, center_tol=self.center_tol,
                           K=check_positive(self.n_iter, "n_iter", integer=True))
        res = run_cutting_plane(problem.domain(), cfg, lambda x, k: problem.true_grad(x))
        losses = np.asarray(problem.true_loss(res.iterates))
        self.iterates_ = res.iterates
        self.step_kinds_ = [s.kind for s in res.steps]
        self.solution_ = res.iterates[int(np.argmin(losses))]
        return self


class DPSGDBaseline(_ProblemEstimator):
    """Distributed DP-SGD comparison point (projected, ``1/sqrt(t)`` steps)."""

    def __init__(self, n_clients=4, n_samples=10_000, eps_dp=math.inf, delta_dp=1e-5, rounds=100,
                 batch_size=None, step_size=None, random_state=0):
        self.n_clients = n_clients
        self.n_samples = n_samples
        self.eps_dp = eps_dp
        self.delta_dp = delta_dp
        self.rounds = rounds
        self.batch_size = batch_size
        self.step_size = step_size
        self.random_state = random_state

    def fit(self, problem):
        problem = _check_problem(problem)
        res = run_dpsgd(problem, self.n_clients, self.n_samples, self.eps_dp, self.delta_dp,
                        rounds=self.rounds, batch_size=self.batch_size, step_size=self.step_size,
                        seed=self.random_state)
        self.result_ = res
        self.cc_bits_ = res.cc_bits
        self.solution_ = res.output
        return self
