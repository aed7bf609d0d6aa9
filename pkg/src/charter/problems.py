"""Benchmark stochastic convex problems.

A problem owns a hypercube domain, a per-client data sampler and vectorized
sample-loss / sample-gradient oracles.  Every built-in problem uses the same
datum layout: a row ``z = (xi_1 .. xi_d, nu)`` holding the gradient noise
``xi`` and the loss noise ``nu``.  Datasets are these rows, drawn once from a
seeded stream, so every datum has a stable index.
"""

import math

import numpy as np

from ._validation import check_positive, check_vector
from .exceptions import InvalidInput, UnknownProblem
from .polytope import Polyhedron


class Problem:
    """Base class; subclasses implement the oracles.

    Attributes
    ----------
    d : int
    center : ndarray of shape (d,)
    side : float
        Edge length of the hypercube domain.
    sigma_g, sigma_f : float
        Sub-Gaussian scales of the gradient vector and of the loss.
    """

    name = "problem"

    def __init__(self, d, center=None, side=2.0, sigma_g=1.0, sigma_f=1.0):
        self.d = check_positive(d, "d", integer=True)
        self.center = np.zeros(d) if center is None else check_vector(center, "center", d)
        self.side = float(check_positive(side, "side"))
        self.sigma_g = float(sigma_g)
        self.sigma_f = float(sigma_f)
        if self.sigma_g < 0 or self.sigma_f < 0:
            raise InvalidInput("noise scales must be nonnegative")

    @property
    def diameter(self):
        """Euclidean diameter of the domain (``side * sqrt(d)``)."""
        return self.side * math.sqrt(self.d)

    def domain(self):
        return Polyhedron.box(self.center, self.side)

    def sample(self, client, n, rng):
        """Draw ``n`` data rows for ``client``."""
        z = np.empty((n, self.d + 1))
        z[:, : self.d] = rng.standard_normal((n, self.d)) * (self.sigma_g / math.sqrt(self.d))
        z[:, self.d] = rng.standard_normal(n) * self.sigma_f
        return z

    def grad_samples(self, x, Z):
        """Per-datum gradient estimates at ``x``, shape ``(n, d)``."""
        return self.true_grad(x)[None, :] + Z[:, : self.d]

    def loss_samples(self, X, Z):
        """Per-datum losses; ``X`` of shape ``(k, d)`` gives ``(k, n)``."""
        X = np.atleast_2d(X)
        return self.true_loss(X)[:, None] + Z[None, :, self.d]

    def masked_loss_sums(self, X, Z, bound, chunk=256):
        """``sum_z l(x; z) 1{|l(x; z)| <= bound}`` for every row of ``X``."""
        X = np.atleast_2d(X)
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], chunk):
            vals = self.loss_samples(X[start:start + chunk], Z)
            out[start:start + chunk] = np.where(np.abs(vals) <= bound, vals, 0.0).sum(axis=1)
        return out

    def true_loss(self, x):
        raise NotImplementedError

    def true_grad(self, x):
        raise NotImplementedError

    @property
    def minimizer(self):
        raise NotImplementedError

    @property
    def L_star(self):
        return float(self.true_loss(self.minimizer))

    def __repr__(self):
        return f"{type(self).__name__}(d={self.d}, sigma_g={self.sigma_g}, sigma_f={self.sigma_f})"


class _AdditiveLossNoise:
    """Losses of the form ``f(x) + nu``: masked sums via sorted prefix sums."""

    def masked_loss_sums(self, X, Z, bound, chunk=None):
        f = np.atleast_1d(self.true_loss(np.atleast_2d(X)))
        nu = np.sort(Z[:, self.d])
        csum = np.concatenate([[0.0], np.cumsum(nu)])
        lo = np.searchsorted(nu, -bound - f, side="left")
        hi = np.searchsorted(nu, bound - f, side="right")
        hi = np.maximum(hi, lo)
        return f * (hi - lo) + (csum[hi] - csum[lo])


class HardInstance(_AdditiveLossNoise, Problem):
    """``f(x) = alpha * max_i |a_i.x - b_i / sqrt(d)|`` over an orthonormal basis.

    Gradient observations follow the noisy oracle ``alpha * a_i(x) s_i(x)``
    plus ``N(0, sigma^2/d I)``; ``sigma_g`` equals ``sigma``.  Loss
    observations are ``f(x)`` plus ``N(0, sigma_f^2)``.
    """

    name = "hard-instance"

    def __init__(self, basis, signs, alpha=1.0, sigma=1.0, sigma_f=1.0, center=None, side=2.0):
        basis = np.asarray(basis, dtype=float)
        d = basis.shape[0]
        super().__init__(d, center=center, side=side, sigma_g=sigma, sigma_f=sigma_f)
        if basis.shape != (d, d):
            raise InvalidInput("basis must be a square matrix whose rows are a_1 .. a_d")
        if np.max(np.abs(basis @ basis.T - np.eye(d))) > 1e-10:
            raise InvalidInput("basis is not orthonormal")
        signs = np.asarray(signs, dtype=float)
        if signs.shape != (d,) or not np.all(np.abs(signs) == 1):
            raise InvalidInput("signs must be a vector of +-1")
        if not 0 < alpha <= 1:
            raise InvalidInput("alpha must lie in (0, 1]")
        self.basis = basis
        self.signs = signs
        self.alpha = float(alpha)

    @property
    def sigma(self):
        return self.sigma_g

    @classmethod
    def random(cls, d, seed=0, **kwargs):
        rng = np.random.default_rng(seed)
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        q = q * np.sign(np.diag(r))
        signs = rng.choice([-1.0, 1.0], size=d)
        return cls(q.T, signs, **kwargs)

    def residuals(self, x):
        """``a_i.x - b_i/sqrt(d)`` for every i (last axis)."""
        return np.asarray(x, dtype=float) @ self.basis.T - self.signs / math.sqrt(self.d)

    def active_index(self, x):
        """Smallest index attaining the max in ``f``."""
        return int(np.argmax(np.abs(self.residuals(x))))

    def sign(self, x, j):
        return 1.0 if self.residuals(x)[j] >= 0 else -1.0

    def true_loss(self, x):
        return self.alpha * np.max(np.abs(self.residuals(x)), axis=-1)

    def true_grad(self, x):
        i = self.active_index(x)
        return self.alpha * self.sign(x, i) * self.basis[i]

    @property
    def minimizer(self):
        return self.basis.T @ self.signs / math.sqrt(self.d)

    @property
    def L_star(self):
        return 0.0


def hard_instance_value(h, x):
    return float(h.true_loss(check_vector(x, "x", h.d)))


def oracle_O(h, x, rng):
    """Noisy subgradient ``alpha a_i(x) s_i(x) + N(0, sigma^2/d I)``."""
    x = check_vector(x, "x", h.d)
    return h.true_grad(x) + rng.standard_normal(h.d) * (h.sigma / math.sqrt(h.d))


def oracle_Oprime(h, x, rng):
    """Noisy direction ``alpha a_i(x) + noise`` and the exact sign ``s_i(x)``."""
    x = check_vector(x, "x", h.d)
    i = h.active_index(x)
    g = h.alpha * h.basis[i] + rng.standard_normal(h.d) * (h.sigma / math.sqrt(h.d))
    return g, h.sign(x, i)


class MaxAbsProblem(_AdditiveLossNoise, Problem):
    """``f(x) = max_i |x_i - c_i|`` with Gaussian gradient and loss noise."""

    name = "max-abs"

    def __init__(self, target, sigma_g=1.0, sigma_f=1.0, center=None, side=2.0):
        target = check_vector(target, "target")
        super().__init__(target.shape[0], center=center, side=side, sigma_g=sigma_g, sigma_f=sigma_f)
        if np.any(np.abs(target - self.center) > self.side / 2):
            raise InvalidInput("target must lie in the domain")
        self.target = target

    def true_loss(self, x):
        return np.max(np.abs(np.asarray(x, dtype=float) - self.target), axis=-1)

    def true_grad(self, x):
        diff = np.asarray(x, dtype=float) - self.target
        i = int(np.argmax(np.abs(diff)))
        g = np.zeros(self.d)
        g[i] = 1.0 if diff[i] >= 0 else -1.0
        return g

    @property
    def minimizer(self):
        return self.target

    @property
    def L_star(self):
        return 0.0


class HeterogeneousQuadratic(Problem):
    """Clients with shifted linear terms around a common quadratic.

    Client m sees ``l_m(x; z) = (lam/2)|x - c|^2 + (delta_m + xi).(x - c) + nu``
    with ``sum_m delta_m = 0``, so the population loss is
    ``(lam/2)|x - c|^2`` and ``L* = 0``.  ``lam = 1 / diameter`` keeps the
    population gradient inside the unit ball on the domain.
    """

    name = "hetero-quadratic"

    def __init__(self, target, shifts, sigma_g=1.0, sigma_f=1.0, center=None, side=2.0):
        target = check_vector(target, "target")
        super().__init__(target.shape[0], center=center, side=side, sigma_g=sigma_g, sigma_f=sigma_f)
        shifts = np.atleast_2d(np.asarray(shifts, dtype=float))
        if shifts.shape[1] != self.d:
            raise InvalidInput("shifts must have one row of length d per client")
        if np.max(np.abs(shifts.mean(axis=0))) > 1e-12:
            raise InvalidInput("client shifts must average to zero")
        self.target = target
        self.shifts = shifts
        self.lam = 1.0 / self.diameter

    @property
    def n_clients(self):
        return self.shifts.shape[0]

    def sample(self, client, n, rng):
        if not 0 <= client < self.n_clients:
            raise InvalidInput(f"problem was built for {self.n_clients} clients, got client {client}")
        z = super().sample(client, n, rng)
        z[:, : self.d] += self.shifts[client]
        return z

    def grad_samples(self, x, Z):
        return self.lam * (np.asarray(x, dtype=float) - self.target)[None, :] + Z[:, : self.d]

    def loss_samples(self, X, Z):
        diff = np.atleast_2d(X) - self.target
        quad = 0.5 * self.lam * np.sum(diff**2, axis=1)
        return quad[:, None] + diff @ Z[:, : self.d].T + Z[None, :, self.d]

    def client_mean_grad(self, x, client):
        return self.true_grad(x) + self.shifts[client]

    def true_loss(self, x):
        diff = np.asarray(x, dtype=float) - self.target
        return 0.5 * self.lam * np.sum(diff**2, axis=-1)

    def true_grad(self, x):
        return self.lam * (np.asarray(x, dtype=float) - self.target)

    @property
    def minimizer(self):
        return self.target

    @property
    def L_star(self):
        return 0.0


def _make_hard(d, M, seed=0, alpha=1.0, sigma_g=1.0, sigma_f=1.0, side=2.0):
    return HardInstance.random(d, seed=seed, alpha=alpha, sigma=sigma_g, sigma_f=sigma_f, side=side)


def _make_max_abs(d, M, seed=0, sigma_g=1.0, sigma_f=1.0, side=2.0):
    rng = np.random.default_rng(seed)
    target = rng.uniform(-0.4, 0.4, size=d) * side
    return MaxAbsProblem(target, sigma_g=sigma_g, sigma_f=sigma_f, side=side)


def _make_hetero(d, M, seed=0, shift=0.5, sigma_g=1.0, sigma_f=1.0, side=2.0):
    rng = np.random.default_rng(seed)
    target = rng.uniform(-0.4, 0.4, size=d) * side
    shifts = rng.standard_normal((M, d)) * shift
    shifts -= shifts.mean(axis=0)
    return HeterogeneousQuadratic(target, shifts, sigma_g=sigma_g, sigma_f=sigma_f, side=side)


_CATALOG = {
    "hard-instance": _make_hard,
    "max-abs": _make_max_abs,
    "hetero-quadratic": _make_hetero,
}


def builtin_problems():
    """Catalog of problem factories keyed by stable name.

    Each factory is called as ``factory(d, M, seed=..., **params)``.
    """
    return dict(_CATALOG)


def make_problem(key, d, M, seed=0, **params):
    try:
        factory = _CATALOG[key]
    except KeyError:
        raise UnknownProblem(f"unknown problem {key!r}; choose from {sorted(_CATALOG)}") from None
    return factory(d, M, seed=seed, **params)
