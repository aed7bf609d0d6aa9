"""Bounded polyhedra {x : A x >= b} and their volumetric barrier.

For a strictly interior point x with slacks s_i = a_i.x - b_i the barrier
matrix is H(x) = sum_i a_i a_i^T / s_i^2, the volumetric barrier is
V(x) = 1/2 log det H(x) and the leverage of row i is
sigma_i(x) = a_i^T H(x)^{-1} a_i / s_i^2.  The leverages always sum to d.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_vector
from .exceptions import InvalidInput, NoConvergence, NotInterior, SingularH

# SingularH is raised when a Cholesky pivot falls below this times trace(H)/d.
PIVOT_RTOL = 1e-12


class Polyhedron:
    """Polyhedron ``{x : A x >= b}`` with unit-norm rows.

    Rows are rescaled to unit Euclidean norm on construction (``b`` is scaled
    with them).  Instances are treated as immutable; :meth:`add_row` and
    :meth:`drop_row` return new objects.

    Parameters
    ----------
    A : array-like of shape (p, d)
    b : array-like of shape (p,)
    interior : array-like of shape (d,), optional
        If given, checked to be strictly interior.
    """

    def __init__(self, A, b, interior=None):
        A = np.array(A, dtype=float, ndmin=2)
        b = np.array(b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise InvalidInput(f"A has {A.shape[0]} rows but b has {b.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InvalidInput("constraint data must be finite")
        p, d = A.shape
        if d < 1:
            raise InvalidInput("dimension must be at least 1")
        if p < d + 1:
            raise InvalidInput(f"a bounded polyhedron in R^{d} needs at least {d + 1} rows, got {p}")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0):
            raise InvalidInput("zero constraint row")
        self.A = A / norms[:, None]
        self.b = b / norms
        self.A.setflags(write=False)
        self.b.setflags(write=False)
        if interior is not None:
            self.check_interior(interior)

    @classmethod
    def box(cls, center, side):
        """Axis-aligned hypercube of edge length ``side`` around ``center``."""
        center = check_vector(center, "center")
        if not side > 0:
            raise InvalidInput("side must be positive")
        d = center.shape[0]
        eye = np.eye(d)
        A = np.vstack([eye, -eye])
        half = side / 2.0
        b = np.concatenate([center - half, -(center + half)])
        return cls(A, b, interior=center)

    @property
    def dim(self):
        return self.A.shape[1]

    @property
    def n_rows(self):
        return self.A.shape[0]

    def slacks(self, x):
        return self.A @ x - self.b

    def check_interior(self, x):
        x = check_vector(x, "x", self.dim)
        s = self.slacks(x)
        if not np.all(s > 0):
            raise NotInterior(f"point violates {int(np.sum(s <= 0))} constraint(s); min slack {s.min():.3e}")
        return s

    def add_row(self, a, b):
        return Polyhedron(np.vstack([self.A, a]), np.append(self.b, b))

    def drop_row(self, i):
        keep = np.arange(self.n_rows) != i
        return Polyhedron(self.A[keep], self.b[keep])

    def translate(self, v):
        """Return ``{x + v : x in self}``."""
        return Polyhedron(self.A, self.b + self.A @ np.asarray(v, dtype=float))

    def __repr__(self):
        return f"Polyhedron(dim={self.dim}, rows={self.n_rows})"


@dataclass(frozen=True)
class BarrierState:
    """Barrier quantities at one interior point.

    ``chol`` is the lower Cholesky factor of ``H``.
    """

    x: np.ndarray
    slacks: np.ndarray
    H: np.ndarray
    chol: np.ndarray
    sigmas: np.ndarray
    V: float

    def hinv_quad(self, c):
        """``c^T H^{-1} c``."""
        y = np.linalg.solve(self.chol, c)
        return float(y @ y)


def _factorize(H):
    d = H.shape[0]
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise SingularH("barrier matrix is not positive definite") from None
    pivots = np.diag(L) ** 2
    if pivots.min() < PIVOT_RTOL * np.trace(H) / d:
        raise SingularH(f"pivot {pivots.min():.3e} below threshold")
    return L


def _scaled_rows(P, x):
    s = P.check_interior(x)
    return s, P.A / s[:, None]


def barrier_state(P, x):
    """Compute :class:`BarrierState` for polyhedron ``P`` at ``x``."""
    x = check_vector(x, "x", P.dim)
    s, As = _scaled_rows(P, x)
    H = As.T @ As
    L = _factorize(H)
    Y = np.linalg.solve(L, As.T)
    sigmas = np.einsum("ij,ij->j", Y, Y)
    V = float(np.sum(np.log(np.diag(L))))
    return BarrierState(x=x, slacks=s, H=H, chol=L, sigmas=sigmas, V=V)


def barrier_value(P, x):
    """Volumetric barrier ``1/2 log det H(x)``."""
    return barrier_state(P, x).V


def leverage_scores(P, x):
    """Leverage values ``sigma_i(x)`` for every row of ``P``."""
    return barrier_state(P, x).sigmas


def barrier_gradient(P, x):
    """Gradient of V at ``x``: ``-sum_i sigma_i a_i / s_i``."""
    st = barrier_state(P, x)
    return -(P.A / st.slacks[:, None]).T @ st.sigmas


def _newton_system(P, st):
    As = P.A / st.slacks[:, None]
    Y = np.linalg.solve(st.chol, As.T)
    proj = Y.T @ Y
    grad = -As.T @ st.sigmas
    weights = 3.0 * np.diag(st.sigmas) - 2.0 * proj * proj
    hess = As.T @ weights @ As
    return grad, hess


def volumetric_center(P, warm_start, tol=1e-8, max_iter=200):
    """Approximate minimizer of the volumetric barrier.

    Damped Newton on V using the exact Hessian
    ``As^T (3 diag(sigma) - 2 P*P) As`` with ``As = diag(1/s) A``.  Each step
    is shortened so that no slack falls below half its current value, then
    backtracked for sufficient decrease while far from the center.  Stops
    when ``sqrt(g^T H^{-1} g) <= tol``.
    """
    st = barrier_state(P, warm_start)
    for _ in range(max_iter + 1):
        grad, hess = _newton_system(P, st)
        dec = np.linalg.solve(st.chol, grad)
        gnorm = float(np.sqrt(dec @ dec))
        if gnorm <= tol:
            return st
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = -np.linalg.solve(st.H, grad)
        rate = P.A @ step
        shrinking = rate < 0
        t = 1.0
        if np.any(shrinking):
            t = min(1.0, float(np.min(0.5 * st.slacks[shrinking] / -rate[shrinking])))
        slope = float(grad @ step)
        if gnorm > 1e-3:
            while t > 1e-12:
                trial = barrier_state(P, st.x + t * step)
                if trial.V <= st.V + 1e-4 * t * slope:
                    break
                t *= 0.5
            else:
                raise NoConvergence("line search failed to decrease the barrier")
        else:
            trial = barrier_state(P, st.x + t * step)
        st = trial
    raise NoConvergence(f"centering did not reach tol={tol} in {max_iter} iterations")
