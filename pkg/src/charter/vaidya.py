"""Vaidya's volumetric cutting-plane loop.

Each outer iteration recenters, then either drops the least important
constraint (smallest leverage below ``gamma``) or adds the cut
``c^T x >= beta`` with ``c`` the negated (estimated) subgradient and ``beta``
solving ``c^T H^{-1} c / (c^T x - beta)^2 = sqrt(eta * gamma) / 2``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._validation import check_open_unit, check_positive
from .exceptions import CollapsedPolytope, DegenerateDirection, InvalidInput
from .polytope import Polyhedron, volumetric_center

MIN_DIRECTION_NORM = 1e-12
COLLAPSE_SLACK = 1e-14


@dataclass(frozen=True)
class VaidyaConfig:
    """Hyperparameters of the cutting-plane loop.

    ``max_rows=None`` leaves the row count uncapped; with ``gamma < 1/2`` it
    stays below ``d / gamma + 1`` anyway.

    A freshly added cut has leverage ``q / (1 + q)`` with
    ``q = sqrt(eta * gamma) / 2``.  If that is below ``gamma`` the cut is
    dropped again on the next iteration and the loop alternates add/drop
    without progress, hence the large default ``eta``.
    """

    eta: float = 0.9
    gamma: float = 0.05
    max_rows: Optional[int] = None
    center_tol: float = 1e-8
    K: int = 100

    def __post_init__(self):
        check_open_unit(self.eta, "eta")
        check_open_unit(self.gamma, "gamma")
        check_positive(self.center_tol, "center_tol")
        check_positive(self.K, "K", integer=True)
        if self.max_rows is not None:
            check_positive(self.max_rows, "max_rows", integer=True)

    @property
    def depth_target(self):
        """Leverage the new cut would have at the current center."""
        return 0.5 * np.sqrt(self.eta * self.gamma)


@dataclass(frozen=True)
class CutStep:
    """Outcome of one iteration.

    ``kind`` is ``"add"``, ``"drop"`` or ``"noop"``.  For ``"add"``,
    ``direction`` and ``offset`` are the raw (unnormalized) ``c_k`` and
    ``beta_k``; for ``"drop"``, ``row`` is the removed index.
    """

    kind: str
    center_before: np.ndarray
    center_after: Optional[np.ndarray] = None
    row: Optional[int] = None
    direction: Optional[np.ndarray] = None
    offset: Optional[float] = None


def decide_step(state, cfg, c):
    """Choose between dropping a row and adding a cut at ``state.x``.

    Returns a :class:`CutStep` with ``center_after`` unset.  Raises
    :class:`DegenerateDirection` when an add is called for but ``c`` is
    numerically zero.
    """
    sig = state.sigmas
    i = int(np.argmin(sig))  # argmin returns the lowest index on ties
    if sig[i] < cfg.gamma:
        return CutStep(kind="drop", center_before=state.x, row=i)
    if c is None:
        raise DegenerateDirection("no cut direction supplied")
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)):
        raise InvalidInput("cut direction has non-finite entries")
    if np.linalg.norm(c) < MIN_DIRECTION_NORM:
        raise DegenerateDirection(f"|c| = {np.linalg.norm(c):.3e}")
    gap = np.sqrt(state.hinv_quad(c) / cfg.depth_target)
    beta = float(c @ state.x - gap)
    return CutStep(kind="add", center_before=state.x, direction=c, offset=beta)


@dataclass
class CuttingPlaneResult:
    """Iterates and per-round log of :func:`run_cutting_plane`."""

    iterates: np.ndarray
    steps: list = field(default_factory=list)
    polytopes: Optional[list] = None
    final: Optional[Polyhedron] = None


def apply_step(P, step):
    if step.kind == "drop":
        return P.drop_row(step.row)
    if step.kind == "add":
        return P.add_row(step.direction, step.offset)
    return P


def run_cutting_plane(initial, cfg, grad_provider: Callable, *, keep_polytopes=False):
    """Run ``cfg.K`` iterations of Vaidya's method from ``initial``.

    ``grad_provider(x, k)`` is called exactly once per outer iteration and
    must return a (possibly noisy) subgradient at ``x`` or ``None`` when no
    estimate is available; the cut uses its negation.  The value is ignored
    on drop rounds.

    Returns a :class:`CuttingPlaneResult` whose ``iterates`` has ``K + 1``
    rows: the approximate volumetric centers ``x_0 .. x_K``.
    """
    d = initial.dim
    P = initial
    state = volumetric_center(P, _interior_guess(P), tol=cfg.center_tol)
    iterates = [state.x]
    steps = []
    polys = [P] if keep_polytopes else None
    for k in range(cfg.K):
        g = grad_provider(state.x, k)
        c = None if g is None else -np.asarray(g, dtype=float)
        try:
            step = decide_step(state, cfg, c)
        except DegenerateDirection:
            step = CutStep(kind="noop", center_before=state.x)
        if step.kind == "drop" and P.n_rows - 1 < d + 1:
            step = CutStep(kind="noop", center_before=state.x)
        if step.kind == "add" and cfg.max_rows is not None and P.n_rows >= cfg.max_rows:
            step = CutStep(kind="drop", center_before=state.x, row=int(np.argmin(state.sigmas)))
        if step.kind != "noop":
            P = apply_step(P, step)
            state = volumetric_center(P, state.x, tol=cfg.center_tol)
            if state.slacks.min() < COLLAPSE_SLACK:
                raise CollapsedPolytope(f"min slack {state.slacks.min():.3e} at iteration {k + 1}")
        steps.append(CutStep(kind=step.kind, center_before=step.center_before, center_after=state.x,
                             row=step.row, direction=step.direction, offset=step.offset))
        iterates.append(state.x)
        if keep_polytopes:
            polys.append(P)
    return CuttingPlaneResult(iterates=np.array(iterates), steps=steps, polytopes=polys, final=P)


def _interior_guess(P):
    # Chebyshev center; rows are unit norm so t is an inscribed-ball radius.
    from scipy.optimize import linprog

    d = P.dim
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    A_ub = np.hstack([-P.A, np.ones((P.n_rows, 1))])
    res = linprog(cost, A_ub=A_ub, b_ub=-P.b, bounds=[(None, None)] * d + [(0, None)], method="highs")
    if res.status != 0 or res.x[-1] <= 0:
        raise InvalidInput("initial polyhedron has empty interior or is unbounded")
    return res.x[:d]
