"""Simulated CHARTER client.

A client splits its data into a learning part (2N/3 points) and a
verification part (the rest).  In each learning round it subsamples a batch
without replacement from the learning part, keeps only points never drawn
before, and sends a clipped, noised, debiased and quantized mean gradient.
In the verification stage it sends quantized, noised loss estimates for
every iterate.
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np

from .exceptions import EmptyFreshBatch, InvalidInput
from .mechanisms import clip, decode, quantize_codes


class Stage(IntEnum):
    DATA = 0
    GRADIENT = 1
    LOSS = 2


def stream(seed, client, round_, stage):
    """Independent generator for one (seed, client, round, stage) tuple."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(client), int(round_), int(stage)]))


class ClientState:
    """Local data and sampling bookkeeping of one client.

    ``seen`` marks learning-split indices drawn in any earlier round.
    """

    def __init__(self, client_id, data, seed, n_learning=None):
        data = np.asarray(data, dtype=float)
        n = data.shape[0]
        if n_learning is None:
            n_learning = (2 * n) // 3
        if not 0 < n_learning < n:
            raise InvalidInput(f"cannot split {n} points into two nonempty parts")
        self.id = int(client_id)
        self.seed = int(seed)
        perm = stream(seed, client_id, 0, Stage.DATA).permutation(n)
        self.D1 = data[perm[:n_learning]]
        self.D2 = data[perm[n_learning:]]
        self.seen = np.zeros(n_learning, dtype=bool)

    @classmethod
    def from_problem(cls, problem, client_id, N, seed):
        rng = stream(seed, client_id, 1, Stage.DATA)
        return cls(client_id, problem.sample(client_id, N, rng), seed)

    @property
    def n_seen(self):
        return int(self.seen.sum())

    def stream(self, round_, stage):
        return stream(self.seed, self.id, round_, stage)


@dataclass
class GradientMessage:
    """Quantized gradient upload.  ``codes is None`` marks a null message."""

    round: int
    client: int
    codes: Optional[np.ndarray]
    payload: Optional[np.ndarray]
    T: int
    bit_count: int

    @property
    def is_null(self):
        return self.codes is None


@dataclass
class LossMessage:
    client: int
    codes: np.ndarray
    payload: np.ndarray
    bit_count: int


def draw_batch(state, batch_size, rng):
    """Sample a batch without replacement; return (batch, fresh) index arrays
    and mark the batch as seen."""
    pool = state.D1.shape[0]
    batch = rng.choice(pool, size=min(batch_size, pool), replace=False)
    fresh = batch[~state.seen[batch]]
    state.seen[batch] = True
    return batch, fresh


def gradient_stages(problem, x, fresh_data, params, noise, K=None):
    """The three real-valued stages of the gradient pipeline.

    Returns ``(biased, private_biased, private_debiased)``.  ``noise`` is the
    standard-normal draw scaled by ``sigma0`` inside.
    """
    K = params.K if K is None else K
    N = params.N
    T = fresh_data.shape[0]
    clipped = clip(problem.grad_samples(x, fresh_data), params.G0)
    biased = (3.0 * K / N) * clipped.sum(axis=0)
    private = biased + params.sigma0 * noise
    debiased = private * (N / (3.0 * K * T))
    return biased, private, debiased


def gradient_round(state, problem, x, k, params, strict=False):
    """One learning-round upload of ``state`` at iterate ``x``.

    A round with no fresh sample yields a null message (1 bit), or raises
    :class:`EmptyFreshBatch` when ``strict``.
    """
    rng = state.stream(k, Stage.GRADIENT)
    _, fresh = draw_batch(state, params.batch_size, rng)
    T = int(fresh.size)
    if T == 0:
        if strict:
            raise EmptyFreshBatch(f"client {state.id} drew no fresh sample in round {k}")
        return GradientMessage(round=k, client=state.id, codes=None, payload=None, T=0, bit_count=1)
    noise = rng.standard_normal(problem.d)
    _, _, debiased = gradient_stages(problem, x, state.D1[fresh], params, noise)
    codes = quantize_codes(debiased, params.D0, params.J0, rng)
    return GradientMessage(round=k, client=state.id, codes=codes, payload=decode(codes, params.D0, params.J0),
                           T=T, bit_count=problem.d * params.J0)


def loss_estimates(problem, iterates, data, params):
    """``(3/N) sum_z l(x; z) 1{|l| <= G1}`` over ``data`` for each iterate.

    Losses above ``G1`` in magnitude are dropped, not clipped.
    """
    return problem.masked_loss_sums(np.atleast_2d(iterates), data, params.G1) * (3.0 / params.N)


def verification_estimates(state, problem, iterates, params):
    """Quantized private loss estimates at all iterates."""
    iterates = np.atleast_2d(iterates)
    if iterates.shape[1] != problem.d:
        raise InvalidInput("iterates have the wrong dimension")
    rng = state.stream(0, Stage.LOSS)
    est = loss_estimates(problem, iterates, state.D2, params)
    est = est + params.sigma1 * rng.standard_normal(est.shape)
    codes = quantize_codes(est, params.D1, params.J1, rng)
    return LossMessage(client=state.id, codes=codes, payload=decode(codes, params.D1, params.J1),
                       bit_count=iterates.shape[0] * params.J1)
