"""Distributed DP-SGD comparison baseline (not part of CHARTER).

Each round every client samples a batch without replacement, averages
per-sample gradients clipped at ``G0``, adds Gaussian noise and uploads the
result as ``d`` 32-bit floats.  The server averages, takes a projected step
with size ``step_size / sqrt(t + 1)`` and the output is the mean iterate.

Noise is calibrated with the same accounting functions CHARTER uses: the
per-round budget is the largest one whose subsampled, T-fold composed
budget stays within ``(eps_dp, delta_dp)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .client import Stage, stream
from .exceptions import InvalidBudget, InvalidInput
from .mechanisms import (PrivacyLedger, advanced_composition, amplify_by_subsampling, clip,
                         gaussian_variance)
from .orchestrator import excess_risk

FLOAT_BITS = 32


@dataclass
class DPSGDResult:
    output: np.ndarray
    iterates: np.ndarray
    rounds: int
    batch_size: int
    noise_std: float
    cc_bits: int
    ledger: PrivacyLedger
    excess_risk: float = float("nan")


def calibrate_round_budget(eps_dp, delta_dp, rounds, batch_size, pool):
    """Per-round ``(eps, delta)`` for the Gaussian release on one batch."""
    if batch_size >= pool:
        raise InvalidInput("batch must be smaller than the local dataset")
    ratio = batch_size / pool
    delta_r = min(0.5, delta_dp / (2.0 * rounds * ratio))

    def spent(eps_r):
        e1, d1 = amplify_by_subsampling(eps_r, delta_r, batch_size, pool)
        return advanced_composition(e1, d1, rounds, delta_dp / 2.0)

    lo, hi = 0.0, 1.0 - 1e-12
    if spent(hi)[0] <= eps_dp:
        return hi, delta_r
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid > 0 and spent(mid)[0] <= eps_dp:
            lo = mid
        else:
            hi = mid
    if lo <= 0:
        raise InvalidBudget("no positive per-round budget fits the target")
    return lo, delta_r


def run_dpsgd(problem, M, N, eps_dp=float("inf"), delta_dp=1e-5, *, rounds=100, batch_size=None,
              step_size=None, G0=None, seed=0):
    """Run the baseline and return a :class:`DPSGDResult`."""
    d = problem.d
    if batch_size is None:
        batch_size = max(1, min(N - 1, math.ceil(N / rounds)))
    if G0 is None:
        G0 = 1.0 + problem.sigma_g * math.sqrt(2.0 * math.log(4.0 * M * N))
    if step_size is None:
        step_size = problem.side / 2.0
    if step_size < 0:
        raise InvalidInput("step_size must be nonnegative")

    ledger = PrivacyLedger()
    noise_std = 0.0
    if math.isfinite(eps_dp):
        eps_r, delta_r = calibrate_round_budget(eps_dp, delta_dp, rounds, batch_size, N)
        noise_std = math.sqrt(gaussian_variance(2.0 * G0 / batch_size, eps_r, delta_r))
        ledger.record("dpsgd/gaussian", eps_r, delta_r, "batch")
        e1, d1 = amplify_by_subsampling(eps_r, delta_r, batch_size, N)
        ledger.record("dpsgd/subsampled", e1, d1, "local dataset")
        ledger.close_stage("training", *advanced_composition(e1, d1, rounds, delta_dp / 2.0))

    data = [problem.sample(m, N, stream(seed, m, 1, Stage.DATA)) for m in range(M)]
    lo = problem.center - problem.side / 2.0
    hi = problem.center + problem.side / 2.0
    x = problem.center.copy()
    iterates = [x]
    for t in range(rounds):
        uploads = []
        for m in range(M):
            rng = stream(seed, m, t, Stage.GRADIENT)
            idx = rng.choice(N, size=batch_size, replace=False)
            g = clip(problem.grad_samples(x, data[m][idx]), G0).mean(axis=0)
            uploads.append(g + noise_std * rng.standard_normal(d))
        x = np.clip(x - step_size / math.sqrt(t + 1.0) * np.mean(uploads, axis=0), lo, hi)
        iterates.append(x)
    iterates = np.array(iterates)
    output = iterates[1:].mean(axis=0) if rounds > 0 else iterates[0]
    res = DPSGDResult(output=output, iterates=iterates, rounds=rounds, batch_size=batch_size,
                      noise_std=noise_std, cc_bits=rounds * d * FLOAT_BITS, ledger=ledger)
    res.excess_risk = excess_risk(problem, output)
    return res
