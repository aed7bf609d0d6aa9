"""Clipping, Gaussian noise, stochastic quantization and privacy accounting.

Also holds the parameter calculator that turns problem size and privacy
targets into iteration count, clip radii, noise levels and quantizer
settings, and the per-stage privacy ledger for a CHARTER run.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import check_open_unit, check_positive
from .exceptions import InvalidBudget, InvalidInput, LedgerViolation, PrivacyBudgetTooLarge

# -------------------------------------------------------------------- clipping


def clip(v, G):
    """Scale ``v`` onto the l2 ball of radius ``G`` if it lies outside.

    Works row-wise on 2-d input.
    """
    v = np.asarray(v, dtype=float)
    if not G > 0:
        raise InvalidInput("clip radius must be positive")
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    scale = np.minimum(1.0, G / np.where(norms > 0, norms, 1.0))
    return v * scale


# --------------------------------------------------------- Gaussian mechanism


def gaussian_variance(sensitivity, eps, delta):
    """Per-coordinate variance ``2 log(5/(4 delta)) sensitivity^2 / eps^2``."""
    if not eps > 0:
        raise InvalidBudget(f"eps must be positive, got {eps}")
    if not 0 < delta < 1:
        raise InvalidBudget(f"delta must lie in (0, 1), got {delta}")
    return 2.0 * math.log(5.0 / (4.0 * delta)) * sensitivity**2 / eps**2


def gaussian_mechanism(v, sensitivity, eps, delta, rng, ledger=None, label="gaussian"):
    """Release ``v`` plus i.i.d. Gaussian noise calibrated for (eps, delta)-DP."""
    var = gaussian_variance(sensitivity, eps, delta)
    v = np.asarray(v, dtype=float)
    out = v + math.sqrt(var) * rng.standard_normal(v.shape)
    if ledger is not None:
        ledger.record(label, eps, delta)
    return out


# ------------------------------------------------------------ accounting


def amplify_by_subsampling(eps, delta, k, N):
    """Privacy of an (eps, delta)-DP mechanism run on k of N points drawn
    without replacement: ``((e - 1) k eps / N, k delta / N)``."""
    if not 0 <= eps < 1:
        raise InvalidBudget(f"subsampling amplification needs eps in [0, 1), got {eps}")
    if not 0 <= delta < 1:
        raise InvalidBudget(f"delta must lie in [0, 1), got {delta}")
    if not 0 < k < N:
        raise InvalidInput(f"need 0 < k < N, got k={k}, N={N}")
    return (math.e - 1.0) * k * eps / N, k * delta / N


def advanced_composition(eps, delta, k, tilde_delta):
    """Budget of the k-fold adaptive composition of (eps, delta)-DP mechanisms.

    Returns ``(eps_total, delta_total)`` with
    ``delta_total = 1 - (1 - delta)^k (1 - tilde_delta)``.
    """
    if not eps > 0:
        raise InvalidBudget(f"eps must be positive, got {eps}")
    if not 0 <= delta <= 1:
        raise InvalidBudget(f"delta must lie in [0, 1], got {delta}")
    if not 0 < tilde_delta <= 1:
        raise InvalidBudget(f"tilde_delta must lie in (0, 1], got {tilde_delta}")
    k = int(k)
    if k < 1:
        raise InvalidInput("k must be at least 1")
    linear = k * eps
    em1 = math.expm1(eps)
    inner = min(math.e + math.sqrt(k * eps**2) / tilde_delta, 1.0 / tilde_delta)
    strong = k * em1 * eps / (em1 + 2.0) + eps * math.sqrt(2.0 * k * math.log(inner))
    if delta < 1 and tilde_delta < 1:
        delta_total = -math.expm1(k * math.log1p(-delta) + math.log1p(-tilde_delta))
    else:
        delta_total = 1.0
    return min(linear, strong), delta_total


# ------------------------------------------------------------ quantization


def quantizer_grid(D, J):
    """The ``2**J`` equally spaced levels ``-D = r_1 < ... < r_{2^J} = D``."""
    return np.linspace(-D, D, 2**J)


def quantize_codes(w, D, J, rng):
    """Integer level indices (0 .. 2**J - 1) from randomized rounding.

    Each coordinate is clipped to [-D, D] and rounded to one of the two
    enclosing levels with probabilities that make the rounding unbiased.
    """
    if J < 1:
        raise InvalidInput("J must be at least 1")
    if not D > 0:
        raise InvalidInput("D must be positive")
    w = np.clip(np.asarray(w, dtype=float), -D, D)
    top = 2**J - 1
    pos = (w + D) * (top / (2.0 * D))
    lo = np.clip(np.floor(pos), 0, top - 1)
    frac = np.clip(pos - lo, 0.0, 1.0)
    up = rng.random(w.shape) < frac
    return (lo + up).astype(np.int64)


def decode(codes, D, J):
    """Map level indices back to grid values."""
    top = 2**J - 1
    codes = np.asarray(codes)
    # exact endpoints so that a clipped +-D round-trips bit for bit
    return np.where(codes == top, D, -D + codes * (2.0 * D / top))


def stochastic_quantize(w, D, J, rng):
    """Unbiased randomized rounding of ``clip(w, -D, D)`` onto a J-bit grid."""
    return decode(quantize_codes(w, D, J, rng), D, J)


# ------------------------------------------------------- parameter setting


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy target and failure probability.

    ``eps_dp = inf`` selects non-private mode (no noise, no ledger).
    """

    eps_dp: float
    delta_dp: float = 1e-5
    delta_err: float = 0.1

    def __post_init__(self):
        check_positive(self.eps_dp, "eps_dp", allow_inf=True)
        check_open_unit(self.delta_dp, "delta_dp")
        check_open_unit(self.delta_err, "delta_err")

    @property
    def private(self):
        return math.isfinite(self.eps_dp)


@dataclass(frozen=True)
class DerivedParams:
    K: int
    G0: float
    G1: float
    sigma0_sq: float
    sigma1_sq: float
    D0: float
    D1: float
    J0: int
    J1: int
    d: int
    M: int
    N: int
    R: float
    sigma_g: float
    sigma_f: float
    gamma: float
    eps_dp: float
    delta_dp: float
    delta_err: float

    @property
    def sigma0(self):
        return math.sqrt(self.sigma0_sq)

    @property
    def sigma1(self):
        return math.sqrt(self.sigma1_sq)

    @property
    def batch_size(self):
        """Per-round sample count, ``floor(N / 3K)`` (at least 1), so that
        ``3 K T / N <= 1`` holds for every fresh count ``T``."""
        return max(1, self.N // (3 * self.K))

    @property
    def n_learning(self):
        """Size of the learning split, ``floor(2N/3)``."""
        return (2 * self.N) // 3

    @property
    def n_verification(self):
        return self.N - self.n_learning

    @property
    def n_floor(self):
        """Minimum N under which the fresh-sample count concentrates."""
        return 24 * self.K * math.log(10 * self.M * (self.K + 1) / self.delta_err)

    def predicted_cc(self):
        """Upload bits per client: ``K d J0 + (K + 1) J1``."""
        return self.K * self.d * self.J0 + (self.K + 1) * self.J1

    def as_dict(self):
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def iteration_count(d, M, N, gamma, sigma_g):
    return math.ceil((4.0 * d / gamma) * math.log(d * math.sqrt(M * N) / (gamma * sigma_g)))


def _bits(numer, denom):
    return max(1, math.ceil(math.log2(numer / denom)))


def derive_params(d, M, N, R, sigma_g, sigma_f, gamma, privacy, *, K=None, check_budget=True):
    """Compute iteration count, clip radii, noise and quantizer parameters.

    All logarithms are natural except the base-2 ones defining the bit
    widths.  ``K`` may be passed to override the formula (used for small
    simulations).  Bit widths are floored at 1.  In non-private mode the
    noise variances are zero and the bit widths use the ``eps -> inf`` limit.

    Raises :class:`PrivacyBudgetTooLarge` when ``eps_dp >= 1.5 / sqrt(K)``.
    """
    d = check_positive(d, "d", integer=True)
    M = check_positive(M, "M", integer=True)
    N = check_positive(N, "N", integer=True)
    for name, val in [("R", R), ("sigma_g", sigma_g), ("sigma_f", sigma_f)]:
        check_positive(val, name)
    check_open_unit(gamma, "gamma")
    if not isinstance(privacy, PrivacyParams):
        raise InvalidInput("privacy must be a PrivacyParams instance")

    if K is None:
        K = iteration_count(d, M, N, gamma, sigma_g)
    K = check_positive(int(K), "K", integer=True)
    eps, delta, derr = privacy.eps_dp, privacy.delta_dp, privacy.delta_err
    if check_budget and privacy.private and eps >= 1.5 / math.sqrt(K):
        raise PrivacyBudgetTooLarge(f"eps_dp={eps} must be below 1.5/sqrt(K)={1.5 / math.sqrt(K):.6g} (K={K})")

    tail = math.sqrt(2.0 * math.log(4.0 * M * N))
    G0 = 1.0 + sigma_g * tail
    G1 = R + sigma_f * tail
    if privacy.private:
        sigma0_sq = 1080.0 * G0**2 * math.log(2.5 / delta) ** 2 * K / (N**2 * eps**2)
        sigma1_sq = 40.0 * G1**2 * math.log(2.5 * K / delta) ** 2 * K / (N**2 * eps**2)
    else:
        sigma0_sq = sigma1_sq = 0.0
    D0 = G0 + math.sqrt(sigma0_sq) * math.sqrt(32.0 * math.log(40.0 * M * K * d / derr))
    D1 = G1 + math.sqrt(sigma1_sq) * math.sqrt(2.0 * math.log(16.0 * M * K / derr))
    if privacy.private:
        J0 = _bits(2.0 * D0 * N * eps, math.sqrt(d) + sigma_g * eps * math.sqrt(N))
        J1 = _bits(2.0 * D1 * N * eps, R * math.sqrt(d) + sigma_f * eps * math.sqrt(N))
    else:
        J0 = _bits(2.0 * D0 * math.sqrt(N), sigma_g)
        J1 = _bits(2.0 * D1 * math.sqrt(N), sigma_f)
    return DerivedParams(K=K, G0=G0, G1=G1, sigma0_sq=sigma0_sq, sigma1_sq=sigma1_sq, D0=D0, D1=D1,
                         J0=J0, J1=J1, d=d, M=M, N=N, R=float(R), sigma_g=float(sigma_g),
                         sigma_f=float(sigma_f), gamma=float(gamma), eps_dp=float(eps),
                         delta_dp=float(delta), delta_err=float(derr))


# ------------------------------------------------------------------- ledger


@dataclass
class PrivacyLedger:
    """Per-mechanism privacy entries plus composed per-stage budgets.

    ``entries`` holds ``(mechanism, eps, delta, partition)`` tuples.  The two
    stages touch disjoint splits of each client's data, so the end-to-end
    budget ``composed`` is the entry-wise max of the stage budgets.
    """

    entries: list = field(default_factory=list)
    stages: dict = field(default_factory=dict)
    composed: Optional[tuple] = None

    def record(self, mechanism, eps, delta, partition=""):
        self.entries.append((mechanism, float(eps), float(delta), partition))

    def close_stage(self, stage, eps, delta):
        self.stages[stage] = (float(eps), float(delta))
        eps_all = max(e for e, _ in self.stages.values())
        delta_all = max(dl for _, dl in self.stages.values())
        self.composed = (eps_all, delta_all)

    def lookup(self, mechanism):
        for name, eps, delta, _ in self.entries:
            if name == mechanism:
                return eps, delta
        raise KeyError(mechanism)


def charter_privacy_ledger(params, privacy=None):
    """Build and check the privacy chain of both CHARTER stages.

    Learning stage: the per-round Gaussian release on the batch is
    ``(eps0, delta0)``; subsampling the batch from the learning split
    amplifies it to ``(eps1, delta1)``; K-fold composition with
    ``tilde_delta = delta_dp / 2`` gives the stage budget.  Verification
    stage: each released loss value is ``(eps2, delta_dp / (2K))`` and is
    composed the same way.  Raises :class:`LedgerViolation` if a stage
    exceeds ``(eps_dp, delta_dp)``.
    """
    if privacy is None:
        privacy = PrivacyParams(params.eps_dp, params.delta_dp, params.delta_err)
    ledger = PrivacyLedger()
    if not privacy.private:
        return ledger
    eps, delta, K = privacy.eps_dp, privacy.delta_dp, params.K
    log_term = math.log(2.5 / delta)

    eps0 = eps * math.sqrt(K / (15.0 * log_term))
    delta0 = delta / 2.0
    ledger.record("learning/gaussian", eps0, delta0, "learning batch")
    # The batch is 1/(2K) of the learning split, matching the closed form
    # eps1 = (e-1) eps / 2 * sqrt(1 / (15 K log(2.5/delta))).
    eps1, delta1 = amplify_by_subsampling(eps0, delta0, 1, 2 * K)
    ledger.record("learning/subsampled", eps1, delta1, "learning split")
    eps_l, delta_l = advanced_composition(eps1, delta1, K, delta / 2.0)
    ledger.record("learning/composed", eps_l, delta_l, "learning split")
    ledger.close_stage("learning", eps_l, delta_l)

    eps2 = eps * math.sqrt(9.0 / (20.0 * K * log_term))
    delta2 = delta / (2.0 * K)
    ledger.record("verification/gaussian", eps2, delta2, "verification split")
    eps_v, delta_v = advanced_composition(eps2, delta2, K, delta / 2.0)
    ledger.record("verification/composed", eps_v, delta_v, "verification split")
    ledger.close_stage("verification", eps_v, delta_v)

    for stage, (e, dl) in ledger.stages.items():
        if e > eps * (1 + 1e-12) or dl > delta * (1 + 1e-12):
            raise LedgerViolation(f"{stage} stage spends ({e:.6g}, {dl:.3g}) > ({eps:.6g}, {delta:.3g})")
    return ledger
