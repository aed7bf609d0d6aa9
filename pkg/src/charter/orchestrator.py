"""End-to-end CHARTER runs: server aggregation, both stages and accounting.

Round indexing: the learning stage makes ``K`` gradient rounds
``k = 0 .. K-1``; round ``k`` queries the clients at ``x_k`` and its cut
produces ``x_{k+1}``, so the run yields ``K + 1`` iterates ``x_0 .. x_K``.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .client import ClientState, gradient_round, verification_estimates
from .exceptions import ConfigRejected, OracleUnavailable
from .mechanisms import PrivacyParams, charter_privacy_ledger, derive_params
from .vaidya import VaidyaConfig, run_cutting_plane

TRANSCRIPT_VERSION = 1


@dataclass(frozen=True)
class MessageRecord:
    round: int
    client: int
    stage: str
    bit_count: int


@dataclass
class RunTranscript:
    """Everything a run produced.

    ``cc_bits`` is the measured mean upload per client; ``cc_nominal`` is
    ``K d J0 + (K + 1) J1``.  They differ only when some client sent a null
    gradient message; those (round, client) pairs are listed in
    ``null_messages``.
    """

    iterates: np.ndarray
    messages: list
    server_gradients: list
    step_kinds: list
    k_star: int
    output: np.ndarray
    cc_bits: float
    cc_nominal: int
    null_messages: list
    params: object
    ledger: object
    seed: int
    config: dict = field(default_factory=dict)
    loss_estimates: Optional[np.ndarray] = None
    excess_risk: Optional[float] = None

    @property
    def K(self):
        return self.params.K

    def to_text(self):
        """Line-oriented serialization.

        ``# charter-transcript v1`` then one ``config <key> <value>`` line per
        config item, one ``msg <round> <client> <stage> <bit_count>`` line per
        upload (``stage`` is ``grad``, ``null`` or ``loss``; loss messages
        use round ``-1``), and a final
        ``summary <k_star> <cc_bits> <excess_risk>`` line.
        """
        lines = [f"# charter-transcript v{TRANSCRIPT_VERSION}"]
        for key, value in self.config.items():
            lines.append(f"config {key} {_fmt(value)}")
        for rec in self.messages:
            lines.append(f"msg {rec.round} {rec.client} {rec.stage} {rec.bit_count}")
        er = "nan" if self.excess_risk is None else _fmt(self.excess_risk)
        lines.append(f"summary {self.k_star} {_fmt(self.cc_bits)} {er}")
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_transcript(text):
    """Inverse of :meth:`RunTranscript.to_text` for the header, messages and
    summary; returns ``(config, messages, summary)``."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# charter-transcript v"):
        raise ValueError("not a transcript")
    config, messages, summary = {}, [], None
    for line in lines[1:]:
        tag, *rest = line.split(" ")
        if tag == "config":
            config[rest[0]] = " ".join(rest[1:])
        elif tag == "msg":
            messages.append(MessageRecord(int(rest[0]), int(rest[1]), rest[2], int(rest[3])))
        elif tag == "summary":
            summary = {"k_star": int(rest[0]), "cc_bits": float(rest[1]), "excess_risk": float(rest[2])}
    return config, messages, summary


def aggregate_gradients(messages):
    """Server mean of the decoded payloads of non-null messages (or None)."""
    payloads = [m.payload for m in messages if not m.is_null]
    if not payloads:
        return None
    return np.mean(payloads, axis=0)


def select_k_star(loss_payloads):
    """Average per-iterate loss estimates over clients and return the argmin
    (lowest index on ties)."""
    avg = np.mean(np.atleast_2d(loss_payloads), axis=0)
    return int(np.argmin(avg)), avg


def excess_risk(problem, point):
    """``L(point) - L*`` for problems with a true-loss oracle."""
    try:
        value = problem.true_loss(np.asarray(point, dtype=float))
        best = problem.L_star
    except NotImplementedError:
        raise OracleUnavailable(f"{problem!r} has no true-loss oracle") from None
    return float(value - best)


def run_charter(problem, M, N, privacy, cfg=None, seed=0, *, K=None, override_n_floor=False,
                strict_fresh=False):
    """Run both CHARTER stages on ``problem`` with ``M`` clients of ``N``
    points each and return a :class:`RunTranscript`.

    ``K`` overrides the iteration count formula.  Unless
    ``override_n_floor``, ``N`` must reach the fresh-sample concentration
    floor ``24 K log(10 M (K+1) / delta_err)``.
    """
    cfg = cfg or VaidyaConfig()
    if not isinstance(privacy, PrivacyParams):
        privacy = PrivacyParams(privacy)
    params = derive_params(problem.d, M, N, problem.diameter, problem.sigma_g, problem.sigma_f,
                           cfg.gamma, privacy, K=K)
    if N < params.n_floor and not override_n_floor:
        raise ConfigRejected(f"N={N} is below the floor {math.ceil(params.n_floor)} for K={params.K}, M={M}")
    ledger = charter_privacy_ledger(params, privacy)
    cfg = dataclasses.replace(cfg, K=params.K)

    clients = [ClientState.from_problem(problem, m, N, seed) for m in range(M)]
    records, server_grads, nulls = [], [], []

    def provider(x, k):
        msgs = [gradient_round(c, problem, x, k, params, strict=strict_fresh) for c in clients]
        for msg in msgs:
            records.append(MessageRecord(k, msg.client, "null" if msg.is_null else "grad", msg.bit_count))
            if msg.is_null:
                nulls.append((k, msg.client))
        g = aggregate_gradients(msgs)
        server_grads.append(g)
        return g

    result = run_cutting_plane(problem.domain(), cfg, provider)
    iterates = result.iterates

    loss_msgs = [verification_estimates(c, problem, iterates, params) for c in clients]
    for msg in loss_msgs:
        records.append(MessageRecord(-1, msg.client, "loss", msg.bit_count))
    k_star, avg = select_k_star([m.payload for m in loss_msgs])

    cc_bits = sum(r.bit_count for r in records) / M
    config = {
        "problem": getattr(problem, "name", type(problem).__name__),
        "d": problem.d, "M": M, "N": N, "K": params.K,
        "eps_dp": privacy.eps_dp, "delta_dp": privacy.delta_dp, "delta_err": privacy.delta_err,
        "gamma": cfg.gamma, "eta": cfg.eta, "center_tol": cfg.center_tol,
        "J0": params.J0, "J1": params.J1, "seed": seed,
    }
    transcript = RunTranscript(
        iterates=iterates, messages=records, server_gradients=server_grads,
        step_kinds=[s.kind for s in result.steps], k_star=k_star, output=iterates[k_star],
        cc_bits=cc_bits, cc_nominal=params.predicted_cc(), null_messages=nulls, params=params,
        ledger=ledger, seed=seed, config=config, loss_estimates=avg,
    )
    try:
        transcript.excess_risk = excess_risk(problem, transcript.output)
    except OracleUnavailable:
        pass
    return transcript
