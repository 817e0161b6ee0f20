"""Finite-space simulator for the Shannon-secrecy argument.

Models a message space with a prior, a key-indexed family of injective
mappings into a ciphertext space of the same size as the key space, and an
optional invariant numeric payload. With uniform keys and a Latin-square
mapping the posterior Pr(M=m|C=c) equals the prior and the mutual
information I(M;C,N) vanishes; skewed keys or non-Latin mappings leak, and
the simulator must measure that leakage rather than assume it away.

The payload is modeled as drawn conditionally on the message and revealed
unchanged. I(M;C,N)=0 additionally requires the payload to carry no
information about the message, so reports surface I(M;N) separately instead
of presuming it zero.

All information quantities are in bits. Exact enumeration is capped at
|M|*|K|*|N| <= 10^7 cells; larger systems must use the Monte-Carlo path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ENUMERATION_CELL_CAP = 10_000_000

_PROB_TOL = 1e-12


class SecrecyModelError(ValueError):
    pass


@dataclass
class SecrecySystem:
    """Finite message/key/ciphertext spaces with an optional payload."""

    messages: list[str]
    prior: np.ndarray
    keys: list[str]
    key_dist: np.ndarray
    ciphertexts: list[str]
    mapping: np.ndarray  # mapping[k, m] = ciphertext index
    payload_values: list[str] = field(default_factory=list)
    payload_cond: np.ndarray | None = None  # payload_cond[m, n] = Pr(N=n | M=m)

    def __post_init__(self):
        self.prior = np.asarray(self.prior, dtype=float)
        self.key_dist = np.asarray(self.key_dist, dtype=float)
        self.mapping = np.asarray(self.mapping, dtype=int)
        if self.payload_cond is not None:
            self.payload_cond = np.asarray(self.payload_cond, dtype=float)

    @property
    def n_messages(self) -> int:
        return len(self.messages)

    @property
    def n_keys(self) -> int:
        return len(self.keys)

    @property
    def n_ciphertexts(self) -> int:
        return len(self.ciphertexts)

    @property
    def has_payload(self) -> bool:
        return self.payload_cond is not None

    def validate(self) -> None:
        if self.n_keys != self.n_ciphertexts:
            raise SecrecyModelError(
                f"|K| must equal |C|: got {self.n_keys} keys, {self.n_ciphertexts} ciphertexts"
            )
        if self.prior.shape != (self.n_messages,):
            raise SecrecyModelError("prior length must match number of messages")
        if self.key_dist.shape != (self.n_keys,):
            raise SecrecyModelError("key distribution length must match number of keys")
        for name, dist in (("prior", self.prior), ("key_dist", self.key_dist)):
            if np.any(dist < 0):
                raise SecrecyModelError(f"{name} has negative entries")
            if abs(float(dist.sum()) - 1.0) > _PROB_TOL:
                raise SecrecyModelError(f"{name} does not sum to 1 within {_PROB_TOL}")
        if self.mapping.shape != (self.n_keys, self.n_messages):
            raise SecrecyModelError("mapping must be a |K| x |M| table")
        if self.mapping.min() < 0 or self.mapping.max() >= self.n_ciphertexts:
            raise SecrecyModelError("mapping entries must index the ciphertext space")
        for k in range(self.n_keys):
            row = self.mapping[k]
            if len(set(row.tolist())) != self.n_messages:
                raise SecrecyModelError(f"mapping for key {self.keys[k]!r} is not injective")
        if self.payload_cond is not None:
            if self.payload_cond.shape != (self.n_messages, len(self.payload_values)):
                raise SecrecyModelError("payload table must be |M| x |N|")
            if np.any(self.payload_cond < 0):
                raise SecrecyModelError("payload conditional has negative entries")
            sums = self.payload_cond.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > _PROB_TOL):
                raise SecrecyModelError("each payload conditional row must sum to 1")
        cells = self.n_messages * self.n_keys * max(1, len(self.payload_values))
        if cells > ENUMERATION_CELL_CAP:
            raise SecrecyModelError(
                f"system has {cells} enumeration cells, exceeding the "
                f"{ENUMERATION_CELL_CAP} exact-path cap; use the Monte-Carlo path"
            )

    def is_latin_square(self) -> bool:
        """Each ciphertext appears exactly once per message column."""
        if self.n_messages != self.n_ciphertexts:
            return False
        for m in range(self.n_messages):
            if len(set(self.mapping[:, m].tolist())) != self.n_keys:
                return False
        return True

    # Joint distributions, enumerated exactly.

    def channel(self) -> np.ndarray:
        """Pr(C=c | M=m) as an |M| x |C| array, marginalizing the key."""
        out = np.zeros((self.n_messages, self.n_ciphertexts))
        for k in range(self.n_keys):
            out[np.arange(self.n_messages), self.mapping[k]] += self.key_dist[k]
        return out

    def joint_mc(self) -> np.ndarray:
        """Pr(M=m, C=c)."""
        return self.prior[:, None] * self.channel()

    def joint_mcn(self) -> np.ndarray:
        """Pr(M=m, C=c, N=n); payload independent of the key given the message."""
        if self.payload_cond is None:
            raise SecrecyModelError("system has no payload distribution")
        return self.joint_mc()[:, :, None] * self.payload_cond[:, None, :]

    def to_dict(self) -> dict:
        d = {
            "messages": self.messages,
            "prior": self.prior.tolist(),
            "keys": self.keys,
            "key_dist": self.key_dist.tolist(),
            "ciphertexts": self.ciphertexts,
            "mapping": self.mapping.tolist(),
        }
        if self.payload_cond is not None:
            d["payload"] = {
                "values": self.payload_values,
                "cond": self.payload_cond.tolist(),
            }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SecrecySystem":
        payload = d.get("payload") or {}
        sys = cls(
            messages=list(d["messages"]),
            prior=d["prior"],
            keys=list(d["keys"]),
            key_dist=d["key_dist"],
            ciphertexts=list(d["ciphertexts"]),
            mapping=d["mapping"],
            payload_values=list(payload.get("values", [])),
            payload_cond=payload.get("cond"),
        )
        sys.validate()
        return sys

    @classmethod
    def load(cls, path: str | Path) -> "SecrecySystem":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))


def posterior(sys: SecrecySystem, m: int, c: int) -> float:
    """Exact Bayes posterior Pr(M=m | C=c) by enumeration over keys."""
    sys.validate()
    joint = sys.joint_mc()
    pc = float(joint[:, c].sum())
    if pc <= 0.0:
        raise SecrecyModelError(
            f"Pr(C={sys.ciphertexts[c]!r}) = 0; posterior is undefined"
        )
    return float(joint[m, c]) / pc


def max_posterior_deviation(sys: SecrecySystem) -> float:
    """max over (m, c) with Pr(C=c)>0 of |Pr(M=m|C=c) - Pr(M=m)|."""
    sys.validate()
    joint = sys.joint_mc()
    pc = joint.sum(axis=0)
    dev = 0.0
    for c in range(sys.n_ciphertexts):
        if pc[c] <= 0.0:
            continue
        post = joint[:, c] / pc[c]
        dev = max(dev, float(np.max(np.abs(post - sys.prior))))
    return dev


def _mi_bits(joint: np.ndarray) -> float:
    """I(X;Y) for a 2-D joint table, clamped at zero against rounding."""
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    mask = joint > 0
    outer = px[:, None] * py[None, :]
    total = float(np.sum(joint[mask] * np.log2(joint[mask] / outer[mask])))
    return max(total, 0.0)


def mutual_information(sys: SecrecySystem, include_payload: bool = False) -> float:
    """Exact I(M;C), or I(M;C,N) when the payload is included."""
    sys.validate()
    if not include_payload:
        return _mi_bits(sys.joint_mc())
    joint = sys.joint_mcn()
    flat = joint.reshape(sys.n_messages, -1)  # (C, N) as one composite variable
    return _mi_bits(flat)


def payload_information(sys: SecrecySystem) -> float:
    """I(M;N): how much the invariant payload alone says about the message."""
    sys.validate()
    if sys.payload_cond is None:
        return 0.0
    joint = sys.prior[:, None] * sys.payload_cond
    return _mi_bits(joint)


def entropy_bits(dist: np.ndarray) -> float:
    dist = np.asarray(dist, dtype=float)
    mask = dist > 0
    return float(-np.sum(dist[mask] * np.log2(dist[mask])))


def plugin_bias_bound(n_x: int, n_y: int, trials: int) -> float:
    """First-order positive bias of the plug-in MI estimator, in bits."""
    return (n_x * n_y - n_x - n_y + 1) / (2.0 * trials * math.log(2.0))


def simulate_empirical(
    sys: SecrecySystem, trials: int, seed: int | None = None,
    include_payload: bool = False,
) -> float:
    """Plug-in MI estimate from sampled (message, key[, payload]) draws.

    The plug-in estimator is positively biased by about
    (|M||C'|-|M|-|C'|+1)/(2*trials*ln 2) bits where C' is the (composite)
    output alphabet; see plugin_bias_bound. A single trial returns 0 by
    convention (the one-cell joint carries no estimable dependence).
    """
    sys.validate()
    if trials < 1:
        raise SecrecyModelError("trials must be >= 1")
    if trials == 1:
        return 0.0
    rng = np.random.default_rng(seed)
    m = rng.choice(sys.n_messages, size=trials, p=sys.prior)
    k = rng.choice(sys.n_keys, size=trials, p=sys.key_dist)
    c = sys.mapping[k, m]
    if include_payload:
        if sys.payload_cond is None:
            raise SecrecyModelError("system has no payload distribution")
        n_payload = len(sys.payload_values)
        n = np.empty(trials, dtype=int)
        for mi in range(sys.n_messages):
            sel = m == mi
            count = int(sel.sum())
            if count:
                n[sel] = rng.choice(n_payload, size=count, p=sys.payload_cond[mi])
        out = c * n_payload + n
        n_out = sys.n_ciphertexts * n_payload
    else:
        out = c
        n_out = sys.n_ciphertexts
    counts = np.bincount(m * n_out + out, minlength=sys.n_messages * n_out)
    joint = counts.reshape(sys.n_messages, n_out) / trials
    return _mi_bits(joint)


def latin_square_system(
    size: int,
    prior=None,
    key_dist=None,
    seed: int | None = None,
    payload_values: int = 0,
    payload_independent: bool = True,
) -> SecrecySystem:
    """Build a |M|=|K|=|C|=size system with a (shuffled) Latin-square mapping."""
    rng = np.random.default_rng(seed)
    base = (np.arange(size)[:, None] + np.arange(size)[None, :]) % size
    rows = rng.permutation(size)
    cols = rng.permutation(size)
    symbols = rng.permutation(size)
    mapping = symbols[base[rows][:, cols]]
    prior = np.full(size, 1.0 / size) if prior is None else np.asarray(prior, dtype=float)
    key_dist = (
        np.full(size, 1.0 / size) if key_dist is None else np.asarray(key_dist, dtype=float)
    )
    payload_cond = None
    values: list[str] = []
    if payload_values > 0:
        values = [f"n{i}" for i in range(payload_values)]
        if payload_independent:
            row = rng.dirichlet(np.ones(payload_values))
            payload_cond = np.tile(row, (size, 1))
        else:
            payload_cond = rng.dirichlet(np.ones(payload_values), size=size)
    sys = SecrecySystem(
        messages=[f"m{i}" for i in range(size)],
        prior=prior,
        keys=[f"k{i}" for i in range(size)],
        key_dist=key_dist,
        ciphertexts=[f"c{i}" for i in range(size)],
        mapping=mapping,
        payload_values=values,
        payload_cond=payload_cond,
    )
    sys.validate()
    return sys


def random_injection_system(size: int, seed: int | None = None) -> SecrecySystem:
    """Per-key random bijections without the Latin-square column property."""
    rng = np.random.default_rng(seed)
    mapping = np.stack([rng.permutation(size) for _ in range(size)])
    sys = SecrecySystem(
        messages=[f"m{i}" for i in range(size)],
        prior=np.full(size, 1.0 / size),
        keys=[f"k{i}" for i in range(size)],
        key_dist=np.full(size, 1.0 / size),
        ciphertexts=[f"c{i}" for i in range(size)],
        mapping=mapping,
    )
    sys.validate()
    return sys


def report(sys: SecrecySystem, trials: int = 0, seed: int | None = None) -> dict:
    """Aggregate secrecy report for a system, optionally with a Monte-Carlo check."""
    sys.validate()
    out = {
        "sizes": {
            "messages": sys.n_messages,
            "keys": sys.n_keys,
            "ciphertexts": sys.n_ciphertexts,
            "payload": len(sys.payload_values),
        },
        "latin_square": sys.is_latin_square(),
        "max_posterior_deviation": max_posterior_deviation(sys),
        "mi_message_ciphertext_bits": mutual_information(sys, include_payload=False),
        "message_entropy_bits": entropy_bits(sys.prior),
    }
    if sys.has_payload:
        out["mi_message_ciphertext_payload_bits"] = mutual_information(sys, include_payload=True)
        out["mi_message_payload_bits"] = payload_information(sys)
        out["payload_note"] = (
            "I(M;C,N)=0 requires the payload to be independent of the message; "
            "mi_message_payload_bits reports the dependence actually present."
        )
    if trials > 0:
        out["empirical"] = {
            "trials": trials,
            "mi_estimate_bits": simulate_empirical(sys, trials, seed=seed),
            "plugin_bias_bound_bits": plugin_bias_bound(
                sys.n_messages, sys.n_ciphertexts, trials
            ),
            "note": "plug-in estimates are positively biased by about the bound",
        }
    return out
