"""Shamir secret sharing with Feldman-style verifiability.

The dealer samples a random degree-t polynomial f with f(0) = secret and
hands device i the share (i, f(i)). Publishing g^(coefficient) for every
coefficient lets anyone check a share against the public commitments
without learning anything about the secret. Any t+1 shares reconstruct
f(0) by Lagrange interpolation; t or fewer reveal nothing.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .algebra import GroupParams, PrimeField, Scalar, lagrange_coefficient
from .errors import ParameterError


@dataclass(frozen=True)
class ThresholdParams:
    """Corruption threshold t and device count n, with 1 <= t+1 <= n."""

    t: int
    n: int

    def __post_init__(self):
        if self.t < 0:
            raise ParameterError(f"threshold t must be >= 0, got {self.t}")
        if self.n < 1:
            raise ParameterError(f"device count n must be >= 1, got {self.n}")
        if self.t + 1 > self.n:
            raise ParameterError(
                f"need t+1 <= n, got t={self.t}, n={self.n}")


@dataclass(frozen=True)
class Share:
    """One evaluation point (index, f(index)) of the sharing polynomial.

    Indices run 1..n; index 0 would evaluate the polynomial at the secret.
    """

    index: int
    value: Scalar

    def to_json(self) -> dict:
        return {"index": self.index, "value": format(self.value, "x")}

    @classmethod
    def from_json(cls, obj: dict) -> "Share":
        return cls(index=int(obj["index"]), value=int(obj["value"], 16))


@dataclass(frozen=True)
class FeldmanCommitments:
    """Public commitments (g^a_0, ..., g^a_t) to the polynomial coefficients.

    The first entry commits to the secret itself: C_0 = g^secret.
    """

    commitments: tuple

    def __len__(self) -> int:
        return len(self.commitments)

    def to_json(self) -> list:
        return [format(c, "x") for c in self.commitments]

    @classmethod
    def from_json(cls, obj) -> "FeldmanCommitments":
        return cls(commitments=tuple(int(c, 16) for c in obj))


def _eval_poly(coeffs, x: int, q: int) -> int:
    # Horner evaluation mod q; coeffs[0] is the constant term.
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % q
    return acc


def share_secret(secret: Scalar, params: ThresholdParams, group: GroupParams,
                 rng: random.Random):
    """Split secret into n shares with threshold t+1.

    Coefficients a_1..a_t are drawn via rng.randrange(q), one call each,
    in index order; seeding (or stubbing) the rng makes the sharing
    reproducible. Returns (shares, FeldmanCommitments).
    """
    q = group.q
    if not 0 <= secret < q:
        raise ParameterError(f"secret must lie in [0, {q})")
    if params.n >= q:
        raise ParameterError(f"need n < q, got n={params.n}, q={q}")
    coeffs = [secret] + [rng.randrange(q) for _ in range(params.t)]
    shares = [Share(index=i, value=_eval_poly(coeffs, i, q))
              for i in range(1, params.n + 1)]
    commitments = FeldmanCommitments(
        commitments=tuple(pow(group.g, a, group.p) for a in coeffs))
    return shares, commitments


def verify_share(share: Share, commitments: FeldmanCommitments,
                 group: GroupParams) -> bool:
    """Check g^value == prod_k C_k^(index^k) mod p."""
    if share.index < 1:
        raise ParameterError(f"share index must be >= 1, got {share.index}")
    lhs = pow(group.g, share.value % group.q, group.p)
    rhs = 1
    e = 1  # index^k mod q, valid exponent since the C_k have order q
    for c in commitments.commitments:
        rhs = rhs * pow(c, e, group.p) % group.p
        e = e * share.index % group.q
    return lhs == rhs


def reconstruct(shares, field: PrimeField) -> Scalar:
    """Interpolate the shares at zero: returns f(0) = the shared secret.

    The caller supplies at least t+1 shares with distinct indices;
    supplying more than t+1 consistent shares is harmless.
    """
    shares = list(shares)
    if not shares:
        raise ParameterError("no shares supplied")
    indices = [s.index for s in shares]
    if len(set(indices)) != len(indices):
        raise ParameterError("duplicate share indices")
    total = 0
    for s in shares:
        lam = lagrange_coefficient(indices, s.index, field)
        total = (total + lam * s.value) % field.q
    return total
