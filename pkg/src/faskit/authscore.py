"""Authentication-score fusion and the Paillier-backed encrypted variant.

Local mode: the gateway fuses fresh modality scores into a weighted mean,
renormalized over whichever modalities are actually present, and gates key
usage on a threshold (ties pass). Missing or stale modalities simply drop
out, so losing a device costs nothing but its weight.

Cloud mode: scores are quantized to integers 0..100 (multiply by 100,
round half up), Paillier-encrypted on the gateway, and aggregated by the
scoring service as a homomorphic weighted sum. The service only ever
touches ciphertexts; the gateway decrypts, divides by 100 * sum(weights),
and gates locally. Agreement with local fusion is within the 0.01
quantization error.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum

from .algebra import is_probable_prime, mod_inv
from .errors import ParameterError

SCORE_SCALE = 100          # quantization: score 0..1 -> integer 0..100
WEIGHT_SCALE = 10 ** 6     # integerized fusion weights for the cloud path


class Modality(str, Enum):
    GAIT = "gait"
    LOCATION = "location"
    HEARTBEAT = "heartbeat"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ModalityReading:
    """One behaviometric/contextual similarity score from one device."""

    device_id: str
    modality: Modality
    score: float
    timestamp: int

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ParameterError(f"score must be in [0,1], got {self.score}")

    def to_json(self) -> dict:
        return {"device_id": self.device_id, "modality": self.modality.value,
                "score": self.score, "timestamp": self.timestamp}


@dataclass(frozen=True)
class FusionPolicy:
    """Per-modality weights, gate threshold, and reading freshness window."""

    weights: dict
    theta: float = 0.7
    staleness_max: int = 10

    def __post_init__(self):
        if not self.weights or all(w <= 0 for w in self.weights.values()):
            raise ParameterError("policy needs at least one positive weight")
        if any(w < 0 for w in self.weights.values()):
            raise ParameterError("weights must be non-negative")
        if not 0.0 <= self.theta <= 1.0:
            raise ParameterError(f"theta must be in [0,1], got {self.theta}")

    def integer_weights(self, modalities=None) -> dict:
        """Weights scaled to integers for the homomorphic path."""
        items = self.weights.items()
        if modalities is not None:
            items = [(m, w) for m, w in items if m in set(modalities)]
        return {m: round(w * WEIGHT_SCALE) for m, w in items}

    def to_json(self) -> dict:
        return {"weights": {m.value: w for m, w in self.weights.items()},
                "theta": self.theta, "staleness_max": self.staleness_max}

    @classmethod
    def from_json(cls, obj: dict) -> "FusionPolicy":
        return cls(weights={Modality(k): float(v)
                            for k, v in obj["weights"].items()},
                   theta=float(obj.get("theta", 0.7)),
                   staleness_max=int(obj.get("staleness_max", 10)))


@dataclass(frozen=True)
class AuthScore:
    """The fused confidence that the present devices belong to the user."""

    value: float
    contributing: frozenset
    mode: str = "local"


def quantize_score(score: float) -> int:
    """Normative quantization for the cloud path: x100, round half up."""
    return math.floor(score * SCORE_SCALE + 0.5)


def _fresh_by_modality(readings, policy: FusionPolicy, now: int):
    """Fresh readings grouped per weighted modality; each modality
    contributes the mean of its fresh readings."""
    grouped: dict = {}
    for r in readings:
        if now - r.timestamp > policy.staleness_max:
            continue
        if policy.weights.get(r.modality, 0) <= 0:
            continue
        grouped.setdefault(r.modality, []).append(r)
    return grouped


def modality_means(readings, policy: FusionPolicy, now: int) -> dict:
    """Per-modality mean of the fresh readings for weighted modalities.

    This is the intermediate the gateway quantizes and encrypts on the
    cloud path; fuse_local is its weighted renormalized mean.
    """
    grouped = _fresh_by_modality(readings, policy, now)
    return {m: sum(r.score for r in g) / len(g) for m, g in grouped.items()}


def fuse_local(readings, policy: FusionPolicy, now: int) -> AuthScore:
    """Staleness-filtered weighted mean, renormalized over what is present.

    An empty reading set fuses to 0 (and therefore fails any positive
    gate threshold).
    """
    grouped = _fresh_by_modality(readings, policy, now)
    if not grouped:
        return AuthScore(value=0.0, contributing=frozenset(), mode="local")
    num = 0.0
    den = 0.0
    contributing = set()
    for modality, group in grouped.items():
        w = policy.weights[modality]
        num += w * (sum(r.score for r in group) / len(group))
        den += w
        contributing.update(r.device_id for r in group)
    return AuthScore(value=num / den, contributing=frozenset(contributing),
                     mode="local")


def gate(score: AuthScore, policy: FusionPolicy) -> bool:
    """True iff the fused value reaches the threshold; ties pass."""
    return score.value >= policy.theta


# ---------------------------------------------------------------------------
# Paillier cryptosystem (additively homomorphic), g = n + 1
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhePublicKey:
    n: int
    g: int

    @property
    def n_sq(self) -> int:
        return self.n * self.n


@dataclass(frozen=True)
class PheKeypair:
    public: PhePublicKey
    lam: int    # lcm(p-1, q-1)
    mu: int     # inverse of L(g^lam mod n^2) mod n


PheCiphertext = int


def _gen_prime(bits: int, rng: random.Random) -> int:
    while True:
        candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if is_probable_prime(candidate):
            return candidate


def phe_keygen(bits: int, rng: random.Random) -> PheKeypair:
    """Standard Paillier keypair with an n of roughly `bits` bits.

    bits >= 16 is accepted for test-scale keys; use 2048 in production.
    """
    if bits < 16:
        raise ParameterError(f"modulus size must be >= 16 bits, got {bits}")
    half = bits // 2
    p = _gen_prime(half, rng)
    q = _gen_prime(bits - half, rng)
    while q == p:
        q = _gen_prime(bits - half, rng)
    return keypair_from_primes(p, q)


def keypair_from_primes(p: int, q: int) -> PheKeypair:
    if p == q:
        raise ParameterError("Paillier primes must differ")
    if not (is_probable_prime(p) and is_probable_prime(q)):
        raise ParameterError("Paillier factors must be prime")
    n = p * q
    g = n + 1
    lam = (p - 1) * (q - 1) // math.gcd(p - 1, q - 1)
    mu = mod_inv(_paillier_l(pow(g, lam, n * n), n), n)
    return PheKeypair(public=PhePublicKey(n=n, g=g), lam=lam, mu=mu)


def _paillier_l(u: int, n: int) -> int:
    return (u - 1) // n


def phe_encrypt(m: int, public: PhePublicKey, rng: random.Random,
                rho: int | None = None) -> PheCiphertext:
    """Enc(m; rho) = g^m * rho^n mod n^2 with rho random coprime to n.

    Passing rho explicitly is a test hook for known-answer checks.
    """
    if not 0 <= m < public.n:
        raise ParameterError(f"plaintext must lie in [0, {public.n})")
    if rho is None:
        rho = rng.randrange(1, public.n)
        while math.gcd(rho, public.n) != 1:
            rho = rng.randrange(1, public.n)
    elif math.gcd(rho, public.n) != 1:
        raise ParameterError("rho must be coprime to n")
    n_sq = public.n_sq
    return pow(public.g, m, n_sq) * pow(rho, public.n, n_sq) % n_sq


def phe_add(c1: PheCiphertext, c2: PheCiphertext,
            public: PhePublicKey) -> PheCiphertext:
    """Ciphertext of the plaintext sum: Enc(m1) * Enc(m2) mod n^2."""
    return c1 * c2 % public.n_sq


def phe_scale(c: PheCiphertext, k: int, public: PhePublicKey) -> PheCiphertext:
    """Ciphertext of k times the plaintext: c^k mod n^2."""
    if k < 0:
        raise ParameterError("scaling factor must be non-negative")
    return pow(c, k, public.n_sq)


def phe_decrypt(c: PheCiphertext, keypair: PheKeypair) -> int:
    n = keypair.public.n
    if not 0 <= c < keypair.public.n_sq:
        raise ParameterError("ciphertext out of range")
    return _paillier_l(pow(c, keypair.lam, keypair.public.n_sq), n) \
        * keypair.mu % n


def fuse_encrypted(encrypted_scores: dict, integer_weights: dict,
                   public: PhePublicKey) -> PheCiphertext:
    """Homomorphic weighted sum of the encrypted quantized scores.

    Computed entirely on ciphertexts: the scoring service never decrypts.
    The gateway later divides the decrypted value by
    SCORE_SCALE * sum(weights) to normalize.
    """
    weights = {m: w for m, w in integer_weights.items()
               if m in encrypted_scores}
    if sum(weights.values()) <= 0:
        raise ParameterError("weight sum over present modalities is zero")
    acc = 1  # multiplicative identity = Enc(0; 1)
    for modality, c in encrypted_scores.items():
        w = weights.get(modality, 0)
        if w:
            acc = phe_add(acc, phe_scale(c, w, public), public)
    return acc


def normalize_fused(decrypted: int, integer_weights: dict) -> float:
    """Map the decrypted weighted sum back to a score in [0, 1]."""
    total = sum(integer_weights.values())
    if total <= 0:
        raise ParameterError("weight sum is zero")
    return decrypted / (SCORE_SCALE * total)
