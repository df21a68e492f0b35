"""Elliptic-curve keypairs, signed expiring key records, and bounded key
tables with replacement strategies.

This is a desk-scale demonstrator of the protocol mechanics, not a hardened
cryptographic implementation: arithmetic is plain Python integers (not
constant time), the default curve is a tiny toy curve whose whole group can
be enumerated, and the default digest is non-cryptographic. Every piece is
pluggable (any short Weierstrass curve, any ``bytes -> bytes`` digest), so a
real curve and hash can be dropped in without touching the protocol code.

Validity convention used throughout: a keypair or record is valid at time
``now`` iff ``now < expires_at``; at the boundary it is expired.

Record signing bytes are the fixed-width big-endian concatenation
``owner (8) | key.x (w) | key.y (w) | expires_at_millis (8)`` with
``w = ceil(bits(p) / 8)`` and ``2**63 - 1`` standing in for an infinite
expiry, so signatures are bit-reproducible across runs.
"""

from __future__ import annotations

import enum
import math
import zlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

from .errors import RecordRejectedError

Digest = Callable[[bytes], bytes]

_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _is_prime(n: int) -> bool:
    """Miller-Rabin, deterministic for anything below ~3.3e24."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class AffinePoint:
    """A finite curve point. The point at infinity is represented by None."""

    x: int
    y: int


Point = AffinePoint | None


@dataclass(frozen=True)
class CurveParams:
    """Short Weierstrass curve y^2 = x^3 + a*x + b over F_p with base point
    G of prime order n and cofactor h (carried for completeness, unused)."""

    p: int
    a: int
    b: int
    G: AffinePoint
    n: int
    h: int = 1

    def __post_init__(self):
        if self.p <= 3 or not _is_prime(self.p):
            raise ValueError(f"p must be a prime > 3, got {self.p}")
        if (4 * self.a**3 + 27 * self.b**2) % self.p == 0:
            raise ValueError("singular curve: 4a^3 + 27b^2 = 0 mod p")
        if not is_on_curve(self.G, self):
            raise ValueError(f"base point {self.G} not on curve")
        if not _is_prime(self.n):
            raise ValueError(f"subgroup order n must be prime, got {self.n}")
        if scalar_mul(self.n, self.G, self) is not None:
            raise ValueError("n*G is not the point at infinity")

    @property
    def coord_bytes(self) -> int:
        return (self.p.bit_length() + 7) // 8


def is_on_curve(P: Point, curve: CurveParams) -> bool:
    if P is None:
        return True
    return (P.y * P.y - (P.x**3 + curve.a * P.x + curve.b)) % curve.p == 0


def _require_on_curve(P: Point, curve: CurveParams) -> None:
    if not is_on_curve(P, curve):
        raise ValueError(f"point {P} is not on the curve")


def point_add(P: Point, Q: Point, curve: CurveParams) -> Point:
    """Affine group law: identity absorption, inverse pairs, chord/tangent."""
    _require_on_curve(P, curve)
    _require_on_curve(Q, curve)
    if P is None:
        return Q
    if Q is None:
        return P
    p = curve.p
    if P.x == Q.x and (P.y + Q.y) % p == 0:
        return None
    if P == Q:
        lam = (3 * P.x * P.x + curve.a) * pow(2 * P.y, -1, p) % p
    else:
        lam = (Q.y - P.y) * pow(Q.x - P.x, -1, p) % p
    x3 = (lam * lam - P.x - Q.x) % p
    y3 = (lam * (P.x - x3) - P.y) % p
    return AffinePoint(x3, y3)


def scalar_mul(s: int, P: Point, curve: CurveParams) -> Point:
    """s*P by double-and-add; 0*P is the point at infinity."""
    if s < 0:
        raise ValueError(f"scalar must be >= 0, got {s}")
    _require_on_curve(P, curve)
    result: Point = None
    addend = P
    while s:
        if s & 1:
            result = point_add(result, addend, curve)
        addend = point_add(addend, addend, curve)
        s >>= 1
    return result


def enumerate_points(curve: CurveParams) -> list[Point]:
    """All points of E(F_p) including the point at infinity. Only sensible
    for tiny demonstration curves."""
    if curve.p > 10_000:
        raise ValueError("point enumeration is limited to tiny curves")
    roots: dict[int, list[int]] = {}
    for y in range(curve.p):
        roots.setdefault(y * y % curve.p, []).append(y)
    points: list[Point] = [None]
    for x in range(curve.p):
        rhs = (x**3 + curve.a * x + curve.b) % curve.p
        for y in roots.get(rhs, ()):
            points.append(AffinePoint(x, y))
    return points


# Toy curve used as the default demonstration group; all facts about it
# (order 19, generator (5, 1)) are re-derived by enumeration in the tests.
TOY_CURVE = CurveParams(p=17, a=2, b=2, G=AffinePoint(5, 1), n=19, h=1)

_INF_MILLIS = 2**63 - 1


def _expires_millis(expires_at: float) -> int:
    if math.isinf(expires_at):
        return _INF_MILLIS
    return int(round(expires_at * 1000.0))


def point_bytes(P: AffinePoint, curve: CurveParams) -> bytes:
    w = curve.coord_bytes
    return P.x.to_bytes(w, "big") + P.y.to_bytes(w, "big")


def record_signing_bytes(
    owner: int, key: AffinePoint, expires_at: float, curve: CurveParams
) -> bytes:
    return (
        owner.to_bytes(8, "big")
        + point_bytes(key, curve)
        + _expires_millis(expires_at).to_bytes(8, "big")
    )


def default_digest(data: bytes) -> bytes:
    """Default 8-byte digest: two chained CRC-32 passes.

    Non-cryptographic by design; it only needs to make accidental and fuzzed
    mutations detectable and to be stable across runs. Pass e.g.
    ``lambda d: hashlib.sha256(d).digest()`` for a real hash.
    """
    a = zlib.crc32(data)
    b = zlib.crc32(data, a ^ 0x9E3779B9)
    return a.to_bytes(4, "big") + b.to_bytes(4, "big")


@dataclass(frozen=True)
class KeyPair:
    priv: int
    pub: AffinePoint
    issued_at: float
    expires_at: float

    def valid_at(self, now: float) -> bool:
        return now < self.expires_at


@dataclass(frozen=True)
class PublicKeyRecord:
    """Another node's public key with expiry, self-signed by its owner."""

    owner: int
    key: AffinePoint
    expires_at: float
    signature: tuple[int, int]

    def valid_at(self, now: float) -> bool:
        return now < self.expires_at


def _rand_scalar(rng, n: int) -> int:
    """Uniform scalar in [1, n-1] by rejection sampling from rng.bytes."""
    nbytes = (n.bit_length() + 7) // 8
    shift = nbytes * 8 - n.bit_length()
    while True:
        c = int.from_bytes(rng.bytes(nbytes), "big") >> shift
        if 1 <= c <= n - 1:
            return c


def keypair_from_priv(priv: int, curve: CurveParams, now: float, ttl: float) -> KeyPair:
    if not 1 <= priv <= curve.n - 1:
        raise ValueError(f"private key must be in [1, n-1], got {priv}")
    if ttl <= 0:
        raise ValueError(f"ttl must be > 0, got {ttl}")
    return KeyPair(priv, scalar_mul(priv, curve.G, curve), now, now + ttl)


def keygen(curve: CurveParams, rng, now: float, ttl: float) -> KeyPair:
    """Fresh keypair with a uniform private scalar in [1, n-1]."""
    return keypair_from_priv(_rand_scalar(rng, curve.n), curve, now, ttl)


def rotate_if_expired(
    kp: KeyPair, curve: CurveParams, rng, now: float, ttl: float
) -> KeyPair:
    """Replace the keypair once its expiry has passed; otherwise unchanged."""
    if now >= kp.expires_at:
        return keygen(curve, rng, now, ttl)
    return kp


def sign_record(
    kp: KeyPair,
    owner: int,
    key: AffinePoint,
    expires_at: float,
    curve: CurveParams,
    rng,
    digest: Digest = default_digest,
) -> tuple[int, int]:
    """Schnorr-style signature (e, s) over the canonical record bytes.

    e is the full digest of (R || message) as an integer, s = k - priv*e mod
    n. Deterministic given the rng stream the nonce k is drawn from.
    """
    msg = record_signing_bytes(owner, key, expires_at, curve)
    k = _rand_scalar(rng, curve.n)
    R = scalar_mul(k, curve.G, curve)
    e = int.from_bytes(digest(point_bytes(R, curve) + msg), "big")
    s = (k - kp.priv * e) % curve.n
    return e, s


def make_record(
    kp: KeyPair, owner: int, curve: CurveParams, rng, digest: Digest = default_digest
) -> PublicKeyRecord:
    """Package a node's current keypair as its signed public record."""
    sig = sign_record(kp, owner, kp.pub, kp.expires_at, curve, rng, digest)
    return PublicKeyRecord(owner, kp.pub, kp.expires_at, sig)


def verify_record(
    rec: PublicKeyRecord, curve: CurveParams, digest: Digest = default_digest
) -> bool:
    """True iff the signature verifies against rec.key over the canonical
    bytes of (owner, key, expires_at)."""
    if not is_on_curve(rec.key, curve) or rec.key is None:
        return False
    e, s = rec.signature
    if not (0 <= s < curve.n) or e < 0:
        return False
    R = point_add(
        scalar_mul(s, curve.G, curve),
        scalar_mul(e % curve.n, rec.key, curve),
        curve,
    )
    if R is None:
        return False
    msg = record_signing_bytes(rec.owner, rec.key, rec.expires_at, curve)
    return int.from_bytes(digest(point_bytes(R, curve) + msg), "big") == e


@lru_cache(maxsize=65536)
def _verify_cached(
    rec: PublicKeyRecord, curve: CurveParams, digest: Digest
) -> bool:
    return verify_record(rec, curve, digest)


class StrategyKind(enum.Enum):
    FRESHEST_REPLACE = "freshest_replace"
    EXPIRED_ONLY_REPLACE = "expired_only_replace"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    k1: int = 0
    k2: int = 0

    def __post_init__(self):
        if self.kind is StrategyKind.HYBRID and (self.k1 < 0 or self.k2 < 0):
            raise ValueError("hybrid partition sizes must be >= 0")


FRESHEST_REPLACE = Strategy(StrategyKind.FRESHEST_REPLACE)
EXPIRED_ONLY_REPLACE = Strategy(StrategyKind.EXPIRED_ONLY_REPLACE)


def hybrid(k1: int, k2: int) -> Strategy:
    return Strategy(StrategyKind.HYBRID, k1, k2)


class InsertOutcome(enum.Enum):
    STORED = "stored"
    REPLACED = "replaced"
    REFRESHED_OWN = "refreshed_own"
    DISCARDED = "discarded"


@dataclass(frozen=True)
class InsertResult:
    outcome: InsertOutcome
    evicted: int | None = None


PART_FRESH = 1
PART_EXPIRED_ONLY = 2


@dataclass
class KeyTable:
    """A node's bounded store of other nodes' signed key records.

    ``capacity=None`` means unbounded. For the hybrid strategy each entry is
    tagged with the partition it occupies (part 1 replaces freshest-first,
    part 2 replaces expired entries only) and k1 + k2 must equal capacity.
    The node's own keypair is never stored here.
    """

    capacity: int | None
    strategy: Strategy = FRESHEST_REPLACE
    curve: CurveParams = TOY_CURVE
    digest: Digest = default_digest
    entries: dict[int, PublicKeyRecord] = field(default_factory=dict)
    partition: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.capacity is not None and self.capacity < 0:
            raise ValueError(f"capacity must be >= 0, got {self.capacity}")
        if (
            self.strategy.kind is StrategyKind.HYBRID
            and self.capacity is not None
            and self.strategy.k1 + self.strategy.k2 != self.capacity
        ):
            raise ValueError(
                f"hybrid partitions k1+k2={self.strategy.k1 + self.strategy.k2} "
                f"must equal capacity {self.capacity}"
            )

    def __len__(self) -> int:
        return len(self.entries)

    def part_count(self, part: int) -> int:
        return sum(1 for p in self.partition.values() if p == part)


def _min_expiry_owner(table: KeyTable, owners) -> int | None:
    best: tuple[float, int] | None = None
    for owner in owners:
        key = (table.entries[owner].expires_at, owner)
        if best is None or key < best:
            best = key
    return None if best is None else best[1]


def table_insert(table: KeyTable, rec: PublicKeyRecord, now: float) -> InsertResult:
    """Insert a verified, unexpired record under the table's strategy.

    An entry for the same owner is always overwritten in place (strategy
    eviction governs capacity pressure, not self-refresh). Otherwise a free
    slot is used if one exists; a full table defers to the strategy.
    """
    if not rec.valid_at(now):
        raise RecordRejectedError(
            f"record of owner {rec.owner} expired at {rec.expires_at} (now={now})"
        )
    if not _verify_cached(rec, table.curve, table.digest):
        raise RecordRejectedError(f"record of owner {rec.owner} failed verification")
    return _insert_unchecked(table, rec, now)


def _insert_unchecked(table: KeyTable, rec: PublicKeyRecord, now: float) -> InsertResult:
    """Insert without re-verifying; callers must have established validity."""
    if rec.owner in table.entries:
        table.entries[rec.owner] = rec
        return InsertResult(InsertOutcome.REFRESHED_OWN)

    strat = table.strategy
    is_hybrid = strat.kind is StrategyKind.HYBRID
    if table.capacity is None or len(table.entries) < table.capacity:
        table.entries[rec.owner] = rec
        if is_hybrid:
            part = (
                PART_EXPIRED_ONLY
                if table.part_count(PART_EXPIRED_ONLY) < strat.k2
                else PART_FRESH
            )
            table.partition[rec.owner] = part
        return InsertResult(InsertOutcome.STORED)

    if strat.kind is StrategyKind.FRESHEST_REPLACE:
        victim = _min_expiry_owner(table, table.entries)
        if victim is None:
            return InsertResult(InsertOutcome.DISCARDED)
        del table.entries[victim]
        table.entries[rec.owner] = rec
        return InsertResult(InsertOutcome.REPLACED, victim)

    if strat.kind is StrategyKind.EXPIRED_ONLY_REPLACE:
        expired = [o for o, r in table.entries.items() if not r.valid_at(now)]
        if not expired:
            return InsertResult(InsertOutcome.DISCARDED)
        victim = _min_expiry_owner(table, expired)
        del table.entries[victim]
        table.entries[rec.owner] = rec
        return InsertResult(InsertOutcome.REPLACED, victim)

    # Hybrid: expired part-2 slots first, then freshest replacement in part-1.
    expired2 = [
        o
        for o, r in table.entries.items()
        if table.partition.get(o) == PART_EXPIRED_ONLY and not r.valid_at(now)
    ]
    if expired2:
        victim = _min_expiry_owner(table, expired2)
        del table.entries[victim]
        del table.partition[victim]
        table.entries[rec.owner] = rec
        table.partition[rec.owner] = PART_EXPIRED_ONLY
        return InsertResult(InsertOutcome.REPLACED, victim)
    part1 = [o for o in table.entries if table.partition.get(o) == PART_FRESH]
    if part1:
        victim = _min_expiry_owner(table, part1)
        del table.entries[victim]
        del table.partition[victim]
        table.entries[rec.owner] = rec
        table.partition[rec.owner] = PART_FRESH
        return InsertResult(InsertOutcome.REPLACED, victim)
    return InsertResult(InsertOutcome.DISCARDED)


def purge_expired(table: KeyTable, now: float) -> int:
    """Drop every entry with expires_at <= now; returns the removal count."""
    dead = [o for o, r in table.entries.items() if not r.valid_at(now)]
    for owner in dead:
        del table.entries[owner]
        table.partition.pop(owner, None)
    return len(dead)


def exchange(
    table_i: KeyTable,
    table_j: KeyTable,
    rec_i: PublicKeyRecord,
    rec_j: PublicKeyRecord,
    now: float,
) -> tuple[InsertResult, InsertResult]:
    """Mutual key exchange on contact: i stores j's record and vice versa."""
    return table_insert(table_i, rec_j, now), table_insert(table_j, rec_i, now)


def ecc_selftest(
    curve: CurveParams = TOY_CURVE, fuzz_cases: int = 1000, seed: int = 0
) -> list[tuple[str, bool, str]]:
    """Self-contained checks of the group law and signatures on a tiny curve.

    Returns (name, ok, detail) triples; used by the ``ecc-selftest`` CLI
    command and the test suite.
    """
    import numpy as np

    results = []

    points = enumerate_points(curve)
    order = len(points)
    results.append(
        ("group_order", order == curve.n * curve.h, f"|E(F_p)| = {order}")
    )

    acc: Point = None
    ok_mul = True
    first_zero = None
    for s in range(curve.n + 1):
        if scalar_mul(s, curve.G, curve) != acc:
            ok_mul = False
        if acc is None and s > 0 and first_zero is None:
            first_zero = s
        acc = point_add(acc, curve.G, curve)
    results.append(
        ("scalar_mul_vs_repeated_add", ok_mul, f"s = 0..{curve.n} all match")
    )
    results.append(
        (
            "generator_order",
            first_zero == curve.n
            and scalar_mul(curve.n, curve.G, curve) is None,
            f"first s>0 with s*G = O is {first_zero}",
        )
    )

    rng = np.random.default_rng(seed)
    kp = keygen(curve, rng, now=0.0, ttl=100.0)
    rec = make_record(kp, owner=7, curve=curve, rng=rng)
    results.append(("sign_verify_roundtrip", verify_record(rec, curve), ""))

    fails = 0
    for _ in range(fuzz_cases):
        which = int(rng.integers(0, 5))
        owner, key, exp, (e, s) = rec.owner, rec.key, rec.expires_at, rec.signature
        if which == 0:
            owner = owner + 1 + int(rng.integers(0, 1000))
        elif which == 1:
            key = AffinePoint(
                (key.x + 1 + int(rng.integers(0, curve.p - 1))) % curve.p, key.y
            )
        elif which == 2:
            exp = exp + float(rng.integers(1, 10_000))
        elif which == 3:
            e = e + 1 + int(rng.integers(0, 1 << 30))
        else:
            s = (s + 1 + int(rng.integers(0, curve.n - 1))) % curve.n
        tampered = PublicKeyRecord(owner, key, exp, (e, s))
        if verify_record(tampered, curve):
            fails += 1
    results.append(
        ("tamper_fuzz", fails == 0, f"{fuzz_cases} mutations, {fails} verified")
    )
    return results
