import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fanetkeys.errors import RecordRejectedError
from fanetkeys.keying import (
    EXPIRED_ONLY_REPLACE,
    FRESHEST_REPLACE,
    TOY_CURVE,
    AffinePoint,
    CurveParams,
    InsertOutcome,
    KeyTable,
    PublicKeyRecord,
    default_digest,
    ecc_selftest,
    enumerate_points,
    exchange,
    hybrid,
    is_on_curve,
    keygen,
    keypair_from_priv,
    make_record,
    point_add,
    purge_expired,
    record_signing_bytes,
    rotate_if_expired,
    scalar_mul,
    sign_record,
    table_insert,
    verify_record,
)

G = TOY_CURVE.G


def rng(seed=0):
    return np.random.default_rng(seed)


class TestGroupLaw:
    def test_identity_absorption(self):
        p = AffinePoint(5, 1)
        assert point_add(p, None, TOY_CURVE) == p
        assert point_add(None, p, TOY_CURVE) == p
        assert point_add(None, None, TOY_CURVE) is None

    def test_tangent_doubling(self):
        # lambda = (3*25 + 2)/(2*1) = 77/2 = 77 * 9 = 13 (mod 17)
        assert point_add(AffinePoint(5, 1), AffinePoint(5, 1), TOY_CURVE) == AffinePoint(6, 3)

    def test_chord_addition(self):
        # lambda = (3-1)/(6-5) = 2
        assert point_add(AffinePoint(5, 1), AffinePoint(6, 3), TOY_CURVE) == AffinePoint(10, 6)

    def test_inverse_pair_gives_identity(self):
        p = AffinePoint(5, 1)
        neg = AffinePoint(5, (-1) % 17)
        assert point_add(p, neg, TOY_CURVE) is None

    def test_off_curve_rejected(self):
        with pytest.raises(ValueError):
            point_add(AffinePoint(5, 2), G, TOY_CURVE)

    def test_group_closure_and_commutativity_exhaustive(self):
        pts = enumerate_points(TOY_CURVE)
        assert len(pts) == 19
        for p in pts:
            for q in pts:
                s = point_add(p, q, TOY_CURVE)
                assert is_on_curve(s, TOY_CURVE)
                assert s == point_add(q, p, TOY_CURVE)

    def test_group_associativity_exhaustive(self):
        pts = enumerate_points(TOY_CURVE)
        for p in pts:
            for q in pts:
                for w in pts:
                    left = point_add(point_add(p, q, TOY_CURVE), w, TOY_CURVE)
                    right = point_add(p, point_add(q, w, TOY_CURVE), TOY_CURVE)
                    assert left == right


class TestScalarMul:
    def test_unit_scalar(self):
        assert scalar_mul(1, G, TOY_CURVE) == G

    def test_double(self):
        assert scalar_mul(2, G, TOY_CURVE) == point_add(G, G, TOY_CURVE)
        assert scalar_mul(2, G, TOY_CURVE) == AffinePoint(6, 3)

    def test_matches_repeated_addition(self):
        acc = None
        for s in range(0, 20):
            assert scalar_mul(s, G, TOY_CURVE) == acc
            acc = point_add(acc, G, TOY_CURVE)

    def test_order_19(self):
        assert scalar_mul(19, G, TOY_CURVE) is None
        for s in range(1, 19):
            assert scalar_mul(s, G, TOY_CURVE) is not None

    def test_negative_scalar_rejected(self):
        with pytest.raises(ValueError):
            scalar_mul(-1, G, TOY_CURVE)


class TestCurveValidation:
    def test_composite_modulus_rejected(self):
        with pytest.raises(ValueError):
            CurveParams(p=15, a=2, b=2, G=AffinePoint(5, 1), n=19)

    def test_off_curve_generator_rejected(self):
        with pytest.raises(ValueError):
            CurveParams(p=17, a=2, b=2, G=AffinePoint(5, 2), n=19)

    def test_wrong_order_rejected(self):
        with pytest.raises(ValueError):
            CurveParams(p=17, a=2, b=2, G=AffinePoint(5, 1), n=17)

    def test_singular_curve_rejected(self):
        with pytest.raises(ValueError):
            CurveParams(p=17, a=0, b=0, G=AffinePoint(0, 0), n=19)


class TestKeygen:
    def test_forced_priv_one_gives_generator(self):
        kp = keypair_from_priv(1, TOY_CURVE, now=0.0, ttl=10.0)
        assert kp.pub == G

    def test_forced_priv_two(self):
        kp = keypair_from_priv(2, TOY_CURVE, now=0.0, ttl=10.0)
        assert kp.pub == scalar_mul(2, G, TOY_CURVE)

    def test_zero_priv_redrawn_not_emitted(self):
        class ScriptedBytes:
            # 19 needs 5 bits, so the sampler keeps a byte's high 5 bits:
            # first draw encodes 0 (rejected), second encodes 3 (3 << 3)
            def __init__(self):
                self.vals = [b"\x00", bytes([3 << 3])]

            def bytes(self, k):
                return self.vals.pop(0)

        kp = keygen(TOY_CURVE, ScriptedBytes(), now=0.0, ttl=10.0)
        assert kp.priv == 3

    def test_priv_range_and_validity(self):
        r = rng(1)
        for _ in range(200):
            kp = keygen(TOY_CURVE, r, now=5.0, ttl=7.0)
            assert 1 <= kp.priv <= 18
            assert kp.pub == scalar_mul(kp.priv, G, TOY_CURVE)
            assert kp.expires_at == 12.0

    def test_rotation(self):
        kp = keypair_from_priv(4, TOY_CURVE, now=0.0, ttl=10.0)
        assert rotate_if_expired(kp, TOY_CURVE, rng(), now=9.99, ttl=10.0) is kp
        rotated = rotate_if_expired(kp, TOY_CURVE, rng(), now=10.0, ttl=10.0)
        assert rotated is not kp and rotated.expires_at == 20.0

    def test_infinite_ttl_never_rotates(self):
        kp = keygen(TOY_CURVE, rng(), now=0.0, ttl=math.inf)
        assert rotate_if_expired(kp, TOY_CURVE, rng(), now=1e12, ttl=math.inf) is kp


class TestSignatures:
    def make(self, seed=0, owner=3, ttl=50.0):
        r = rng(seed)
        kp = keygen(TOY_CURVE, r, now=0.0, ttl=ttl)
        return kp, make_record(kp, owner, TOY_CURVE, r)

    def test_roundtrip(self):
        _, rec = self.make()
        assert verify_record(rec, TOY_CURVE)

    def test_expiry_tamper_fails(self):
        _, rec = self.make()
        forged = PublicKeyRecord(rec.owner, rec.key, rec.expires_at + 1, rec.signature)
        assert not verify_record(forged, TOY_CURVE)

    def test_signature_under_wrong_key_fails(self):
        kp_a, rec_a = self.make(seed=0)
        kp_b, _ = self.make(seed=99)
        if kp_b.pub == kp_a.pub:
            kp_b = keypair_from_priv((kp_a.priv % 18) + 1, TOY_CURVE, 0.0, 50.0)
        forged = PublicKeyRecord(rec_a.owner, kp_b.pub, rec_a.expires_at, rec_a.signature)
        assert not verify_record(forged, TOY_CURVE)

    def test_single_field_mutations_fail(self):
        results = dict((name, ok) for name, ok, _ in ecc_selftest(fuzz_cases=1000))
        assert results["tamper_fuzz"]

    def test_signing_deterministic_given_stream(self):
        kp = keypair_from_priv(7, TOY_CURVE, 0.0, 50.0)
        s1 = sign_record(kp, 3, kp.pub, kp.expires_at, TOY_CURVE, rng(5))
        s2 = sign_record(kp, 3, kp.pub, kp.expires_at, TOY_CURVE, rng(5))
        assert s1 == s2

    def test_canonical_bytes_layout(self):
        blob = record_signing_bytes(2, AffinePoint(5, 1), 1.5, TOY_CURVE)
        # owner: 8 bytes, x and y: 1 byte each on a 17-element field,
        # expires in millis: 8 bytes
        assert len(blob) == 8 + 1 + 1 + 8
        assert blob[:8] == (2).to_bytes(8, "big")
        assert blob[8] == 5 and blob[9] == 1
        assert int.from_bytes(blob[10:], "big") == 1500

    def test_infinite_expiry_encoding(self):
        blob = record_signing_bytes(0, AffinePoint(5, 1), math.inf, TOY_CURVE)
        assert int.from_bytes(blob[10:], "big") == 2**63 - 1

    def test_pluggable_digest(self):
        import hashlib

        digest = lambda d: hashlib.sha256(d).digest()  # noqa: E731
        kp = keypair_from_priv(7, TOY_CURVE, 0.0, 50.0)
        sig = sign_record(kp, 3, kp.pub, kp.expires_at, TOY_CURVE, rng(5), digest)
        rec = PublicKeyRecord(3, kp.pub, kp.expires_at, sig)
        assert verify_record(rec, TOY_CURVE, digest)
        assert not verify_record(rec, TOY_CURVE, default_digest)


def record_for(owner: int, expires_at: float, seed=None) -> PublicKeyRecord:
    r = rng(owner if seed is None else seed)
    kp = keygen(TOY_CURVE, r, now=0.0, ttl=expires_at)
    return make_record(kp, owner, TOY_CURVE, r)


class TestTableInsert:
    def test_free_slot_stores(self):
        t = KeyTable(capacity=2)
        res = table_insert(t, record_for("D".__hash__() % 100, 120.0, seed=4), now=10.0)
        assert res.outcome is InsertOutcome.STORED and len(t) == 1

    def test_freshest_replaces_soonest_expiring(self):
        t = KeyTable(capacity=2, strategy=FRESHEST_REPLACE)
        table_insert(t, record_for(1, 50.0), now=10.0)
        table_insert(t, record_for(2, 80.0), now=10.0)
        res = table_insert(t, record_for(3, 120.0), now=10.0)
        assert res.outcome is InsertOutcome.REPLACED and res.evicted == 1
        assert set(t.entries) == {2, 3}

    def test_expired_only_discards_then_replaces(self):
        t = KeyTable(capacity=2, strategy=EXPIRED_ONLY_REPLACE)
        table_insert(t, record_for(1, 50.0), now=10.0)
        table_insert(t, record_for(2, 80.0), now=10.0)
        res = table_insert(t, record_for(3, 120.0), now=10.0)
        assert res.outcome is InsertOutcome.DISCARDED
        assert set(t.entries) == {1, 2}
        res = table_insert(t, record_for(3, 120.0), now=60.0)
        assert res.outcome is InsertOutcome.REPLACED and res.evicted == 1
        assert set(t.entries) == {2, 3}

    def test_refresh_own_bypasses_strategy(self):
        t = KeyTable(capacity=1, strategy=EXPIRED_ONLY_REPLACE)
        table_insert(t, record_for(1, 50.0), now=0.0)
        newer = record_for(1, 90.0, seed=123)
        res = table_insert(t, newer, now=10.0)
        assert res.outcome is InsertOutcome.REFRESHED_OWN
        assert t.entries[1] is newer

    def test_expired_record_rejected(self):
        t = KeyTable(capacity=2)
        with pytest.raises(RecordRejectedError):
            table_insert(t, record_for(1, 50.0), now=50.0)

    def test_tampered_record_rejected(self):
        t = KeyTable(capacity=2)
        rec = record_for(1, 50.0)
        bad = PublicKeyRecord(rec.owner, rec.key, 49.0, rec.signature)
        with pytest.raises(RecordRejectedError):
            table_insert(t, bad, now=0.0)

    def test_zero_capacity_discards(self):
        t = KeyTable(capacity=0)
        res = table_insert(t, record_for(1, 50.0), now=0.0)
        assert res.outcome is InsertOutcome.DISCARDED and len(t) == 0


class TestHybrid:
    def test_partition_fill_prefers_part2(self):
        t = KeyTable(capacity=4, strategy=hybrid(2, 2))
        for owner in (1, 2):
            table_insert(t, record_for(owner, 100.0 + owner), now=0.0)
        assert t.part_count(2) == 2 and t.part_count(1) == 0
        for owner in (3, 4):
            table_insert(t, record_for(owner, 100.0 + owner), now=0.0)
        assert t.part_count(1) == 2

    def test_full_table_prefers_expired_part2_slot(self):
        t = KeyTable(capacity=4, strategy=hybrid(2, 2))
        # owners 1, 2 land in part-2; 3, 4 in part-1
        for owner, exp in ((1, 30.0), (2, 100.0), (3, 40.0), (4, 100.0)):
            table_insert(t, record_for(owner, exp), now=0.0)
        res = table_insert(t, record_for(5, 200.0), now=35.0)  # owner 1 expired
        assert res.outcome is InsertOutcome.REPLACED and res.evicted == 1
        assert t.partition[5] == 2

    def test_full_table_falls_back_to_part1_freshest(self):
        t = KeyTable(capacity=4, strategy=hybrid(2, 2))
        for owner, exp in ((1, 90.0), (2, 100.0), (3, 40.0), (4, 100.0)):
            table_insert(t, record_for(owner, exp), now=0.0)
        res = table_insert(t, record_for(5, 200.0), now=10.0)  # nothing expired
        assert res.outcome is InsertOutcome.REPLACED and res.evicted == 3
        assert t.partition[5] == 1

    def test_partition_sizes_must_match_capacity(self):
        with pytest.raises(ValueError):
            KeyTable(capacity=4, strategy=hybrid(1, 2))


class TestPurgeAndExchange:
    def test_purge_empty(self):
        assert purge_expired(KeyTable(capacity=2), now=100.0) == 0

    def test_purge_boundary_expires(self):
        t = KeyTable(capacity=2)
        table_insert(t, record_for(1, 50.0), now=0.0)
        assert purge_expired(t, now=50.0) == 1
        assert len(t) == 0

    def test_purge_partial(self):
        t = KeyTable(capacity=2)
        table_insert(t, record_for(1, 50.0), now=0.0)
        table_insert(t, record_for(2, 80.0), now=0.0)
        assert purge_expired(t, now=60.0) == 1
        assert set(t.entries) == {2}

    def test_exchange_both_store(self):
        ta, tb = KeyTable(capacity=4), KeyTable(capacity=4)
        ra, rb = record_for(1, 100.0), record_for(2, 100.0)
        out = exchange(ta, tb, ra, rb, now=0.0)
        assert out[0].outcome is InsertOutcome.STORED
        assert out[1].outcome is InsertOutcome.STORED
        assert 2 in ta.entries and 1 in tb.entries

    def test_exchange_refresh_and_discard(self):
        ta = KeyTable(capacity=4)
        tb = KeyTable(capacity=1, strategy=EXPIRED_ONLY_REPLACE)
        ra, rb = record_for(1, 100.0), record_for(2, 100.0)
        table_insert(ta, rb, now=0.0)
        table_insert(tb, record_for(3, 90.0), now=0.0)
        out = exchange(ta, tb, ra, rb, now=1.0)
        assert out[0].outcome is InsertOutcome.REFRESHED_OWN
        assert out[1].outcome is InsertOutcome.DISCARDED


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 100_000),
    capacity=st.integers(0, 6),
    kind=st.sampled_from(["freshest", "expired", "hybrid"]),
    ops=st.integers(1, 60),
)
def test_table_invariants_under_random_inserts(seed, capacity, kind, ops):
    r = np.random.default_rng(seed)
    if kind == "freshest":
        strategy = FRESHEST_REPLACE
    elif kind == "expired":
        strategy = EXPIRED_ONLY_REPLACE
    else:
        k1 = int(r.integers(0, capacity + 1))
        strategy = hybrid(k1, capacity - k1)
    t = KeyTable(capacity=capacity, strategy=strategy)
    now = 0.0
    records = {}
    for _ in range(ops):
        now += float(r.uniform(0, 3))
        owner = int(r.integers(0, 8))
        expires = now + float(r.uniform(0.5, 40))
        if owner not in records or r.uniform() < 0.5:
            records[owner] = record_for(owner, expires, seed=int(r.integers(0, 1 << 30)))
        rec = records[owner]
        stored_before = dict(t.entries)
        if not rec.valid_at(now):
            continue
        res = table_insert(t, rec, now)
        assert len(t.entries) <= capacity
        assert len(set(t.entries)) == len(t.entries)
        if strategy.kind.value == "hybrid":
            assert t.part_count(1) <= strategy.k1
            assert t.part_count(2) <= strategy.k2
            assert set(t.partition) == set(t.entries)
        if res.outcome is InsertOutcome.REPLACED:
            evicted_exp = stored_before[res.evicted].expires_at
            if strategy is FRESHEST_REPLACE:
                assert all(
                    evicted_exp <= other.expires_at for other in stored_before.values()
                )
            if strategy is EXPIRED_ONLY_REPLACE:
                assert evicted_exp <= now


def test_expired_only_never_evicts_valid_entry():
    t = KeyTable(capacity=3, strategy=EXPIRED_ONLY_REPLACE)
    r = np.random.default_rng(0)
    now = 0.0
    for i in range(40):
        now += 5.0
        rec = record_for(int(r.integers(0, 10)), now + float(r.uniform(1, 50)), seed=i)
        before = dict(t.entries)
        res = table_insert(t, rec, now)
        if res.outcome is InsertOutcome.REPLACED:
            assert before[res.evicted].expires_at <= now
