import itertools
import os
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import TOY_ORACLE, build_stack, toy_fabric
from wstack.fabric import Fabric, FabricParams
from wstack.hashing import beta, chain_iterate
from wstack.oracle import OracleParams, omega
from wstack.stack import (CapacityExhausted, ExtensionRejected, SignatureStack, apply_extension, depth_from_tops,
                          empty_stack, extend, family_diff, family_sum, is_substack, load_stack, pop, push,
                          reconstruct_edge, save_stack, sigma_of, truncate, validate_extension, verify_full,
                          verify_stack)


def docs(n, seed=0):
    rng = random.Random(seed)
    return [rng.randbytes(32) for _ in range(n)]


def test_empty_stack(toy):
    s = empty_stack(toy.edge(), TOY_ORACLE)
    assert s.depth == 0 and s.mass == 0
    assert s.top == toy.edge().values
    assert depth_from_tops(toy.edge(), s.top, 32, 3) == 0
    assert reconstruct_edge(s) == toy.edge()


def test_five_pushes_have_mass_fifteen(toy):
    stacks = build_stack(toy, TOY_ORACLE, docs(5))
    assert [s.mass for s in stacks] == [0, 3, 6, 9, 12, 15]


def test_push_consumes_omega_steps(toy):
    stacks = build_stack(toy, TOY_ORACLE, docs(12, 1))
    for prev, nxt in zip(stacks, stacks[1:]):
        digest_ = nxt.concat.snapshot()
        for k in range(8):
            assert beta(nxt.top[k], prev.top[k], 3) == omega(digest_, k, TOY_ORACLE)
            assert nxt.top[k] == toy.element(k, 32 - nxt.sigma[k])


def test_push_validate_duality(toy):
    s = replica = empty_stack(toy.edge(), TOY_ORACLE)
    for d in docs(30, 2):
        nxt = push(d, s, toy)
        tau = family_diff(nxt.top, s.top)
        assert len(tau) <= 3
        assert validate_extension(d, tau, replica)
        replica = apply_extension(replica, d, tau)
        assert replica == nxt and replica.to_bytes() == nxt.to_bytes()
        # the same extension cannot be applied twice
        assert not validate_extension(d, tau, replica)
        s = nxt


def test_validator_rejects_tampering(toy):
    s = build_stack(toy, TOY_ORACLE, docs(4, 3))[-1]
    d = os.urandom(32)
    nxt = push(d, s, toy)
    tau = family_diff(nxt.top, s.top)
    k = next(iter(tau))
    assert not validate_extension(d, {**tau, k: os.urandom(32)}, s)
    flipped = bytes([d[0] ^ 1]) + d[1:]
    assert not validate_extension(flipped, tau, s)
    assert not validate_extension(b"", tau, s)
    assert not validate_extension(d, {**tau, 99: os.urandom(32)}, s)
    with pytest.raises(ExtensionRejected):
        apply_extension(s, flipped, tau)


def test_validator_requires_zero_weight_off_tau(toy):
    s = empty_stack(toy.edge(), TOY_ORACLE)
    d = docs(1, 4)[0]
    tau = family_diff(push(d, s, toy).top, s.top)
    k = next(iter(tau))
    partial = {i: v for i, v in tau.items() if i != k}
    assert not validate_extension(d, partial, s)


def test_capacity_exhaustion_is_typed():
    f = toy_fabric(N=2)
    s = empty_stack(f.edge(), OracleParams(8, 3))
    with pytest.raises(CapacityExhausted):
        for d in docs(100):
            s = push(d, s, f)
    assert max(s.sigma) <= 2


def test_family_diff_and_sum():
    a = tuple(bytes([i]) * 32 for i in range(8))
    assert family_diff(a, a) == {}
    b = a[:3] + (os.urandom(32),) + a[4:]
    assert family_diff(b, a) == {3: b[3]}
    assert family_sum(a, {}) == a
    with pytest.raises(ValueError):
        family_sum(a, {8: a[0]})
    with pytest.raises(ValueError):
        family_diff(a, a[:7])
    assert family_sum({"x": 1, "y": 2}, {"y": 3}) == {"x": 1, "y": 3}


@settings(max_examples=300)
@given(st.lists(st.tuples(st.binary(max_size=2), st.binary(max_size=2), st.booleans()), min_size=1, max_size=64))
def test_sum_of_difference_restores_family(rows):
    a = tuple(x for x, _, _ in rows)
    b = tuple(x if eq else y for x, y, eq in rows)
    assert family_sum(b, family_diff(a, b)) == a


def test_extend():
    assert extend((), b"a") == (b"a",)
    assert extend({}, b"a") == {0: b"a"}
    assert extend({0: b"a", 1: b"b"}, b"c") == {0: b"a", 1: b"b", 2: b"c"}
    x = ()
    for i in range(6):
        x = extend(x, bytes([i]))
    assert x == tuple(bytes([i]) for i in range(6))


def test_depth_from_tops(toy):
    s = build_stack(toy, TOY_ORACLE, docs(7, 5))[-1]
    assert depth_from_tops(toy.edge(), s.top, 32, 3) == 7
    k = max(range(8), key=lambda i: s.sigma[i])
    bad = list(s.top)
    bad[k] = os.urandom(32)
    assert depth_from_tops(toy.edge(), bad, 32, 3) is None


def test_depth_from_tops_divisibility(toy):
    s = build_stack(toy, TOY_ORACLE, docs(3, 6))[-1]
    k = next(i for i in range(8) if s.sigma[i] < 32)
    bumped = list(s.top)
    bumped[k] = toy.element(k, 32 - s.sigma[k] - 1)
    assert depth_from_tops(toy.edge(), bumped, 32, 3) is None


def test_verify_full(toy):
    ds = docs(8, 7)
    s = build_stack(toy, TOY_ORACLE, ds)[-1]
    assert verify_full(toy.edge(), s.documents, s.top, 3)
    assert verify_stack(toy.edge(), s)
    replaced = list(ds)
    replaced[2] = os.urandom(32)
    assert not verify_full(toy.edge(), replaced, s.top, 3)
    swapped = list(ds)
    swapped[1], swapped[5] = swapped[5], swapped[1]
    assert not verify_full(toy.edge(), swapped, s.top, 3)
    assert not verify_full(toy.edge(), ds[:-1], s.top, 3)


def test_reconstruct_edge(toy):
    s = build_stack(toy, TOY_ORACLE, docs(9, 8))[-1]
    e = reconstruct_edge(s)
    assert e == toy.edge()
    assert verify_full(e, s.documents, s.top, 3)


def test_truncate_and_pop_recover_prefixes(toy):
    stacks = build_stack(toy, TOY_ORACLE, docs(10, 9))
    last = stacks[-1]
    for d in range(11):
        assert truncate(last, d) == stacks[d]
        assert truncate(last, d).to_bytes() == stacks[d].to_bytes()
    shorter, doc = pop(last)
    assert shorter == stacks[-2] and doc == last.documents[-1]
    with pytest.raises(ValueError):
        pop(stacks[0])


def test_substacks(toy):
    stacks = build_stack(toy, TOY_ORACLE, docs(10, 10))
    for i, j in itertools.combinations(range(11), 2):
        assert is_substack(stacks[i], stacks[j])
    other = build_stack(toy, TOY_ORACLE, docs(10, 11))
    assert is_substack(other[5], other[5])
    mutual = sum(is_substack(stacks[d], other[d]) and is_substack(other[d], stacks[d]) for d in range(1, 11))
    assert mutual == 0


def test_equal_depth_substacks_coincide():
    f = Fabric.generate(bytes(32), FabricParams(4, 8))
    p = OracleParams(4, 2)
    pool = docs(16, 12)
    seen = {}
    for a, b in itertools.product(pool, repeat=2):
        s = push(b, push(a, empty_stack(f.edge(), p), f), f)
        seen.setdefault(s.sigma, s)
    sigmas = list(seen)
    for x, y in itertools.combinations(sigmas, 2):
        assert not (all(i <= j for i, j in zip(x, y)) and all(j <= i for i, j in zip(x, y)))
    # equal depth and substack forces equal consumption
    for x, y in itertools.product(sigmas, repeat=2):
        if all(i <= j for i, j in zip(x, y)):
            assert x == y


def test_mass_invariant_everywhere(toy):
    for s in build_stack(toy, TOY_ORACLE, docs(40, 13)):
        assert s.mass == s.depth * 3
        assert list(s.sigma) == sigma_of(s.documents, TOY_ORACLE)


def test_stack_file_round_trip(tmp_path, toy):
    s = build_stack(toy, TOY_ORACLE, docs(6, 14) + [b"short", b"x" * 100])[-1]
    save_stack(s, tmp_path / "s.wss")
    t = load_stack(tmp_path / "s.wss")
    assert t == s and t.concat.snapshot() == s.concat.snapshot()
    assert (tmp_path / "s.wss").read_bytes()[:4] == b"WSS1"
    with pytest.raises(ValueError):
        SignatureStack.from_bytes(s.to_bytes()[:-1])


def test_replica_continues_after_reload(toy):
    stacks = build_stack(toy, TOY_ORACLE, docs(4, 15))
    replica = SignatureStack.from_bytes(stacks[3].to_bytes())
    tau = family_diff(stacks[4].top, stacks[3].top)
    assert apply_extension(replica, stacks[4].documents[-1], tau) == stacks[4]


def test_wrong_fabric_extension_is_rejected(toy):
    other = toy_fabric(seed=99)
    s = empty_stack(toy.edge(), TOY_ORACLE)
    d = os.urandom(32)
    foreign = push(d, empty_stack(other.edge(), TOY_ORACLE), other)
    tau = {k: foreign.top[k] for k in range(8) if foreign.sigma[k]}
    assert not validate_extension(d, tau, s)


def test_chain_relation_holds_on_tops(toy):
    s = build_stack(toy, TOY_ORACLE, docs(6, 16))[-1]
    for k in range(8):
        assert chain_iterate(s.top[k], s.sigma[k]) == toy.edge()[k]
