"""Acceptance criteria 1 to 11. Each test carries a ``criterion`` marker and the
terminal summary prints one PASS/FAIL line per criterion."""

import random
import time
from dataclasses import replace

import pytest

from wstack import analysis
from wstack.fabric import Fabric, FabricParams
from wstack.harness import FAULT_SCENARIOS, PROFILES, ChannelConfig, inject_fault, make_documents, run_session, \
    wire_stats
from wstack.oracle import OracleParams
from wstack.stack import CapacityExhausted, empty_stack, family_diff, family_sum, push, truncate, \
    validate_extension, verify_full

TOY = PROFILES["toy"]
PUBLISHED = {1024: 44, 2048: 36, 4096: 31, 8192: 27}


@pytest.mark.criterion(1, "minimal kappa per width matches the published table")
def test_c1_kappa_table():
    t0 = time.perf_counter()
    got = {w: analysis.min_kappa_for_security(w, 256, "exact") for w in (512, *PUBLISHED)}
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    for w, k in PUBLISHED.items():
        assert got[w] == k
    # the published table has no entry at w=512: the approximation first reaches
    # 256 bits at kappa=57, past the 56 the oracle can supply; exact counting
    # reaches it at 55, a shift of 2, outside the one-step tolerance
    assert analysis.min_kappa_for_security(512, 256, "approx") is None
    assert got[512] is None, (
        f"w=512: exact binomials give kappa={got[512]} "
        f"({float(analysis.exact_security_bits(512, got[512])):.3f} bits), the table says absent; "
        f"approx bits at kappa={got[512]}: {analysis.approx_security_bits(512, got[512]):.3f}")


@pytest.mark.criterion(2, "exact security at (4096, 31) lies in (259, 261)")
def test_c2_security_example():
    t0 = time.perf_counter()
    bits = analysis.exact_security_bits(4096, 31)
    assert time.perf_counter() - t0 < 1.0
    assert 259 < bits < 261


@pytest.mark.criterion(3, "approximation within 1% of exact on the table pairs")
def test_c3_approximation_quality():
    for w, k in PUBLISHED.items():
        exact = float(analysis.exact_security_bits(w, k))
        approx = analysis.approx_security_bits(w, k)
        assert abs(approx - exact) / exact < 0.01, (w, k, exact, approx)


@pytest.mark.criterion(4, "mass equals depth times kappa after 1000 pushes")
def test_c4_mass_conservation():
    rng = random.Random(4)
    params = OracleParams(TOY.w, TOY.kappa)
    pushes = violations = 0
    while pushes < 1000:
        fabric = Fabric.generate(rng.randbytes(32), FabricParams(TOY.w, TOY.N, 1))
        s = empty_stack(fabric.edge(), params)
        while pushes < 1000:
            try:
                s = push(rng.randbytes(rng.randrange(1, 80)), s, fabric)
            except CapacityExhausted:
                break
            pushes += 1
            violations += sum(s.sigma) != s.depth * s.kappa
    assert violations == 0


@pytest.mark.criterion(5, "fill-to-exhaustion depth within [d_safe, d_max] on (16, 64, 4)")
def test_c5_capacity_band():
    cap = analysis.capacity(16, 64, 4)
    assert (cap.d_safe, cap.d_max) == (64, 256)
    t0 = time.perf_counter()
    depths = [analysis.fill_to_exhaustion(16, 64, 4, seed) for seed in range(100)]
    assert time.perf_counter() - t0 < 30
    outside = [d for d in depths if not cap.d_safe <= d <= cap.d_max]
    assert outside == []


@pytest.mark.criterion(6, "lockstep replicas for all protocols at drop 0 and 0.25")
def test_c6_protocol_lockstep():
    bad = []
    for protocol in ("bws", "maws", "rws"):
        for drop in (0.0, 0.25):
            for seed in range(50):
                res = run_session(protocol, replace(TOY, seed=seed), make_documents(20, seed),
                                  ChannelConfig(drop_prob=drop, rng_seed=seed))
                a, b = res.alice.stack, res.bob.stack
                ok = (res.ok and b is not None and a.to_bytes() == b.to_bytes()
                      and verify_full(res.alice.edge, b.documents, b.top, b.kappa))
                if not ok:
                    bad.append((protocol, drop, seed))
    assert bad == []


@pytest.mark.criterion(7, "RWS payload per round: bob 64 bytes, alice within [32k, 34k+64]")
def test_c7_wire_asymmetry():
    params = replace(PROFILES["paper"], N=64, L=16, mac_key=bytes(32))
    fabric = Fabric.generate(bytes(32), FabricParams(4096, 64, 64))
    res = run_session("rws", params, make_documents(10, 7), ChannelConfig(), fabric=fabric)
    assert res.ok
    stats = wire_stats(res.transcript)
    k = params.kappa
    rounds = range(2, 12)
    assert [stats.per_round[r]["bob"] for r in rounds] == [64] * 10
    for r in rounds:
        assert k * 32 <= stats.per_round[r]["alice"] <= k * 34 + 64


@pytest.mark.criterion(8, "six adversarial scenarios end in the prescribed verdicts")
def test_c8_adjudication_scenarios():
    failed = [(s, seed, rep.outcome) for s in FAULT_SCENARIOS for seed in range(20)
              if not (rep := inject_fault(s, seed)).passed]
    assert failed == []


@pytest.mark.criterion(9, "checkpointing is transparent; amortized recompute cost at most 2")
def test_c9_phi_transparency():
    seed = bytes(range(32))
    ref = Fabric.generate(seed, FabricParams(4, 128, 1))
    for phi in (2, 5, 128):
        f = Fabric.generate(seed, FabricParams(4, 128, phi))
        assert all(f.element(k, i) == ref.element(k, i) for k in range(4) for i in range(129))
    f = Fabric.generate(seed, FabricParams(4, 1024, 64))
    f.reset_hash_count()
    for k in range(4):
        for i in range(1024, -1, -1):
            f.element(k, i)
    assert f.hash_count / (4 * 1025) <= 2


@pytest.mark.criterion(10, "B + (A - B) == A on 10^4 family pairs")
def test_c10_family_algebra():
    rng = random.Random(10)
    failures = 0
    for _ in range(10_000):
        w = 1 << rng.randrange(1, 7)
        a = tuple(rng.randbytes(32) for _ in range(w))
        # b shares a random subset of a's entries
        b = tuple(x if rng.random() < 0.7 else rng.randbytes(32) for x in a)
        failures += family_sum(b, family_diff(a, b)) != a
    assert failures == 0


@pytest.mark.criterion(11, "10^5 forgeries from bob's view all fail validation")
def test_c11_forgery_from_bob_view():
    res = run_session("bws", TOY, make_documents(10, 11), ChannelConfig())
    s = res.bob.stack
    # every digest Bob has seen, per chain: each earlier top is hashed forward from the last
    seen = [set() for _ in range(s.w)]
    for d in range(s.depth + 1):
        for k, x in enumerate(truncate(s, d).top):
            seen[k].add(x)
    per_chain = [sorted(x) for x in seen]
    pool = sorted(set().union(*seen))
    rng = random.Random(11)
    accepted = 0
    for i in range(100_000):
        delta = rng.randbytes(32)
        support = sorted(s.next_multiset(delta).support)
        if i % 2:
            # the chain's own revealed digests
            tau = {k: rng.choice(per_chain[k]) for k in support}
        else:
            keys = set(rng.sample(range(s.w), rng.randrange(1, s.kappa + 1))) | set(support[:1])
            tau = {k: rng.choice(pool) for k in keys}
        accepted += validate_extension(delta, tau, s)
    assert accepted == 0
