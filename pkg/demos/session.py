"""
A lossy BWS session and its adjudication
========================================

"""

from dataclasses import replace

from wstack.harness import PROFILES, ChannelConfig, make_documents, run_session, wire_stats
from wstack.protocol import adjudicate

params = replace(PROFILES["toy"], mac_key=bytes(32))
docs = make_documents(10, seed=1)

# a quarter of all frames are lost, another tenth arrive bit-flipped
res = run_session("bws", params, docs, ChannelConfig(drop_prob=0.25, corrupt_prob=0.1, rng_seed=5))
print("ok:", res.ok, "depth:", res.alice.stack.depth, "identical replicas:", res.stacks_equal)
print("drops:", len(res.transcript.of("drop")), "corrupted:", len(res.transcript.of("corrupt")))

stats = wire_stats(res.transcript)
print("alice sent", stats.alice.bytes, "bytes in", stats.alice.frames, "frames")
print("bob sent", stats.bob.bytes, "bytes in", stats.bob.frames, "frames")

# later Alice denies a document; the judge only needs the edge, Q, her last q and Bob's stack
a = res.alice
verdict = adjudicate(a.edge, a.Q, a.L, a.q_last, res.bob.stack, "bws", bob_q=res.bob.chain.last_revealed)
print(verdict.summary())
for rec in verdict.records()[:3]:
    print(rec)
