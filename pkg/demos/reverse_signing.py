"""
Bob signs through Alice's fabric (RWS)
======================================

"""

from dataclasses import replace

from wstack.fabric import Fabric, FabricParams
from wstack.harness import PROFILES, ChannelConfig, make_documents, run_session, wire_stats
from wstack.protocol import adjudicate

# full width and cardinality, short chains so generation stays quick
params = replace(PROFILES["paper"], N=64, L=16, mac_key=bytes(32))
fabric = Fabric.generate(bytes(32), FabricParams(4096, 64, 64))
docs = make_documents(5, seed=2)
res = run_session("rws", params, docs, ChannelConfig(), fabric=fabric)

# Bob's side of each round is a signature and an acknowledgement, Alice returns tau
stats = wire_stats(res.transcript)
for r in range(2, 7):
    print(r, stats.per_round[r])

# which round did Bob sign the third document in
a = res.alice
v = adjudicate(a.edge, a.Q, a.L, a.q_last, res.bob.stack, "rws", claims=[docs[2]])
print("signed at position", v.signed_position(docs[2]))
