"""Post-transaction adjudication from public values and submitted evidence.

Judy knows Alice's edge ``E`` and Bob's chain key ``Q``. She fixes the
accepted depth from the acknowledgements both parties hold, then checks
a depth-``d`` stack against the edge. Any dispute over stack content is
settled in favour of a valid verifier stack, since only the fabric holder
could have produced another one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..fabric import Edge
from ..stack import SignatureStack, truncate, verify_full
from .ackchain import ack_depth, ack_value, countersign
from .maws import countersignature_status
from .session import invitation_document

EVIDENCE_REJECTED = "verifier evidence rejected"
NO_ACKNOWLEDGEMENT = "no acknowledgement verifies against Q"
PROTOCOLS = ("bws", "maws", "rws")


@dataclass(frozen=True)
class DocumentEntry:
    position: int
    document: bytes
    signed_by: str
    kind: str
    status: str
    #: RWS: the disputed document this signature was shown to cover.
    matched: Optional[bytes] = None

    def record(self) -> dict:
        rec = {"position": self.position, "document": self.document.hex(), "signed_by": self.signed_by,
               "kind": self.kind, "status": self.status}
        if self.matched is not None:
            rec["matched"] = self.matched.hex()
        return rec


@dataclass
class Verdict:
    protocol: str
    accepted: bool
    depth: int
    j_alice: Optional[int]
    j_bob: Optional[int]
    entries: list[DocumentEntry] = field(default_factory=list)
    anomalies: list[str] = field(default_factory=list)
    reason: Optional[str] = None
    #: RWS: disputed document -> stack position of Bob's signature, or None.
    claims: dict[bytes, Optional[int]] = field(default_factory=dict)

    def signed_position(self, doc: bytes) -> Optional[int]:
        return self.claims.get(doc)

    def records(self) -> list[dict]:
        return [e.record() for e in self.entries]

    def summary(self) -> dict:
        return {
            "protocol": self.protocol,
            "accepted": self.accepted,
            "depth": self.depth,
            "j_alice": self.j_alice,
            "j_bob": self.j_bob,
            "reason": self.reason,
            "anomalies": list(self.anomalies),
            "claims": {d.hex(): p for d, p in self.claims.items()},
        }


def rws_scan(documents: tuple[bytes, ...], delta: bytes, q: bytes, q_depth: int) -> Optional[int]:
    """Position ``p`` whose stored signature is ``H(delta || q[L-2-p])``, if any.

    ``q`` must prove ``q_depth`` acknowledgements; positions whose chain
    element has not been revealed yet cannot be checked.
    """
    for p in range(1, min(len(documents), q_depth)):
        if documents[p] == countersign(delta, ack_value(q, q_depth, p + 1)):
            return p
    return None


def _chain_depth(q: Optional[bytes], Q: bytes, L: int) -> Optional[int]:
    if q is None:
        return None
    return ack_depth(q, Q, L)


def adjudicate(edge: Edge, Q: bytes, L: int, alice_q: Optional[bytes], bob_stack: Optional[SignatureStack],
               protocol: str = "bws", *, bob_q: Optional[bytes] = None,
               alice_stack: Optional[SignatureStack] = None, kappa: Optional[int] = None,
               claims: Iterable[bytes] = ()) -> Verdict:
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    j_a = _chain_depth(alice_q, Q, L)
    j_b = _chain_depth(bob_q, Q, L)
    verdict = Verdict(protocol, False, 0, j_a, j_b)
    notes = verdict.anomalies
    if alice_q is not None and j_a is None:
        notes.append("alice's acknowledgement does not verify against Q; her claim is rejected")
    if bob_q is not None and j_b is None:
        notes.append("bob's acknowledgement does not verify against Q; his claim is rejected")

    # depth: Bob cannot show fewer acknowledgements than Alice holds, since
    # he is her only source of chain values
    if j_a is None and j_b is None:
        verdict.reason = NO_ACKNOWLEDGEMENT
        return verdict
    if j_b is None or (j_a is not None and j_a >= j_b):
        d, q_best = j_a, alice_q
        if j_b is not None and j_b < j_a:
            notes.append(f"bob's last acknowledgement proves only {j_b} rounds against alice's {j_a}: "
                         "alice's depth accepted")
    else:
        d, q_best = j_b, bob_q
        if j_a is not None:
            notes.append(f"bob holds a later acknowledgement ({j_b}) than alice presents ({j_a}): "
                         "bob's depth accepted")
    verdict.depth = d

    stack = bob_stack
    if stack is None and protocol == "rws" and alice_stack is not None:
        stack, alice_stack = alice_stack, None
        notes.append("stack supplied by alice")
    if stack is None:
        verdict.reason = f"{EVIDENCE_REJECTED}: no stack submitted"
        return verdict
    if kappa is None:
        kappa = stack.kappa
    if stack.w != edge.w or stack.kappa != kappa:
        verdict.reason = f"{EVIDENCE_REJECTED}: stack parameters do not match the edge"
        return verdict
    if stack.depth < d:
        verdict.reason = f"{EVIDENCE_REJECTED}: stack depth {stack.depth} below the acknowledged depth {d}"
        return verdict
    if stack.depth > d:
        notes.append(f"stack holds {stack.depth - d} unacknowledged document(s); truncated to depth {d}")
        stack = truncate(stack, d)
    if not verify_full(edge, stack.documents, stack.top, kappa):
        verdict.reason = f"{EVIDENCE_REJECTED}: stack does not verify against the edge"
        return verdict
    if d and stack.documents[0] != invitation_document(L, Q):
        verdict.reason = f"{EVIDENCE_REJECTED}: stack does not open with the invitation for this Q and L"
        return verdict

    if alice_stack is not None:
        theirs = alice_stack.documents[:d]
        if theirs != stack.documents:
            notes.append("alice's alternative stack disregarded: the valid verifier stack prevails")

    verdict.accepted = True
    docs = stack.documents
    if d:
        verdict.entries.append(DocumentEntry(0, docs[0], "alice", "invitation", "signed"))
    if protocol == "bws":
        verdict.entries += [DocumentEntry(p, docs[p], "alice", "document", "signed") for p in range(1, d)]
    elif protocol == "maws":
        for p in range(1, d, 2):
            if p + 1 < d:
                # the countersignature at p + 1 binds the element revealed by ack p + 2
                q = ack_value(q_best, d, p + 2)
                status = countersignature_status(docs[p], docs[p + 1], q)
            else:
                status = "pending"
            verdict.entries.append(DocumentEntry(p, docs[p], "alice", "document", status))
            if p + 1 < d:
                verdict.entries.append(DocumentEntry(p + 1, docs[p + 1], "bob", "countersignature", status))
    else:
        found = {}
        for claim in claims:
            pos = rws_scan(docs, claim, q_best, d)
            verdict.claims[claim] = pos
            if pos is not None:
                found[pos] = claim
        verdict.entries += [DocumentEntry(p, docs[p], "bob", "signature", "signed", found.get(p))
                            for p in range(1, d)]
    return verdict
