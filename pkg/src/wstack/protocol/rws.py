"""Reverse Winternitz stack protocol: Bob signs, Alice certifies.

Bob's signature on ``delta`` is ``s = H(delta || q)`` with ``q`` the chain
element his acknowledgement of this round will reveal. Alice pushes ``s``
onto her stack and returns ``tau``; Bob validates, files ``delta`` in his
audit log and acknowledges.

The protocol assumes a channel where frames arrive intact or not at all
(a keyed MAC enforces that), so any content-invalid frame is treated as a
protocol violation rather than noise. Exact repeats of the last frame, which
loss and retransmission produce legitimately, are answered with the
previous reply.
"""

from __future__ import annotations

from typing import Optional

from ..stack import apply_extension, validate_extension
from .ackchain import countersign
from .codec import Ack, Frame, RwsSig, RwsTau
from .session import AliceConfig, BobConfig, Failure, SessionFailed, Signer, Verifier


class RwsAlice(Signer):
    strict = True

    def __init__(self, cfg: AliceConfig):
        super().__init__(cfg)
        self._last_reply: Optional[bytes] = None

    def _bad_reply(self) -> list[bytes]:
        raise SessionFailed(Failure.VALIDATION, "alice: acknowledgement does not verify against the chain")

    def _on_rws_sig(self, frame: Frame) -> list[bytes]:
        s = frame.body.s
        depth = self.stack.depth
        if depth >= 2 and frame.round == depth and s == self.stack.documents[-1]:
            # Bob did not get our tau (or is replaying); repeat it
            return [self._last_reply] if self._last_reply is not None else []
        if self.phase != "ready" or self.pending is not None:
            # init still outstanding: Bob will repeat the signature
            return self._ignore()
        if frame.round != depth + 1:
            raise SessionFailed(Failure.VALIDATION, f"alice: signature for round {frame.round} at depth {depth}")
        self._check_ack_headroom(1)
        tau = self._push(s)
        self.phase = "await_ack"
        out = self._send(self.stack.depth, RwsTau(tau))
        self._last_reply = out[0]
        return out


class RwsBob(Verifier):
    strict = True

    def __init__(self, cfg: BobConfig):
        super().__init__(cfg)
        self._doc: Optional[bytes] = None
        self._sig: Optional[bytes] = None
        self._last_tau: Optional[dict[int, bytes]] = None
        #: stack position -> the document Bob signed there
        self.audit_log: dict[int, bytes] = {}

    def _accepts_document(self, depth: int) -> bool:
        return depth == 0 and self.phase == "ready"

    def sign(self, doc: bytes) -> list[bytes]:
        if self.phase != "ready" or self.pending is not None or self.stack is None or self.stack.depth == 0:
            raise RuntimeError(f"bob cannot start a round in phase {self.phase!r}")
        self._check_chain_headroom(1)
        self._doc = doc
        self._sig = countersign(doc, self.chain.peek_next())
        self.phase = "await_tau"
        return self._send(self.stack.depth + 1, RwsSig(self._sig))

    def _on_rws_tau(self, frame: Frame) -> list[bytes]:
        s = self.stack
        tau = dict(frame.body.tau)
        if s.depth >= 2 and frame.round == s.depth and tau == self._last_tau:
            # our acknowledgement was lost; this may arrive after we began the next round
            return self._resend_last()
        if self.phase != "await_tau" or frame.round != s.depth + 1:
            raise SessionFailed(Failure.VALIDATION, f"bob: unexpected tau for round {frame.round}")
        if not validate_extension(self._sig, tau, s):
            raise SessionFailed(Failure.VALIDATION, "bob: tau does not extend the stack with our signature")
        self.stack = apply_extension(s, self._sig, tau)
        self.audit_log[s.depth] = self._doc
        self._last_tau = tau
        self._settle()
        self.phase = "ready"
        return self._respond(frame.round, Ack(self._reveal()))

    def _state_parts(self) -> list[bytes]:
        return super()._state_parts() + [self._sig or b""]
