"""Mutual asymmetric Winternitz stack protocol.

A round signs two stack positions. Alice pushes the transaction document;
Bob acknowledges it and attaches his countersignature ``H(delta || q)``,
where ``q`` is the chain element his *next* acknowledgement will reveal
(or 32 zero bytes if he refuses). Alice pushes the countersignature as the
following document, and Bob's second acknowledgement finally discloses
``q`` so Alice can check the countersignature.
"""

from __future__ import annotations

from typing import Optional

from ..stack import apply_extension, validate_extension
from .ackchain import countersign
from .codec import Ack, Frame, MawsAck, MawsCsig, SignDoc
from .session import AliceConfig, BobConfig, Signer, Verifier

ZERO_DOCUMENT = bytes(32)

APPROVED = "approved"
REFUSED = "not approved"
VOID = "void"


def countersignature_status(delta: bytes, countersig: bytes, q: bytes) -> str:
    """Classify a stored countersignature once its chain element is known."""
    if countersig == countersign(delta, q):
        return APPROVED
    if countersig == ZERO_DOCUMENT:
        return REFUSED
    return VOID


class MawsAlice(Signer):
    def __init__(self, cfg: AliceConfig):
        super().__init__(cfg)
        self._doc: Optional[bytes] = None
        self._csig: Optional[bytes] = None
        #: ``(position of the transaction document, status)`` per finished round.
        self.outcomes: list[tuple[int, str]] = []

    def sign(self, doc: bytes) -> list[bytes]:
        self._check_ready()
        self._check_ack_headroom(2)
        tau = self._push(doc)
        self._doc = doc
        self.phase = "await_first_ack"
        return self._send(self.stack.depth, SignDoc(doc, tau))

    def _on_maws_ack(self, frame: Frame) -> list[bytes]:
        if self.phase == "await_second_ack":
            # Bob has not seen our countersignature push yet
            return self._retransmit()
        if self.phase != "await_first_ack" or frame.round != self.stack.depth:
            return self._ignore()
        q = frame.body.q
        if q == self.q_last:
            return self._ignore()
        if not self._accept_ack(q):
            return self._bad_reply()
        self._csig = frame.body.countersig
        tau = self._push(self._csig)
        self.phase = "await_second_ack"
        return self._send(self.stack.depth, MawsCsig(self._csig, tau))

    def _on_ack(self, frame: Frame) -> list[bytes]:
        if self.phase != "await_second_ack":
            return super()._on_ack(frame)
        if frame.round != self.stack.depth:
            return self._ignore()
        q = frame.body.q
        if q == self.q_last:
            return self._ignore()
        if not self._accept_ack(q):
            return self._bad_reply()
        self.outcomes.append((self.stack.depth - 2, countersignature_status(self._doc, self._csig, q)))
        self._settle()
        self.phase = "ready"
        return []

    def _state_parts(self) -> list[bytes]:
        return super()._state_parts() + [self._csig or b""]


class MawsBob(Verifier):
    def __init__(self, cfg: BobConfig):
        super().__init__(cfg)
        self.approve = cfg.approve if cfg.approve is not None else (lambda doc: True)
        self._csig: Optional[bytes] = None
        self.outcomes: list[tuple[int, str]] = []

    def _document_accepted(self, round_: int, doc: bytes) -> list[bytes]:
        if round_ == 1:
            return super()._document_accepted(round_, doc)
        self._check_chain_headroom(2)
        q = self._reveal()
        # bind the document to the element the second acknowledgement reveals
        self._csig = countersign(doc, self.chain.peek_next()) if self.approve(doc) else ZERO_DOCUMENT
        self.phase = "await_csig"
        return self._respond(round_, MawsAck(q, self._csig), expect_reply=True)

    def _on_maws_csig(self, frame: Frame) -> list[bytes]:
        s = self.stack
        if s is None:
            return self._ignore()
        csig, tau = frame.body.countersig, dict(frame.body.tau)
        if self.phase == "ready" and s.depth >= 3 and frame.round == s.depth and csig == s.documents[-1]:
            return self._resend_last()
        if self.phase != "await_csig" or frame.round != s.depth + 1:
            return self._ignore()
        if not validate_extension(csig, tau, s):
            # back to waiting with our acknowledgement outstanding
            return self._retransmit()
        self.stack = apply_extension(s, csig, tau)
        q = self._reveal()
        self.outcomes.append((s.depth - 1, countersignature_status(s.documents[-1], csig, q)))
        self._settle()
        self.phase = "ready"
        return self._respond(frame.round, Ack(q))

    def _state_parts(self) -> list[bytes]:
        return super()._state_parts() + [self._csig or b""]
