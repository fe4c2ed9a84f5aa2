"""Bipartite Winternitz stack protocol: Alice signs, Bob acknowledges.

Each round Alice pushes a document and sends it with the changed top
entries ``tau``; Bob validates against his replica and answers with the
next element of his acknowledgement chain.

In per-element mode the entries of ``tau`` travel one ELEM frame at a time.
Bob checks each against his stored top and confirms it with ELEM_ACK, so a
damaged entry costs one small retransmission; the document follows once
every entry is confirmed.
"""

from __future__ import annotations

from typing import Optional

from ..hashing import DIGEST_SIZE, beta
from .codec import Elem, ElemAck, Frame, SignDoc
from .session import AliceConfig, BobConfig, Signer, Verifier


class BwsAlice(Signer):
    def __init__(self, cfg: AliceConfig):
        super().__init__(cfg)
        self.per_element = cfg.per_element
        self._stream: list[tuple[int, bytes]] = []
        self._stream_pos = 0
        self._doc: Optional[bytes] = None

    def sign(self, doc: bytes) -> list[bytes]:
        self._check_ready()
        self._check_ack_headroom(1)
        tau = self._push(doc)
        round_ = self.stack.depth
        if not self.per_element:
            self.phase = "await_ack"
            return self._send(round_, SignDoc(doc, tau))
        self._doc = doc
        self._stream = sorted(tau.items())
        self._stream_pos = 0
        self.phase = "stream"
        k, v = self._stream[0]
        return self._send(round_, Elem(k, v))

    def _on_elem_ack(self, frame: Frame) -> list[bytes]:
        if self.phase != "stream" or frame.round != self.stack.depth:
            return self._ignore()
        if frame.body.k != self._stream[self._stream_pos][0]:
            return self._ignore()
        self._stream_pos += 1
        round_ = self.stack.depth
        if self._stream_pos < len(self._stream):
            k, v = self._stream[self._stream_pos]
            return self._send(round_, Elem(k, v))
        self.phase = "await_ack"
        return self._send(round_, SignDoc(self._doc, {}))

    def _state_parts(self) -> list[bytes]:
        return super()._state_parts() + [self._stream_pos.to_bytes(4, "big")]


class BwsBob(Verifier):
    def __init__(self, cfg: BobConfig):
        super().__init__(cfg)
        self.partial: dict[int, bytes] = {}

    def _on_elem(self, frame: Frame) -> list[bytes]:
        s = self.stack
        if s is None or self.phase != "ready" or frame.round != s.depth + 1 or s.depth == 0:
            return self._ignore()
        k, v = frame.body.k, frame.body.digest
        if self.partial.get(k) == v:
            return self._reply(frame.round, ElemAck(k))
        if not (0 <= k < s.w) or k in self.partial or len(v) != DIGEST_SIZE:
            return self._nak(frame.round)
        # an honest entry sits between 1 and kappa steps above the stored top
        if beta(v, s.top[k], s.kappa) in (None, 0):
            return self._nak(frame.round)
        self.partial[k] = v
        return self._reply(frame.round, ElemAck(k))

    def _round_tau(self, frame: Frame) -> dict[int, bytes]:
        if frame.body.tau or self.stack.depth == 0:
            return dict(frame.body.tau)
        return dict(self.partial)

    def _document_accepted(self, round_: int, doc: bytes) -> list[bytes]:
        self.partial = {}
        return super()._document_accepted(round_, doc)

    def _state_parts(self) -> list[bytes]:
        parts = super()._state_parts()
        for k in sorted(self.partial):
            parts.append(k.to_bytes(2, "big") + self.partial[k])
        return parts
