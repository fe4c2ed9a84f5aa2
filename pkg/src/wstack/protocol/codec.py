"""Wire format shared by all three protocols.

Frame layout (integers big-endian)::

    msg_type u8 | session_id[16] | round u32 | payload | mac[4] (keyed sessions only)

The MAC is HMAC-SHA-256 over everything before it, truncated to 4 bytes.
Payload layouts:

    INVITE    L u32
    EDGE      w u32 | w * 32
    BOBKEY    Q[32]
    SIGNDOC   len u32 | document | count u16 | count * (k u16 | digest[32])
    ELEM      k u16 | digest[32]
    ELEM_ACK  k u16
    ACK       q[32]
    MAWS_ACK  q[32] | countersignature[32]
    MAWS_CSIG countersignature[32] | count u16 | entries
    RWS_SIG   s[32]
    RWS_TAU   count u16 | entries
    NAK       round u32
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import ClassVar, Mapping, Optional, Union

from ..fabric import Edge
from ..hashing import DIGEST_SIZE

HEADER = struct.Struct(">B16sI")
HEADER_SIZE = HEADER.size
MAC_SIZE = 4
SESSION_ID_SIZE = 16
MAX_FRAME_SIZE = 64 * 1024
ENTRY_SIZE = 2 + DIGEST_SIZE


class CodecError(ValueError):
    """A frame is malformed or does not belong to this session."""


class MacError(CodecError):
    """A keyed frame carries a wrong or missing tag."""


class MsgType(IntEnum):
    INVITE = 0x01
    EDGE = 0x02
    BOBKEY = 0x03
    SIGNDOC = 0x10
    ELEM = 0x11
    ELEM_ACK = 0x12
    ACK = 0x20
    MAWS_ACK = 0x21
    MAWS_CSIG = 0x22
    RWS_SIG = 0x30
    RWS_TAU = 0x31
    NAK = 0x7F


#: Key-setup messages travel out of band, never over the simulated channel.
OUT_OF_BAND = frozenset({MsgType.INVITE, MsgType.EDGE, MsgType.BOBKEY})


def mac_tag(key: bytes, data: bytes) -> bytes:
    return hmac.new(key, data, hashlib.sha256).digest()[:MAC_SIZE]


def mac_verify(key: bytes, data: bytes, tag: bytes) -> bool:
    return hmac.compare_digest(mac_tag(key, data), tag)


def _digest(buf: bytes, off: int) -> bytes:
    d = buf[off:off + DIGEST_SIZE]
    if len(d) != DIGEST_SIZE:
        raise CodecError("truncated digest")
    return d


def pack_entries(tau: Mapping[int, bytes]) -> bytes:
    parts = [struct.pack(">H", len(tau))]
    for k in sorted(tau):
        parts.append(struct.pack(">H", k))
        parts.append(tau[k])
    return b"".join(parts)


def unpack_entries(buf: bytes, off: int = 0) -> tuple[dict[int, bytes], int]:
    if off + 2 > len(buf):
        raise CodecError("truncated entry count")
    (count,) = struct.unpack_from(">H", buf, off)
    off += 2
    if off + count * ENTRY_SIZE > len(buf):
        raise CodecError("truncated entry list")
    tau: dict[int, bytes] = {}
    for _ in range(count):
        (k,) = struct.unpack_from(">H", buf, off)
        if k in tau:
            raise CodecError(f"duplicate chain index {k} in entry list")
        tau[k] = buf[off + 2:off + ENTRY_SIZE]
        off += ENTRY_SIZE
    return tau, off


def _exact(payload: bytes, n: int, what: str) -> None:
    if len(payload) != n:
        raise CodecError(f"{what} payload must be {n} bytes, got {len(payload)}")


@dataclass(frozen=True)
class Invite:
    L: int
    TYPE: ClassVar[MsgType] = MsgType.INVITE

    def pack(self) -> bytes:
        return struct.pack(">I", self.L)

    @classmethod
    def unpack(cls, payload: bytes) -> "Invite":
        _exact(payload, 4, "INVITE")
        return cls(struct.unpack(">I", payload)[0])


@dataclass(frozen=True)
class EdgeAnnounce:
    edge: Edge
    TYPE: ClassVar[MsgType] = MsgType.EDGE

    def pack(self) -> bytes:
        return struct.pack(">I", self.edge.w) + b"".join(self.edge.values)

    @classmethod
    def unpack(cls, payload: bytes) -> "EdgeAnnounce":
        if len(payload) < 4:
            raise CodecError("truncated EDGE payload")
        (w,) = struct.unpack_from(">I", payload)
        _exact(payload, 4 + w * DIGEST_SIZE, "EDGE")
        values = tuple(payload[4 + i * DIGEST_SIZE: 4 + (i + 1) * DIGEST_SIZE] for i in range(w))
        return cls(Edge(values))


@dataclass(frozen=True)
class BobKey:
    Q: bytes
    TYPE: ClassVar[MsgType] = MsgType.BOBKEY

    def pack(self) -> bytes:
        return self.Q

    @classmethod
    def unpack(cls, payload: bytes) -> "BobKey":
        _exact(payload, DIGEST_SIZE, "BOBKEY")
        return cls(payload)


@dataclass(frozen=True)
class SignDoc:
    document: bytes
    tau: Mapping[int, bytes] = field(default_factory=dict)
    TYPE: ClassVar[MsgType] = MsgType.SIGNDOC

    def pack(self) -> bytes:
        return struct.pack(">I", len(self.document)) + self.document + pack_entries(self.tau)

    @classmethod
    def unpack(cls, payload: bytes) -> "SignDoc":
        if len(payload) < 4:
            raise CodecError("truncated SIGNDOC payload")
        (n,) = struct.unpack_from(">I", payload)
        doc = payload[4:4 + n]
        if len(doc) != n:
            raise CodecError("truncated SIGNDOC document")
        tau, off = unpack_entries(payload, 4 + n)
        if off != len(payload):
            raise CodecError("trailing bytes after SIGNDOC entries")
        return cls(doc, tau)


@dataclass(frozen=True)
class Elem:
    k: int
    digest: bytes
    TYPE: ClassVar[MsgType] = MsgType.ELEM

    def pack(self) -> bytes:
        return struct.pack(">H", self.k) + self.digest

    @classmethod
    def unpack(cls, payload: bytes) -> "Elem":
        _exact(payload, ENTRY_SIZE, "ELEM")
        return cls(struct.unpack_from(">H", payload)[0], payload[2:])


@dataclass(frozen=True)
class ElemAck:
    k: int
    TYPE: ClassVar[MsgType] = MsgType.ELEM_ACK

    def pack(self) -> bytes:
        return struct.pack(">H", self.k)

    @classmethod
    def unpack(cls, payload: bytes) -> "ElemAck":
        _exact(payload, 2, "ELEM_ACK")
        return cls(struct.unpack(">H", payload)[0])


@dataclass(frozen=True)
class Ack:
    q: bytes
    TYPE: ClassVar[MsgType] = MsgType.ACK

    def pack(self) -> bytes:
        return self.q

    @classmethod
    def unpack(cls, payload: bytes) -> "Ack":
        _exact(payload, DIGEST_SIZE, "ACK")
        return cls(payload)


@dataclass(frozen=True)
class MawsAck:
    q: bytes
    countersig: bytes
    TYPE: ClassVar[MsgType] = MsgType.MAWS_ACK

    def pack(self) -> bytes:
        return self.q + self.countersig

    @classmethod
    def unpack(cls, payload: bytes) -> "MawsAck":
        _exact(payload, 2 * DIGEST_SIZE, "MAWS_ACK")
        return cls(payload[:DIGEST_SIZE], payload[DIGEST_SIZE:])


@dataclass(frozen=True)
class MawsCsig:
    countersig: bytes
    tau: Mapping[int, bytes]
    TYPE: ClassVar[MsgType] = MsgType.MAWS_CSIG

    def pack(self) -> bytes:
        return self.countersig + pack_entries(self.tau)

    @classmethod
    def unpack(cls, payload: bytes) -> "MawsCsig":
        csig = _digest(payload, 0)
        tau, off = unpack_entries(payload, DIGEST_SIZE)
        if off != len(payload):
            raise CodecError("trailing bytes after MAWS_CSIG entries")
        return cls(csig, tau)


@dataclass(frozen=True)
class RwsSig:
    s: bytes
    TYPE: ClassVar[MsgType] = MsgType.RWS_SIG

    def pack(self) -> bytes:
        return self.s

    @classmethod
    def unpack(cls, payload: bytes) -> "RwsSig":
        _exact(payload, DIGEST_SIZE, "RWS_SIG")
        return cls(payload)


@dataclass(frozen=True)
class RwsTau:
    tau: Mapping[int, bytes]
    TYPE: ClassVar[MsgType] = MsgType.RWS_TAU

    def pack(self) -> bytes:
        return pack_entries(self.tau)

    @classmethod
    def unpack(cls, payload: bytes) -> "RwsTau":
        tau, off = unpack_entries(payload)
        if off != len(payload):
            raise CodecError("trailing bytes after RWS_TAU entries")
        return cls(tau)


@dataclass(frozen=True)
class Nak:
    round: int
    TYPE: ClassVar[MsgType] = MsgType.NAK

    def pack(self) -> bytes:
        return struct.pack(">I", self.round)

    @classmethod
    def unpack(cls, payload: bytes) -> "Nak":
        _exact(payload, 4, "NAK")
        return cls(struct.unpack(">I", payload)[0])


Body = Union[Invite, EdgeAnnounce, BobKey, SignDoc, Elem, ElemAck, Ack, MawsAck, MawsCsig, RwsSig, RwsTau, Nak]

_BODIES = {cls.TYPE: cls for cls in (Invite, EdgeAnnounce, BobKey, SignDoc, Elem, ElemAck, Ack,
                                      MawsAck, MawsCsig, RwsSig, RwsTau, Nak)}


@dataclass(frozen=True)
class Frame:
    session_id: bytes
    round: int
    body: Body

    @property
    def msg_type(self) -> MsgType:
        return self.body.TYPE


def encode_frame(session_id: bytes, round_: int, body: Body, mac_key: Optional[bytes] = None) -> bytes:
    if len(session_id) != SESSION_ID_SIZE:
        raise ValueError(f"session id must be {SESSION_ID_SIZE} bytes")
    raw = HEADER.pack(body.TYPE, session_id, round_) + body.pack()
    if mac_key is not None:
        raw += mac_tag(mac_key, raw)
    if len(raw) > MAX_FRAME_SIZE and body.TYPE not in OUT_OF_BAND:
        raise ValueError(f"frame of {len(raw)} bytes exceeds the {MAX_FRAME_SIZE}-byte limit")
    return raw


def decode_frame(raw: bytes, mac_key: Optional[bytes] = None) -> Frame:
    """Parse ``raw``; raises :class:`MacError` before looking at a bad-tag payload."""
    if mac_key is not None:
        if len(raw) < HEADER_SIZE + MAC_SIZE:
            raise MacError("frame too short to carry a tag")
        raw, tag = raw[:-MAC_SIZE], raw[-MAC_SIZE:]
        if not mac_verify(mac_key, raw, tag):
            raise MacError("bad MAC tag")
    if len(raw) < HEADER_SIZE:
        raise CodecError("frame shorter than its header")
    msg_type, session_id, round_ = HEADER.unpack_from(raw)
    try:
        cls = _BODIES[MsgType(msg_type)]
    except ValueError:
        raise CodecError(f"unknown message type 0x{msg_type:02x}") from None
    if len(raw) > MAX_FRAME_SIZE and cls.TYPE not in OUT_OF_BAND:
        raise CodecError("oversized frame")
    return Frame(session_id, round_, cls.unpack(raw[HEADER_SIZE:]))


def payload_size(raw: bytes, keyed: bool) -> int:
    """Payload bytes of an encoded frame, excluding header and tag."""
    return len(raw) - HEADER_SIZE - (MAC_SIZE if keyed else 0)
