"""BWS, MAWS and RWS endpoints, their wire codec and the adjudicator."""

from .ackchain import AckChain, ack_depth, ack_public, ack_value, ack_verify, countersign
from .bws import BwsAlice, BwsBob
from .codec import (CodecError, Frame, MacError, MsgType, decode_frame, encode_frame, mac_tag, mac_verify,
                    payload_size)
from .judge import EVIDENCE_REJECTED, DocumentEntry, Verdict, adjudicate, rws_scan
from .maws import APPROVED, REFUSED, VOID, ZERO_DOCUMENT, MawsAlice, MawsBob
from .rws import RwsAlice, RwsBob
from .session import AliceConfig, BobConfig, Failure, SessionFailed, invitation_document

ENDPOINTS = {
    "bws": (BwsAlice, BwsBob),
    "maws": (MawsAlice, MawsBob),
    "rws": (RwsAlice, RwsBob),
}
