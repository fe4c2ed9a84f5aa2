"""Bob's acknowledgement chain ``q[0] .. q[L-1]`` with public key ``Q = q[L-1]``.

Bob reveals the chain from the top down, one element per acknowledged stack
document. After ``d`` acknowledgements the lowest revealed element is
``q[L-1-d]``, so ``beta(q, Q)`` of any revealed value is a depth count.
"""

from __future__ import annotations

import math
from typing import Optional

from ..hashing import CheckpointedChain, chain_iterate, chain_step, prf

ACK_LABEL = b"ack-seed"


def ack_base(seed: bytes) -> bytes:
    return prf(seed, ACK_LABEL)


def ack_public(seed: bytes, L: int) -> bytes:
    if L < 2:
        raise ValueError(f"acknowledgement chain length must be >= 2, got {L}")
    return chain_iterate(ack_base(seed), L - 1)


def ack_verify(q_star: bytes, last_known: bytes, max_gap: int) -> Optional[int]:
    """Smallest ``s`` in ``[1, max_gap]`` with ``H^s(q_star) == last_known``."""
    x = q_star
    for s in range(1, max_gap + 1):
        x = chain_step(x)
        if x == last_known:
            return s
    return None


def ack_depth(q: bytes, Q: bytes, L: int) -> Optional[int]:
    """Number of acknowledgements a revealed ``q`` proves, or ``None``."""
    if q == Q:
        return 0
    return ack_verify(q, Q, L - 1)


def ack_value(known: bytes, known_depth: int, depth: int) -> bytes:
    """The element acknowledging ``depth`` documents, derived from a deeper one."""
    if depth > known_depth:
        raise ValueError(f"cannot derive depth {depth} from a value proving only {known_depth}")
    return chain_iterate(known, known_depth - depth)


class AckChain:
    """Secret side of the chain, held by Bob.

    ``cursor`` is the index of the lowest revealed element and only ever
    decreases; ``Q`` itself counts as revealed from the start.
    """

    def __init__(self, seed: bytes, L: int, stride: Optional[int] = None):
        if L < 2:
            raise ValueError(f"acknowledgement chain length must be >= 2, got {L}")
        self.L = L
        if stride is None:
            stride = max(1, math.isqrt(L))
        self._chain = CheckpointedChain.build(ack_base(seed), L - 1, min(stride, L - 1))
        self.cursor = L - 1

    @property
    def Q(self) -> bytes:
        return self._chain.top

    @property
    def depth(self) -> int:
        """Acknowledgements revealed so far."""
        return self.L - 1 - self.cursor

    @property
    def remaining(self) -> int:
        return self.cursor

    def __getitem__(self, i: int) -> bytes:
        return self._chain[i]

    @property
    def last_revealed(self) -> bytes:
        return self._chain[self.cursor]

    def peek_next(self) -> bytes:
        """The element the next acknowledgement will reveal (still secret)."""
        if self.cursor == 0:
            raise IndexError("acknowledgement chain exhausted")
        return self._chain[self.cursor - 1]

    def peek_after_next(self) -> bytes:
        if self.cursor < 2:
            raise IndexError("acknowledgement chain exhausted")
        return self._chain[self.cursor - 2]

    def reveal_next(self) -> bytes:
        q = self.peek_next()
        self.cursor -= 1
        return q


def countersign(delta: bytes, q: bytes) -> bytes:
    """Bob's binding of a document to a not-yet-revealed chain element: ``H(delta || q)``."""
    return chain_step(delta + q)
