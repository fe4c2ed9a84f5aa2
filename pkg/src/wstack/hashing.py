"""Hash primitives: chain stepping, preimage distance and running digests.

Chains use SHA-256 (32-byte digests); the oracle uses SHA-512 (64 bytes).
Both are fixed so that every file and wire format stays bit-exact.
"""

from __future__ import annotations

import hashlib
import hmac
from typing import Optional

DIGEST_SIZE = 32
WIDE_DIGEST_SIZE = 64


def chain_step(x: bytes) -> bytes:
    """One link of a Winternitz chain: SHA-256 of ``x``."""
    return hashlib.sha256(x).digest()


def chain_iterate(x: bytes, n: int) -> bytes:
    """Apply :func:`chain_step` ``n`` times (``n == 0`` returns ``x``)."""
    if n < 0:
        raise ValueError(f"iteration count must be >= 0, got {n}")
    sha256 = hashlib.sha256
    for _ in range(n):
        x = sha256(x).digest()
    return x


def beta(x: bytes, y: bytes, limit: int) -> Optional[int]:
    """Number of chain steps leading from ``x`` to ``y``.

    Returns the least ``i`` in ``[0, limit]`` with ``chain_iterate(x, i) == y``,
    or ``None`` when ``y`` is not reachable within ``limit`` steps.
    """
    if limit < 0:
        raise ValueError(f"limit must be >= 0, got {limit}")
    if x == y:
        return 0
    sha256 = hashlib.sha256
    for i in range(1, limit + 1):
        x = sha256(x).digest()
        if x == y:
            return i
    return None


def oracle_hash(data: bytes) -> bytes:
    return hashlib.sha512(data).digest()


def prf(key: bytes, label: bytes) -> bytes:
    """HMAC-SHA-256 keyed derivation used for chain seeds."""
    return hmac.new(key, label, hashlib.sha256).digest()


class RunningDigest:
    """SHA-512 over a growing concatenation, snapshot without finalizing.

    Values are immutable: :meth:`absorb` returns a new digest and leaves the
    receiver untouched, so a stack can hand its state to a replica safely.
    Each absorb/snapshot costs work proportional to the new bytes only.
    """

    __slots__ = ("_h", "_length")

    def __init__(self, _state=None, _length: int = 0):
        self._h = _state if _state is not None else hashlib.sha512()
        self._length = _length

    def absorb(self, data: bytes) -> "RunningDigest":
        h = self._h.copy()
        h.update(data)
        return RunningDigest(h, self._length + len(data))

    def snapshot(self) -> bytes:
        return self._h.copy().digest()

    @property
    def length(self) -> int:
        """Total number of bytes absorbed so far."""
        return self._length

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RunningDigest):
            return NotImplemented
        return self._length == other._length and self.snapshot() == other.snapshot()

    def __hash__(self) -> int:
        return hash((self._length, self.snapshot()))

    def __repr__(self) -> str:
        return f"RunningDigest(length={self._length}, snapshot={self.snapshot()[:8].hex()}...)"


def running_absorb(rd: RunningDigest, data: bytes) -> RunningDigest:
    return rd.absorb(data)


def running_snapshot(rd: RunningDigest) -> bytes:
    return rd.snapshot()


class CheckpointedChain:
    """A hash chain ``r_0 .. r_n`` stored every ``stride`` positions.

    Positions that are multiples of ``stride`` and the final position ``n``
    are kept; anything else is recomputed forward from the checkpoint below
    it. The segment recomputed last is cached, so reading the chain in
    either direction costs under one hash per element on average.

    ``counter`` is a one-element list shared with the owner so a whole
    fabric can account for its recompute work in one place.
    """

    __slots__ = ("n", "stride", "checkpoints", "_cache", "_counter")

    def __init__(self, checkpoints: list[bytes], n: int, stride: int, counter: Optional[list[int]] = None):
        if len(checkpoints) != n_checkpoints(n, stride):
            raise ValueError(
                f"expected {n_checkpoints(n, stride)} checkpoints for n={n}, stride={stride}, "
                f"got {len(checkpoints)}"
            )
        self.n = n
        self.stride = stride
        self.checkpoints = checkpoints
        # (segment base, segment values); swapped as one tuple so concurrent
        # readers never pair a base with another segment's values
        self._cache: tuple[int, list[bytes]] = (-1, [])
        self._counter = counter if counter is not None else [0]

    @classmethod
    def build(cls, seed: bytes, n: int, stride: int, counter: Optional[list[int]] = None) -> "CheckpointedChain":
        sha256 = hashlib.sha256
        stored = []
        x = seed
        for i in range(n + 1):
            if i % stride == 0 or i == n:
                stored.append(x)
            if i < n:
                x = sha256(x).digest()
        return cls(stored, n, stride, counter)

    def __getitem__(self, i: int) -> bytes:
        if not 0 <= i <= self.n:
            raise IndexError(f"chain position {i} outside [0, {self.n}]")
        if i == self.n:
            return self.checkpoints[-1]
        base, offset = divmod(i, self.stride)
        if offset == 0:
            return self.checkpoints[base]
        cached_base, segment = self._cache
        if cached_base != base:
            segment = self._fill(base)
        return segment[offset]

    def _fill(self, base: int) -> list[bytes]:
        sha256 = hashlib.sha256
        x = self.checkpoints[base]
        start = base * self.stride
        end = min(start + self.stride, self.n)
        segment = [x]
        for _ in range(start + 1, end):
            x = sha256(x).digest()
            segment.append(x)
        self._counter[0] += len(segment) - 1
        self._cache = (base, segment)
        return segment

    @property
    def top(self) -> bytes:
        return self.checkpoints[-1]


def n_checkpoints(n: int, stride: int) -> int:
    """Stored positions for a length-``n`` chain: multiples of ``stride`` plus ``n``."""
    return -(-n // stride) + 1
