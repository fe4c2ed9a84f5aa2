"""Signature stacks over a fabric.

A stack holds the signed documents, the per-chain consumption counts
``sigma`` and the top ``T`` where ``T[k]`` sits ``sigma[k]`` steps below the
edge of chain ``k``. The signer extends it with :func:`push` (needs the
fabric); the verifier replays the same step with :func:`validate_extension`
and :func:`apply_extension` (needs only the previous top).

Stack file format ``WSS1`` (big-endian)::

    magic | w u32 | kappa u16 | d u32 | d * (len u32 | bytes) | w * sigma u32 | w * 32 top
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from .fabric import Edge, Fabric, FormatError
from .hashing import DIGEST_SIZE, RunningDigest, beta, chain_iterate
from .oracle import IndexMultiset, OracleParams, hors

STACK_MAGIC = b"WSS1"
_STACK_HEADER = struct.Struct(">4sIHI")

SparseFamily = dict[int, bytes]


class CapacityExhausted(Exception):
    """A push would need chain elements beyond the end of the fabric."""

    def __init__(self, k: int, needed: int, length: int):
        super().__init__(f"chain {k} needs {needed} elements but the fabric has length {length}")
        self.k = k
        self.needed = needed
        self.length = length


class ExtensionRejected(ValueError):
    """``apply_extension`` was called with a pair that fails validation."""


@dataclass(frozen=True)
class SignatureStack:
    params: OracleParams
    documents: tuple[bytes, ...]
    sigma: tuple[int, ...]
    top: tuple[bytes, ...]
    concat: RunningDigest = field(compare=False, repr=False)

    @property
    def depth(self) -> int:
        return len(self.documents)

    @property
    def w(self) -> int:
        return self.params.w

    @property
    def kappa(self) -> int:
        return self.params.kappa

    @property
    def mass(self) -> int:
        return sum(self.sigma)

    def next_multiset(self, delta: bytes) -> IndexMultiset:
        """Oracle output for the current concatenation extended by ``delta``."""
        return hors(self.concat.absorb(delta).snapshot(), self.params)

    def to_bytes(self) -> bytes:
        parts = [_STACK_HEADER.pack(STACK_MAGIC, self.w, self.kappa, self.depth)]
        for doc in self.documents:
            parts.append(struct.pack(">I", len(doc)))
            parts.append(doc)
        parts.append(struct.pack(f">{self.w}I", *self.sigma))
        parts.extend(self.top)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SignatureStack":
        if len(data) < _STACK_HEADER.size:
            raise FormatError("stack file truncated")
        magic, w, kappa, d = _STACK_HEADER.unpack_from(data)
        if magic != STACK_MAGIC:
            raise FormatError(f"bad stack magic {magic!r}")
        try:
            params = OracleParams(w, kappa)
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
        off = _STACK_HEADER.size
        docs = []
        concat = RunningDigest()
        for _ in range(d):
            if off + 4 > len(data):
                raise FormatError("stack file truncated in document list")
            (n,) = struct.unpack_from(">I", data, off)
            off += 4
            doc = data[off:off + n]
            if len(doc) != n:
                raise FormatError("stack file truncated in document body")
            off += n
            docs.append(doc)
            concat = concat.absorb(doc)
        if len(data) - off != w * 4 + w * DIGEST_SIZE:
            raise FormatError("stack file has a malformed sigma/top section")
        sigma = struct.unpack_from(f">{w}I", data, off)
        off += 4 * w
        top = tuple(data[off + i * DIGEST_SIZE: off + (i + 1) * DIGEST_SIZE] for i in range(w))
        return cls(params, tuple(docs), tuple(sigma), top, concat)

    def fingerprint(self) -> bytes:
        """SHA-256 of the serialized stack, for cheap replica comparison."""
        return hashlib.sha256(self.to_bytes()).digest()


def empty_stack(edge: Edge, params: OracleParams) -> SignatureStack:
    if edge.w != params.w:
        raise ValueError(f"edge width {edge.w} does not match oracle width {params.w}")
    return SignatureStack(params, (), (0,) * params.w, tuple(edge.values), RunningDigest())


def _check_document(delta: bytes) -> None:
    if not isinstance(delta, (bytes, bytearray)) or len(delta) == 0:
        raise ValueError("documents must be non-empty byte strings")


def push(delta: bytes, s: SignatureStack, fabric: Fabric) -> SignatureStack:
    """Sign ``delta`` on top of ``s``.

    Raises :class:`CapacityExhausted` if any chain would run past its start.
    """
    _check_document(delta)
    delta = bytes(delta)
    concat = s.concat.absorb(delta)
    m = hors(concat.snapshot(), s.params)
    sigma = list(s.sigma)
    top = list(s.top)
    N = fabric.N
    for k, c in m.counts.items():
        sigma[k] += c
        if sigma[k] > N:
            raise CapacityExhausted(k, sigma[k], N)
    for k in m.counts:
        top[k] = fabric.element(k, N - sigma[k])
    return SignatureStack(s.params, s.documents + (delta,), tuple(sigma), tuple(top), concat)


def family_diff(a, b) -> SparseFamily:
    """Entries of ``a`` that differ from ``b`` (both over the same index set)."""
    if isinstance(a, Mapping) or isinstance(b, Mapping):
        if not (isinstance(a, Mapping) and isinstance(b, Mapping)) or a.keys() != b.keys():
            raise ValueError("family_diff needs two families over the same index set")
        return {i: a[i] for i in a if a[i] != b[i]}
    if len(a) != len(b):
        raise ValueError(f"family_diff needs equal index sets, got {len(a)} and {len(b)}")
    return {i: x for i, (x, y) in enumerate(zip(a, b)) if x != y}


def family_sum(a, s: Mapping[int, bytes]):
    """Overlay the sparse family ``s`` on ``a``; returns the type of ``a``."""
    if isinstance(a, Mapping):
        stray = set(s) - set(a)
        if stray:
            raise ValueError(f"sparse family has indices outside the base family: {sorted(stray)}")
        return {i: s.get(i, v) for i, v in a.items()}
    n = len(a)
    for i in s:
        if not 0 <= i < n:
            raise ValueError(f"sparse family index {i} outside [0, {n})")
    out = list(a)
    for i, v in s.items():
        out[i] = v
    return tuple(out)


def extend(docs, delta):
    """Append ``delta`` under the index one past the current maximum."""
    if isinstance(docs, Mapping):
        nxt = max(docs) + 1 if docs else 0
        out = dict(docs)
        out[nxt] = delta
        return out
    return tuple(docs) + (delta,)


def validate_extension(delta: bytes, tau: Mapping[int, bytes], s: SignatureStack) -> bool:
    """Verifier-side check that ``(delta, tau)`` extends ``s`` honestly.

    With ``T' = T + tau`` each chain must satisfy
    ``beta(T'[k], T[k]) == omega(concat || delta, k)``; chains absent from
    ``tau`` therefore must have zero weight in the oracle output.
    """
    if not isinstance(delta, (bytes, bytearray)) or len(delta) == 0:
        return False
    if len(tau) > s.kappa:
        return False
    w = s.w
    for k, v in tau.items():
        if not (isinstance(k, int) and 0 <= k < w) or len(v) != DIGEST_SIZE:
            return False
    m = s.next_multiset(bytes(delta))
    for k in m.counts:
        if k not in tau:
            return False
    kappa = s.kappa
    for k, v in tau.items():
        if beta(v, s.top[k], kappa) != m.count(k):
            return False
    return True


def apply_extension(s: SignatureStack, delta: bytes, tau: Mapping[int, bytes]) -> SignatureStack:
    if not validate_extension(delta, tau, s):
        raise ExtensionRejected("(delta, tau) does not extend this stack")
    delta = bytes(delta)
    concat = s.concat.absorb(delta)
    m = hors(concat.snapshot(), s.params)
    sigma = list(s.sigma)
    for k, c in m.counts.items():
        sigma[k] += c
    top = family_sum(s.top, tau)
    return SignatureStack(s.params, s.documents + (delta,), tuple(sigma), top, concat)


def depth_from_tops(edge: Edge, top: Sequence[bytes], n_max: int, kappa: int) -> Optional[int]:
    """Recover the stack depth from its top alone, or ``None`` if ``top`` is foreign."""
    if len(top) != edge.w:
        return None
    total = 0
    for t, e in zip(top, edge):
        b = beta(t, e, n_max)
        if b is None:
            return None
        total += b
    if total % kappa:
        return None
    return total // kappa


def sigma_of(documents: Sequence[bytes], params: OracleParams) -> list[int]:
    """Per-chain consumption for a document sequence, replaying the oracle."""
    sigma = [0] * params.w
    concat = RunningDigest()
    for doc in documents:
        concat = concat.absorb(doc)
        for k, c in hors(concat.snapshot(), params).counts.items():
            sigma[k] += c
    return sigma


def verify_full(edge: Edge, documents: Sequence[bytes], top: Sequence[bytes], kappa: int,
                n_max: Optional[int] = None) -> bool:
    """Check a whole stack against the public edge, without the fabric."""
    if len(top) != edge.w or any(len(d) == 0 for d in documents):
        return False
    try:
        params = OracleParams(edge.w, kappa)
    except ValueError:
        return False
    sigma = sigma_of(documents, params)
    for t, e, sg in zip(top, edge, sigma):
        if n_max is not None and sg > n_max:
            return False
        if beta(t, e, sg) != sg:
            return False
    return True


def verify_stack(edge: Edge, s: SignatureStack, n_max: Optional[int] = None) -> bool:
    """:func:`verify_full` plus a check that the stored ``sigma`` is the replayed one."""
    if not verify_full(edge, s.documents, s.top, s.kappa, n_max):
        return False
    return list(s.sigma) == sigma_of(s.documents, s.params)


def reconstruct_edge(s: SignatureStack) -> Edge:
    return Edge(tuple(chain_iterate(t, sg) for t, sg in zip(s.top, s.sigma)))


def truncate(s: SignatureStack, depth: int) -> SignatureStack:
    """The substack made of the first ``depth`` documents.

    Each removed document lifts the top back up its chains by its oracle
    weight, so no fabric access is needed.
    """
    if not 0 <= depth <= s.depth:
        raise ValueError(f"depth {depth} outside [0, {s.depth}]")
    prefix = RunningDigest()
    for doc in s.documents[:depth]:
        prefix = prefix.absorb(doc)
    sigma = list(s.sigma)
    lift = [0] * s.w
    concat = prefix
    for doc in s.documents[depth:]:
        concat = concat.absorb(doc)
        for k, c in hors(concat.snapshot(), s.params).counts.items():
            lift[k] += c
    top = list(s.top)
    for k, c in enumerate(lift):
        if c:
            sigma[k] -= c
            top[k] = chain_iterate(top[k], c)
    return SignatureStack(s.params, s.documents[:depth], tuple(sigma), tuple(top), prefix)


def pop(s: SignatureStack) -> tuple[SignatureStack, bytes]:
    """Remove the last document; returns the shorter stack and the document."""
    if s.depth == 0:
        raise ValueError("cannot pop a depth-0 stack")
    return truncate(s, s.depth - 1), s.documents[-1]


def is_substack(s1: SignatureStack, s2: SignatureStack) -> bool:
    if s1.w != s2.w:
        raise ValueError("substack comparison needs stacks of equal width")
    return all(a <= b for a, b in zip(s1.sigma, s2.sigma))


def save_stack(s: SignatureStack, path: Union[str, Path]) -> None:
    Path(path).write_bytes(s.to_bytes())


def load_stack(path: Union[str, Path]) -> SignatureStack:
    return SignatureStack.from_bytes(Path(path).read_bytes())
