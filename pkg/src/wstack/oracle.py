"""HORS oracle: SHA-512 digests sliced into cardinality-kappa index multisets."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .hashing import WIDE_DIGEST_SIZE

ORACLE_BITS = 8 * WIDE_DIGEST_SIZE


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class OracleParams:
    w: int
    kappa: int

    def __post_init__(self):
        if not is_power_of_two(self.w):
            raise ValueError(f"fabric width must be a power of 2, got {self.w}")
        if self.kappa < 1:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if self.kappa * self.bits_per_index > ORACLE_BITS:
            raise ValueError(
                f"kappa*log2(w) = {self.kappa * self.bits_per_index} exceeds the "
                f"{ORACLE_BITS}-bit SHA-512 budget"
            )

    @property
    def bits_per_index(self) -> int:
        return self.w.bit_length() - 1

    @property
    def bits_used(self) -> int:
        return self.kappa * self.bits_per_index


@dataclass(frozen=True)
class IndexMultiset:
    """Oracle output: the raw index tuple (in extraction order) and its counts."""

    indices: tuple[int, ...]
    counts: Mapping[int, int] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "counts", MappingProxyType(dict(Counter(self.indices))))

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self.counts)

    @property
    def cardinality(self) -> int:
        return len(self.indices)

    def count(self, k: int) -> int:
        return self.counts.get(k, 0)

    def __eq__(self, other: object) -> bool:
        # multiset equality ignores extraction order
        if not isinstance(other, IndexMultiset):
            return NotImplemented
        return self.counts == other.counts

    def __hash__(self) -> int:
        return hash(frozenset(self.counts.items()))


def hors(digest: bytes, params: OracleParams) -> IndexMultiset:
    """Map a 64-byte digest to ``kappa`` indices of ``log2(w)`` bits each.

    Bits are read most-significant first; chunk ``i`` covers bits
    ``[i*b, (i+1)*b)`` of the digest and is read as a big-endian integer.
    """
    if len(digest) != WIDE_DIGEST_SIZE:
        raise ValueError(f"oracle input must be {WIDE_DIGEST_SIZE} bytes, got {len(digest)}")
    b = params.bits_per_index
    value = int.from_bytes(digest, "big") >> (ORACLE_BITS - params.bits_used)
    mask = params.w - 1
    indices = [(value >> (b * (params.kappa - 1 - i))) & mask for i in range(params.kappa)]
    return IndexMultiset(tuple(indices))


def omega(digest: bytes, k: int, params: OracleParams) -> int:
    """Multiplicity of chain index ``k`` in the oracle output for ``digest``."""
    if not 0 <= k < params.w:
        raise IndexError(f"chain index {k} outside [0, {params.w})")
    return hors(digest, params).count(k)
