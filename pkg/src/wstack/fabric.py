"""Private Winternitz fabric: generation, element access, persistence.

A fabric is ``w`` independent SHA-256 chains of length ``N``. Each chain is
stored at every ``phi``-th position (plus its final element), trading storage
for forward recomputation; see :func:`storage_bytes`.

File formats (all integers big-endian)::

    WSF1  magic | w u32 | N u32 | phi u32 | lambda u8 | master_seed[32] | checkpoints
    WSE1  magic | w u32 | lambda u8 | w * lambda edge bytes

The checkpoint payload lists, chain by chain, the stored digests in
increasing position order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence, Union

from .hashing import DIGEST_SIZE, CheckpointedChain, n_checkpoints, prf
from .oracle import is_power_of_two

FABRIC_MAGIC = b"WSF1"
EDGE_MAGIC = b"WSE1"
SEED_SIZE = 32

_FABRIC_HEADER = struct.Struct(">4sIIIB")
_EDGE_HEADER = struct.Struct(">4sIB")


class FormatError(ValueError):
    """A serialized fabric, edge or stack does not parse."""


@dataclass(frozen=True)
class FabricParams:
    w: int
    N: int
    phi: int = 1
    lam: int = DIGEST_SIZE

    def __post_init__(self):
        if not is_power_of_two(self.w):
            raise ValueError(f"fabric width must be a power of 2, got {self.w}")
        if self.N < 1:
            raise ValueError(f"chain length must be >= 1, got {self.N}")
        if not 1 <= self.phi <= self.N:
            raise ValueError(f"checkpoint stride must lie in [1, N={self.N}], got {self.phi}")
        if self.lam != DIGEST_SIZE:
            raise ValueError(f"only {DIGEST_SIZE}-byte chain digests are supported, got {self.lam}")


@dataclass(frozen=True)
class Edge:
    """The public key: the final element of every chain."""

    values: tuple[bytes, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        for v in self.values:
            if len(v) != DIGEST_SIZE:
                raise ValueError(f"edge values must be {DIGEST_SIZE} bytes")

    @property
    def w(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k: int) -> bytes:
        return self.values[k]

    def __iter__(self) -> Iterator[bytes]:
        return iter(self.values)

    def to_bytes(self) -> bytes:
        return _EDGE_HEADER.pack(EDGE_MAGIC, self.w, DIGEST_SIZE) + b"".join(self.values)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Edge":
        if len(data) < _EDGE_HEADER.size:
            raise FormatError("edge file truncated")
        magic, w, lam = _EDGE_HEADER.unpack_from(data)
        if magic != EDGE_MAGIC:
            raise FormatError(f"bad edge magic {magic!r}")
        if lam != DIGEST_SIZE:
            raise FormatError(f"unsupported digest length {lam}")
        body = data[_EDGE_HEADER.size:]
        if len(body) != w * lam:
            raise FormatError(f"edge body has {len(body)} bytes, expected {w * lam}")
        return cls(tuple(body[i:i + lam] for i in range(0, len(body), lam)))


def chain_seed(master_seed: bytes, k: int) -> bytes:
    return prf(master_seed, b"fabric-seed" + k.to_bytes(4, "big"))


class Fabric:
    """Alice's signing material. Only :meth:`element` exposes private values."""

    def __init__(self, params: FabricParams, master_seed: bytes, chains: Sequence[CheckpointedChain],
                 counter: list[int]):
        self.params = params
        self._master_seed = master_seed
        self._chains = list(chains)
        self._counter = counter
        self._edge = Edge(tuple(c.top for c in self._chains))

    @classmethod
    def generate(cls, master_seed: bytes, params: FabricParams) -> "Fabric":
        if len(master_seed) != SEED_SIZE:
            raise ValueError(f"master seed must be {SEED_SIZE} bytes")
        counter = [0]
        chains = [
            CheckpointedChain.build(chain_seed(master_seed, k), params.N, params.phi, counter)
            for k in range(params.w)
        ]
        return cls(params, master_seed, chains, counter)

    @property
    def w(self) -> int:
        return self.params.w

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def hash_count(self) -> int:
        """Chain steps spent recomputing non-stored elements since creation."""
        return self._counter[0]

    def reset_hash_count(self) -> None:
        self._counter[0] = 0

    def element(self, k: int, i: int) -> bytes:
        """Chain ``k`` at position ``i``; ``element(k, N)`` is the edge value."""
        if not 0 <= k < self.params.w:
            raise IndexError(f"chain index {k} outside [0, {self.params.w})")
        return self._chains[k][i]

    def edge(self) -> Edge:
        return self._edge

    def checkpoint_bytes(self) -> bytes:
        return b"".join(d for chain in self._chains for d in chain.checkpoints)

    def to_bytes(self) -> bytes:
        p = self.params
        header = _FABRIC_HEADER.pack(FABRIC_MAGIC, p.w, p.N, p.phi, p.lam)
        return header + self._master_seed + self.checkpoint_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Fabric":
        if len(data) < _FABRIC_HEADER.size + SEED_SIZE:
            raise FormatError("fabric file truncated")
        magic, w, N, phi, lam = _FABRIC_HEADER.unpack_from(data)
        if magic != FABRIC_MAGIC:
            raise FormatError(f"bad fabric magic {magic!r}")
        try:
            params = FabricParams(w, N, phi, lam)
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
        off = _FABRIC_HEADER.size
        master_seed = data[off:off + SEED_SIZE]
        off += SEED_SIZE
        per_chain = n_checkpoints(N, phi)
        expected = w * per_chain * lam
        if len(data) - off != expected:
            raise FormatError(f"checkpoint payload has {len(data) - off} bytes, expected {expected}")
        counter = [0]
        chains = []
        for k in range(w):
            stored = [data[off + j * lam: off + (j + 1) * lam] for j in range(per_chain)]
            off += per_chain * lam
            chains.append(CheckpointedChain(stored, N, phi, counter))
        return cls(params, master_seed, chains, counter)

    def public_bytes(self) -> bytes:
        """The only public serialization: the edge."""
        return self._edge.to_bytes()

    def __repr__(self) -> str:
        p = self.params
        return f"Fabric(w={p.w}, N={p.N}, phi={p.phi})"


def generate(master_seed: bytes, params: FabricParams) -> Fabric:
    return Fabric.generate(master_seed, params)


def storage_bytes(params: FabricParams) -> int:
    """Exact size of the checkpoint store: ``lambda * w * (ceil(N/phi) + 1)``.

    Equals ``lambda * w * (N // phi + 1)`` whenever ``phi`` divides ``N``.
    """
    return params.lam * params.w * n_checkpoints(params.N, params.phi)


PathLike = Union[str, Path]


def save_fabric(fabric: Fabric, path: PathLike) -> None:
    Path(path).write_bytes(fabric.to_bytes())


def load_fabric(path: PathLike) -> Fabric:
    return Fabric.from_bytes(Path(path).read_bytes())


def save_edge(edge: Edge, path: PathLike) -> None:
    Path(path).write_bytes(edge.to_bytes())


def load_edge(path: PathLike) -> Edge:
    return Edge.from_bytes(Path(path).read_bytes())
