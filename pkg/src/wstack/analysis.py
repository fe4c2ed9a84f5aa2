"""Security and capacity arithmetic for Winternitz stacks.

Exact figures come from big-integer binomials evaluated with mpmath at 256
bits of working precision; the Stirling form and the HORS collision
correction are provided alongside for comparison with the published table.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

import mpmath
import numpy as np

from .fabric import Fabric, FabricParams
from .hashing import oracle_hash
from .oracle import ORACLE_BITS, OracleParams, hors, is_power_of_two
from .stack import CapacityExhausted, empty_stack, push

_PREC = 256
LOG2E = math.log2(math.e)
TABLE_WIDTHS = (512, 1024, 2048, 4096, 8192)
#: The published target levels for 256-bit security (None = unreachable).
PUBLISHED_KAPPA_256 = {512: None, 1024: 44, 2048: 36, 4096: 31, 8192: 27}


def _log2_int(n: int) -> mpmath.mpf:
    with mpmath.workprec(_PREC):
        return mpmath.log(mpmath.mpf(n), 2)


def multiset_count(w: int, kappa: int) -> int:
    """Number of cardinality-``kappa`` multisets over ``w`` symbols."""
    return math.comb(w + kappa - 1, kappa)


def exact_security_bits(w: int, kappa: int) -> mpmath.mpf:
    """``log2 C(w + kappa - 1, kappa)`` to well over 50 fractional bits."""
    if w < 1 or kappa < 1:
        raise ValueError("w and kappa must be >= 1")
    return _log2_int(multiset_count(w, kappa))


def approx_security_bits(w: int, kappa: int) -> float:
    """Stirling form ``kappa*log2(w*e/kappa) - log2(2*pi*kappa)/2``."""
    return kappa * math.log2(w * math.e / kappa) - 0.5 * math.log2(2 * math.pi * kappa)


def truncated_expansion_bits(w: int, kappa: int) -> mpmath.mpf:
    """First-order expansion ``w^k/k! * (1 + k(k-1)/2w)``, a lower bound on the exact count."""
    with mpmath.workprec(_PREC):
        value = mpmath.mpf(w) ** kappa / mpmath.factorial(kappa)
        value *= 1 + mpmath.mpf(kappa * (kappa - 1)) / (2 * w)
        return mpmath.log(value, 2)


def birthday_gamma(w: int, kappa: int) -> float:
    return kappa * kappa / w


def hors_correction_bits(w: int, kappa: int) -> float:
    """Entropy lost to the uneven weight of multisets with one repeated index."""
    return (LOG2E - 1) / 2 * birthday_gamma(w, kappa)


def hors_entropy_bits(w: int, kappa: int) -> mpmath.mpf:
    """First-order HORS oracle entropy: exact bits minus the collision correction."""
    return exact_security_bits(w, kappa) - hors_correction_bits(w, kappa)


def _partitions(n: int, largest: Optional[int] = None) -> Iterable[tuple[int, ...]]:
    if largest is None:
        largest = n
    if n == 0:
        yield ()
        return
    for p in range(min(n, largest), 0, -1):
        for rest in _partitions(n - p, p):
            yield (p,) + rest


def hors_oracle_entropy(w: int, kappa: int) -> mpmath.mpf:
    """Exact entropy of the multiset drawn as ``kappa`` uniform indices.

    Enumerates multiplicity patterns (integer partitions of ``kappa``) rather
    than multisets, so it is cheap for any width.
    """
    with mpmath.workprec(_PREC):
        total = mpmath.mpf(0)
        tuples = mpmath.mpf(w) ** kappa
        kfact = math.factorial(kappa)
        for part in _partitions(kappa):
            r = len(part)
            if r > w:
                continue
            # multisets with this pattern: choose r distinct symbols, then
            # assign the multiplicities up to permutations of equal parts
            n_multisets = math.perm(w, r)
            for same in Counter(part).values():
                n_multisets //= math.factorial(same)
            weight = kfact
            for m in part:
                weight //= math.factorial(m)
            p = mpmath.mpf(weight) / tuples
            total -= n_multisets * p * mpmath.log(p, 2)
        return total


def empirical_hors_entropy(w: int, kappa: int, samples: int, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo HORS entropy from real oracle outputs, with its standard error.

    Uses ``H = kappa*log2(w) - E[log2(kappa!/prod(m_i!))]``, which is unbiased
    unlike a plug-in histogram estimate over ``C(w+kappa-1, kappa)`` bins.
    """
    params = OracleParams(w, kappa)
    rng = random.Random(seed)
    lfk = math.lgamma(kappa + 1)
    logs = np.empty(samples)
    for i in range(samples):
        m = hors(oracle_hash(rng.randbytes(32)), params)
        lw = lfk - sum(math.lgamma(c + 1) for c in m.counts.values())
        logs[i] = lw / math.log(2)
    h = kappa * math.log2(w) - logs.mean()
    return float(h), float(logs.std(ddof=1) / math.sqrt(samples))


class Capacity(NamedTuple):
    d_max: int
    d_safe: int


def capacity(w: int, N: int, kappa: int) -> Capacity:
    """Signatures a ``(w, N)`` fabric supports: the estimate and a 6-sigma safe depth.

    ``d_safe`` is clamped at zero for short chains (``N < 36``).
    """
    if min(w, N, kappa) < 1:
        raise ValueError("w, N and kappa must be >= 1")
    d_max = (w * N) // kappa
    d_safe = math.floor(w * (N - 6 * math.sqrt(N)) / kappa)
    return Capacity(d_max, max(d_safe, 0))


def max_kappa(w: int) -> int:
    """Largest kappa whose indices fit in one SHA-512 output."""
    b = w.bit_length() - 1
    return ORACLE_BITS // b if b else ORACLE_BITS


def min_kappa_for_security(w: int, target_bits: float, method: str = "exact") -> Optional[int]:
    """Smallest kappa reaching ``target_bits`` within the SHA-512 index budget.

    ``method="exact"`` uses the big-integer multiset count; ``"approx"`` uses
    the Stirling form (the method behind the published table).
    """
    if target_bits <= 0:
        raise ValueError("target_bits must be positive")
    if not is_power_of_two(w):
        raise ValueError(f"fabric width must be a power of 2, got {w}")
    measure = {"exact": exact_security_bits, "approx": approx_security_bits}[method]
    for kappa in range(1, max_kappa(w) + 1):
        if measure(w, kappa) >= target_bits:
            return kappa
    return None


@dataclass(frozen=True)
class SecurityReport:
    w: int
    kappa: int
    exact_bits: mpmath.mpf
    approx_bits: float
    hors_entropy_bits: mpmath.mpf
    gamma: float


def security_report(w: int, kappa: int) -> SecurityReport:
    return SecurityReport(
        w=w,
        kappa=kappa,
        exact_bits=exact_security_bits(w, kappa),
        approx_bits=approx_security_bits(w, kappa),
        hors_entropy_bits=hors_entropy_bits(w, kappa),
        gamma=birthday_gamma(w, kappa),
    )


@dataclass(frozen=True)
class KappaTableRow:
    w: int
    published: Optional[int]
    exact: Optional[int]
    approx: Optional[int]

    @property
    def deviation(self) -> Optional[str]:
        """Human-readable note when the exact count moves the published entry."""
        if self.exact == self.published:
            return None
        shown = "--" if self.published is None else str(self.published)
        got = "--" if self.exact is None else str(self.exact)
        return (f"w={self.w}: exact binomials give kappa={got} where the table shows {shown} "
                f"(Stirling form gives {'--' if self.approx is None else self.approx})")


def kappa_table(target_bits: float = 256, widths: Iterable[int] = TABLE_WIDTHS) -> list[KappaTableRow]:
    return [
        KappaTableRow(w, PUBLISHED_KAPPA_256.get(w), min_kappa_for_security(w, target_bits, "exact"),
                min_kappa_for_security(w, target_bits, "approx"))
        for w in widths
    ]


@dataclass(frozen=True)
class AnalysisRow:
    w: int
    kappa: int
    exact_bits: float
    approx_bits: float
    entropy_bits: float
    d_max: int
    d_safe: int


def analysis_table(pairs: Iterable[tuple[int, int]], N: int) -> list[AnalysisRow]:
    rows = []
    for w, kappa in pairs:
        cap = capacity(w, N, kappa)
        rows.append(AnalysisRow(w, kappa, float(exact_security_bits(w, kappa)),
                                approx_security_bits(w, kappa), float(hors_entropy_bits(w, kappa)),
                                cap.d_max, cap.d_safe))
    return rows


def fill_to_exhaustion(w: int, N: int, kappa: int, seed: int) -> int:
    """Push random documents onto a fresh fabric until a chain runs out.

    Returns the depth reached, i.e. the number of successful pushes.
    """
    rng = random.Random(seed)
    fabric = Fabric.generate(rng.randbytes(32), FabricParams(w, N, phi=N))
    s = empty_stack(fabric.edge(), OracleParams(w, kappa))
    while True:
        try:
            s = push(rng.randbytes(32), s, fabric)
        except CapacityExhausted:
            return s.depth
