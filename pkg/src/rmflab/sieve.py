"""Segmented sieve for primes and per-integer arithmetic data.

For single integers or contiguous blocks this module computes the
squarefree indicator mu^2(n), the count omega(n) of distinct prime
divisors, and the distinct prime factorization itself.  Blocks are pure
functions of (lo, hi, base): they can be sieved in any order, cached,
and merged freely.

The block strategy: mark multiples of every base prime p <= sqrt(hi),
dividing p out of a running cofactor (one division per power level
p, p^2, p^3, ...), so a cofactor left > 1 is a single prime above
sqrt(hi).  A square divisor is detected by the p^2 marking level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DomainError, SieveBaseError

PRIME_CACHE_MAGIC = b"RMFPRIM1"

#: Default segment width; bounds working memory at O(sqrt(N) + block).
DEFAULT_BLOCK = 1 << 16


@dataclass(frozen=True)
class PrimeList:
    """All primes <= limit, ascending."""

    limit: int
    primes: np.ndarray  # int64, strictly increasing

    def __len__(self) -> int:
        return int(self.primes.size)

    def __iter__(self):
        return iter(self.primes.tolist())

    def rank_of(self, p: int) -> int:
        """Index of prime p in the list; DomainError if absent."""
        i = int(np.searchsorted(self.primes, p))
        if i >= len(self) or int(self.primes[i]) != p:
            raise DomainError(f"{p} is not a prime <= {self.limit}")
        return i


@dataclass(frozen=True)
class ArithSignature:
    """Squarefree flag, omega, and distinct prime divisors of one integer."""

    n: int
    is_squarefree: bool
    omega: int
    distinct_primes: tuple[int, ...]


def primes_up_to(n: int) -> PrimeList:
    """All primes <= n via a classic odd-only sieve of Eratosthenes."""
    if n < 0:
        raise DomainError(f"negative sieve limit {n}")
    if n < 2:
        return PrimeList(n, np.empty(0, dtype=np.int64))
    flags = np.ones(n + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return PrimeList(n, np.flatnonzero(flags).astype(np.int64))


def arith_signature(n: int) -> ArithSignature:
    """Direct trial-division factorization; the oracle for the block sieve."""
    if n < 1:
        raise DomainError(f"arith_signature needs n >= 1, got {n}")
    m = n
    squarefree = True
    primes: list[int] = []
    p = 2
    while p * p <= m:
        if m % p == 0:
            primes.append(p)
            count = 0
            while m % p == 0:
                m //= p
                count += 1
            if count > 1:
                squarefree = False
        p += 1 if p == 2 else 2
    if m > 1:
        primes.append(m)
    return ArithSignature(n, squarefree, len(primes), tuple(primes))


@dataclass(frozen=True)
class BlockTables:
    """Vectorized arithmetic data for every n in [lo, hi].

    cofactor[i] is the part of n = lo + i left after dividing out all
    base primes <= sqrt(hi); it is either 1 or a single prime.
    """

    lo: int
    hi: int
    omega: np.ndarray  # int16
    squarefree: np.ndarray  # bool
    cofactor: np.ndarray  # int64


def _check_base(hi: int, base: PrimeList) -> np.ndarray:
    root = math.isqrt(hi)
    if base.limit < root:
        raise SieveBaseError(
            f"prime base covers only <= {base.limit}, need <= {root} for hi={hi}"
        )
    cut = int(np.searchsorted(base.primes, root, side="right"))
    return base.primes[:cut]


def sieve_block_tables(lo: int, hi: int, base: PrimeList) -> BlockTables:
    """Sieve [lo, hi] against the base primes; pure in (lo, hi, base)."""
    if not 1 <= lo <= hi:
        raise DomainError(f"invalid block [{lo}, {hi}]")
    size = hi - lo + 1
    omega = np.zeros(size, dtype=np.int16)
    squarefree = np.ones(size, dtype=bool)
    cofactor = np.arange(lo, hi + 1, dtype=np.int64)
    for p in _check_base(hi, base).tolist():
        start = ((lo + p - 1) // p) * p
        sl = slice(start - lo, size, p)
        omega[sl] += 1
        cofactor[sl] //= p
        q = p * p
        while q <= hi:
            start = ((lo + q - 1) // q) * q
            sl = slice(start - lo, size, q)
            squarefree[sl] = False
            cofactor[sl] //= p
            q *= p
    return BlockTables(lo, hi, omega, squarefree, cofactor)


def sieve_block(lo: int, hi: int, base: PrimeList) -> list[ArithSignature]:
    """Signatures for every n in [lo, hi], cofactors recognized as primes."""
    tables = sieve_block_tables(lo, hi, base)
    size = hi - lo + 1
    factor_lists: list[list[int]] = [[] for _ in range(size)]
    for p in _check_base(hi, base).tolist():
        start = ((lo + p - 1) // p) * p
        for i in range(start - lo, size, p):
            factor_lists[i].append(p)
    out = []
    omega = tables.omega
    squarefree = tables.squarefree
    cofactor = tables.cofactor
    for i in range(size):
        primes = factor_lists[i]
        c = int(cofactor[i])
        if c > 1:
            primes.append(c)
        out.append(
            ArithSignature(
                lo + i,
                bool(squarefree[i]),
                int(omega[i]) + (c > 1),
                tuple(primes),
            )
        )
    return out


def prime_incidence(
    lo: int, hi: int, base: PrimeList, *, parity: bool
) -> tuple[sparse.csr_matrix, BlockTables]:
    """Sparse incidence of distinct primes (or exponent parities) over a block.

    Row i corresponds to n = lo + i; column r to the r-th prime of `base`.
    With parity=False an entry is 1 when p | n (distinct-prime presence);
    with parity=True it is v_p(n) mod 2.  The base must contain every prime
    factor occurring in the block, i.e. base.limit >= hi.
    """
    if base.limit < hi:
        raise SieveBaseError(
            f"incidence needs all primes <= {hi}, base covers {base.limit}"
        )
    tables = sieve_block_tables(lo, hi, base)
    size = hi - lo + 1
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    root = math.isqrt(hi)
    n_small = int(np.searchsorted(base.primes, root, side="right"))
    for r in range(n_small):
        p = int(base.primes[r])
        q = p
        while q <= hi:
            start = ((lo + q - 1) // q) * q
            idx = np.arange(start - lo, size, q, dtype=np.int64)
            rows.append(idx)
            cols.append(np.full(idx.size, r, dtype=np.int64))
            if not parity:
                break
            q *= p
    big = np.flatnonzero(tables.cofactor > 1)
    if big.size:
        ranks = np.searchsorted(base.primes, tables.cofactor[big])
        rows.append(big.astype(np.int64))
        cols.append(ranks.astype(np.int64))
    if rows:
        data = np.ones(sum(a.size for a in rows), dtype=np.int64)
        mat = sparse.coo_matrix(
            (data, (np.concatenate(rows), np.concatenate(cols))),
            shape=(size, len(base)),
        ).tocsr()
        if parity:
            # duplicate (row, col) pairs summed to v_p(n); keep its parity
            mat.data %= 2
            mat.eliminate_zeros()
    else:
        mat = sparse.csr_matrix((size, len(base)), dtype=np.int64)
    return mat, tables


def iter_blocks(lo: int, hi: int, block: int = DEFAULT_BLOCK):
    """Yield (a, b) segments covering [lo, hi] in ascending order."""
    a = lo
    while a <= hi:
        b = min(a + block - 1, hi)
        yield a, b
        a = b + 1


def save_prime_cache(path, plist: PrimeList) -> None:
    """Write primes as little-endian int64 behind an 8-byte magic header."""
    with open(path, "wb") as fh:
        fh.write(PRIME_CACHE_MAGIC)
        fh.write(np.asarray([plist.limit], dtype="<i8").tobytes())
        fh.write(plist.primes.astype("<i8").tobytes())


def load_prime_cache(path) -> PrimeList:
    """Read a prime cache written by save_prime_cache."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != PRIME_CACHE_MAGIC:
            raise DomainError(f"bad prime cache magic {magic!r}")
        limit = int(np.frombuffer(fh.read(8), dtype="<i8")[0])
        primes = np.frombuffer(fh.read(), dtype="<i8").astype(np.int64)
    return PrimeList(limit, primes)
