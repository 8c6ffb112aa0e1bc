"""Compensated floating-point accumulation with certified error bounds.

Series here run to 10^8 terms of mixed sign near cancellation, and the
positivity predicate must never be decided by rounding noise.  The
accumulators therefore track an L1 magnitude alongside the compensated
total, from which a rigorous (if slightly conservative) error bound is
derived.  The per-term rounding model assumes libm exp/log accurate to
1 ulp, which every mainstream libm satisfies.
"""

from __future__ import annotations

import math

#: Unit roundoff of IEEE-754 binary64.
EPS = 2.0**-53

#: Width of the vectorized cumulative-sum chunks used by trajectory code.
CHUNK = 1024


class CompensatedSum:
    """Neumaier-compensated running sum.

    The compensated total deviates from the exact sum of the added floats
    by at most 2*EPS*abs_total up to O(EPS^2); callers fold in their own
    per-term model via series_error_bound.
    """

    __slots__ = ("total", "comp", "abs_total")

    def __init__(self) -> None:
        self.total = 0.0
        self.comp = 0.0
        self.abs_total = 0.0

    def add(self, x: float) -> None:
        t = self.total + x
        if abs(self.total) >= abs(x):
            self.comp += (self.total - t) + x
        else:
            self.comp += (x - t) + self.total
        self.total = t
        self.abs_total += abs(x)

    def add_exact_chunk(self, chunk) -> float:
        """Fold a chunk via math.fsum (exactly rounded) into the state.

        Returns the chunk's L1 mass, which replaces the net |sum| that a
        plain add() would have credited to abs_total.
        """
        values = chunk.tolist() if hasattr(chunk, "tolist") else list(chunk)
        net = math.fsum(values)
        mass = math.fsum(map(abs, values))
        self.add(net)
        self.abs_total += mass - abs(net)
        return mass

    @property
    def value(self) -> float:
        return self.total + self.comp


def series_error_bound(
    abs_total: float,
    max_chunk_abs: float,
    n_chunks: int,
    weight_scale: float,
) -> float:
    """Certified bound on |computed - exact| for chunked cumulative sums.

    Covers: per-term weight rounding (weight_scale ~ sigma*log(N) + 3 for
    n^-sigma computed as exp(-sigma*log n)), cross-chunk base accumulation
    (one rounding per chunk in the vectorized path, tighter but still
    covered in the compensated path), the base + cumsum adds at each
    checkpoint, and the recursive intra-chunk cumulative error.
    """
    return EPS * (
        (weight_scale + 8.0 + n_chunks) * abs_total + (CHUNK + 8.0) * max_chunk_abs
    )
