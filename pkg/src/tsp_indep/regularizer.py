"""Distribution-free confidence penalties for pruned tree-structured partitions."""

from __future__ import annotations

import math

__all__ = ["epsilon_c", "penalty_r"]


def _check(n, b, d, delta, k) -> None:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 < b < 1.0:
        raise ValueError(f"b must lie in (0, 1), got {b}")
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if k < 1 or int(k) != k:
        raise ValueError(f"k must be a positive integer, got {k}")


def epsilon_c(n: int, b: float, d: int, delta: float, k: int) -> float:
    """Uniform deviation bound (nats) over pruned trees with ``k`` leaves.

    ``24*sqrt(2) / (b*sqrt(n)) * sqrt(ln(8/delta) + k*((d+1) ln 2 + d ln n))``
    """
    _check(n, b, d, delta, k)
    inner = math.log(8.0 / delta) + k * ((d + 1) * math.log(2.0) + d * math.log(n))
    return 24.0 * math.sqrt(2.0) / (b * math.sqrt(n)) * math.sqrt(inner)


def penalty_r(n: int, b: float, d: int, delta: float, k: int) -> float:
    """Size penalty with the union-bound correction ``delta -> delta * b``.

    The single-cell tree is exempt and costs exactly 0.
    """
    _check(n, b, d, delta, k)
    if k == 1:
        return 0.0
    return epsilon_c(n, b, d, delta * b, k)
