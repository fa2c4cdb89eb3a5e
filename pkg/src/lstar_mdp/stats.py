"""Hoeffding-bound comparison of output frequency maps."""

from __future__ import annotations

import math
from typing import Mapping


def hoeffding_bound(n1: int, n2: int, alpha: float) -> float:
    """Largest empirical-probability gap tolerated between samples of sizes ``n1`` and ``n2``."""
    return (math.sqrt(1.0 / n1) + math.sqrt(1.0 / n2)) * math.sqrt(0.5 * math.log(2.0 / alpha))


def hoeffding_diff(f1: Mapping[str, int], f2: Mapping[str, int], alpha: float) -> bool:
    """Whether two frequency maps come from different distributions.

    Returns False when either map is empty.  Otherwise the maps differ if an
    output was observed on one side only, or if some output's relative
    frequency differs by more than :func:`hoeffding_bound`.  Whether the
    samples are large enough to be compared at all is the caller's concern.
    """
    n1 = sum(f1.values())
    n2 = sum(f2.values())
    if n1 <= 0 or n2 <= 0:
        return False
    outputs = set(k for k, v in f1.items() if v > 0) | set(k for k, v in f2.items() if v > 0)
    for o in outputs:
        if (f1.get(o, 0) > 0) != (f2.get(o, 0) > 0):
            return True
    bound = hoeffding_bound(n1, n2, alpha)
    for o in outputs:
        if abs(f1.get(o, 0) / n1 - f2.get(o, 0) / n2) > bound:
            return True
    return False
