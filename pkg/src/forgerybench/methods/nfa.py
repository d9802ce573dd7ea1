"""Binomial-tail Number of False Alarms."""
from __future__ import annotations

from scipy.stats import binom


def binom_tail(n: int, k: int, p: float) -> float:
    """P(X >= k) for X ~ Binomial(n, p)."""
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    return float(binom.sf(k - 1, n, p))


def nfa(n_tests: float, n: int, k: int, p: float) -> float:
    return n_tests * binom_tail(n, k, p)
