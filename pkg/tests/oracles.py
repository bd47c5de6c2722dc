"""Independent reference implementations used to freeze derived values.

These deliberately avoid the package's vectorized code paths. They use
plain loops, Python sets and ``fractions`` so that agreement is
meaningful.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction

C0 = 299_792_458.0


def cfs_index_set(m: int, n: int) -> list[Fraction]:
    """CFS offsets in units of the bandwidth, exactly."""
    base = Fraction(1, m * n)
    pts = {i * n * base for i in range(m)} | {j * m * base for j in range(n)}
    return sorted(pts)


def nfs_index_set(n1: int, n2: int) -> list[Fraction]:
    base = Fraction(1, n1 * n2)
    pts = {i * base for i in range(1, n1 + 1)} | {j * n1 * base for j in range(1, n2 + 1)}
    return sorted(pts)


def lorentz_coeff(f, lines):
    return sum(s * hw * hw / ((f - c) ** 2 + hw * hw) for c, s, hw in lines)


def direct_profile(freqs, gains_at_tau, y, tau):
    """``|a(tau)^H y| / ||a(tau)||`` by explicit summation for one delay."""
    num = 0j
    den = 0.0
    for f, g, yk in zip(freqs, gains_at_tau, y):
        a = g * cmath.exp(-2j * math.pi * f * tau)
        num += a.conjugate() * yk
        den += abs(a) ** 2
    return abs(num) / math.sqrt(den)


def direct_idft(samples, freqs, taus):
    """``h(tau) = sum_k y_k exp(+j 2 pi f_k tau)`` with Python loops, O(K * T)."""
    out = []
    for t in taus:
        acc = 0j
        for f, yk in zip(freqs, samples):
            acc += yk * cmath.exp(2j * math.pi * f * t)
        out.append(acc)
    return out


def textbook_idft(x):
    """Unnormalized inverse DFT ``X[n] = sum_k x[k] exp(+j 2 pi k n / K)``."""
    k_count = len(x)
    return [sum(x[k] * cmath.exp(2j * math.pi * k * n / k_count) for k in range(k_count))
            for n in range(k_count)]
