"""Degree sequences: validation, file parsing and closed-form quantities."""

from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
import math

import numpy as np

from .logspace import log_factorial


class DegreeSequenceError(ValueError):
    """Input degrees cannot be realized by any simple graph."""


class OddSum(DegreeSequenceError):
    def __init__(self, total):
        self.total = total
        super().__init__(f"OddSum(sum={total})")


class NotGraphical(DegreeSequenceError):
    def __init__(self, k):
        self.k = k
        super().__init__(f"NotGraphical(k={k})")


class DegreeTooLarge(DegreeSequenceError):
    def __init__(self, i, degree, n):
        self.i = i
        super().__init__(f"DegreeTooLarge(i={i}, d={degree}, n={n})")


def _erdos_gallai_violation(degrees):
    """First k (1-based, descending order) violating Erdos-Gallai, or None."""
    if len(degrees) <= 32:
        ds = sorted(degrees, reverse=True)
        prefix = 0
        for k in range(1, len(ds) + 1):
            prefix += ds[k - 1]
            if prefix > k * (k - 1) + sum(min(d, k) for d in ds[k:]):
                return k
        return None
    ds = np.sort(np.asarray(degrees, dtype=np.int64))[::-1]
    n = len(ds)
    k = np.arange(1, n + 1, dtype=np.int64)
    prefix = np.cumsum(ds)
    suffix = np.concatenate([np.cumsum(ds[::-1])[::-1], [0]])
    # p[k-1] = number of degrees >= k; tail entries >= k occupy positions k+1..max(k, p)
    asc = ds[::-1]
    p = n - np.searchsorted(asc, k, side="left")
    split = np.maximum(k, p)
    rhs = k * (k - 1) + k * (split - k) + suffix[split]
    bad = np.nonzero(prefix > rhs)[0]
    return int(bad[0]) + 1 if len(bad) else None


@dataclass(frozen=True)
class DegreeSequence:
    """A graphical degree sequence. Construction validates the input."""

    degrees: tuple

    def __post_init__(self):
        degs = tuple(int(d) for d in self.degrees)
        object.__setattr__(self, "degrees", degs)
        if not degs:
            raise DegreeSequenceError("degree sequence is empty")
        n = len(degs)
        for i, d in enumerate(degs):
            if d < 0:
                raise DegreeSequenceError(f"negative degree at index {i}")
            if d > n - 1:
                raise DegreeTooLarge(i, d, n)
        total = sum(degs)
        if total % 2:
            raise OddSum(total)
        k = _erdos_gallai_violation(degs)
        if k is not None:
            raise NotGraphical(k)

    @property
    def n(self):
        return len(self.degrees)

    @cached_property
    def m(self):
        return sum(self.degrees) // 2

    @cached_property
    def d_max(self):
        return max(self.degrees)

    def __len__(self):
        return len(self.degrees)

    def __iter__(self):
        return iter(self.degrees)

    @classmethod
    def regular(cls, n, d):
        if (n * d) % 2:
            raise OddSum(n * d)
        return cls((d,) * n)

    @classmethod
    def from_text(cls, text):
        """Parse one integer per line; blank lines and ``#`` comments are skipped."""
        degrees = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                degrees.append(int(line))
            except ValueError:
                raise DegreeSequenceError(f"line {lineno}: not an integer: {line!r}") from None
        return cls(tuple(degrees))

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())


def validate_graphical(degrees):
    """Return a :class:`DegreeSequence` or raise a :class:`DegreeSequenceError`."""
    return DegreeSequence(tuple(degrees))


@dataclass(frozen=True)
class SequenceStats:
    lam: float
    lam_sq: float
    regime_ratio: float


def lambda_fraction(seq):
    total = sum(seq.degrees)
    if total == 0:
        return Fraction(0)
    return Fraction(sum(d * (d - 1) // 2 for d in seq.degrees), total)


def lambda_bar(seq):
    """sum_i C(d_i, 2) / sum_i d_i, evaluated exactly and then rounded."""
    return float(lambda_fraction(seq))


def mckay_log_count(seq):
    """Natural log of the closed-form estimate of the number of labeled graphs.

    ``(2m)! / (2^m m! prod d_i!) * exp(-lambda - lambda^2)``
    """
    m = seq.m
    lam = lambda_bar(seq)
    return (
        log_factorial(2 * m)
        - m * math.log(2.0)
        - log_factorial(m)
        - sum(log_factorial(d) for d in seq.degrees)
        - lam
        - lam * lam
    )


@dataclass(frozen=True)
class RegimeReport:
    d_max: int
    m_quarter: float
    ratio: float
    in_regime: bool

    def as_dict(self):
        return {
            "d_max": self.d_max,
            "m_quarter": self.m_quarter,
            "ratio": self.ratio,
            "in_regime": self.in_regime,
        }


def regime_check(seq):
    """Compare d_max with m**(1/4). Advisory only; nothing downstream refuses to run."""
    m_quarter = seq.m ** 0.25
    ratio = seq.d_max / m_quarter if m_quarter > 0 else math.inf
    # integer comparison avoids the rounding of the fourth root
    in_regime = seq.d_max ** 4 <= seq.m
    return RegimeReport(seq.d_max, m_quarter, ratio, in_regime)


def sequence_stats(seq):
    lam = lambda_bar(seq)
    return SequenceStats(lam, lam * lam, regime_check(seq).ratio)
