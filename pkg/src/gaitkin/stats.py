"""Agreement statistics between two measurement methods.

Correlation is Pearson's product-moment coefficient. Limits of agreement use
the sample (n - 1) standard deviation of the paired differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import PairingError, ShapeError, UndefinedCorrelationError

LOA_Z = 1.96


@dataclass(frozen=True)
class AgreementStats:
    pearson_r: float          # NaN when undefined (a constant series)
    mae: float
    bias: float               # mean of a - b
    loa_low: float
    loa_high: float
    n: int
    correlation_defined: bool = True
    means: np.ndarray = field(default=None, repr=False)        # (a + b) / 2 per pair
    differences: np.ndarray = field(default=None, repr=False)  # a - b per pair
    keys: tuple = ()          # trial identifiers, when built from keyed sets

    @property
    def sd_diff(self):
        return (self.loa_high - self.bias) / LOA_Z

    def as_dict(self):
        return {
            "pearson_r": None if not self.correlation_defined else self.pearson_r,
            "correlation_defined": self.correlation_defined,
            "mae": self.mae,
            "bias": self.bias,
            "loa_low": self.loa_low,
            "loa_high": self.loa_high,
            "sd_diff": self.sd_diff,
            "n": self.n,
        }


def _pair(a, b, min_len):
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError(f"series lengths differ: {a.size} vs {b.size}")
    if a.size < min_len:
        raise ShapeError(f"need at least {min_len} paired values, got {a.size}")
    return a, b


def pearson(a, b) -> float:
    a, b = _pair(a, b, 2)
    for name, x in (("a", a), ("b", b)):
        if np.all(x == x[0]):
            raise UndefinedCorrelationError(f"series {name} is constant; correlation undefined")
    da, db = a - a.mean(), b - b.mean()
    r = np.sum(da * db) / np.sqrt(np.sum(da * da) * np.sum(db * db))
    return float(np.clip(r, -1.0, 1.0))


def mae(a, b) -> float:
    a, b = _pair(a, b, 1)
    return float(np.mean(np.abs(a - b)))


def bland_altman(a, b) -> AgreementStats:
    """Bias and 95% limits of agreement of ``a`` relative to ``b``.

    The correlation is included when defined; for a constant series it is
    NaN and ``correlation_defined`` is False.
    """
    a, b = _pair(a, b, 2)
    d = a - b
    bias = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    try:
        r, defined = pearson(a, b), True
    except UndefinedCorrelationError:
        r, defined = float("nan"), False
    return AgreementStats(
        pearson_r=r,
        mae=float(np.mean(np.abs(d))),
        bias=bias,
        loa_low=bias - LOA_Z * sd,
        loa_high=bias + LOA_Z * sd,
        n=int(a.size),
        correlation_defined=defined,
        means=(a + b) / 2.0,
        differences=d,
    )


def compare_rom_sets(reference: Mapping, candidate: Mapping) -> AgreementStats:
    """Agreement of candidate ROM values against reference, paired by trial key.

    Differences are ``candidate - reference``, so a positive bias means the
    candidate method overestimates.
    """
    ref_keys, cand_keys = set(reference), set(candidate)
    if ref_keys != cand_keys:
        raise PairingError(
            f"unpaired trials: only in reference {sorted(map(str, ref_keys - cand_keys))}, "
            f"only in candidate {sorted(map(str, cand_keys - ref_keys))} "
            f"({len(ref_keys)} reference vs {len(cand_keys)} candidate)")
    keys = sorted(ref_keys, key=str)
    if len(keys) < 2:
        raise PairingError(f"need at least 2 paired trials, got {len(keys)}")
    ref = np.array([float(reference[k]) for k in keys])
    cand = np.array([float(candidate[k]) for k in keys])
    res = bland_altman(cand, ref)
    return AgreementStats(res.pearson_r, res.mae, res.bias, res.loa_low, res.loa_high,
                          res.n, res.correlation_defined, res.means, res.differences,
                          tuple(keys))
