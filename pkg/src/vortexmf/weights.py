"""Signed particle weight sequences and the uniform-l^r boundedness check.

The normalized norm is ||w||_r = ((1/N) sum |w_i|^r)^(1/r) with the max for
r = inf.  A family is considered uniformly bounded when the fitted growth
exponent of log ||w^N||_r against log N stays below a small threshold;
the asymptotic O(1) statement has no finite-sample test sharper than that.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

GROWTH_EXPONENT_THRESHOLD = 0.02


@dataclass(frozen=True)
class WeightSequence:
    """N signed weights together with their declared l^r exponent."""

    values: np.ndarray
    r: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("weights must form a nonempty 1-d array")
        if not (self.r > 1.0):
            raise ValueError("declared exponent r must lie in (1, inf]")
        if not np.isfinite(lr_norm(v, self.r)):
            raise ValueError("weight sequence has non-finite l^r norm")

    @property
    def n(self):
        return self.values.size

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "value"])
            for i, v in enumerate(self.values):
                writer.writerow([i, repr(float(v))])


def lr_norm(values, r):
    """((1/N) sum |w_i|^r)^(1/r); max |w_i| when r = inf."""
    if not (r >= 1.0):
        raise ValueError("r must be >= 1 or inf")
    w = np.abs(np.asarray(values, dtype=float))
    if math.isinf(r):
        return float(w.max())
    return float(np.mean(w ** r) ** (1.0 / r))


def monotone_embedding(w, r1, r2):
    """Both norms for r1 <= r2; postcondition: norm(r1) <= norm(r2)."""
    if r1 > r2:
        raise ValueError("requires r1 <= r2")
    values = w.values if isinstance(w, WeightSequence) else w
    n1, n2 = lr_norm(values, r1), lr_norm(values, r2)
    assert n1 <= n2 * (1.0 + 1e-12) + 1e-300, "l^r monotonicity violated"
    return n1, n2


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class WeightFamily:
    """A rule producing a WeightSequence for every N >= 1.

    kinds: constant(c) | two_piece(a1, a2) | heavy_tail(theta) |
    padded(base, factor).  two_piece alternates a1 (odd positions) with a2;
    heavy_tail places ceil(N^theta) leading entries of value N^theta before
    unit entries; padded appends zeros so the base sequence occupies a
    1/factor fraction of the total.
    """

    kind: str
    c: float = 1.0
    a1: float = 1.0
    a2: float = -1.0
    theta: float = 1.0 / 3.0
    base: "WeightFamily | None" = None
    factor: int = 5
    description: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in ("constant", "two_piece", "heavy_tail", "padded"):
            raise ValueError(f"unknown weight family {self.kind!r}")
        if self.kind == "heavy_tail" and not 0.0 < self.theta < 1.0:
            raise ValueError("heavy_tail exponent must lie in (0, 1)")
        if self.kind == "padded":
            if self.base is None or self.factor < 2:
                raise ValueError("padded needs a base family and factor >= 2")

    def declared_r(self):
        if self.kind in ("constant", "two_piece"):
            return math.inf
        if self.kind == "heavy_tail":
            # (1/N) * N^theta * N^(r theta) stays O(1) up to r = (1-theta)/theta
            return (1.0 - self.theta) / self.theta
        return self.base.declared_r()

    def mean_limit(self):
        """Limit of (1/N) sum w_i as N -> infinity (the density prefactor)."""
        if self.kind == "constant":
            return self.c
        if self.kind == "two_piece":
            return 0.5 * (self.a1 + self.a2)
        if self.kind == "heavy_tail":
            return 1.0  # bulk of unit entries dominates; tail adds O(N^(2 theta - 1))
        return self.base.mean_limit() / self.factor

    def build(self, n):
        if n < 1:
            raise ValueError("need n >= 1")
        if self.kind == "constant":
            values = np.full(n, self.c)
        elif self.kind == "two_piece":
            values = np.where(np.arange(n) % 2 == 0, self.a1, self.a2)
        elif self.kind == "heavy_tail":
            big = n ** self.theta
            k = min(n, math.ceil(big))
            values = np.ones(n)
            values[:k] = big
        else:
            n_base = max(1, n // self.factor)
            values = np.zeros(n)
            values[:n_base] = self.base.build(n_base).values
        return WeightSequence(values, self.declared_r())


def constant(c=1.0):
    return WeightFamily("constant", c=c, description=f"constant {c}")


def two_piece(a1=1.0, a2=-1.0):
    return WeightFamily("two_piece", a1=a1, a2=a2,
                        description=f"alternating {a1}/{a2}")


def heavy_tail(theta=1.0 / 3.0):
    return WeightFamily("heavy_tail", theta=theta,
                        description=f"ceil(N^{theta:g}) entries of N^{theta:g}")


def padded(base, factor=5):
    return WeightFamily("padded", base=base, factor=factor,
                        description=f"{base.kind} padded x{factor} with zeros")


# ---------------------------------------------------------------------------
# boundedness report


@dataclass(frozen=True)
class WrReport:
    family: str
    r: float
    ns: tuple
    norms: tuple
    sup_norm: float
    growth_exponent: float
    threshold: float
    bounded: bool

    def rows(self):
        return [{"N": n, "norm": v} for n, v in zip(self.ns, self.norms)]


def check_wr(family, r, ns):
    """Evaluate ||w^N||_r over the N grid and fit its log-log growth.

    Verdict ``bounded`` when the fitted exponent is below
    GROWTH_EXPONENT_THRESHOLD (an artifact proxy for the paper-level O(1)
    statement; the threshold is reported alongside the verdict).
    """
    ns = [int(n) for n in ns]
    if len(ns) < 2 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("need at least two strictly increasing N values")
    norms = [lr_norm(family.build(n).values, r) for n in ns]
    if min(norms) <= 0.0:
        exponent = 0.0
    else:
        exponent = float(np.polyfit(np.log(ns), np.log(norms), 1)[0])
    return WrReport(family.description or family.kind, r, tuple(ns),
                    tuple(norms), max(norms), exponent,
                    GROWTH_EXPONENT_THRESHOLD,
                    exponent < GROWTH_EXPONENT_THRESHOLD)
