"""Signed empirical measures, grid functionals, and pairing combinatorics.

The estimators here are diagnostic surrogates: entropy and Fisher
information are evaluated on gridded densities by trapezoid quadrature with
central-difference gradients, and particle clouds enter through a Gaussian
KDE whose bandwidth is always reported with the output.
"""

import itertools
import math
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import FileFormat, GridTooCoarse, NegativeDensity, TooLarge
from .weights import WeightSequence, lr_norm

ENUMERATION_LIMIT = 12


# ---------------------------------------------------------------------------
# signed atomic measures


@dataclass(frozen=True)
class SignedEmpiricalMeasure:
    """(1/N) sum w_i delta_{x_i}; atoms carry mass w_i / N."""

    positions: np.ndarray   # (N, d)
    masses: np.ndarray      # (N,)
    total_variation: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        m = np.asarray(self.masses, dtype=float)
        if pos.ndim != 2 or m.shape != (pos.shape[0],):
            raise ValueError("positions (N, d) and masses (N,) required")
        pos.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "total_variation", float(np.abs(m).sum()))

    @classmethod
    def from_weights(cls, positions, weights):
        w = weights.values if isinstance(weights, WeightSequence) else np.asarray(weights)
        n = len(w)
        if n != len(positions):
            raise ValueError("one weight per particle required")
        return cls(positions, w / n)

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def dim(self):
        return self.positions.shape[1]


def pair(mu, phi):
    """<phi, mu> = sum_i mass_i phi(x_i), phi vectorized over (..., d)."""
    return float(np.sum(mu.masses * np.asarray(phi(mu.positions))))


# ---------------------------------------------------------------------------
# gridded densities


@dataclass(frozen=True)
class DensityGrid:
    """Uniform-grid samples of a (possibly signed) density.

    Node j sits at origin + h * j; ``mass`` caches values.sum() * h^d.
    """

    origin: np.ndarray
    h: float
    values: np.ndarray
    mass: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        org = np.atleast_1d(np.asarray(self.origin, dtype=float))
        if vals.ndim != org.size:
            raise ValueError("origin length must match grid dimensionality")
        vals.setflags(write=False)
        org.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", org)
        object.__setattr__(self, "mass", float(vals.sum() * self.h ** vals.ndim))

    @property
    def dim(self):
        return self.values.ndim

    @property
    def dims(self):
        return self.values.shape

    def axes(self):
        return tuple(self.origin[k] + self.h * np.arange(s)
                     for k, s in enumerate(self.values.shape))

    def meshes(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def integral(self, integrand=None):
        """Trapezoid quadrature of integrand(values) (or values)."""
        field = self.values if integrand is None else integrand
        out = field
        for _ in range(out.ndim):
            out = np.trapezoid(out, dx=self.h, axis=-1)
        return float(out)

    # --- serialization: {ndim, origin, h, dims} header then row-major f64 ---

    def to_binary(self, path):
        with open(path, "wb") as fh:
            fh.write(struct.pack("<Q", self.dim))
            fh.write(struct.pack(f"<{self.dim}d", *self.origin))
            fh.write(struct.pack("<d", self.h))
            fh.write(struct.pack(f"<{self.dim}Q", *self.values.shape))
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def from_binary(cls, path):
        with open(path, "rb") as fh:
            raw = fh.read()
        try:
            (ndim,) = struct.unpack_from("<Q", raw, 0)
            off = 8
            origin = struct.unpack_from(f"<{ndim}d", raw, off)
            off += 8 * ndim
            (h,) = struct.unpack_from("<d", raw, off)
            off += 8
            dims = struct.unpack_from(f"<{ndim}Q", raw, off)
            off += 8 * ndim
            count = int(np.prod(dims))
            values = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
        except struct.error as exc:
            raise FileFormat(f"not a density-grid file: {exc}") from exc
        return cls(np.array(origin), h, values.reshape(dims).copy())

    def to_csv(self, path):
        axes = self.axes()
        with open(path, "w") as fh:
            fh.write(",".join(f"x{k}" for k in range(self.dim)) + ",value\n")
            for idx in np.ndindex(*self.values.shape):
                coords = ",".join(repr(float(axes[k][i])) for k, i in enumerate(idx))
                fh.write(f"{coords},{self.values[idx]!r}\n")


def grid_from_function(fn, half_width, m, dim=2, center=None):
    """Sample fn on the [-half_width, half_width) grid with m nodes per axis."""
    h = 2.0 * half_width / m
    origin = np.full(dim, -half_width) if center is None else np.asarray(center) - half_width
    axes = [origin[k] + h * np.arange(m) for k in range(dim)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return DensityGrid(origin, h, np.asarray(fn(pts), dtype=float))


def kde(mu, bandwidth, template):
    """Gaussian smoothing of a signed atomic measure onto ``template``'s grid.

    Raises GridTooCoarse when the bandwidth undersamples the grid
    (bandwidth < 2 h).  Output mass matches the input signed mass up to
    quadrature tolerance provided the grid covers the smoothed support.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if bandwidth < 2.0 * template.h:
        raise GridTooCoarse(
            f"bandwidth {bandwidth} below twice the cell size {template.h}")
    d = template.dim
    norm = (2.0 * math.pi * bandwidth ** 2) ** (-d / 2.0)
    axes = template.axes()
    values = np.zeros(template.dims)
    chunk = max(1, int(2e6 // values.size) + 1)
    pos = mu.positions
    for start in range(0, mu.n, chunk):
        stop = min(mu.n, start + chunk)
        # separable exponentials accumulated per axis keep memory bounded
        q = np.ones((stop - start,) + template.dims)
        for k in range(d):
            shape = [1] * (d + 1)
            shape[0] = stop - start
            shape[k + 1] = len(axes[k])
            dk = axes[k].reshape(shape[1:]) - pos[start:stop, k].reshape(
                (-1,) + (1,) * d)
            q = q * np.exp(-dk ** 2 / (2.0 * bandwidth ** 2))
        values += np.tensordot(mu.masses[start:stop], q, axes=(0, 0))
    return DensityGrid(template.origin, template.h, values * norm)


def silverman_bandwidth(n):
    """Default KDE bandwidth N^(-1/6) used by the diagnostics (2-d rate)."""
    return float(n) ** (-1.0 / 6.0)


def _check_nonnegative(grid):
    if grid.values.min() < -1e-9:
        raise NegativeDensity(
            f"density has min {grid.values.min()}, below tolerance -1e-9")


def fisher_estimate(grid, floor=None):
    """int |grad f|^2 / f by central differences and trapezoid quadrature.

    The denominator is clamped at ``floor`` (default 1e-12 * max f): the
    continuum functional diverges on zero sets, the estimator must not.
    """
    _check_nonnegative(grid)
    f = np.maximum(grid.values, 0.0)
    if floor is None:
        floor = 1e-12 * f.max()
    if floor <= 0:
        raise ValueError("floor must be positive")
    grads = np.gradient(f, grid.h)
    if grid.dim == 1:
        grads = [grads]
    num = sum(g * g for g in grads)
    return grid.__class__(grid.origin, grid.h, num / np.maximum(f, floor)).integral()


def entropy_estimate(grid):
    """int f log f with the 0 log 0 = 0 convention, trapezoid quadrature."""
    _check_nonnegative(grid)
    f = np.maximum(grid.values, 0.0)
    integrand = np.where(f > 0.0, f * np.log(np.where(f > 0.0, f, 1.0)), 0.0)
    return grid.__class__(grid.origin, grid.h, integrand).integral()


def gamma_moment(positions, gamma, weights=None):
    """(1/N) sum |w_i| <x_i>^gamma with <x> = sqrt(1 + |x|^2); w = 1 if omitted."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    pos = np.asarray(positions, dtype=float)
    bracket = np.sqrt(1.0 + np.sum(pos * pos, axis=-1)) ** gamma
    if weights is None:
        return float(np.mean(bracket))
    w = weights.values if isinstance(weights, WeightSequence) else np.asarray(weights)
    return float(np.mean(np.abs(w) * bracket))


# ---------------------------------------------------------------------------
# pairing partitions


@dataclass(frozen=True)
class PairingPartition:
    pairs: tuple          # ((i, j), ...) with i < j, 0-based
    singleton: int | None = None

    def indices(self):
        out = [k for p in self.pairs for k in p]
        if self.singleton is not None:
            out.append(self.singleton)
        return sorted(out)


@lru_cache(maxsize=None)
def count_pairings(n):
    """|S_n| via the recurrences |S_n| = (n-1)|S_{n-2}| (even) and
    n |S_{n-2}| (odd)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n in (0, 1, 2):
        return 1
    return (n - 1) * count_pairings(n - 2) if n % 2 == 0 else n * count_pairings(n - 2)


def _enumerate(items):
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for k, j in enumerate(rest):
        for tail in _enumerate(rest[:k] + rest[k + 1:]):
            yield ((first, j),) + tail


@lru_cache(maxsize=16)
def enumerate_pairings(n):
    """All partitions of {0..n-1} into ordered pairs plus one singleton
    when n is odd.  Factorial growth; refuses n > 12."""
    if n < 2:
        raise ValueError("need n >= 2")
    if n > ENUMERATION_LIMIT:
        raise TooLarge(f"enumeration supported only up to n = {ENUMERATION_LIMIT}")
    items = tuple(range(n))
    out = []
    if n % 2 == 0:
        for pairs in _enumerate(items):
            out.append(PairingPartition(pairs))
    else:
        for single in items:
            rest = tuple(k for k in items if k != single)
            for pairs in _enumerate(rest):
                out.append(PairingPartition(pairs, single))
    return tuple(out)


def pair_multiplicity_check(n):
    """True iff every pair (i, j), i < j, occurs in exactly |S_{n-2}|
    enumerated partitions."""
    partitions = enumerate_pairings(n)
    expected = count_pairings(n - 2)
    counts = {}
    for part in partitions:
        for p in part.pairs:
            counts[p] = counts.get(p, 0) + 1
    all_pairs = list(itertools.combinations(range(n), 2))
    return all(counts.get(p, 0) == expected for p in all_pairs)


def rotate_pair(x_i, x_j):
    """The 45-degree pair rotation: ((x_i - x_j)/sqrt2, (x_i + x_j)/sqrt2).

    Volume preserving: the Jacobian of the full map has determinant 1.
    """
    xi = np.asarray(x_i, dtype=float)
    xj = np.asarray(x_j, dtype=float)
    s = math.sqrt(2.0)
    return (xi - xj) / s, (xi + xj) / s


# ---------------------------------------------------------------------------
# merged product-law measure and the concentration experiment


@dataclass(frozen=True)
class GaussianMarginal:
    mean: tuple
    sigma: float

    def density(self, x):
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        dx = x - np.asarray(self.mean)
        return np.exp(-np.sum(dx * dx, axis=-1) / (2 * self.sigma ** 2)) \
            / (2 * math.pi * self.sigma ** 2) ** (d / 2)

    def sample(self, rng, size):
        return self.mean + self.sigma * rng.standard_normal(size=size + (len(self.mean),))


@dataclass(frozen=True)
class ProductLawSpec:
    """Independent particles with closed-form Gaussian marginals."""

    marginals: tuple
    weights: WeightSequence

    def __post_init__(self):
        if len(self.marginals) != self.weights.n:
            raise ValueError("one marginal per weight required")


class MergedDensity:
    """g = (1/N) sum w_i f_i for independent particles: the merged measure
    collapses to the weighted mixture of marginals."""

    def __init__(self, spec):
        self.spec = spec
        self._n = spec.weights.n

    def density(self, x):
        w = self.spec.weights.values
        out = 0.0
        for wi, marg in zip(w, self.spec.marginals):
            if wi != 0.0:
                out = out + wi * marg.density(x)
        return out / self._n if not np.isscalar(out) else np.zeros(np.shape(x)[:-1])

    def pair(self, phi, order=64):
        """<phi, g> by Gauss-Hermite quadrature per distinct marginal."""
        w = self.spec.weights.values
        cache = {}
        total = 0.0
        for wi, marg in zip(w, self.spec.marginals):
            if wi == 0.0:
                continue
            key = (marg.mean, marg.sigma)
            if key not in cache:
                cache[key] = gauss_expectation(phi, np.asarray(marg.mean),
                                               marg.sigma, order)
            total += wi * cache[key]
        return total / self._n


def merged_measure(spec):
    return MergedDensity(spec)


def gauss_expectation(phi, mean, sigma, order=64):
    """E phi(X) for X ~ N(mean, sigma^2 I_d), tensor Gauss-Hermite."""
    nodes, wts = hermegauss(order)
    d = len(mean)
    grids = np.meshgrid(*([nodes] * d), indexing="ij")
    pts = np.stack([mean[k] + sigma * grids[k] for k in range(d)], axis=-1)
    wprod = np.ones_like(grids[0])
    for k in range(d):
        shape = [1] * d
        shape[k] = order
        wprod = wprod * wts.reshape(shape)
    return float(np.sum(wprod * phi(pts)) / (2 * math.pi) ** (d / 2))


@dataclass(frozen=True)
class AzumaReport:
    frequency: float
    bound: float
    trials: int
    stderr: float


def azuma_gap(spec, phi, phi_sup, trials, eps, seed=0):
    """Empirical tail frequency of |<phi, mu_tilde> - <phi, g>| > eps against
    the martingale bound 2 exp(-N^2 eps^2 / (8 ||phi||^2 sum w_i^2))."""
    if trials < 1000:
        raise ValueError("need at least 1e3 trials")
    w = spec.weights.values
    n = spec.weights.n
    target = merged_measure(spec).pair(phi)
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = max(1, int(2e6 // max(n, 1)))
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        # stack samples per marginal; marginals are typically shared objects
        samples = np.empty((b, n, len(spec.marginals[0].mean)))
        groups = {}
        for i, marg in enumerate(spec.marginals):
            groups.setdefault((marg.mean, marg.sigma), []).append(i)
        for (mean, sigma), idx in groups.items():
            samples[:, idx, :] = np.asarray(mean) + sigma * rng.standard_normal(
                size=(b, len(idx), len(mean)))
        pairing = np.tensordot(phi(samples), w / n, axes=(1, 0))
        hits += int(np.sum(np.abs(pairing - target) > eps))
        done += b
    freq = hits / trials
    sumsq = float(np.sum(w * w))
    if sumsq > 0:
        bound = 2.0 * math.exp(-(n * n) * eps * eps / (8.0 * phi_sup ** 2 * sumsq))
    else:
        bound = 0.0
    se = math.sqrt(freq * (1.0 - freq) / trials)
    return AzumaReport(freq, min(bound, 1.0) if sumsq > 0 else 0.0, trials, se)
