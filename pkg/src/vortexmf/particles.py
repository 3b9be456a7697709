"""Euler-Maruyama integration of the weighted interacting particle system

    dX_i = (1/N) sum_{j != i} w_j K(X_i - X_j) dt + sqrt(2) dB_i.

Randomness is counter-based (see :mod:`vortexmf.rng`), so a trajectory is a
pure function of (config, seed) regardless of thread count.  The hot
Biot-Savart blob path runs under numba with a compiler-fixed summation
order per target particle; all remaining kernels go through a chunked
numpy path that sums in ascending j order.
"""

import hashlib
import json
import math
import struct
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange
from scipy.special import ndtri

from . import rng
from .errors import (CutoffViolation, FileFormat, NonFinite,
                     SingularEvaluation)
from .kernels import KernelSpec, decay_radius, evaluate
from .weights import WeightSequence

_CHUNK = 256


@dataclass(frozen=True)
class InitialLaw:
    """gaussian(mean, sigma) | mixture([(mass, mean, sigma), ...]) |
    uniform_disk(radius) | file(path)."""

    kind: str
    mean: tuple = (0.0, 0.0)
    sigma: float = 1.0
    components: tuple = ()
    radius: float = 1.0
    path: str = ""

    def __post_init__(self):
        if self.kind not in ("gaussian", "mixture", "uniform_disk", "file"):
            raise ValueError(f"unknown initial law {self.kind!r}")
        if self.kind == "mixture":
            total = sum(c[0] for c in self.components)
            if not self.components or abs(total - 1.0) > 1e-12:
                raise ValueError("mixture masses must sum to 1")
        if self.kind == "uniform_disk" and self.radius <= 0:
            raise ValueError("disk radius must be positive")

    def density(self, x):
        """Closed-form density (not available for the file variant)."""
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        if self.kind == "gaussian":
            dx = x - np.asarray(self.mean)
            return np.exp(-np.sum(dx * dx, -1) / (2 * self.sigma ** 2)) / (
                2 * math.pi * self.sigma ** 2) ** (d / 2)
        if self.kind == "mixture":
            out = 0.0
            for mass, mean, sigma in self.components:
                dx = x - np.asarray(mean)
                out = out + mass * np.exp(-np.sum(dx * dx, -1) / (2 * sigma ** 2)) / (
                    2 * math.pi * sigma ** 2) ** (d / 2)
            return out
        if self.kind == "uniform_disk":
            r2 = np.sum(x * x, -1)
            return np.where(r2 <= self.radius ** 2,
                            1.0 / (math.pi * self.radius ** 2), 0.0)
        raise ValueError("file law has no closed-form density")


@dataclass(frozen=True)
class ParticleState:
    positions: np.ndarray
    t: float
    step_index: int

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if not np.all(np.isfinite(pos)):
            raise NonFinite("particle positions contain NaN/Inf")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def dim(self):
        return self.positions.shape[1]


@dataclass(frozen=True)
class SimConfig:
    n: int
    dt: float
    t_end: float
    kernel: KernelSpec
    weights: WeightSequence
    seed: int
    initial: InitialLaw
    interaction: str = "direct"
    cutoff: float = 0.0
    tail_tol: float = 1e-14
    record_every: int = 1
    dim: int = 2

    def __post_init__(self):
        if self.n < 1 or self.dt < 0 or self.t_end < 0:
            raise ValueError("need n >= 1 and nonnegative dt, t_end")
        if self.t_end > 0:
            if self.dt <= 0:
                raise ValueError("dt must be positive for a nonzero horizon")
            if self.dt > self.t_end * (1 + 1e-12):
                raise ValueError("dt must not exceed the horizon")
        if self.weights.n != self.n:
            raise ValueError("weight sequence length must equal n")
        if self.interaction not in ("direct", "cell_list"):
            raise ValueError(f"unknown interaction mode {self.interaction!r}")
        if self.interaction == "cell_list":
            if self.kernel.is_singular:
                raise CutoffViolation(
                    "cell_list requires a regularized or decaying kernel")
            if self.kernel.domain == "periodic":
                raise ValueError("cell_list does not support periodic domains")
            needed = decay_radius(self.kernel, self.tail_tol)
            if self.cutoff < needed:
                raise CutoffViolation(
                    f"cutoff {self.cutoff} below decay radius {needed:.3e} "
                    f"for tail tolerance {self.tail_tol}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def n_steps(self):
        if self.t_end == 0:
            return 0
        return int(math.ceil(self.t_end / self.dt - 1e-12))

    def canonical(self):
        def enc(obj):
            if isinstance(obj, float) and math.isinf(obj):
                return "inf"
            if isinstance(obj, np.ndarray):
                return obj.tolist()
            if hasattr(obj, "__dataclass_fields__"):
                return {k: enc(getattr(obj, k)) for k in obj.__dataclass_fields__}
            if isinstance(obj, (list, tuple)):
                return [enc(v) for v in obj]
            return obj
        return json.dumps(enc(self), sort_keys=True)

    def config_hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# drift


@njit(parallel=True, fastmath={"reassoc", "contract"}, cache=True)
def _drift_bs_blob(px, py, w, delta2, bx, by):
    n = px.shape[0]
    c = 1.0 / (2.0 * np.pi * n)
    for i in prange(n):
        xi = px[i]
        yi = py[i]
        sx = 0.0
        sy = 0.0
        for j in range(n):
            dx = xi - px[j]
            dy = yi - py[j]
            r2 = dx * dx + dy * dy + delta2
            f = w[j] / r2
            sx -= dy * f  # self term vanishes: dx = dy = 0
            sy += dx * f
        bx[i] = sx * c
        by[i] = sy * c


@njit(parallel=True, cache=True)
def _drift_bs_singular(px, py, w, bx, by):
    n = px.shape[0]
    c = 1.0 / (2.0 * np.pi * n)
    hit = 0
    for i in prange(n):
        xi = px[i]
        yi = py[i]
        sx = 0.0
        sy = 0.0
        for j in range(n):
            if j == i:
                continue
            dx = xi - px[j]
            dy = yi - py[j]
            r2 = dx * dx + dy * dy
            if r2 == 0.0:
                hit = 1
                r2 = 1.0
            f = w[j] / r2
            sx -= dy * f
            sy += dx * f
        bx[i] = sx * c
        by[i] = sy * c
    return hit


@njit(parallel=True, fastmath={"reassoc", "contract"}, cache=True)
def _drift_power_blob(px, py, w, delta2, alpha, sgn, bx, by):
    n = px.shape[0]
    c = sgn / n
    for i in prange(n):
        xi = px[i]
        yi = py[i]
        sx = 0.0
        sy = 0.0
        for j in range(n):
            dx = xi - px[j]
            dy = yi - py[j]
            r2 = dx * dx + dy * dy + delta2
            f = w[j] * r2 ** (-0.5 * alpha)
            sx += dx * f
            sy += dy * f
        bx[i] = sx * c
        by[i] = sy * c


@njit(parallel=True, cache=True)
def _drift_power_singular(px, py, w, alpha, sgn, bx, by):
    n = px.shape[0]
    c = sgn / n
    hit = 0
    for i in prange(n):
        xi = px[i]
        yi = py[i]
        sx = 0.0
        sy = 0.0
        for j in range(n):
            if j == i:
                continue
            dx = xi - px[j]
            dy = yi - py[j]
            r2 = dx * dx + dy * dy
            if r2 == 0.0:
                hit = 1
                r2 = 1.0
            f = w[j] * r2 ** (-0.5 * alpha)
            sx += dx * f
            sy += dy * f
        bx[i] = sx * c
        by[i] = sy * c
    return hit


def _drift_generic(positions, kernel, w):
    """Chunked direct summation through kernels.evaluate, ascending j."""
    n, d = positions.shape
    out = np.zeros_like(positions)
    singular = kernel.is_singular
    e0 = np.zeros(d)
    e0[0] = 1.0
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        rows = np.arange(start, stop) - start
        cols = np.arange(start, stop)
        diffs = positions[start:stop, None, :] - positions[None, :, :]
        if kernel.domain == "periodic":
            half = kernel.half_width
            diffs = np.mod(diffs + half, 2.0 * half) - half
        diffs[rows, cols, :] = e0  # placeholder; contribution zeroed below
        if singular and np.any(np.sum(diffs * diffs, axis=-1) == 0.0):
            raise SingularEvaluation(
                "coincident particles under an unregularized kernel")
        contrib = evaluate(kernel, diffs)
        contrib[rows, cols, :] = 0.0
        out[start:stop] = np.tensordot(contrib, w, axes=(1, 0)) / n
    return out


def _cell_index(positions, cutoff):
    lo = positions.min(axis=0)
    span = np.maximum(positions.max(axis=0) - lo, 1e-300)
    ncell = np.maximum(1, np.minimum(span // cutoff, 64).astype(np.int64))
    idx = np.minimum((positions - lo) / (span / ncell), ncell - 1).astype(np.int64)
    return idx, ncell


def _drift_cell_list(positions, kernel, w, cutoff):
    """Cutoff-pruned summation over neighbor cells.

    Visits candidate j's in (cell, ascending index) order; excluded pairs
    lie beyond the declared decay radius, so they contribute below
    tail_tol each.
    """
    n, d = positions.shape
    idx, ncell = _cell_index(positions, cutoff)
    flat = idx[:, 0] * ncell[1] + idx[:, 1]
    order = np.argsort(flat, kind="stable")
    sorted_flat = flat[order]
    starts = np.searchsorted(sorted_flat, np.arange(ncell[0] * ncell[1]))
    ends = np.searchsorted(sorted_flat, np.arange(ncell[0] * ncell[1]), side="right")
    lo = positions.min(axis=0)
    span = np.maximum(positions.max(axis=0) - lo, 1e-300)
    cell_w = span / ncell
    reach = np.ceil(cutoff / cell_w).astype(np.int64)
    out = np.zeros_like(positions)
    for i in range(n):
        ci = idx[i]
        members = []
        for cx in range(max(0, ci[0] - reach[0]), min(ncell[0], ci[0] + reach[0] + 1)):
            for cy in range(max(0, ci[1] - reach[1]), min(ncell[1], ci[1] + reach[1] + 1)):
                c = cx * ncell[1] + cy
                members.append(order[starts[c]:ends[c]])
        js = np.concatenate(members) if members else np.empty(0, dtype=np.int64)
        js = js[js != i]
        if js.size == 0:
            continue
        diffs = positions[i] - positions[js]
        keep = np.sum(diffs * diffs, axis=-1) <= cutoff * cutoff
        js = js[keep]
        if js.size == 0:
            continue
        contrib = evaluate(kernel, positions[i] - positions[js])
        out[i] = np.tensordot(w[js], contrib, axes=(0, 0)) / n
    return out


def drift(state_or_positions, kernel, weights, interaction="direct",
          cutoff=0.0):
    """b_i = (1/N) sum_{j != i} w_j K(x_i - x_j)."""
    positions = getattr(state_or_positions, "positions", state_or_positions)
    positions = np.asarray(positions, dtype=float)
    w = weights.values if isinstance(weights, WeightSequence) else np.asarray(weights)
    n, d = positions.shape
    if len(w) != n:
        raise ValueError("one weight per particle required")

    if kernel.family == "zero":
        return np.zeros_like(positions)

    if interaction == "cell_list":
        return _drift_cell_list(positions, kernel, w, cutoff)

    fast = (kernel.domain == "free_space" and d == 2
            and kernel.regularization in ("none", "blob"))
    if fast:
        px = np.ascontiguousarray(positions[:, 0])
        py = np.ascontiguousarray(positions[:, 1])
        bx = np.empty(n)
        by = np.empty(n)
        w = np.ascontiguousarray(w, dtype=float)
        if kernel.family == "biot_savart":
            if kernel.regularization == "blob":
                _drift_bs_blob(px, py, w, kernel.delta ** 2, bx, by)
            else:
                if _drift_bs_singular(px, py, w, bx, by):
                    raise SingularEvaluation(
                        "coincident particles under an unregularized kernel")
        else:
            sgn = -1.0 if kernel.sign == "attractive" else 1.0
            if kernel.regularization == "blob":
                _drift_power_blob(px, py, w, kernel.delta ** 2, kernel.alpha,
                                  sgn, bx, by)
            else:
                if _drift_power_singular(px, py, w, kernel.alpha, sgn, bx, by):
                    raise SingularEvaluation(
                        "coincident particles under an unregularized kernel")
        return np.column_stack([bx, by])

    return _drift_generic(positions, kernel, w)


# ---------------------------------------------------------------------------
# time stepping


def default_noise(config):
    def source(step_index, n, dim):
        return rng.step_normals(config.seed, step_index, n, dim)
    return source


def step(state, config, noise_source=None):
    """x <- x + b dt + sqrt(2 dt) xi, with periodic wrapping when the
    kernel declares a periodic box."""
    noise_source = noise_source or default_noise(config)
    b = drift(state, config.kernel, config.weights, config.interaction,
              config.cutoff)
    xi = noise_source(state.step_index, state.n, state.dim)
    pos = state.positions + b * config.dt + math.sqrt(2.0 * config.dt) * xi
    if config.kernel.domain == "periodic":
        half = config.kernel.half_width
        pos = np.mod(pos + half, 2.0 * half) - half
    if not np.all(np.isfinite(pos)):
        raise NonFinite(f"positions overflowed at step {state.step_index}")
    return ParticleState(pos, state.t + config.dt, state.step_index + 1)


def sample_initial(law, n, seed, dim=2):
    """i.i.d. samples through the counter-based stream (4 words/particle)."""
    if law.kind == "file":
        return _read_positions(law.path, n, dim)
    u = rng.initial_uniforms(seed, n)
    if law.kind == "gaussian":
        return np.asarray(law.mean) + law.sigma * ndtri(u[:, :dim])
    if law.kind == "uniform_disk":
        r = law.radius * np.sqrt(u[:, 0])
        th = 2.0 * math.pi * u[:, 1]
        return np.column_stack([r * np.cos(th), r * np.sin(th)])
    # mixture: component from word 0, coordinates from words 1..dim
    masses = np.array([c[0] for c in law.components])
    edges = np.cumsum(masses)
    comp = np.searchsorted(edges, u[:, 0], side="right")
    comp = np.minimum(comp, len(masses) - 1)
    means = np.array([c[1] for c in law.components])
    sigmas = np.array([c[2] for c in law.components])
    return means[comp] + sigmas[comp, None] * ndtri(u[:, 1:1 + dim])


def _read_positions(path, n, dim):
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise FileFormat(f"cannot read positions from {path}: {exc}") from exc
    if data.shape != (n, dim):
        raise FileFormat(
            f"expected {n} rows x {dim} columns in {path}, got {data.shape}")
    return data


@dataclass
class Trajectory:
    times: np.ndarray        # (m,)
    step_indices: np.ndarray  # (m,)
    positions: np.ndarray    # (m, N, d)
    manifest: dict = field(default_factory=dict)

    @property
    def final(self):
        return ParticleState(self.positions[-1], float(self.times[-1]),
                             int(self.step_indices[-1]))


def simulate(config, observers=(), noise_source=None):
    """Run ceil(T/dt) steps, recording every record_every-th state plus the
    initial and final ones.  Returns the trajectory and a run manifest."""
    t_start = time.perf_counter()
    pos0 = sample_initial(config.initial, config.n, config.seed, config.dim)
    state = ParticleState(pos0, 0.0, 0)
    nsteps = config.n_steps()
    rec_t, rec_idx, rec_pos = [0.0], [0], [state.positions]
    for obs in observers:
        obs(state)
    for k in range(nsteps):
        state = step(state, config, noise_source)
        last = k == nsteps - 1
        if state.step_index % config.record_every == 0 or last:
            rec_t.append(state.t)
            rec_idx.append(state.step_index)
            rec_pos.append(state.positions)
            for obs in observers:
                obs(state)
    manifest = {
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "n_steps": nsteps,
        "wall_seconds": time.perf_counter() - t_start,
    }
    return Trajectory(np.array(rec_t), np.array(rec_idx),
                      np.stack(rec_pos), manifest)


# ---------------------------------------------------------------------------
# binary frame format: {N u64, d u64, t f64, step u64} then N*d f64, LE


def write_frames(trajectory, path):
    with open(path, "wb") as fh:
        for t, idx, pos in zip(trajectory.times, trajectory.step_indices,
                               trajectory.positions):
            n, d = pos.shape
            fh.write(struct.pack("<QQdQ", n, d, float(t), int(idx)))
            fh.write(np.ascontiguousarray(pos, dtype="<f8").tobytes())


def read_frames(path):
    times, idxs, frames = [], [], []
    with open(path, "rb") as fh:
        raw = fh.read()
    off = 0
    header = struct.Struct("<QQdQ")
    while off < len(raw):
        try:
            n, d, t, idx = header.unpack_from(raw, off)
        except struct.error as exc:
            raise FileFormat(f"truncated frame header: {exc}") from exc
        off += header.size
        count = n * d
        if off + 8 * count > len(raw):
            raise FileFormat("truncated frame payload")
        pos = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
        off += 8 * count
        times.append(t)
        idxs.append(idx)
        frames.append(pos.reshape(n, d).copy())
    return Trajectory(np.array(times), np.array(idxs), np.stack(frames))
