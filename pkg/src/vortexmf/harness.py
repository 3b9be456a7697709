"""Convergence experiments: particle ensembles against the coupled PDE.

A plan fixes the particle counts, the two weight families (dynamics w and
observation w-tilde), the kernel with its blob schedule delta(N), and a
test-function dictionary.  For each N the harness runs independent
simulations, pairs both signed empirical measures against every test
function at the output times, and compares the Monte Carlo means with the
PDE pairings <phi, v_t> and <phi, g_t>.  The mean over runs estimates the
expected pairing, which is the computable projection of convergence in law.

Initial-data coupling: particle positions are i.i.d. samples of a density
rho0 and weights are assigned by index, so the signed empirical measures
converge a.s. to (wbar rho0, wtbar rho0) by the law of large numbers; the
PDE starts from those closed-form densities.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import UnsupportedFamily
from .kernels import KernelSpec
from .measures import (SignedEmpiricalMeasure, entropy_estimate,
                       fisher_estimate, gamma_moment, grid_from_function,
                       kde, pair, silverman_bandwidth)
from .particles import InitialLaw, SimConfig, simulate
from .spectral import PdeConfig, evaluate as pde_evaluate, solve
from .weights import WeightFamily, lr_norm

DEFAULT_ALPHA = 0.75
DEFAULT_GAMMA = 0.5


# ---------------------------------------------------------------------------
# test-function dictionary


@dataclass(frozen=True)
class TestFunction:
    name: str
    fn: callable = field(compare=False)
    sup_norm: float = 1.0

    def __call__(self, x):
        return self.fn(x)


def _bump(center, scale):
    c = np.asarray(center, dtype=float)

    def fn(x):
        dx = np.asarray(x) - c
        return np.exp(-np.sum(dx * dx, axis=-1) / (2.0 * scale ** 2))
    return fn


def _clamped_coord(axis):
    def fn(x):
        return np.tanh(np.asarray(x)[..., axis])
    return fn


def _sincos(length):
    def fn(x):
        x = np.asarray(x)
        return np.sin(math.pi * x[..., 0] / length) * np.cos(
            math.pi * x[..., 1] / length)
    return fn


@dataclass(frozen=True)
class PhiDictSpec:
    bump_centers: tuple = ((0.0, 0.0), (1.0, 0.0), (0.0, -1.0))
    bump_scales: tuple = (1.0, 2.0)
    wave_length: float = 4.0
    include_clamped: bool = True


def phi_dictionary(spec=None):
    """Gaussian bumps, low-frequency waves, and smoothly clamped
    coordinates, each carrying its exact sup-norm (1 for all of them)."""
    spec = spec or PhiDictSpec()
    out = []
    for c in spec.bump_centers:
        for s in spec.bump_scales:
            out.append(TestFunction(f"bump{tuple(round(v, 3) for v in c)}s{s:g}",
                                    _bump(c, s), 1.0))
    out.append(TestFunction(f"sincos_L{spec.wave_length:g}",
                            _sincos(spec.wave_length), 1.0))
    if spec.include_clamped:
        out.append(TestFunction("tanh_x0", _clamped_coord(0), 1.0))
        out.append(TestFunction("tanh_x1", _clamped_coord(1), 1.0))
    return out


# ---------------------------------------------------------------------------
# tightness statistic


def tightness_statistic(trajectory, wt, alpha=DEFAULT_ALPHA,
                        gamma=DEFAULT_GAMMA, r=math.inf):
    """(1/N) sum |wt_i| [ max_{s<t} |X_i(t)-X_i(s)|/(t-s)^(1-alpha)
    + |X_i(0)|^((r-1) gamma / r) ] over the recorded snapshot grid.

    Exact on the recorded grid and therefore a lower bound of the continuum
    supremum; finer recording can only increase it.
    """
    if not 0.5 < alpha < 1.0:
        raise ValueError("alpha must lie in (1/2, 1)")
    times = np.asarray(trajectory.times)
    pos = trajectory.positions  # (m, N, d)
    m = len(times)
    wt = np.abs(np.asarray(wt.values if hasattr(wt, "values") else wt))
    holder = np.zeros(pos.shape[1])
    for a in range(m - 1):
        dt_pow = (times[a + 1:] - times[a]) ** (1.0 - alpha)
        seg = np.linalg.norm(pos[a + 1:] - pos[a], axis=-1) / dt_pow[:, None]
        holder = np.maximum(holder, seg.max(axis=0))
    exponent = gamma if math.isinf(r) else (r - 1.0) * gamma / r
    initial = np.linalg.norm(pos[0], axis=-1) ** exponent
    return float(np.mean(wt * (holder + initial)))


# ---------------------------------------------------------------------------
# experiment plan


@dataclass(frozen=True)
class ExperimentPlan:
    ns: tuple
    runs_per_n: int
    times: tuple
    kernel: KernelSpec               # template; delta replaced per N when scheduled
    w_family: WeightFamily
    wt_family: WeightFamily
    initial: InitialLaw
    pde: PdeConfig
    seed_base: int = 0
    delta_coeff: float = 1.0
    delta_power: float = -0.25
    dt_at_1000: float = 1e-3
    phi_spec: PhiDictSpec = PhiDictSpec()
    tightness_r: float = math.inf
    diagnostics: bool = True

    def __post_init__(self):
        if list(self.ns) != sorted(set(self.ns)):
            raise ValueError("particle counts must be strictly increasing")
        if self.runs_per_n < 4:
            raise ValueError("need at least 4 runs per N")
        if not self.times or min(self.times) <= 0:
            raise ValueError("output times must be positive")
        base = self.times[0]
        for t in self.times:
            if abs(t / base - round(t / base)) > 1e-9:
                raise ValueError("output times must be multiples of the first")

    def delta(self, n):
        return self.delta_coeff * float(n) ** self.delta_power

    def dt(self, n):
        # halve the step for every 4x increase in N (the blob Lipschitz
        # constant grows as delta shrinks), snapped so that output times
        # fall exactly on step boundaries
        raw = self.dt_at_1000 * math.sqrt(1000.0 / n)
        return self.times[0] / math.ceil(self.times[0] / raw - 1e-12)

    def kernel_for(self, n):
        if self.kernel.regularization == "blob":
            return replace(self.kernel, delta=self.delta(n))
        return self.kernel

    def sim_config(self, n, run):
        steps_to_first = self.times[0] / self.dt(n)
        record_every = max(1, round(steps_to_first))
        return SimConfig(
            n=n, dt=self.dt(n), t_end=max(self.times),
            kernel=self.kernel_for(n), weights=self.w_family.build(n),
            seed=self.seed_base + run, initial=self.initial,
            record_every=record_every)


@dataclass
class ConvergenceReport:
    errors: list       # dict rows: N, run_count, t, phi_id, target, weak_error, stderr
    diagnostics: list  # dict rows: N, t, statistic, value
    manifest: dict


def _reference_pairings(plan, phis):
    """Solve the coupled PDE once and pair every phi at every output time."""
    if plan.kernel.family == "power_law":
        raise UnsupportedFamily(
            "no mean-field PDE reference is defined for power_law kernels")
    wbar = plan.w_family.mean_limit()
    wtbar = plan.wt_family.mean_limit()
    m = plan.pde.modes
    half = plan.pde.half_width
    rho0 = plan.initial.density
    v0 = grid_from_function(lambda x: wbar * rho0(x), half, m)
    g0 = grid_from_function(lambda x: wtbar * rho0(x), half, m)
    result = solve(v0, g0, plan.pde, plan.times)
    refs = {}
    for t, state in zip(result.times, result.states):
        for phi in phis:
            refs[("v", t, phi.name)] = pde_evaluate(state, phi, "v")
            refs[("g", t, phi.name)] = pde_evaluate(state, phi, "g")
    return refs, result


def run_experiment(plan):
    """Execute the full plan; deterministic given (plan, seed_base)."""
    t0 = time.perf_counter()
    phis = phi_dictionary(plan.phi_spec)
    refs, pde_result = _reference_pairings(plan, phis)
    errors = []
    diagnostics = []
    for n in plan.ns:
        w = plan.w_family.build(n)
        wt = plan.wt_family.build(n)
        pairings = {}  # (target, t, phi) -> list over runs
        for run in range(plan.runs_per_n):
            config = plan.sim_config(n, run)
            traj = simulate(config)
            for t in plan.times:
                snap = np.argmin(np.abs(traj.times - t))
                if abs(traj.times[snap] - t) > 1e-9:
                    raise RuntimeError(f"requested time {t} was not recorded")
                pos = traj.positions[snap]
                mu = SignedEmpiricalMeasure.from_weights(pos, w)
                mu_t = SignedEmpiricalMeasure.from_weights(pos, wt)
                for phi in phis:
                    pairings.setdefault(("v", t, phi.name), []).append(pair(mu, phi))
                    pairings.setdefault(("g", t, phi.name), []).append(pair(mu_t, phi))
            if plan.diagnostics and run == 0:
                diagnostics.extend(_diagnose(plan, n, wt, traj))
        for (target, t, phi_name), vals in sorted(pairings.items()):
            vals = np.asarray(vals)
            mc_mean = float(vals.mean())
            stderr = float(vals.std(ddof=1) / math.sqrt(len(vals)))
            ref = refs[(target, t, phi_name)]
            errors.append({
                "N": n, "run_count": len(vals), "t": t, "phi_id": phi_name,
                "target": target, "weak_error": abs(mc_mean - ref),
                "stderr": stderr, "mc_mean": mc_mean, "reference": ref,
            })
    manifest = {
        "seed_base": plan.seed_base,
        "ns": list(plan.ns),
        "runs_per_n": plan.runs_per_n,
        "times": list(plan.times),
        "delta_schedule": {"coeff": plan.delta_coeff, "power": plan.delta_power},
        "dt_at_1000": plan.dt_at_1000,
        "weights": {"dynamics": plan.w_family.description,
                    "observation": plan.wt_family.description},
        "coupling": "weights assigned by index; positions i.i.d.",
        "phi_count": len(phis),
        "wall_seconds": time.perf_counter() - t0,
    }
    return ConvergenceReport(errors, diagnostics, manifest)


def _diagnose(plan, n, wt, traj):
    rows = []
    rows.append({"N": n, "t": float(traj.times[-1]),
                 "statistic": "tightness",
                 "value": tightness_statistic(traj, wt, r=plan.tightness_r)})
    bandwidth = silverman_bandwidth(n)
    for t in plan.times:
        snap = np.argmin(np.abs(traj.times - t))
        pos = traj.positions[snap]
        rows.append({"N": n, "t": t, "statistic": "gamma_moment_0.5",
                     "value": gamma_moment(pos, 0.5)})
        template = grid_from_function(lambda x: np.zeros(x.shape[:-1]),
                                      plan.pde.half_width / 2, 128)
        cloud = SignedEmpiricalMeasure(pos, np.full(n, 1.0 / n))
        density = kde(cloud, bandwidth, template)
        rows.append({"N": n, "t": t, "statistic": f"kde_entropy_h{bandwidth:.3g}",
                     "value": entropy_estimate(density)})
        rows.append({"N": n, "t": t, "statistic": f"kde_fisher_h{bandwidth:.3g}",
                     "value": fisher_estimate(density)})
    return rows


# ---------------------------------------------------------------------------
# CSV emission (stable layout; reproducible bytes)


ERRORS_HEADER = ["N", "run_count", "t", "phi_id", "target", "weak_error",
                 "stderr"]
DIAGNOSTICS_HEADER = ["N", "t", "statistic", "value"]


def write_errors_csv(report, path):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(ERRORS_HEADER) + "\n")
        for row in report.errors:
            fh.write(",".join([
                str(row["N"]), str(row["run_count"]), repr(row["t"]),
                row["phi_id"], row["target"], repr(row["weak_error"]),
                repr(row["stderr"])]) + "\n")


def write_diagnostics_csv(report, path):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(DIAGNOSTICS_HEADER) + "\n")
        for row in report.diagnostics:
            fh.write(",".join([str(row["N"]), repr(row["t"]),
                               row["statistic"], repr(row["value"])]) + "\n")
