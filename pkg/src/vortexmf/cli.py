"""Configuration-driven command line interface.

All subcommands read one JSON file (see README for the schema) and write
into a run directory containing manifest.json plus CSV/binary outputs.
Exit codes: 0 success, 1 runtime failure, 2 configuration failure.
"""

import argparse
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, harness, kernels, measures, particles, spectral, weights
from .errors import ConfigError, VortexmfError

ENV_OUT_DIR = "VORTEXMF_OUT_DIR"


# ---------------------------------------------------------------------------
# config plumbing


def _load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc


def _need(cfg, dotted, path="config"):
    node = cfg
    walked = []
    for key in dotted.split("."):
        walked.append(key)
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"{path}: missing key '{'.'.join(walked)}'")
        node = node[key]
    return node


def _num(value, dotted):
    if value == "inf":
        return math.inf
    if not isinstance(value, (int, float)):
        raise ConfigError(f"key '{dotted}' must be a number or \"inf\"")
    return value


def _kernel_from(cfg, path):
    block = _need(cfg, "kernel", path)
    family = _need(cfg, "kernel.family", path)
    try:
        return kernels.KernelSpec(
            family=family,
            regularization=block.get("regularization", "none"),
            domain=block.get("domain", "free_space"),
            alpha=block.get("alpha", 0.0),
            sign=block.get("sign", "repulsive"),
            delta=block.get("delta", 0.0),
            epsilon=block.get("epsilon", 0.0),
            half_width=block.get("half_width", 0.0),
            mode_cutoff=block.get("mode_cutoff", 0),
            dim=block.get("dim", 2),
        )
    except (ValueError, VortexmfError) as exc:
        raise ConfigError(f"{path}: kernel: {exc}") from exc


def _family_from(cfg, key, path):
    block = _need(cfg, key, path)
    kind = _need(cfg, f"{key}.kind", path)
    try:
        if kind == "constant":
            return weights.constant(block.get("c", 1.0))
        if kind == "two_piece":
            return weights.two_piece(block.get("a1", 1.0), block.get("a2", -1.0))
        if kind == "heavy_tail":
            return weights.heavy_tail(block.get("theta", 1.0 / 3.0))
        if kind == "padded":
            base = _family_from(block, "base", f"{path}.{key}")
            return weights.padded(base, block.get("factor", 5))
        raise ConfigError(f"{path}: unknown weight family '{kind}'")
    except ValueError as exc:
        raise ConfigError(f"{path}: weights: {exc}") from exc


def _initial_from(cfg, path):
    block = _need(cfg, "initial", path)
    kind = _need(cfg, "initial.kind", path)
    try:
        return particles.InitialLaw(
            kind=kind,
            mean=tuple(block.get("mean", (0.0, 0.0))),
            sigma=block.get("sigma", 1.0),
            components=tuple(tuple(c) for c in block.get("components", ())),
            radius=block.get("radius", 1.0),
            path=block.get("path", ""),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: initial: {exc}") from exc


def _pde_from(cfg, path):
    block = _need(cfg, "pde", path)
    try:
        return spectral.PdeConfig(
            modes=_need(cfg, "pde.modes", path),
            half_width=_need(cfg, "pde.half_width", path),
            dt=_need(cfg, "pde.dt", path),
            velocity=block.get("velocity", "biot_savart"),
            mean_free=block.get("mean_free", True),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: pde: {exc}") from exc


def _out_dir(cfg, args):
    env = os.environ.get(ENV_OUT_DIR)
    base = env if env else cfg.get("output_dir", "runs/latest")
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _manifest(extra):
    return {
        "package": "vortexmf",
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        **extra,
    }


def _write_manifest(out, data):
    with open(out / "manifest.json", "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=str)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(args):
    cfg = _load(args.config)
    path = args.config
    kernel = _kernel_from(cfg, path)
    family = _family_from(cfg, "weights", path)
    law = _initial_from(cfg, path)
    sim = _need(cfg, "sim", path)
    n = _need(cfg, "sim.n", path)
    config = particles.SimConfig(
        n=n, dt=_num(_need(cfg, "sim.dt", path), "sim.dt"),
        t_end=_num(_need(cfg, "sim.t_end", path), "sim.t_end"),
        kernel=kernel, weights=family.build(n),
        seed=sim.get("seed", 0), initial=law,
        interaction=sim.get("interaction", "direct"),
        cutoff=sim.get("cutoff", 0.0),
        tail_tol=sim.get("tail_tol", 1e-14),
        record_every=sim.get("record_every", 1))
    t0 = time.perf_counter()
    traj = particles.simulate(config)
    out = _out_dir(cfg, args)
    particles.write_frames(traj, out / "trajectory.bin")
    family.build(n).to_csv(out / "weights.csv")
    _write_manifest(out, _manifest({
        "command": "simulate", "config_echo": cfg, "seed": config.seed,
        "config_hash": config.config_hash(),
        "wall_seconds": time.perf_counter() - t0,
        "snapshots": len(traj.times)}))
    print(f"simulate: {len(traj.times)} snapshots -> {out}")
    return 0


def _density_spec(cfg, key, path):
    block = _need(cfg, key, path)
    prefactor = block.get("prefactor", 1.0)
    law = particles.InitialLaw(
        kind=_need(block, "kind", f"{path}:{key}"),
        mean=tuple(block.get("mean", (0.0, 0.0))),
        sigma=block.get("sigma", 1.0),
        components=tuple(tuple(c) for c in block.get("components", ())),
        radius=block.get("radius", 1.0))
    return lambda x: prefactor * law.density(x)


def _cmd_pde(args):
    cfg = _load(args.config)
    path = args.config
    config = _pde_from(cfg, path)
    times = _need(cfg, "pde.times", path)
    v0 = measures.grid_from_function(_density_spec(cfg, "v0", path),
                                     config.half_width, config.modes)
    g0 = measures.grid_from_function(_density_spec(cfg, "g0", path),
                                     config.half_width, config.modes)
    t0 = time.perf_counter()
    try:
        result = spectral.solve(v0, g0, config, times)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out = _out_dir(cfg, args)
    with open(out / "ledger.csv", "w") as fh:
        fh.write("t,mass_v,mass_g,l2_g,umax\n")
        for row in result.ledger["steps"]:
            fh.write(f"{row['t']!r},{row['mass_v']!r},{row['mass_g']!r},"
                     f"{row['l2_g']!r},{row['umax']!r}\n")
    for t, state in zip(result.times, result.states):
        v_grid, g_grid = spectral.state_grids(state)
        v_grid.to_binary(out / f"v_t{t:g}.bin")
        g_grid.to_binary(out / f"g_t{t:g}.bin")
    steps = result.ledger["steps"]
    _write_manifest(out, _manifest({
        "command": "pde", "config_echo": cfg,
        "wall_seconds": time.perf_counter() - t0,
        "mass_drift_v": abs(steps[-1]["mass_v"] - steps[0]["mass_v"]),
        "mass_drift_g": abs(steps[-1]["mass_g"] - steps[0]["mass_g"]),
        "cfl_max_u": max(r["umax"] for r in steps)}))
    print(f"pde: {len(result.times)} output times -> {out}")
    return 0


def _cmd_converge(args):
    cfg = _load(args.config)
    path = args.config
    exp = _need(cfg, "experiment", path)
    plan = harness.ExperimentPlan(
        ns=tuple(_need(cfg, "experiment.ns", path)),
        runs_per_n=_need(cfg, "experiment.runs_per_n", path),
        times=tuple(_need(cfg, "experiment.times", path)),
        kernel=_kernel_from(cfg, path),
        w_family=_family_from(cfg, "weights", path),
        wt_family=_family_from(cfg, "weights_observation", path),
        initial=_initial_from(cfg, path),
        pde=_pde_from(cfg, path),
        seed_base=exp.get("seed_base", 0),
        delta_coeff=exp.get("delta_coeff", 1.0),
        delta_power=exp.get("delta_power", -0.25),
        dt_at_1000=exp.get("dt_at_1000", 1e-3),
        tightness_r=_num(exp.get("tightness_r", "inf"), "experiment.tightness_r"),
        diagnostics=exp.get("diagnostics", True))
    report = harness.run_experiment(plan)
    out = _out_dir(cfg, args)
    harness.write_errors_csv(report, out / "errors.csv")
    harness.write_diagnostics_csv(report, out / "diagnostics.csv")
    _write_manifest(out, _manifest({
        "command": "converge", "config_echo": cfg, **report.manifest}))
    print(f"converge: {len(report.errors)} error rows -> {out}")
    return 0


def _cmd_validate(args):
    suites = harness_validate(fast=args.fast)
    width = max(len(name) for name, _, _ in suites)
    failures = 0
    for name, passed, detail in suites:
        mark = "PASS" if passed else "FAIL"
        failures += not passed
        line = f"{name:<{width}}  {mark}"
        if detail:
            line += f"  ({detail})"
        print(line)
    print(f"{len(suites) - failures}/{len(suites)} property suites passed")
    return 0 if failures == 0 else 1


def harness_validate(fast):
    from . import validate as _validate
    return _validate.run_suites(fast=fast)


def _cmd_kernel_check(args):
    cfg = _load(args.config)
    spec = _kernel_from(cfg, args.config)
    r_values = [_num(r, "kernel_check.r_values")
                for r in _need(cfg, "kernel_check.r_values", args.config)]
    reports = [kernels.admissibility_report(spec, r) for r in r_values]
    out = _out_dir(cfg, args)
    payload = [rep.to_dict() for rep in reports]
    with open(out / "admissibility.json", "w") as fh:
        json.dump(payload, fh, indent=2)
    for rep in payload:
        print(json.dumps(rep))
    return 0


def _cmd_weights_check(args):
    cfg = _load(args.config)
    family = _family_from(cfg, "weights", args.config)
    block = _need(cfg, "weights_check", args.config)
    report = weights.check_wr(
        family, _num(_need(cfg, "weights_check.r", args.config), "weights_check.r"),
        _need(cfg, "weights_check.ns", args.config))
    out = _out_dir(cfg, args)
    data = {"family": report.family, "r": "inf" if math.isinf(report.r) else report.r,
            "norms": report.rows(), "sup_norm": report.sup_norm,
            "growth_exponent": report.growth_exponent,
            "threshold": report.threshold, "bounded": report.bounded}
    with open(out / "wr_report.json", "w") as fh:
        json.dump(data, fh, indent=2)
    print(json.dumps({k: data[k] for k in
                      ("family", "r", "growth_exponent", "bounded")}))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="vortexmf",
        description="weighted interacting diffusions and their mean-field PDE")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (
            ("simulate", _cmd_simulate, True),
            ("pde", _cmd_pde, True),
            ("converge", _cmd_converge, True),
            ("kernel-check", _cmd_kernel_check, True),
            ("weights-check", _cmd_weights_check, True)):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("config", help="JSON configuration file")
        p.set_defaults(fn=fn)
    pv = sub.add_parser("validate")
    pv.add_argument("--fast", action="store_true",
                    help="reduced sizes; still covers every property suite")
    pv.set_defaults(fn=_cmd_validate)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except VortexmfError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
