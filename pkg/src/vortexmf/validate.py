"""Self-contained property suites behind the `validate` CLI subcommand.

Each suite returns (name, passed, detail).  The fast tier keeps every
suite under a few seconds; the full tier adds the production-size
vorticity oracle run.
"""

import math

import numpy as np

from . import harness, kernels, measures, particles, rng, spectral, weights


def _suite_kernel_pointwise():
    bs = kernels.biot_savart()
    k = kernels.evaluate(bs, np.array([1.0, 0.0]))
    ok = np.allclose(k, [0.0, 1.0 / (2 * math.pi)], atol=1e-15)
    blob = kernels.biot_savart("blob", delta=0.3)
    ok &= np.all(kernels.evaluate(blob, np.zeros(2)) == 0.0)
    pl = kernels.power_law(1.5, sign="attractive")
    ok &= np.allclose(kernels.evaluate(pl, np.array([1.0, 0.0])), [-1.0, 0.0])
    pts = np.array([[0.3, -1.2], [2.0, 0.7], [-0.05, 0.04]])
    for spec in (bs, blob, pl, kernels.biot_savart("mollified", epsilon=0.2)):
        vals = kernels.evaluate(spec, pts)
        neg = kernels.evaluate(spec, -pts)
        ok &= np.allclose(vals, -neg, rtol=1e-12, atol=1e-15)
    vals = kernels.evaluate(blob, pts)
    dots = np.sum(vals * pts, axis=-1)
    scale = np.linalg.norm(vals, axis=-1) * np.linalg.norm(pts, axis=-1)
    ok &= np.all(np.abs(dots) <= 1e-15 * scale)  # zero up to one rounding
    return "kernel pointwise (values, oddness, perpendicularity)", bool(ok), ""


def _suite_kernel_blob_consistency():
    bs = kernels.biot_savart()
    x = np.array([0.7, -0.4])
    exact = kernels.evaluate(bs, x)
    deltas = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    errs = [np.linalg.norm(
        kernels.evaluate(kernels.biot_savart("blob", delta=d), x) - exact)
        for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(errs), 1)[0]
    return "blob -> singular consistency slope >= 1.9", bool(slope >= 1.9), \
        f"slope={slope:.3f}"


def _suite_admissibility():
    bs = kernels.biot_savart()
    r3 = kernels.admissibility_report(bs, 3.0)
    r2 = kernels.admissibility_report(bs, 2.0)
    z = kernels.admissibility_report(kernels.zero_kernel(), 1.5)
    ok = r3.satisfied and not r2.satisfied and z.satisfied and z.margin == math.inf
    for alpha in (1.2, 1.5, 1.8):
        thr = 1.0 / (2.0 - alpha)
        for r in (thr * 0.9, thr, thr * 1.05, thr * 3, math.inf):
            rep = kernels.admissibility_report(kernels.power_law(alpha), r)
            ok &= rep.satisfied == (r > thr)
    prev = False
    for r in (1.5, 2.0, 2.5, 3.0, 6.0, math.inf):
        sat = kernels.admissibility_report(bs, r).satisfied
        ok &= sat or not prev  # once satisfied, stays satisfied
        prev = prev or sat
    return "admissibility thresholds (r>2 and r>1/(2-alpha))", bool(ok), ""


def _suite_multiplier():
    mult = kernels.periodic_multiplier(2.0, 16)
    ok = np.all(mult[0, 0] == 0.0)
    k1 = 2 * math.pi * np.fft.fftfreq(16, d=2 * 2.0 / 16)
    kx, ky = np.meshgrid(k1, k1, indexing="ij")
    div = kx * mult[..., 0] + ky * mult[..., 1]
    ok &= np.allclose(div, 0.0, atol=1e-14)
    ok &= np.allclose(mult[1, 0], [0.0, 1j / k1[1]])
    return "periodic multiplier (mean-free, divergence-free, symbol)", bool(ok), ""


def _suite_periodic_agreement():
    spec = kernels.biot_savart(domain="periodic", half_width=8.0,
                               mode_cutoff=256)
    free = kernels.biot_savart()
    rng_ = np.random.default_rng(3)
    pts = rng_.uniform(-1.0, 1.0, size=(200, 2))
    radii = np.linalg.norm(pts, axis=1)
    pts = pts[(radii <= 1.0) & (radii > 0.02)]
    per = kernels.evaluate(spec, pts)
    ref = kernels.evaluate(free, pts)
    # compensate the documented mean-free background rotation -x_perp/(8 L^2)
    background = np.stack([pts[:, 1], -pts[:, 0]], axis=-1) / (8 * 8.0 ** 2)
    rel = np.linalg.norm(per - background - ref, axis=1) / np.linalg.norm(ref, axis=1)
    return "periodic vs free space within 1e-3 (mean-mode compensated)", \
        bool(rel.max() < 1e-3), f"max rel={rel.max():.2e}"


def _suite_weights():
    ok = weights.lr_norm([1, 1, 1, 1], math.inf) == 1.0
    ok &= abs(weights.lr_norm([1, -1, 1, -1], 2.0) - 1.0) < 1e-15
    ht = weights.heavy_tail().build(1000)
    ok &= abs(weights.lr_norm(ht.values, 2.0) - math.sqrt(1.99)) < 1e-12
    n1, n2 = weights.monotone_embedding(np.array([2.0, 0, 0, 0]), 1, 2)
    ok &= (n1, n2) == (0.5, 1.0)
    rng_ = np.random.default_rng(0)
    for _ in range(50):
        w = rng_.normal(size=rng_.integers(2, 30))
        rr = sorted(rng_.uniform(1, 8, size=2))
        a, b = weights.monotone_embedding(w, rr[0], rr[1])
        ok &= a <= b * (1 + 1e-12)
    ok &= weights.check_wr(weights.heavy_tail(), 2.0, [1000, 10000, 100000]).bounded
    ok &= not weights.check_wr(weights.heavy_tail(), 4.0, [1000, 10000, 100000]).bounded
    ok &= weights.check_wr(weights.constant(1.0), 2.0, [100, 1000, 10000]).bounded
    return "weight norms, monotonicity, W_r verdicts", bool(ok), ""


def _suite_rng():
    batch = rng.step_normals(7, 3, 50, 2)
    ok = np.array_equal(batch[17], rng.normal_for(7, 3, 17, 2))
    ok &= not np.array_equal(rng.step_normals(7, 4, 50, 2), batch)
    draws = rng.step_normals(11, 0, 200000, 1).ravel()
    ok &= abs(draws.mean()) < 0.01 and abs(draws.var() - 1.0) < 0.01
    return "counter-based stream (point query, purpose separation, moments)", \
        bool(ok), ""


def _suite_drift():
    bs = kernels.biot_savart()
    w = weights.WeightSequence(np.array([1.0, 1.0]), math.inf)
    b = particles.drift(np.array([[0.0, 0.0], [1.0, 0.0]]), bs, w)
    ok = np.allclose(b, [[0, -1 / (4 * math.pi)], [0, 1 / (4 * math.pi)]],
                     atol=1e-15)
    rng_ = np.random.default_rng(1)
    pos = rng_.normal(size=(400, 2))
    wseq = weights.WeightSequence(np.ones(400), math.inf)
    blob = kernels.biot_savart("blob", delta=0.1)
    bsum = particles.drift(pos, blob, wseq).sum(axis=0)
    ok &= np.all(np.abs(bsum) < 1e-10)
    direct = particles.drift(pos, blob, wseq)
    cl = particles.drift(pos, blob, wseq, "cell_list",
                         cutoff=kernels.decay_radius(blob, 1e-14))
    ok &= np.max(np.abs(direct - cl)) < 1e-12
    return "drift (two-body value, antisymmetry, cell list)", bool(ok), ""


def _suite_noise_variance(fast):
    n = 20000 if fast else 100000
    law = particles.InitialLaw("gaussian", sigma=1.0)
    config = particles.SimConfig(
        n=n, dt=0.01, t_end=0.01, kernel=kernels.zero_kernel(),
        weights=weights.constant().build(n), seed=5, initial=law)
    state = particles.ParticleState(particles.sample_initial(law, n, 5), 0.0, 0)
    new = particles.step(state, config)
    incr = new.positions - state.positions
    var = incr.var(axis=0)
    lo, hi = (0.0195, 0.0205) if fast else (0.0198, 0.0202)
    ok = np.all(var > lo) and np.all(var < hi)
    det = particles.simulate(config)
    det2 = particles.simulate(config)
    ok &= np.array_equal(det.positions, det2.positions)
    return "noise variance 2dt and bitwise determinism", bool(ok), \
        f"var={var}"


def _suite_measures():
    grid = measures.grid_from_function(
        lambda x: np.exp(-np.sum(x * x, -1) / 2) / (2 * math.pi), 8.0, 256)
    ok = abs(measures.fisher_estimate(grid) - 2.0) < 1e-4
    ok &= abs(measures.entropy_estimate(grid) + math.log(2 * math.pi * math.e)) < 1e-3
    mu = measures.SignedEmpiricalMeasure(np.array([[0.0, 0.0], [1.0, 0.0]]),
                                         np.array([1.0, -0.5]))
    ok &= measures.pair(mu, lambda x: np.asarray(x)[..., 0]) == -0.5
    ok &= math.isclose(measures.gamma_moment(np.array([[0.0, math.sqrt(3)]]), 0.5),
                       math.sqrt(2), rel_tol=1e-14)
    return "grid functionals and signed pairings", bool(ok), ""


def _suite_pairings():
    expected = {2: 1, 3: 3, 4: 3, 5: 15, 6: 15, 7: 105, 8: 105, 9: 945,
                10: 945, 11: 10395, 12: 10395}
    ok = all(measures.count_pairings(n) == c for n, c in expected.items())
    ok &= all(len(measures.enumerate_pairings(n)) == expected[n]
              for n in range(2, 9))
    ok &= all(measures.pair_multiplicity_check(n) for n in range(4, 9))
    y_minus, y_plus = measures.rotate_pair(np.array([1.0, 2.0]),
                                           np.array([1.0, 2.0]))
    ok &= np.allclose(y_minus, 0) and np.allclose(y_plus, math.sqrt(2) * np.array([1, 2]))
    return "pairing combinatorics and pair rotation", bool(ok), ""


def _suite_azuma(fast):
    n = 500 if fast else 1000
    marg = measures.GaussianMarginal((0.0, 0.0), 1.0)
    spec = measures.ProductLawSpec((marg,) * n, weights.constant().build(n))
    phi = harness.phi_dictionary()[-2]  # tanh_x0, sup norm 1
    rep = measures.azuma_gap(spec, phi, 1.0, 1000, 0.2, seed=9)
    ok = rep.frequency <= rep.bound + 3 * rep.stderr
    return "martingale concentration bound", bool(ok), \
        f"freq={rep.frequency} bound={rep.bound:.3e}"


def _suite_spectral(fast):
    m = 64
    cfg = spectral.PdeConfig(modes=m, half_width=8.0, dt=1e-3)
    v0 = measures.grid_from_function(
        lambda x: np.exp(-np.sum(x * x, -1)) / (2 * math.pi), 8.0, m)
    g0 = measures.grid_from_function(
        lambda x: np.exp(-np.sum(x * x, -1) / 2) / (2 * math.pi), 8.0, m)
    res = spectral.solve(v0, g0, cfg, [0.05])
    steps = res.ledger["steps"]
    dm_v = max(abs(s["mass_v"] - steps[0]["mass_v"]) for s in steps)
    dm_g = max(abs(s["mass_g"] - steps[0]["mass_g"]) for s in steps)
    ok = dm_v < 1e-12 and dm_g < 1e-12
    l2 = [s["l2_g"] for s in steps]
    ok &= all(b <= a + 1e-8 * cfg.dt for a, b in zip(l2, l2[1:]))
    if not fast:
        err = _oseen_error(256, 8.0, 2e-3)
        ok &= err < 1e-3
        return "conservation, L2 dissipation, Oseen oracle", bool(ok), \
            f"oseen rel L2 err={err:.2e}"
    return "conservation and L2 dissipation", bool(ok), ""


def _oseen_error(m, half, dt, t0=0.5, t1=1.0):
    def oseen(t):
        def fn(x):
            r2 = np.sum(x * x, axis=-1)
            return np.exp(-r2 / (4 * t)) / (4 * math.pi * t)
        return fn
    v0 = measures.grid_from_function(oseen(t0), half, m)
    g0 = measures.grid_from_function(oseen(t0), half, m)
    cfg = spectral.PdeConfig(modes=m, half_width=half, dt=dt)
    res = spectral.solve(v0, g0, cfg, [t1 - t0])
    ref = measures.grid_from_function(oseen(t1), half, m).values
    got = res.states[-1].v_field()
    return float(np.sqrt(np.sum((got - ref) ** 2) / np.sum(ref ** 2)))


def _suite_tightness():
    times = np.linspace(0.0, 1.0, 9)
    pos = times[:, None, None] * np.array([[[1.0, 0.0]]])
    traj = particles.Trajectory(times, np.arange(9), pos.reshape(9, 1, 2))
    stat = harness.tightness_statistic(traj, np.array([1.0]), alpha=0.75)
    ok = abs(stat - 1.0) < 1e-12  # T^0.75 at T=1 plus |X(0)|^... = 0
    return "tightness statistic on the linear path", bool(ok), f"stat={stat}"


def run_suites(fast=True):
    suites = [
        _suite_kernel_pointwise(),
        _suite_kernel_blob_consistency(),
        _suite_admissibility(),
        _suite_multiplier(),
        _suite_periodic_agreement(),
        _suite_weights(),
        _suite_rng(),
        _suite_drift(),
        _suite_noise_variance(fast),
        _suite_measures(),
        _suite_pairings(),
        _suite_azuma(fast),
        _suite_spectral(fast),
        _suite_tightness(),
    ]
    return suites
