"""The nine acceptance criteria, one test each, at their stated tolerances."""
import json
import math
import time

import numpy as np
import pytest
from scipy.special import erfc

from conftest import BOX, GAUSS, bump, setup
from nldiff import (BoundaryData, Field, KernelSpec, McConfig, LambdaCondition, SolverConfig, build_geometry,
                    build_kernel, check_bounds, check_lambda_conditions, cli, compare_density,
                    lambda_gamma, positivity_study, simulate, solve, verify_comparison)
from nldiff.evolution import update_ratios


def unit_mass(u):
    return Field(u.geometry, u.values / (u.closure_values.sum() * u.geometry.h))


def test_c1_stationary_linear(report):
    start = time.perf_counter()
    k, g = setup(BOX, omega=(-10.0, 10.0))
    u0 = Field.from_function(g, lambda x: 0.3 * x)
    run = solve(u0, BoundaryData.affine(0.3), k, SolverConfig(dt=0.01, T=1.0, store_every=100))
    # every closure node sits at least R = pad cells from the pad edge
    drift = float(np.abs(run.final.closure_values - u0.closure_values).max())
    elapsed = time.perf_counter() - start
    ok = drift <= 1e-8 and elapsed < 5
    report("C1 stationary linear solution", ok, f"drift {drift:.2e}, {elapsed:.2f} s")
    assert ok


def test_c2_picard_cross_oracle(report):
    start = time.perf_counter()
    k, g = setup(GAUSS)
    u0 = Field.from_function(g, bump())
    cfg = dict(dt=1e-3, T=0.25, store_every=1)
    a = solve(u0, BoundaryData.zero(), k, SolverConfig(**cfg))
    b = solve(u0, BoundaryData.zero(), k, SolverConfig(mode="picard", picard_tol=1e-13, **cfg))
    diff = float(np.abs(a.closure_array() - b.closure_array()).max())
    ratios = np.concatenate([update_ratios(u)[2:] for u in b.info["updates"]])
    worst = float(ratios.max())
    elapsed = time.perf_counter() - start
    ok = diff <= 1e-6 and worst <= 0.55 and elapsed < 30
    report("C2 Picard/explicit cross-oracle", ok,
           f"sup diff {diff:.2e}, max ratio from iteration 3 {worst:.3f}, {elapsed:.2f} s")
    assert ok


def test_c3_exact_comparison(report):
    start = time.perf_counter()
    k, g = setup(BOX)
    rng = np.random.default_rng(20240601)
    violations, strict = 0, 0
    for _ in range(100):
        c = rng.uniform(-1, 1)
        d = rng.uniform(0, 1) * (rng.random() < 0.7)
        cu = rng.uniform(-1, 1, g.n + 1)
        cv = cu + rng.uniform(0, 1, g.n + 1) * (rng.random(g.n + 1) < 0.5)
        cu[[0, -1]], cv[[0, -1]] = c, c + d
        cfg = SolverConfig(dt=0.5, T=5.0, method="direct")
        a = solve(Field.from_closure(g, cu), BoundaryData.constant(c), k, cfg)
        b = solve(Field.from_closure(g, cv), BoundaryData.constant(c + d), k, cfg)
        rep = verify_comparison(a, b)
        violations += rep.violations
        strict += rep.strict_somewhere
    elapsed = time.perf_counter() - start
    ok = violations == 0 and elapsed < 20
    report("C3 exact discrete comparison", ok,
           f"100 pairs, {violations} violations, {strict} strictly ordered, {elapsed:.2f} s")
    assert ok


def test_c4_lambda_gamma(report):
    start = time.perf_counter()
    notes, ok = [], True
    k, g = setup(BOX)
    for eta in (0.05, 0.1, 0.2):
        r = lambda_gamma(g, k, eta)
        ok &= r.lam == 1.0 and abs(r.gamma - eta / 2) <= 2 * g.h
        notes.append(f"box eta={eta}: lambda {r.lam}, gamma {r.gamma:.4f}")
    k, g = setup(KernelSpec.indicator(-0.5, 0.5))
    for eta in (0.05, 0.1, 0.2, 0.4, 0.49):
        ok &= lambda_gamma(g, k, eta).lam == 1.0
    k, g = setup(GAUSS)
    v = check_lambda_conditions(g, k)
    tail = erfc(2.0)
    for eta in (0.05, 0.1, 0.2):
        r = lambda_gamma(g, k, eta)
        ok &= r.lam <= 1 - tail and r.lam <= v.bound
    ok &= v.kind is LambdaCondition.FORCES_LAMBDA_LT_1
    elapsed = time.perf_counter() - start
    ok &= elapsed < 10
    notes.append(f"gaussian lambda {r.lam:.4f} <= {1 - tail:.4f}; {elapsed:.2f} s")
    report("C4 lambda/gamma", bool(ok), "; ".join(notes))
    assert ok


def test_c5_modulus_envelopes(report):
    start = time.perf_counter()
    out = []
    k, g = setup(GAUSS)
    u0 = Field.from_function(g, bump())
    run = solve(u0, BoundaryData.zero(), k, SolverConfig(dt=0.01, T=5.0, store_every=10))
    lg = [lambda_gamma(g, k, e) for e in (0.05, 0.1)]
    rep = check_bounds(run, lg)
    tol = 5 * (g.h + 0.01) * u0.sup()
    i01 = int(np.flatnonzero(np.isclose(rep.times, 0.1))[0])
    decay = bool(np.all(rep.omega[-1] < rep.omega[i01]))
    ok = rep.tol_quad == tol and rep.violations == 0 and decay
    ok &= all(r.lam < 1 for r in lg)
    out.append(f"gaussian: {rep.violations} violations, omega(0.1, t=0.1) {rep.omega[i01, 1]:.4f}"
               f" -> t=5 {rep.omega[-1, 1]:.4f}")
    k, g = setup(KernelSpec.indicator(-0.5, 0.5))
    u0 = Field.from_function(g, bump())
    run = solve(u0, BoundaryData.zero(), k, SolverConfig(dt=0.01, T=5.0, store_every=10))
    rep2 = check_bounds(run, [lambda_gamma(g, k, e) for e in (0.05, 0.1)])
    ok &= rep2.violations == 0 and all(b == "LAMBDA_EQ_1" for b in rep2.branch)
    elapsed = time.perf_counter() - start
    ok &= elapsed < 30
    out.append(f"concentrated: {rep2.violations} violations; {elapsed:.2f} s")
    report("C5 modulus envelopes", bool(ok), "; ".join(out))
    assert ok


def test_c6_boundary_layer(report, tmp_path):
    start = time.perf_counter()
    status = cli.main(["viscous", "--preset", "boundary-layer", "--epsilons", "1e-1,1e-2,1e-3",
                       "--out", str(tmp_path)])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    res = manifest["results"]
    lines = (tmp_path / "layer.csv").read_text().splitlines()[1:]
    dist = [float(row.split(",")[1]) for row in lines]
    edge = res["limit_boundary_value"]
    elapsed = time.perf_counter() - start
    ok = (status == 0 and len(dist) == 3 and dist[0] > dist[1] > dist[2]
          and res["boundary_max"] == 0.0 and min(edge.values()) > 1e-3 and elapsed < 60)
    report("C6 boundary layer", ok,
           f"sup|u_eps - u| {', '.join(f'{d:.4f}' for d in dist)}; limit edge value "
           f"{edge['left']:.4f}; {elapsed:.2f} s")
    assert ok


def test_c7_positivity_and_counterexample(report):
    start = time.perf_counter()
    k, g = setup(BOX)
    run = solve(Field.from_function(g, bump()), BoundaryData.zero(), k,
                SolverConfig(dt=0.01, T=0.5))
    rep = positivity_study(run, k)
    box_ok = bool(np.all(run.final.closure_values > 1e-12)) and rep.ok
    k, g = setup(KernelSpec.indicator(-1.0, 0.0), omega=(-10.0, 10.0))
    left = Field.from_function(g, bump(-7.0, 2.0))
    run = solve(left, BoundaryData.zero(), k, SolverConfig(dt=0.01, T=5.0, store_every=500))
    right = run.final.closure_values[g.closure_nodes >= 0.0]
    right_ok = bool(np.all(right == 0.0))
    elapsed = time.perf_counter() - start
    ok = box_ok and right_ok and elapsed < 20
    report("C7 positivity and counterexample", ok,
           f"box: all nodes positive by t={rep.all_positive_by}; one-sided kernel: "
           f"max over right half at T=5 is {right.max():.3e}; {elapsed:.2f} s")
    assert box_ok, "box kernel positivity"
    assert right_ok, "right half not identically zero at T = 5"


def test_c8_monte_carlo_oracle(report):
    start = time.perf_counter()
    k, g = setup(BOX)
    u0 = unit_mass(Field.from_function(g, bump()))
    ref = solve(u0, BoundaryData.zero(), k, SolverConfig(dt=1e-3, T=1.0, store_every=10**6)).final
    big = [simulate(u0, k, McConfig(1_000_000, 1.0, seed=12345, workers=w)) for w in (1, 4, 8)]
    same = all(np.array_equal(big[0].counts, m.counts) and big[0].mean_jumps == m.mean_jumps
               for m in big[1:])
    d6 = compare_density(big[0], ref).l1
    d4 = compare_density(simulate(u0, k, McConfig(10_000, 1.0, seed=12345)), ref).l1
    mean = big[0].mean_jumps
    elapsed = time.perf_counter() - start
    ok = d6 <= 0.02 and abs(mean - 1) <= 0.003 and 5 <= d4 / d6 <= 20 and same and elapsed < 120
    report("C8 Monte Carlo oracle", ok,
           f"L1 {d6:.4f}, mean jumps {mean:.6f}, ratio {d4 / d6:.2f}, "
           f"workers 1/4/8 identical {same}; {elapsed:.2f} s")
    assert ok


def test_c9_first_order_convergence(report):
    start = time.perf_counter()
    finals = []
    for h in (0.02, 0.01, 0.005):
        k = build_kernel(GAUSS, h)
        g = build_geometry((-1.0, 1.0), k)
        u0 = Field.from_function(g, bump())
        run = solve(u0, BoundaryData.zero(), k, SolverConfig(dt=h, T=1.0, store_every=10**6))
        finals.append(run.final.closure_values)
    # compare on the coarse nodes
    d1 = np.abs(finals[0] - finals[1][::2]).max()
    d2 = np.abs(finals[1] - finals[2][::2]).max()
    ratio = float(d1 / d2)
    elapsed = time.perf_counter() - start
    ok = 1.7 <= ratio <= 2.5 and elapsed < 60
    report("C9 convergence order", ok, f"self-difference ratio {ratio:.3f}; {elapsed:.2f} s")
    assert ok
