import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import BOX, GAUSS, bump, setup
from nldiff import BoundaryData, Field, SolverConfig, _backend, _pure, solve
from nldiff.operator import Operator

core = pytest.importorskip("nldiff._core")


@settings(max_examples=30, deadline=None)
@given(rows=st.integers(1, 4), n=st.integers(1, 300), J=st.integers(0, 40), seed=st.integers(0, 2**31))
def test_correlate_matches_fallback(rows, n, J, seed):
    rng = np.random.default_rng(seed)
    ext = rng.normal(size=(rows, n + 2 * J))
    w = rng.random(2 * J + 1)
    a, b = np.empty((rows, n)), np.empty((rows, n))
    core.correlate(ext, w, 0, a)
    _pure.correlate(ext, w, 0, b)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), first=st.integers(0, 10**9), count=st.integers(1, 3000),
       absorbing=st.booleans(), reflect=st.booleans(), t=st.sampled_from([0.0, 0.3, 1.0, 4.0]))
def test_walk_is_bit_identical(seed, first, count, absorbing, reflect, t):
    from nldiff.stochastic import _cdf, poisson_cdf
    k, g = setup(BOX, h=0.05)
    start = _cdf(Field.from_function(g, bump()).closure_values)
    args = (np.uint64(seed), first, count, start, poisson_cdf(t), _cdf(k.weights), k.J, g.n,
            absorbing, reflect)
    for x, y in zip(core.walk(*args), _pure.walk(*args)):
        assert x.dtype == y.dtype
        assert np.array_equal(x, y)


def test_solver_backends_agree():
    k, g = setup(GAUSS)
    u0 = Field.from_function(g, bump())
    cfg = SolverConfig(dt=0.01, T=0.5, store_every=10)
    ops = {name: Operator(g, k, BoundaryData.zero(), backend=name) for name in ("cython", "python")}
    a = ops["cython"].apply(u0.closure_values, 0.0)
    b = ops["python"].apply(u0.closure_values, 0.0)
    assert np.abs(a - b).max() <= 1e-14
    run = solve(u0, BoundaryData.zero(), k, cfg)
    assert run.final.sup() > 0


def test_environment_selects_fallback():
    env = dict(os.environ, NLDIFF_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import nldiff; print(nldiff.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert _backend.get("python") is _pure
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_thread_cap_from_environment(monkeypatch):
    monkeypatch.setenv("NLDIFF_THREADS", "3")
    assert _backend.threads() == 3
    monkeypatch.setenv("NLDIFF_THREADS", "0")
    assert _backend.threads() == 1
