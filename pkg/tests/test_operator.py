import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import BOX, GAUSS, bump, setup
from nldiff import (BoundaryData, CompatibilityError, Field, Kernel, KernelSpec, Operator, apply_K,
                    build_geometry, extend)
from nldiff.operator import check_compatibility


def three_node():
    k = Kernel.from_weights({-1: 0.5, 1: 0.5}, 1.0)
    return k, build_geometry((0.0, 4.0), k)


def test_three_node_hand_example():
    k, g = three_node()
    u = Field.from_closure(g, [0.0, 1.0, 2.0, 4.0, 0.0])
    out = apply_K(u, BoundaryData.zero(), k)
    np.testing.assert_array_equal(out.interior_values, [0.0, 0.5, -3.0])


@pytest.mark.parametrize("c", [0.0, 1.0, -2.5])
def test_matching_constants_are_annihilated(box_setup, c):
    k, g = box_setup
    u = Field.from_function(g, lambda x: np.full_like(x, c))
    out = apply_K(u, BoundaryData.constant(c), k)
    assert np.abs(out.closure_values).max() <= 1e-14 * max(1.0, abs(c))


def test_affine_data_is_annihilated(box_setup):
    k, g = box_setup
    u = Field.from_function(g, lambda x: 0.3 * x)
    out = apply_K(u, BoundaryData.affine(0.3), k)
    assert np.abs(out.closure_values).max() <= 1e-14


def test_extension_cases(box_setup):
    k, g = box_setup
    u = Field.from_function(g, bump())
    e = extend(u, BoundaryData.zero())
    assert np.array_equal(e.values[g.interior], u.interior_values)
    assert np.all(e.values[g.tags != 0] == 0)
    one = Field.from_function(g, lambda x: np.ones_like(x))
    e = extend(one, BoundaryData.constant(1.0))
    assert np.all(e.values[g.tags != 2] == 1.0) and np.all(e.values[g.tags == 2] == 0.0)
    phi = BoundaryData(lambda x, t: np.full_like(x, t))
    e = extend(Field.zeros(g), phi, t=0.7)
    assert np.all(e.values[g.boundary_mask] == 0.7)


def test_whole_space_mass_is_conserved():
    k, g = setup(BOX, omega=(-5.0, 5.0))
    u = Field.from_function(g, bump(0.3, 2.0))
    out = apply_K(u, BoundaryData.zero(), k)
    assert abs(out.closure_values.sum()) * g.h <= 1e-14


def test_fft_matches_direct():
    k, g = setup(KernelSpec.gaussian(0.3), h=0.001)
    assert k.J > 256
    u = Field.from_function(g, bump(0.1, 0.6))
    phi = BoundaryData.constant(0.0)
    a = apply_K(u, phi, k, method="direct").closure_values
    b = apply_K(u, phi, k, method="fft").closure_values
    auto = Operator(g, k, phi)
    assert auto.method == "fft"
    assert np.abs(a - b).max() <= 1e-12


def test_compatibility_enforced(box_setup):
    k, g = box_setup
    u = Field.from_function(g, lambda x: np.ones_like(x))
    with pytest.raises(CompatibilityError):
        check_compatibility(u, BoundaryData.zero())
    check_compatibility(u, BoundaryData.constant(1.0))


def test_field_invariants():
    k, g = setup(KernelSpec.indicator(-1, 0))
    bad = np.zeros(g.size)
    bad[-1] = 1.0
    with pytest.raises(ValueError):
        Field(g, bad)
    bad = np.zeros(g.size)
    bad[g.pad + 3] = np.nan
    with pytest.raises(ValueError):
        Field(g, bad)


def test_mismatched_lattice_rejected(box_setup):
    k, g = box_setup
    k2, _ = setup(BOX, h=0.02)
    with pytest.raises(ValueError):
        apply_K(Field.zeros(g), BoundaryData.zero(), k2)


small = st.sampled_from([BOX, GAUSS, KernelSpec.indicator(-1, 0), KernelSpec.box(-0.3, 0.8)])
vals = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(spec=small, seed=st.integers(0, 2**32 - 1), c=vals, d=st.floats(0, 3))
def test_sup_bound_and_monotonicity(spec, seed, c, d):
    k, g = setup(spec, h=0.05)
    rng = np.random.default_rng(seed)
    cu = rng.uniform(-2, 2, g.n + 1)
    cu[[0, -1]] = c
    cv = cu + rng.uniform(0, 1, g.n + 1)
    cv[[0, -1]] = c + d
    u, v = Field.from_closure(g, cu), Field.from_closure(g, cv)
    phi, psi = BoundaryData.constant(c), BoundaryData.constant(c + d)
    Ku, Kv = apply_K(u, phi, k).closure_values, apply_K(v, psi, k).closure_values
    sup_u = np.abs(cu).max()
    assert np.abs(Ku).max() <= sup_u + max(sup_u, abs(c)) + 1e-12
    assert np.all(Ku + cu <= Kv + cv + 1e-12)
