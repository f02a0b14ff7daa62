import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from nldiff import Kernel, KernelSpec, build_kernel, mass_on_set


def test_box_h_half_gives_five_equal_weights():
    k = build_kernel(KernelSpec.box(-1, 1), 0.5)
    # density 1/2 times cell width 1/2 at the five offsets -1..1
    np.testing.assert_allclose(k.weights, [0.2] * 5, rtol=0, atol=1e-15)
    assert k.J == 2
    assert k.weights.sum() == pytest.approx(1.0, abs=1e-15)


def test_indicator_support_stays_inside_interval():
    h = 0.01
    k = build_kernel(KernelSpec.indicator(-0.5, 0.5), h)
    z = k.offsets[k.weights > 0]
    assert np.all(np.abs(z) <= 0.5 + h / 2)
    # open interval: the end offsets are excluded
    assert np.abs(z).max() == pytest.approx(0.49)


def test_gaussian_tail_and_mass():
    k = build_kernel(KernelSpec.gaussian(1.0, tail_tol=1e-8), 0.01)
    assert k.truncated_mass <= 1e-8
    assert abs(k.weights.sum() - 1.0) <= 1e-14


def test_mass_on_set_extremes_and_half():
    k = build_kernel(KernelSpec.box(-1, 1), 0.01)
    assert mass_on_set(k, lambda z: np.ones_like(z, dtype=bool)) == 1.0
    assert mass_on_set(k, lambda z: np.zeros_like(z, dtype=bool)) == 0.0
    cell = k.weights.max()
    assert abs(mass_on_set(k, lambda z: z > 0) - 0.5) <= cell


@pytest.mark.parametrize("spec,exact", [
    (KernelSpec.box(-1, 1), 0.5 * 0.8),
    (KernelSpec.gaussian(1.0), 0.5 * (erf(0.9 / math.sqrt(2)) - erf(0.1 / math.sqrt(2)))),
])
def test_refinement_converges_at_first_order(spec, exact):
    # mass of [0.1, 0.9) at h, h/2, h/4; the ends sit on every lattice
    errs = []
    for h in (0.1, 0.05, 0.025):
        k = build_kernel(spec, h)
        member = lambda z: (z >= 0.1 - 1e-9) & (z < 0.9 - 1e-9)
        errs.append(abs(mass_on_set(k, member) - exact))
    assert errs[-1] < 0.01
    for coarse, fine in zip(errs, errs[1:]):
        assert 1.6 <= coarse / fine <= 2.4


def test_window_mass_full_support_is_exactly_one():
    k = build_kernel(KernelSpec.gaussian(math.sqrt(0.5)), 0.01)
    assert k.window_mass(-k.J, k.J) == 1.0
    assert k.window_mass(-k.J - 5, k.J + 3) == 1.0
    assert k.window_mass(0, -1) == 0.0


def test_from_weights_and_support_radius():
    k = Kernel.from_weights({-1: 0.5, 1: 0.5}, 1.0)
    np.testing.assert_array_equal(k.weights, [0.5, 0.0, 0.5])
    assert k.symmetric_support_radius() == -1
    assert build_kernel(KernelSpec.box(-1, 1), 0.1).symmetric_support_radius() == 10
    assert build_kernel(KernelSpec.indicator(-1, 0), 0.1).symmetric_support_radius() == -1


def test_tabulated_piecewise_constant(tmp_path):
    path = tmp_path / "k.txt"
    np.savetxt(path, np.array([[-0.5, 1.0], [0.0, 2.0], [0.5, 1.0]]))
    k = build_kernel(KernelSpec.from_table(path), 0.2)
    # cells [-0.75,-0.25), [-0.25,0.25), [0.25,0.75) with densities 1, 2, 1
    np.testing.assert_allclose(k.weights, np.array([1, 1, 2, 2, 2, 1, 1]) / 10, atol=1e-15)


@pytest.mark.parametrize("bad", [
    lambda: KernelSpec.box(1, -1),
    lambda: KernelSpec.indicator(0, 0),
    lambda: KernelSpec.gaussian(0.0),
    lambda: KernelSpec("cauchy"),
    lambda: KernelSpec.tabulated([[0.0, -1.0]]),
    lambda: KernelSpec.box(-1, 1, tail_tol=1.5),
    lambda: build_kernel(KernelSpec.box(-1, 1), 0.0),
    lambda: build_kernel(KernelSpec.indicator(0.1, 0.2), 1.0),
])
def test_invalid_inputs_raise(bad):
    with pytest.raises(ValueError):
        bad()


def test_weights_are_read_only():
    k = build_kernel(KernelSpec.box(-1, 1), 0.1)
    with pytest.raises(ValueError):
        k.weights[0] = 1.0


@settings(max_examples=60, deadline=None)
@given(
    family=st.sampled_from(["box", "indicator", "gaussian"]),
    a=st.floats(-2, 0.9), width=st.floats(0.15, 2.0),
    sigma=st.floats(0.05, 1.5), h=st.sampled_from([0.1, 0.05, 0.02, 0.01]),
)
def test_built_kernels_are_probability_vectors(family, a, width, sigma, h):
    if family == "gaussian":
        spec = KernelSpec.gaussian(sigma)
    else:
        spec = KernelSpec(family, a=a, b=a + width)
    k = build_kernel(spec, h)
    assert np.all(k.weights >= 0)
    assert abs(k.weights.sum() - 1.0) <= 1e-14
    assert k.truncated_mass <= spec.tail_tol
