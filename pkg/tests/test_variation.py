import numpy as np
import pytest

from conformal_lab.errors import CompositionError, DomainError, UnsupportedProfileError
from conformal_lab.mesh import DiscreteMap, identity_map, map_from_function
from conformal_lab.oracles import harmonic_extension_fem, rotation_map
from conformal_lab.boundary import sine_family
from conformal_lab.distortion import energy_plain, resample_inverse
from conformal_lab.profile import custom_profile, power_profile
from conformal_lab.variation import (TestField, compose_with_flow, induced_velocity_slope, inner_variation,
                                     inner_variation_derivative, outer_coefficients, outer_variation_fd,
                                     outer_variation_from_terms, random_test_field, weak_form_15_residual,
                                     weak_form_15_terms, weak_form_18_residual, weak_form_18_terms)
from conftest import disk, minimizer_of


def test_test_field_properties():
    m = disk(4)
    phi = random_test_field(m, seed=3)
    assert np.all(phi.phi[np.abs(m.vertices) >= 0.9] == 0)
    assert phi.max_gradient(m) == pytest.approx(0.36, rel=1e-12)
    assert np.array_equal(phi.phi, random_test_field(m, seed=3).phi)
    with pytest.raises(DomainError):
        random_test_field(m, 0, delta=0.6)


def test_smooth_and_pl_derivatives_agree_to_mesh_order():
    errs = []
    for level in (3, 4, 5):
        m = disk(level)
        phi = random_test_field(m, seed=1)
        a, b = phi.derivs(m, "pl"), phi.derivs(m, "smooth")
        errs.append(np.max(np.abs(a.h_w - b.h_w)))
    assert errs[0] > errs[1] > errs[2]


def test_composition_with_zero_step_is_identity():
    m = disk(3)
    h = map_from_function(m, lambda z: z + 0.1 * z**2)
    phi = random_test_field(m, seed=0)
    assert np.allclose(compose_with_flow(m, h, phi, 0.0).values, h.values, atol=1e-15)


def test_composition_leaving_disk_fails():
    m = disk(3)
    phi = TestField(np.where(np.abs(m.vertices) < 0.9, 1.0 + 0j, 0), 0.4, 0.1)
    with pytest.raises(CompositionError):
        compose_with_flow(m, identity_map(m), phi, 5.0)


def test_inner_variation_vanishes_for_conformal_maps():
    m = disk(4)
    phi = random_test_field(m, seed=2)
    for h in (identity_map(m), rotation_map(m, 0.6)):
        # the identity composed with the flow is the flow itself, whose energy is stationary at t = 0
        assert abs(inner_variation_derivative(m, h, power_profile(2), phi)) < 1e-6


def test_inner_variation_matches_velocity_slope():
    m = disk(4)
    h = harmonic_extension_fem(m, sine_family(0.3, 3))
    phi = random_test_field(m, seed=4)
    iv = inner_variation(m, h, power_profile(2), phi)
    slope = induced_velocity_slope(m, h, power_profile(2), phi)
    assert abs(iv.derivative) > 1e-4
    assert iv.derivative == pytest.approx(slope, rel=1e-3)


def test_weak_forms_vanish_on_identity():
    m = disk(4)
    phi = random_test_field(m, seed=5)
    h = identity_map(m)
    assert weak_form_15_residual(m, h, power_profile(2), phi) < 1e-14
    assert weak_form_18_residual(m, h, 2, phi) < 1e-14


def test_outer_weak_form_predicts_directional_derivatives():
    m = disk(3)
    h = harmonic_extension_fem(m, sine_family(0.3, 2))
    phi = random_test_field(m, seed=6)
    for p in (1.5, 2, 3):
        pred = outer_variation_from_terms(weak_form_18_terms(m, h, p, phi))
        fd = outer_variation_fd(m, h, p, phi)
        assert abs(pred - fd) <= 1e-6 * abs(fd)


def test_inverse_weak_form_real_part_predicts_derivative():
    # d/dt E_A(f o g^t) = 2 Re(LHS - RHS), up to a discretization error that shrinks with the mesh
    prof = power_profile(2)
    gaps = []
    for level in (4, 5):
        m = disk(level)
        f = resample_inverse(m, harmonic_extension_fem(m, sine_family(0.3, 2)))
        phi = random_test_field(m, seed=7)
        terms = weak_form_15_terms(m, f, prof, phi)
        t = 1e-5
        fd = (energy_plain(m, compose_with_flow(m, f, phi, t), prof)
              - energy_plain(m, compose_with_flow(m, f, phi, -t), prof)) / (2 * t)
        gaps.append(abs(2 * (terms.lhs - terms.rhs).real - fd) / abs(fd))
    assert gaps[1] < gaps[0] and gaps[1] < 0.03


def test_verbatim_coefficients_differ_from_derived():
    K = np.array([1.0, 2.0, 5.0])
    c1, c2 = outer_coefficients(K, 2.0)
    v1, v2 = outer_coefficients(K, 2.0, "verbatim")
    assert np.allclose(c1, K * (K + 2)) and np.allclose(c2, K * (K - 2))
    assert not np.allclose(c1, v1)
    with pytest.raises(ValueError):
        outer_coefficients(K, 2.0, "other")


def test_outer_weak_form_rejects_custom_profiles():
    m = disk(2)
    prof = custom_profile(lambda t: t**2 + t, lambda t: 2 * t + 1, 1.0)
    with pytest.raises(UnsupportedProfileError):
        weak_form_18_residual(m, identity_map(m), prof, random_test_field(m, 0))


def test_minimizer_is_more_stationary_than_harmonic_start():
    m = disk(4)
    res = minimizer_of("sine:eps=0.3,m=3", 2, 4)
    harm = harmonic_extension_fem(m, sine_family(0.3, 3))
    phi = random_test_field(m, seed=8)
    prof = power_profile(2)
    assert abs(inner_variation_derivative(m, res.map, prof, phi)) < 1e-4 * res.energy
    assert weak_form_18_residual(m, res.map, 2, phi, mode="smooth") < \
        0.1 * weak_form_18_residual(m, harm, 2, phi, mode="smooth")
