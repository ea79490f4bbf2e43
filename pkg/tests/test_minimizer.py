import numpy as np
import pytest

from conformal_lab.boundary import identity_homeo, rotation, sine_family
from conformal_lab.distortion import energy_star
from conformal_lab.errors import InitError, StallError
from conformal_lab.mesh import DiscreteMap
from conformal_lab.minimizer import (EnergyProblem, MinimizeConfig, energy_gradient, minimize,
                                     perturbed_start, restart_seeds, uniqueness_probe)
from conformal_lab.oracles import harmonic_extension_fem
from conformal_lab.profile import custom_profile, power_profile
from conftest import disk, minimizer_of


def test_config_validation():
    with pytest.raises(ValueError):
        MinimizeConfig(power_profile(2), grad_tol=0)
    with pytest.raises(ValueError):
        MinimizeConfig(power_profile(2), max_iters=0)
    with pytest.raises(ValueError):
        MinimizeConfig(power_profile(2), direction="newton")


@pytest.mark.parametrize("p", [1, 2, 3])
def test_gradient_matches_finite_differences(p):
    m = disk(3)
    h = DiscreteMap(perturbed_start(m, harmonic_extension_fem(m, sine_family(0.2, 2)).values, 1))
    prof = power_profile(p)
    g = energy_gradient(m, h, prof)
    rng = np.random.default_rng(p)
    v = np.zeros(m.n_vertices, complex)
    v[m.interior_ids] = rng.normal(size=len(m.interior_ids)) + 1j * rng.normal(size=len(m.interior_ids))
    t = 1e-6
    fd = (energy_star(m, DiscreteMap(h.values + t * v), prof)
          - energy_star(m, DiscreteMap(h.values - t * v), prof)) / (2 * t)
    assert np.sum((np.conj(g) * v[m.interior_ids]).real) == pytest.approx(fd, rel=1e-6)


def test_rotation_boundary_is_immediately_stationary():
    m = disk(4)
    res = minimize(m, rotation(0.7), MinimizeConfig(power_profile(2)))
    assert res.converged and res.iterations == 0
    assert np.allclose(res.map.values, np.exp(0.7j) * m.vertices, atol=1e-12)


def test_energy_decreases_and_jacobian_stays_positive():
    res = minimizer_of("sine:eps=0.3,m=3", 2, 4)
    energies = [row[1] for row in res.history]
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(energies, energies[1:]))
    assert all(row[3] > 0 for row in res.history)
    assert res.converged and res.min_J > 0


def test_p1_minimizer_is_the_fem_harmonic_extension():
    m = disk(4)
    res = minimize(m, sine_family(0.3, 1), MinimizeConfig(power_profile(1), grad_tol=1e-10))
    harm = harmonic_extension_fem(m, sine_family(0.3, 1)).values
    assert np.max(np.abs(res.map.values - harm)) < 1e-8


def test_perturbed_start_is_seeded_and_feasible():
    m = disk(4)
    harm = harmonic_extension_fem(m, sine_family(0.3, 1)).values
    a, b = perturbed_start(m, harm, 5), perturbed_start(m, harm, 5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, perturbed_start(m, harm, 6))
    assert np.array_equal(a[m.boundary_ids], harm[m.boundary_ids])


def test_restart_seeds_are_reproducible_and_distinct():
    s = restart_seeds(7, 4)
    assert s == restart_seeds(7, 4) and len(set(s)) == 4


def test_max_iters_cap_reports_not_converged():
    res = minimize(disk(4), sine_family(0.3, 3), MinimizeConfig(power_profile(2), grad_tol=1e-12, max_iters=3))
    assert not res.converged and res.iterations == 3


def test_invalid_custom_profile_rejected():
    bad = custom_profile(np.sqrt, lambda t: 0.5 / np.sqrt(t), 1.0)
    with pytest.raises(ValueError):
        minimize(disk(2), identity_homeo(), MinimizeConfig(bad))


def test_uniqueness_probe_small():
    rep = uniqueness_probe(disk(3), sine_family(0.3, 1), MinimizeConfig(power_profile(2), grad_tol=1e-9), 3, seed=3)
    d = rep.as_dict()
    assert d["inits"] == ["harmonic", "perturbed", "perturbed"]
    assert rep.max_pairwise_linf < 1e-6 and not rep.partial
    with pytest.raises(ValueError):
        uniqueness_probe(disk(2), identity_homeo(), MinimizeConfig(power_profile(2)), 1)


def test_energy_problem_rejects_bad_boundary_length():
    m = disk(2)
    with pytest.raises(ValueError):
        EnergyProblem(m, np.ones(3, complex), power_profile(2))
