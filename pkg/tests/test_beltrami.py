import numpy as np
import pytest
from hypothesis import given, strategies as st

from conformal_lab.beltrami import (BeltramiOp, F_theta, V_and_W, beltrami_residual, eval_B, eval_B_array,
                                    ellipticity_sample, fit_holomorphic, level_curve, level_relation,
                                    level_solve, level_solve_array, monotonicity_check,
                                    quasiregularity_of_difference)
from conformal_lab.errors import DomainError, SingularArgumentError
from conformal_lab.hopf import hopf_field
from conformal_lab.mesh import DiscreteMap, map_from_function
from conformal_lab.profile import power_profile
from conftest import disk, minimizer_of


def test_level_solve_p2_cubic():
    # p = 2, k = 10, x = 10: y (x^2 + y^2) = k (x^2 - y^2) / x
    y = level_solve(2, 10, 10)
    assert y == pytest.approx(0.98093860551, rel=1e-10)
    assert abs(level_relation(2, 10, 10, y)) < 1e-14


def test_level_solve_p1_is_hyperbola():
    assert level_solve(1, 4, 4) == pytest.approx(1.0)
    assert level_solve(1, 4, 1.5) is None


def test_level_solve_domain():
    with pytest.raises(DomainError):
        level_solve(0.5, 1, 1)
    with pytest.raises(DomainError):
        level_solve(2, -1, 1)


@given(st.sampled_from([1.25, 1.5, 2, 3, 5]), st.floats(1e-3, 1e3), st.floats(1e-2, 1e2))
def test_level_solutions_satisfy_relation(p, k, x):
    y = level_solve(p, k, x)
    assert 0 < y < x
    g = abs(level_relation(p, k, x, y))
    if g > 1e-12:
        # the log form is steep as y -> x; then y must at least be the best double
        for nb in (np.nextafter(y, 0), np.nextafter(y, x)):
            if nb < x:
                assert g <= abs(level_relation(p, k, x, nb))


def test_level_curve_shape():
    c = level_curve(2, 10, 3.5, 12, 400)
    assert c.shape == (400, 2)
    assert np.all(np.diff(c[:, 1] / c[:, 0]) < 0)


@pytest.mark.parametrize("p", [1, 1.5, 2, 3])
def test_monotonicity_report_passes(p):
    x = np.geomspace(4 if p == 1 else 0.5, 50, 40)
    rep = monotonicity_check(p, 10, x)
    assert rep.passed, [r for r in rep.rows if not r.passed][:2]


def test_V_and_W():
    V, W = V_and_W(2, 10, 10)
    assert V == pytest.approx(0.098093860551, rel=1e-10)
    assert W == pytest.approx(9.8093860551, rel=1e-10)


def test_eval_B_phase_and_modulus():
    op = BeltramiOp(2, lambda w: 20j)
    xi = 3 * np.exp(0.4j)
    b = eval_B(op, 0.1, xi)
    assert abs(b) == pytest.approx(level_solve(2, 10, 3))
    # h_w conj(h_wbar) must point along Phi
    assert np.angle(xi * np.conj(b)) == pytest.approx(np.pi / 2)


def test_eval_B_zero_phi_and_singular_argument():
    assert eval_B(BeltramiOp(2, lambda w: 0), 0.2, 1.0) == 0
    with pytest.raises(SingularArgumentError):
        eval_B(BeltramiOp(2, lambda w: 1.0), 0.2, 0.0)
    out = eval_B_array(2, np.array([1.0, 1.0]), np.array([0.0, 1.0]), singular="nan")
    assert np.isnan(out[0]) and np.isfinite(out[1])


def test_F_theta_maximized_at_pi():
    theta = np.linspace(0, 2 * np.pi, 721)
    F = F_theta(0.5, 0.3, 1.0, 2.0, theta)
    assert theta[np.argmax(F)] == pytest.approx(np.pi)


def test_ellipticity_small_sample_and_threads():
    a = ellipticity_sample(2, 20000, seed=1, n_theta_tuples=500, chunk=5000)
    b = ellipticity_sample(2, 20000, seed=1, n_theta_tuples=500, chunk=5000, threads=3)
    assert a == b
    assert a["violations"] == 0 and a["theta_fail"] == 0 and a["theta_checked"] == 500
    assert a["max_V"] < 1
    with pytest.raises(DomainError):
        ellipticity_sample(1, 10)


def test_beltrami_self_residual_on_minimizer():
    m = disk(4)
    res = minimizer_of("sine:eps=0.3,m=1", 2, 4)
    br = beltrami_residual(m, res.map, hopf_field(m, res.map, power_profile(2)), 2)
    assert br.mode == "self" and br.max_residual < 1e-10


def test_beltrami_cross_residual_runs():
    m = disk(4)
    res = minimizer_of("sine:eps=0.3,m=1", 2, 4)
    hf = hopf_field(m, res.map, power_profile(2))
    br = beltrami_residual(m, res.map, fit_holomorphic(m, hf.Phi), 2)
    assert br.mode == "cross" and np.isfinite(br.L2_residual)


def test_fit_holomorphic_recovers_polynomial():
    m = disk(4)
    f = fit_holomorphic(m, 1 + 2 * m.barycenters**3)
    assert abs(f(0.5) - (1 + 2 * 0.125)) < 1e-10


def test_quasiregularity_on_affine_pair_sharing_phi():
    # g = z + c conj(z) and h = 2 z + c' conj(z) chosen with the same Hopf value
    m = disk(3)
    p = 2
    g = map_from_function(m, lambda z: z + 0.3 * np.conj(z))
    Phi = hopf_field(m, g, power_profile(p)).Phi[0]
    x = 2.0
    y = level_solve(p, abs(Phi) / p, x)
    h = map_from_function(m, lambda z: x * z + y * np.exp(1j * np.angle(Phi)) * np.conj(z))
    rep = quasiregularity_of_difference(m, g, h, p)
    assert rep["status"] == "ok" and not rep["noise_limited"]
    assert rep["n_checked"] == m.n_triangles == rep["n_inequality_ok"]
    assert rep["per_delta"]["0.1"]["sup_mu_eta"] < 1


def test_quasiregularity_degenerate_cases():
    m = disk(2)
    g = map_from_function(m, lambda z: z)
    assert quasiregularity_of_difference(m, g, g, 2)["status"] == "degenerate: zero difference"
    shifted = DiscreteMap(g.values + 0.1)
    assert quasiregularity_of_difference(m, g, shifted, 2)["status"] == "derivative-degenerate"
