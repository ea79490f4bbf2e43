"""Stationarity diagnostics: inner variations and the two weak forms.

Test fields phi are piecewise linear, vanish near the boundary and have
small gradient, so z + t phi(z) is a diffeomorphism of the disk for |t| <= 1.

Weak form of the inner variation, for f = h^{-1} and A a profile:

    2 int K A'(K) conj(mu) / (1 + |mu|^2) phi_zbar  =  int A(K) phi_z

(d/dt E_A(f o g^t) = 2 Re(LHS - RHS)).  Weak form of the outer variation
h -> h + t conj(psi) for A(t) = t^p:

    int c1(K) h_wbar psi_w  =  int c2(K) h_w psi_wbar,
    c1 = K^(p-1) ((p-1) K + p),  c2 = K^(p-1) ((p-1) K - p).

The ``verbatim`` convention swaps in c1 = K^p ((K+1) p - 1) and
c2 = K^p ((K-1) p - 1) for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distortion import _require_admissible, distortion, distortion_of, energy_star
from .errors import CompositionError, DomainError, UnsupportedProfileError
from .mesh import DiscreteMap, DiskMesh, WirtingerDerivs, wirtinger
from .profile import EnergyProfile, power_profile

FD_STEP = 1e-4
TINY = 1e-300


@dataclass
class TestField:
    __test__ = False  # not a pytest class

    phi: np.ndarray
    grad_bound: float
    delta: float
    seed: int | None = None
    smooth: object = None  # optional callable z -> (phi_w, phi_wbar) of the underlying smooth field

    def derivs(self, mesh: DiskMesh, mode: str = "pl") -> WirtingerDerivs:
        """Per-triangle derivatives of the PL interpolant (``pl``) or of the smooth field at barycenters."""
        if mode == "pl":
            return wirtinger(mesh, DiscreteMap(self.phi, mesh.ident))
        if mode == "smooth":
            if self.smooth is None:
                raise ValueError("this test field carries no smooth derivatives")
            return WirtingerDerivs(*self.smooth(mesh.barycenters))
        raise ValueError(f"unknown derivative mode {mode!r}")

    def max_gradient(self, mesh: DiskMesh) -> float:
        d = self.derivs(mesh)
        return float(np.max(np.abs(d.h_w) + np.abs(d.h_wbar)))


def _bump(r, R):
    """exp(1 - 1/(1 - s)) with s = (r/R)^2 inside r < R, and its s-derivative."""
    b = np.zeros_like(r)
    db = np.zeros_like(r)
    inside = r < R
    s = (r[inside] / R) ** 2
    b[inside] = np.exp(1 - 1 / (1 - s))
    db[inside] = -b[inside] / (1 - s) ** 2
    return b, db


def _trig_field(coef, m, n, R):
    """Bump times sum c exp(i pi (m x + n y)): value and Wirtinger-derivative callables."""

    def waves(z):
        return np.exp(1j * np.pi * (np.outer(z.real, m) + np.outer(z.imag, n)))

    def values(z):
        return _bump(np.abs(z), R)[0] * (waves(z) @ coef)

    def derivs(z):
        wv = waves(z)
        P, Px, Py = wv @ coef, wv @ (1j * np.pi * m * coef), wv @ (1j * np.pi * n * coef)
        b, db = _bump(np.abs(z), R)
        fx = db * 2 * z.real / R**2 * P + b * Px
        fy = db * 2 * z.imag / R**2 * P + b * Py
        return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)

    return values, derivs


def random_test_field(mesh: DiskMesh, seed: int, delta: float = 0.1, grad_bound: float = 0.4) -> TestField:
    """Bump-carried random trigonometric polynomial with max |grad phi| = 0.9 grad_bound.

    The gradient of a complex field is measured per triangle by the
    operator norm |phi_w| + |phi_wbar| of its PL interpolant.
    """
    if not 0 < delta < 0.5:
        raise DomainError("delta must lie in (0, 1/2)")
    if not 0 < grad_bound < 0.5:
        raise DomainError("grad_bound must lie in (0, 1/2)")
    rng = np.random.default_rng(seed)
    z = mesh.vertices
    modes = np.arange(-2, 3)
    m, n = np.meshgrid(modes, modes, indexing="ij")
    m, n = m.ravel(), n.ravel()
    coef = (rng.normal(size=m.size) + 1j * rng.normal(size=m.size)) / (1 + m**2 + n**2)
    phi = _trig_field(coef, m, n, 1 - delta)[0](z)
    phi[mesh.boundary_ids] = 0
    phi[np.abs(z) >= 1 - delta] = 0
    g = TestField(phi, grad_bound, delta, seed).max_gradient(mesh)
    scale = 0.9 * grad_bound / g if g > 0 else 1.0
    return TestField(phi * scale, grad_bound, delta, seed, _trig_field(coef * scale, m, n, 1 - delta)[1])


def _check_field(mesh: DiskMesh, phi: TestField):
    if len(phi.phi) != mesh.n_vertices:
        raise ValueError("test field does not match the mesh")
    if np.any(phi.phi[mesh.boundary_ids] != 0):
        raise ValueError("test field must vanish on the boundary")
    if phi.max_gradient(mesh) > phi.grad_bound * (1 + 1e-12):
        raise ValueError("test field exceeds its gradient bound")


# -- inner variation ---------------------------------------------------------

def compose_with_flow(mesh: DiskMesh, hmap: DiscreteMap, phi: TestField, t: float) -> DiscreteMap:
    """Vertex samples of h(z + t phi(z)) by point location in the mesh."""
    q = mesh.vertices + t * phi.phi
    moved = np.flatnonzero(phi.phi != 0)
    vals = hmap.values.copy()
    if len(moved):
        tri, lam = mesh.locator.locate(q[moved])
        if np.any(tri < 0):
            raise CompositionError("z + t phi(z) leaves the disk")
        vals[moved] = np.sum(lam * hmap.values[mesh.triangles[tri]], axis=1)
    return DiscreteMap(vals, mesh.ident)


def _energy_of_composite(mesh, hmap, profile, phi, t):
    comp = compose_with_flow(mesh, hmap, phi, t)
    f = distortion_of(mesh, comp)
    if np.any(f.J <= 0):
        i = int(np.argmin(f.J))
        raise CompositionError(f"composite map folds triangle {i} (J = {f.J[i]:.3e}) at t = {t:g}")
    return float(np.sum(mesh.areas * profile.eval(f.K) * f.J))


@dataclass
class InnerVariation:
    derivative: float
    derivative_half_step: float
    richardson: float
    energy: float
    t: float


def inner_variation(mesh: DiskMesh, hmap: DiscreteMap, profile: EnergyProfile, phi: TestField,
                    t: float = FD_STEP) -> InnerVariation:
    """Centered differences of E*(h o g^t) at steps t and t/2, plus their Richardson combination."""
    _check_field(mesh, phi)
    e0 = energy_star(mesh, hmap, profile)

    def d(s):
        return (_energy_of_composite(mesh, hmap, profile, phi, s)
                - _energy_of_composite(mesh, hmap, profile, phi, -s)) / (2 * s)

    d1, d2 = d(t), d(t / 2)
    return InnerVariation(d1, d2, (4 * d2 - d1) / 3, e0, t)


def inner_variation_derivative(mesh: DiskMesh, hmap: DiscreteMap, profile: EnergyProfile,
                               phi: TestField) -> float:
    """d/dt E*(h o g^t) at t = 0 with g^t(z) = z + t phi(z), by centered differences."""
    return inner_variation(mesh, hmap, profile, phi).derivative


def induced_velocity_slope(mesh: DiskMesh, hmap: DiscreteMap, profile: EnergyProfile,
                           phi: TestField, t: float = FD_STEP) -> float:
    """<gradient, vertex velocity> with the velocity (h(g^t) - h(g^-t)) / 2t; first-order twin of the inner variation."""
    from .minimizer import EnergyProblem

    vel = (compose_with_flow(mesh, hmap, phi, t).values
           - compose_with_flow(mesh, hmap, phi, -t).values) / (2 * t)
    prob = EnergyProblem(mesh, hmap.values[mesh.boundary_ids], profile)
    g = prob.gradient_full(prob.field(hmap.values[mesh.interior_ids]))
    return float(np.sum((np.conj(g) * vel).real))


# -- weak forms ----------------------------------------------------------------

@dataclass
class WeakFormTerms:
    lhs: complex
    rhs: complex
    mass: float  # sum of |per-triangle terms|, the normalizing scale

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs) / (self.mass + TINY)


def weak_form_15_terms(mesh: DiskMesh, inverse_map: DiscreteMap, profile: EnergyProfile,
                       phi: TestField, mode: str = "pl") -> WeakFormTerms:
    f = distortion_of(mesh, inverse_map)
    _require_admissible(f, strict=True)
    d = phi.derivs(mesh, mode)
    mu = np.where(np.isfinite(f.mu), f.mu, 0)
    a = mesh.areas
    lhs_t = a * 2 * f.K * profile.deriv(f.K) * np.conj(mu) / (1 + np.abs(mu) ** 2) * d.h_wbar
    rhs_t = a * profile.eval(f.K) * d.h_w
    return WeakFormTerms(complex(lhs_t.sum()), complex(rhs_t.sum()),
                         float(np.abs(lhs_t).sum() + np.abs(rhs_t).sum()))


def weak_form_15_residual(mesh: DiskMesh, inverse_map: DiscreteMap, profile: EnergyProfile,
                          phi: TestField, mode: str = "pl") -> float:
    """|LHS - RHS| of the inverse-map weak form, relative to the total size of its integrands.

    ``mode`` selects the test-field derivatives, see :meth:`TestField.derivs`.
    """
    return weak_form_15_terms(mesh, inverse_map, profile, phi, mode).residual


def _power_exponent(p) -> float:
    if isinstance(p, EnergyProfile):
        if p.kind != "power":
            raise UnsupportedProfileError("the outer-variation weak form is only available for A(t) = t^p")
        return float(p.p)
    return float(p)


def outer_coefficients(K, p: float, convention: str = "derived"):
    if convention == "derived":
        base = K ** (p - 1)
        return base * ((p - 1) * K + p), base * ((p - 1) * K - p)
    if convention == "verbatim":
        base = K**p
        return base * ((K + 1) * p - 1), base * ((K - 1) * p - 1)
    raise ValueError(f"unknown convention {convention!r}")


def weak_form_18_terms(mesh: DiskMesh, hmap: DiscreteMap, p, phi: TestField,
                       convention: str = "derived", mode: str = "pl") -> WeakFormTerms:
    p = _power_exponent(p)
    f = distortion_of(mesh, hmap)
    _require_admissible(f, strict=True)
    d = phi.derivs(mesh, mode)
    c1, c2 = outer_coefficients(f.K, p, convention)
    lhs_t = mesh.areas * c1 * f.h_wbar * d.h_w
    rhs_t = mesh.areas * c2 * f.h_w * d.h_wbar
    return WeakFormTerms(complex(lhs_t.sum()), complex(rhs_t.sum()),
                         float(np.abs(lhs_t).sum() + np.abs(rhs_t).sum()))


def weak_form_18_residual(mesh: DiskMesh, hmap: DiscreteMap, p, phi: TestField,
                          convention: str = "derived", mode: str = "pl") -> float:
    """|LHS - RHS| of the outer-variation weak form, relative to the total size of its integrands.

    ``p`` may be a number or a power :class:`EnergyProfile`; other profiles
    raise :class:`UnsupportedProfileError`.
    """
    return weak_form_18_terms(mesh, hmap, p, phi, convention, mode).residual


def outer_variation_fd(mesh: DiskMesh, hmap: DiscreteMap, p: float, psi: TestField,
                       t: float = 1e-6) -> complex:
    """Centered differences of E* along h + t conj(psi) (real part) and h + i t conj(psi) (imaginary part)."""
    prof = power_profile(p)
    base = hmap.values

    def e(v):
        fd = distortion(wirtinger(mesh, DiscreteMap(v, mesh.ident)))
        return float(np.sum(mesh.areas * prof.eval(fd.K) * fd.J))

    c = np.conj(psi.phi)
    dr = (e(base + t * c) - e(base - t * c)) / (2 * t)
    di = (e(base + 1j * t * c) - e(base - 1j * t * c)) / (2 * t)
    return complex(dr, di)


def outer_variation_from_terms(terms: WeakFormTerms) -> complex:
    """The two directional derivatives predicted by the derived weak form: 2 (LHS - RHS)."""
    return 2 * (terms.lhs - terms.rhs)
