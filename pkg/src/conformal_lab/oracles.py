"""Reference maps with known structure.

Two independent harmonic extensions (cotangent FEM and Poisson-kernel
quadrature) serve as the A(t) = t minimizer, and Mobius maps, rotations and
real-linear maps give closed-form distortion.
"""

from __future__ import annotations

import numpy as np

from .boundary import CircleHomeo, trace_on_mesh
from .errors import DomainError, GeometryError
from .mesh import DiscreteMap, DiskMesh


class OracleMap(DiscreteMap):
    """A :class:`DiscreteMap` tagged with the oracle that produced it."""

    def __init__(self, values, mesh_ref="", kind="", params=None):
        super().__init__(values, mesh_ref)
        self.kind = kind
        self.params = dict(params or {})


def solve_interior_laplace(mesh: DiskMesh, boundary_values: np.ndarray) -> np.ndarray:
    """Discrete harmonic interior values for the given boundary values (``boundary_ids`` order)."""
    u = np.zeros(mesh.n_vertices, dtype=complex)
    u[mesh.boundary_ids] = boundary_values
    I = mesh.interior_ids
    rhs = -(mesh.stiffness[I] @ u)
    try:
        lu = mesh.interior_stiffness_lu
    except RuntimeError as exc:
        raise GeometryError(f"singular stiffness matrix: {exc}") from exc
    sol = lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)
    if not np.all(np.isfinite(sol)):
        raise GeometryError("singular stiffness matrix")
    u[I] = sol
    return u


def harmonic_extension_fem(mesh: DiskMesh, h0: CircleHomeo) -> OracleMap:
    """Exact minimizer of the discrete Dirichlet energy with boundary trace h0."""
    vals = solve_interior_laplace(mesh, trace_on_mesh(h0, mesh))
    return OracleMap(vals, mesh.ident, "harmonic_fem", {"boundary": h0.family})


def poisson_extension(h0: CircleHomeo, points: np.ndarray, n_quad: int = 4096,
                      chunk: int = 512) -> np.ndarray:
    """Trapezoid-rule Poisson integral of exp(i phi) at points strictly inside the disk."""
    theta = 2 * np.pi * np.arange(n_quad) / n_quad
    nodes = np.exp(1j * theta)
    g = np.exp(1j * h0.phi(theta))
    points = np.asarray(points, dtype=complex)
    out = np.empty(points.shape, dtype=complex)
    flat = points.ravel()
    res = out.ravel()
    for s in range(0, len(flat), chunk):
        w = flat[s : s + chunk, None]
        kernel = (1 - np.abs(w) ** 2) / np.abs(nodes[None, :] - w) ** 2
        res[s : s + chunk] = kernel @ g / n_quad
    return res.reshape(points.shape)


def poisson_quadrature(mesh: DiskMesh, h0: CircleHomeo, n_quad: int = 4096) -> OracleMap:
    """Continuum harmonic extension sampled at the vertices (boundary gets the exact trace)."""
    if n_quad < 256:
        raise DomainError("n_quad must be >= 256")
    vals = np.empty(mesh.n_vertices, dtype=complex)
    vals[mesh.boundary_ids] = trace_on_mesh(h0, mesh)
    I = mesh.interior_ids
    vals[I] = poisson_extension(h0, mesh.vertices[I], n_quad)
    return OracleMap(vals, mesh.ident, "poisson_quadrature", {"n_quad": n_quad})


def mobius(a: complex, alpha: float = 0.0):
    """The disk automorphism z -> e^{i alpha} (z - a) / (1 - conj(a) z) as a vectorized callable."""
    a = complex(a)
    if abs(a) >= 1:
        raise DomainError("Mobius parameter needs |a| < 1")
    rot = np.exp(1j * alpha)
    return lambda z: rot * (z - a) / (1 - np.conj(a) * z)


def mobius_map(mesh: DiskMesh, a: complex, alpha: float = 0.0) -> OracleMap:
    vals = mobius(a, alpha)(mesh.vertices)
    # keep boundary vertices exactly on the circle
    b = mesh.boundary_ids
    vals[b] /= np.abs(vals[b])
    return OracleMap(vals, mesh.ident, "mobius", {"a": complex(a), "alpha": float(alpha)})


def rotation_map(mesh: DiskMesh, alpha: float) -> OracleMap:
    return OracleMap(np.exp(1j * alpha) * mesh.vertices, mesh.ident, "rotation", {"alpha": float(alpha)})


def linear_map(mesh: DiskMesh, c: complex) -> OracleMap:
    """z -> z + c conj(z); not a self-map of the disk unless c = 0."""
    z = mesh.vertices
    return OracleMap(z + c * np.conj(z), mesh.ident, "linear", {"c": complex(c)})
