"""The Ahlfors-Hopf differential Phi = A'(K) h_w conj(h_wbar) and its holomorphicity defect."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distortion import distortion_of
from .mesh import DiscreteMap, DiskMesh
from .profile import EnergyProfile

RESIDUAL_FLOOR = 1e-14


@dataclass
class HopfField:
    Phi: np.ndarray  # per triangle
    cr_residual: np.ndarray  # per interior vertex (mesh.interior_ids order)
    L1_residual: float
    L2_residual: float
    max_residual: float
    refinement_level: int

    def summary(self) -> dict:
        return {
            "L1_residual": self.L1_residual,
            "L2_residual": self.L2_residual,
            "max_residual": self.max_residual,
            "refinement_level": self.refinement_level,
        }


def hopf_values(mesh: DiskMesh, hmap: DiscreteMap, profile: EnergyProfile) -> np.ndarray:
    f = distortion_of(mesh, hmap)
    return profile.deriv(f.K) * f.h_w * np.conj(f.h_wbar)


def _star_incidence(mesh: DiskMesh):
    """(vertex, triangle) pairs for interior vertices, grouped by vertex."""
    I = mesh.interior_ids
    pos = np.full(mesh.n_vertices, -1)
    pos[I] = np.arange(len(I))
    v = mesh.triangles.ravel()
    t = np.repeat(np.arange(mesh.n_triangles), 3)
    keep = pos[v] >= 0
    return pos[v[keep]], t[keep], len(I)


def complex_linear_misfit(mesh: DiskMesh, samples: np.ndarray):
    """Per interior vertex: area-weighted least-squares fit of a + b w to triangle samples on its star.

    Returns (rms misfit, rms sample magnitude) per interior vertex.
    """
    vi, ti, n = _star_incidence(mesh)
    w = mesh.areas[ti]
    z = mesh.barycenters[ti]
    f = samples[ti]

    def wsum(x):
        out = np.zeros(n, dtype=np.result_type(x, float))
        np.add.at(out, vi, w * x)
        return out

    W = wsum(np.ones_like(w))
    zc = wsum(z) / W
    fc = wsum(f) / W
    dz = z - zc[vi]
    df = f - fc[vi]
    b = wsum(np.conj(dz) * df) / wsum(np.abs(dz) ** 2).real
    misfit = np.sqrt(wsum(np.abs(df - b[vi] * dz) ** 2).real / W.real)
    scale = np.sqrt(wsum(np.abs(f) ** 2).real / W.real)
    return misfit, scale


def hopf_field(mesh: DiskMesh, hmap: DiscreteMap, profile: EnergyProfile) -> HopfField:
    """Phi per triangle plus a per-vertex relative defect from complex-linearity.

    The defect at an interior vertex is the RMS misfit of the best a + b w fit
    over its star, divided by the local RMS of |Phi| plus an absolute floor.
    Summaries are dual-area weighted over interior vertices.
    """
    Phi = hopf_values(mesh, hmap, profile)
    misfit, scale = complex_linear_misfit(mesh, Phi)
    res = misfit / (scale + RESIDUAL_FLOOR)
    va = mesh.vertex_areas[mesh.interior_ids]
    return HopfField(
        Phi,
        res,
        float(np.sum(va * res) / np.sum(va)),
        float(np.sqrt(np.sum(va * res**2) / np.sum(va))),
        float(np.max(res)) if len(res) else 0.0,
        mesh.refinement_level,
    )


def identity_check_26(mesh: DiskMesh, hmap: DiscreteMap, profile: EnergyProfile) -> float:
    """Max relative gap between A'(K) h_w conj(h_wbar) and K A'(K) J conj(mu) / (1 + |mu|^2)."""
    f = distortion_of(mesh, hmap)
    dA = profile.deriv(f.K)
    lhs = dA * f.h_w * np.conj(f.h_wbar)
    mu = np.where(np.isfinite(f.mu), f.mu, 0)
    rhs = f.K * dA * f.J * np.conj(mu) / (1 + np.abs(mu) ** 2)
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    rel = np.where(scale > 0, np.abs(lhs - rhs) / np.where(scale > 0, scale, 1), 0.0)
    return float(rel.max())


def lower_bound_check(mesh: DiskMesh, hmap: DiscreteMap, profile: EnergyProfile) -> dict:
    """The chain |Phi| = K A'(K) J |mu| / (1 + |mu|^2),  K A'(K) >= p A(K) >= p K^p.

    On triangles with |mu| >= 1/2 this gives |Phi| >= (2/5) p K^p J.
    """
    f = distortion_of(mesh, hmap)
    A, dA = profile.eval(f.K), profile.deriv(f.K)
    Phi = dA * f.h_w * np.conj(f.h_wbar)
    amu = np.abs(np.where(np.isfinite(f.mu), f.mu, 0))
    ident = f.K * dA * f.J * amu / (1 + amu**2)
    scale = np.maximum(np.abs(Phi), 1e-300)
    big = amu >= 0.5
    c0 = 0.4 * profile.p
    bound = c0 * f.K**profile.p * f.J
    return {
        "identity_max_rel": float(np.max(np.abs(np.abs(Phi) - ident) / scale)),
        "KdA_minus_pA_min": float(np.min(f.K * dA - profile.p * A)),
        "A_minus_Kp_min": float(np.min(A - f.K**profile.p)),
        "c0": c0,
        "n_large_mu": int(big.sum()),
        "large_mu_bound_holds": bool(np.all(np.abs(Phi[big]) >= bound[big] * (1 - 1e-12))),
    }


def lipschitz_witness(mesh: DiskMesh, hmap: DiscreteMap) -> float:
    """Sup of the operator norm |h_w| + |h_wbar| over triangles not touching the boundary."""
    f = distortion_of(mesh, hmap)
    inner = ~mesh.is_boundary[mesh.triangles].any(axis=1)
    return float(np.max((np.abs(f.h_w) + np.abs(f.h_wbar))[inner]))


def hopf_csv_rows(mesh: DiskMesh, field: HopfField):
    c = mesh.barycenters
    return [(float(c[i].real), float(c[i].imag), float(field.Phi[i].real), float(field.Phi[i].imag))
            for i in range(len(c))]
