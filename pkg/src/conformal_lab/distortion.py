"""Pointwise distortion of piecewise-linear maps and the two distortion energies.

Conventions: ||Dh||^2 = |h_w|^2 + |h_wbar|^2, J = |h_w|^2 - |h_wbar|^2 and
K = ||Dh||^2 / J, with K = 1 where J = 0.  Triangles with J < 0 are
orientation reversing; their K is reported as +inf and the map is
inadmissible for the energies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, InadmissibleMapError
from .mesh import DiscreteMap, DiskMesh, TriangleLocator, WirtingerDerivs, wirtinger
from .profile import EnergyProfile


@dataclass
class DistortionField:
    h_w: np.ndarray
    h_wbar: np.ndarray
    J: np.ndarray
    normsq: np.ndarray
    K: np.ndarray
    mu: np.ndarray

    @property
    def reversing(self) -> np.ndarray:
        return self.J < 0

    @property
    def admissible(self) -> bool:
        return not np.any(self.J < 0)

    @property
    def K_op(self) -> np.ndarray:
        """Operator-norm distortion (1 + |mu|) / (1 - |mu|)."""
        a = np.abs(self.mu)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.J > 0, (1 + a) / (1 - a), np.where(self.J == 0, 1.0, np.inf))


def distortion(derivs: WirtingerDerivs) -> DistortionField:
    hw, hwb = np.asarray(derivs.h_w), np.asarray(derivs.h_wbar)
    x2, y2 = np.abs(hw) ** 2, np.abs(hwb) ** 2
    J = x2 - y2
    N = x2 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        K = np.where(J > 0, N / J, np.where(J == 0, 1.0, np.inf))
        mu = np.where(hw != 0, hwb / hw, np.nan + 0j)
    K = np.where(hwb == 0, 1.0, K)
    return DistortionField(hw, hwb, J, N, K, mu)


def distortion_of(mesh: DiskMesh, hmap: DiscreteMap) -> DistortionField:
    return distortion(wirtinger(mesh, hmap))


def _require_admissible(field: DistortionField, strict: bool = False) -> None:
    bad = field.J <= 0 if strict else field.J < 0
    if np.any(bad):
        i = int(np.argmin(field.J))
        raise InadmissibleMapError(
            f"triangle {i} has Jacobian {field.J[i]:.3e}", worst_triangle=i, worst_J=float(field.J[i])
        )


def energy_star(mesh: DiskMesh, hmap: DiscreteMap, profile: EnergyProfile) -> float:
    """Sum over triangles of area * A(K) * J."""
    f = distortion_of(mesh, hmap)
    _require_admissible(f)
    return float(np.sum(mesh.areas * profile.eval(f.K) * f.J))


def energy_plain(mesh: DiskMesh, hmap: DiscreteMap, profile: EnergyProfile) -> float:
    """Sum over triangles of area * A(K)."""
    f = distortion_of(mesh, hmap)
    _require_admissible(f)
    return float(np.sum(mesh.areas * profile.eval(f.K)))


def dirichlet_energy(mesh: DiskMesh, hmap: DiscreteMap) -> float:
    f = distortion_of(mesh, hmap)
    return float(np.sum(mesh.areas * f.normsq))


def _boundary_triangles(mesh: DiskMesh) -> np.ndarray:
    """Triangle owning the boundary edge (b_k, b_{k+1}), indexed by k."""
    b = mesh.boundary_ids
    nb = len(b)
    want = {}
    for k in range(nb):
        want[(int(b[k]), int(b[(k + 1) % nb]))] = k
    out = np.full(nb, -1)
    for t, tri in enumerate(mesh.triangles):
        for i in range(3):
            key = (int(tri[i]), int(tri[(i + 1) % 3]))
            if key in want:
                out[want[key]] = t
    return out


def _segment_distance(q, a, b):
    """Distances (nq, nseg) from points to segments and the clamped parameters."""
    d = b - a
    s = ((np.conj(d)[None, :] * (q[:, None] - a[None, :])).real) / np.abs(d[None, :]) ** 2
    s = np.clip(s, 0.0, 1.0)
    return np.abs(q[:, None] - (a[None, :] + s * d[None, :]))


def resample_inverse(mesh: DiskMesh, hmap: DiscreteMap, max_gap: float | None = None) -> DiscreteMap:
    """Sample f = h^{-1} at the vertices of ``mesh``.

    Interior vertices are located in the image triangulation and mapped back
    through the affine inverse of the hit triangle.  If the boundary image
    lies on the unit circle the boundary vertices are handled by inverting
    the piecewise-linear-in-angle circle map.  Vertices not covered by the
    image polygon (the thin segments between boundary chords and the circle)
    use the affine inverse of the nearest boundary triangle, provided they are
    within ``max_gap`` of the image polygon; otherwise :class:`CoverageError`.
    """
    field = distortion_of(mesh, hmap)
    _require_admissible(field, strict=True)
    P = hmap.values
    b = mesh.boundary_ids
    img_b = P[b]
    chords = np.abs(np.roll(img_b, -1) - img_b)
    if max_gap is None:
        max_gap = float(chords.max())

    out = np.empty(mesh.n_vertices, dtype=complex)
    todo = np.ones(mesh.n_vertices, dtype=bool)

    on_circle = np.all(np.abs(np.abs(img_b) - 1) <= 1e-9)
    if on_circle:
        theta = np.angle(mesh.vertices[b])
        psi = np.unwrap(np.angle(img_b))
        if psi[-1] - psi[0] < 0:
            raise InadmissibleMapError("boundary image runs clockwise")
        theta = np.unwrap(theta)
        # periodic extension for interpolation
        psi_ext = np.concatenate([psi - 2 * np.pi, psi, psi + 2 * np.pi])
        th_ext = np.concatenate([theta - 2 * np.pi, theta, theta + 2 * np.pi])
        target = np.angle(mesh.vertices[b])
        target = psi[0] + np.mod(target - psi[0], 2 * np.pi)
        out[b] = np.exp(1j * np.interp(target, psi_ext, th_ext))
        todo[b] = False

    idx = np.flatnonzero(todo)
    q = mesh.vertices[idx]
    loc = TriangleLocator(P, mesh.triangles)
    tri, lam = loc.locate(q)
    hit = tri >= 0
    w = mesh.vertices[mesh.triangles]
    out[idx[hit]] = np.sum(lam[hit] * w[tri[hit]], axis=1)

    miss = idx[~hit]
    if len(miss):
        qm = mesh.vertices[miss]
        dist = _segment_distance(qm, img_b, np.roll(img_b, -1))
        k = np.argmin(dist, axis=1)
        gap = dist[np.arange(len(miss)), k]
        if np.any(gap > max_gap):
            j = int(np.argmax(gap))
            raise CoverageError(
                f"vertex {int(miss[j])} at {qm[j]:.6g} lies {gap[j]:.3e} outside the image "
                f"(allowed {max_gap:.3e}); the map is not onto at this resolution"
            )
        btri = _boundary_triangles(mesh)[k]
        lam = loc.barycentric(btri, qm)
        out[miss] = np.sum(lam * w[btri], axis=1)
    return DiscreteMap(out, mesh.ident)


def duality_gap(mesh: DiskMesh, hmap: DiscreteMap, profile: EnergyProfile,
                max_gap: float | None = None) -> float:
    """|E*_A(h) - E_A(h^{-1})| / E*_A(h) with the inverse resampled on ``mesh``."""
    e_star = energy_star(mesh, hmap, profile)
    e_inv = energy_plain(mesh, resample_inverse(mesh, hmap, max_gap), profile)
    return abs(e_star - e_inv) / e_star


def duality_report(mesh: DiskMesh, hmap: DiscreteMap, profile: EnergyProfile) -> dict:
    field = distortion_of(mesh, hmap)
    e_star = energy_star(mesh, hmap, profile)
    e_inv = energy_plain(mesh, resample_inverse(mesh, hmap), profile)
    qs = [0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0]
    return {
        "energy_star": e_star,
        "energy_plain_of_inverse": e_inv,
        "duality_gap": abs(e_star - e_inv) / e_star,
        "min_J": float(field.J.min()),
        "max_K": float(field.K.max()),
        "K_quantiles": {str(q): float(v) for q, v in zip(qs, np.quantile(field.K, qs))},
    }
