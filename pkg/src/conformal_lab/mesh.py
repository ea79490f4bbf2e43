"""Triangulations of the closed unit disk and per-triangle Wirtinger derivatives.

Points in the plane are stored as complex numbers throughout.  A
:class:`DiskMesh` is built from a hexagonal fan that is subdivided 1 -> 4
with the new boundary midpoints pushed out radially onto the unit circle.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BoundsError, FormatError, GeometryError, MeshMismatchError

MAX_LEVEL = 10


def cross(u, v):
    """z-component of the planar cross product of complex vectors."""
    return (np.conj(u) * v).imag


@dataclass(eq=False)
class DiskMesh:
    vertices: np.ndarray  # complex, shape (nv,)
    triangles: np.ndarray  # int, shape (nt, 3), counterclockwise
    boundary_ids: np.ndarray  # counterclockwise around the circle
    refinement_level: int

    @property
    def ident(self) -> str:
        return f"diskmesh-L{self.refinement_level}-{self.n_vertices}"

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        w = self.vertices[self.triangles]
        return 0.5 * cross(w[:, 1] - w[:, 0], w[:, 2] - w[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        a = self.signed_areas
        if np.any(a <= 0):
            bad = int(np.argmin(a))
            raise GeometryError(f"triangle {bad} has non-positive area {a[bad]:.3e}")
        return a

    @property
    def total_area(self) -> float:
        return float(np.sum(self.areas))

    @cached_property
    def barycenters(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def is_boundary(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_ids] = True
        return mask

    @cached_property
    def interior_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.is_boundary)

    @cached_property
    def vertex_areas(self) -> np.ndarray:
        """Barycentric dual areas (one third of each incident triangle)."""
        va = np.zeros(self.n_vertices)
        np.add.at(va, self.triangles.ravel(), np.repeat(self.areas / 3.0, 3))
        return va

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique undirected edges and the number of triangles sharing each."""
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    @property
    def max_edge_length(self) -> float:
        e, _ = self.edges
        return float(np.max(np.abs(self.vertices[e[:, 1]] - self.vertices[e[:, 0]])))

    @property
    def mesh_size(self) -> float:
        return self.max_edge_length

    @cached_property
    def wirtinger_operators(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Sparse (nt x nv) operators mapping vertex values to h_w and h_wbar.

        With opposite-edge vectors e_i = w_k - w_j (i, j, k cyclic) and signed
        area A, the barycentric basis has d/dw = -i conj(e_i) / 4A and
        d/dwbar = i e_i / 4A.
        """
        w = self.vertices[self.triangles]
        e = np.stack([w[:, 2] - w[:, 1], w[:, 0] - w[:, 2], w[:, 1] - w[:, 0]], axis=1)
        four_a = 4.0 * self.areas[:, None]
        cw = -1j * np.conj(e) / four_a
        cwbar = 1j * e / four_a
        rows = np.repeat(np.arange(self.n_triangles), 3)
        cols = self.triangles.ravel()
        shape = (self.n_triangles, self.n_vertices)
        Dw = sp.csr_matrix((cw.ravel(), (rows, cols)), shape=shape)
        Dwbar = sp.csr_matrix((cwbar.ravel(), (rows, cols)), shape=shape)
        return Dw, Dwbar

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """P1 stiffness matrix of the integral of grad u . grad v (cotangent weights)."""
        w = self.vertices[self.triangles]
        rows, cols, vals = [], [], []
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            # cot of the angle at vertex i, opposite edge (j, k)
            u, v = w[:, j] - w[:, i], w[:, k] - w[:, i]
            cot = (np.conj(u) * v).real / cross(u, v)
            rows += [self.triangles[:, j], self.triangles[:, k]]
            cols += [self.triangles[:, k], self.triangles[:, j]]
            vals += [-0.5 * cot, -0.5 * cot]
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        off = sp.csr_matrix((vals, (rows, cols)), shape=(self.n_vertices,) * 2)
        diag = -np.asarray(off.sum(axis=1)).ravel()
        return (off + sp.diags(diag)).tocsr()

    @cached_property
    def vertex_stars(self) -> list[np.ndarray]:
        """Triangle indices incident to each vertex, ascending."""
        order = np.argsort(self.triangles.ravel(), kind="stable")
        tri_of = order // 3
        vert_sorted = self.triangles.ravel()[order]
        splits = np.searchsorted(vert_sorted, np.arange(1, self.n_vertices))
        return np.split(tri_of, splits)

    @cached_property
    def interior_stiffness_lu(self):
        """Sparse LU factor of the interior block of :attr:`stiffness`."""
        I = self.interior_ids
        return spla.splu(self.stiffness[I][:, I].tocsc())

    @cached_property
    def locator(self) -> "TriangleLocator":
        return TriangleLocator(self.vertices, self.triangles)


@dataclass(eq=False)
class DiscreteMap:
    values: np.ndarray  # complex, one per vertex
    mesh_ref: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)

    def check_on(self, mesh: DiskMesh) -> None:
        if self.values.shape != (mesh.n_vertices,):
            raise MeshMismatchError(
                f"map has {self.values.shape} values, mesh has {mesh.n_vertices} vertices"
            )
        if self.mesh_ref and self.mesh_ref != mesh.ident:
            raise MeshMismatchError(f"map lives on {self.mesh_ref}, not {mesh.ident}")


@dataclass
class WirtingerDerivs:
    h_w: np.ndarray
    h_wbar: np.ndarray


def _hex_fan() -> DiskMesh:
    angles = 2 * np.pi * np.arange(6) / 6
    verts = np.concatenate([[0.0], np.exp(1j * angles)])
    tris = np.array([[0, 1 + i, 1 + (i + 1) % 6] for i in range(6)])
    return DiskMesh(verts, tris, np.arange(1, 7), 0)


def _subdivide(mesh: DiskMesh) -> DiskMesh:
    tris = mesh.triangles
    nv = mesh.n_vertices
    half = tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 3, 2)
    keys = np.sort(half, axis=2).reshape(-1, 2)
    uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1, 3)
    mids = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    on_boundary = counts == 1
    mids[on_boundary] /= np.abs(mids[on_boundary])
    verts = np.concatenate([mesh.vertices, mids])

    a, b, c = tris.T
    mab, mbc, mca = (nv + inverse).T
    new = np.stack(
        [
            np.stack([a, mab, mca], 1),
            np.stack([mab, b, mbc], 1),
            np.stack([mca, mbc, c], 1),
            np.stack([mab, mbc, mca], 1),
        ],
        axis=1,
    ).reshape(-1, 3)

    bids = np.concatenate([mesh.boundary_ids, nv + np.flatnonzero(on_boundary)])
    ang = np.mod(np.angle(verts[bids]), 2 * np.pi)
    # the vertex at angle 0 may come out as 2*pi - tiny
    ang[ang > 2 * np.pi - 1e-9] = 0.0
    bids = bids[np.argsort(ang, kind="stable")]
    return DiskMesh(verts, new, bids, mesh.refinement_level + 1)


def build_disk_mesh(refinement_level: int) -> DiskMesh:
    """Hexagonal fan refined ``refinement_level`` times.

    Level L has 6 * 2**L boundary vertices at equally spaced angles and
    6 * 4**L triangles.
    """
    if int(refinement_level) != refinement_level or not 0 <= refinement_level <= MAX_LEVEL:
        raise BoundsError(f"refinement_level must be an integer in [0, {MAX_LEVEL}]")
    mesh = _hex_fan()
    for _ in range(int(refinement_level)):
        mesh = _subdivide(mesh)
    return mesh


def identity_map(mesh: DiskMesh) -> DiscreteMap:
    return DiscreteMap(mesh.vertices.copy(), mesh.ident)


def map_from_function(mesh: DiskMesh, fn) -> DiscreteMap:
    """Sample a vectorized complex function at the mesh vertices."""
    return DiscreteMap(np.asarray(fn(mesh.vertices), dtype=complex), mesh.ident)


def wirtinger(mesh: DiskMesh, hmap: DiscreteMap) -> WirtingerDerivs:
    hmap.check_on(mesh)
    Dw, Dwbar = mesh.wirtinger_operators  # raises GeometryError on degenerate triangles
    return WirtingerDerivs(Dw @ hmap.values, Dwbar @ hmap.values)


class TriangleLocator:
    """Point location in a planar triangulation via a uniform bucket grid.

    Queries that fall in no bucket candidate (points on the hull or outside)
    are retried against every triangle before being reported as misses.
    """

    def __init__(self, points, triangles, tol: float = 1e-12):
        self.points = np.asarray(points, dtype=complex)
        self.triangles = np.asarray(triangles)
        self.tol = tol
        w = self.points[self.triangles]
        self._w = w
        self._area2 = cross(w[:, 1] - w[:, 0], w[:, 2] - w[:, 0])
        lo = np.array([self.points.real.min(), self.points.imag.min()])
        hi = np.array([self.points.real.max(), self.points.imag.max()])
        n = max(1, int(np.sqrt(len(self.triangles) / 2.0)))
        self._lo = lo
        self._cell = np.maximum((hi - lo) / n, 1e-300)
        self._n = n
        xs, ys = w.real, w.imag
        ix0, ix1 = self._cells(xs.min(1), 0), self._cells(xs.max(1), 0)
        iy0, iy1 = self._cells(ys.min(1), 1), self._cells(ys.max(1), 1)
        nx, ny = ix1 - ix0 + 1, iy1 - iy0 + 1
        counts = nx * ny
        tri = np.repeat(np.arange(len(self.triangles)), counts)
        local = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        cx = ix0[tri] + local % nx[tri]
        cy = iy0[tri] + local // nx[tri]
        cell = cy * n + cx
        order = np.lexsort((tri, cell))
        self._cell_tris = tri[order]
        self._cell_ptr = np.searchsorted(cell[order], np.arange(n * n + 1))

    def _cells(self, coord, axis):
        return np.clip(((coord - self._lo[axis]) / self._cell[axis]).astype(int), 0, self._n - 1)

    def barycentric(self, tri_ids, q):
        w = self._w[tri_ids]
        lam = np.stack(
            [
                cross(w[:, 1] - q, w[:, 2] - q),
                cross(w[:, 2] - q, w[:, 0] - q),
                cross(w[:, 0] - q, w[:, 1] - q),
            ],
            axis=1,
        )
        return lam / self._area2[tri_ids, None]

    def _best(self, qidx, tris, q):
        lam = self.barycentric(tris, q[qidx])
        score = lam.min(axis=1)
        order = np.lexsort((tris, -score, qidx))
        first = np.ones(len(order), dtype=bool)
        first[1:] = qidx[order][1:] != qidx[order][:-1]
        pick = order[first]
        return qidx[pick], tris[pick], lam[pick], score[pick]

    def locate(self, q):
        """Return (triangle index or -1, barycentric coordinates) per query point."""
        q = np.atleast_1d(np.asarray(q, dtype=complex))
        nq = len(q)
        found = np.full(nq, -1)
        bary = np.zeros((nq, 3))
        inside = (
            (q.real >= self._lo[0] - 1e-12)
            & (q.imag >= self._lo[1] - 1e-12)
            & (q.real <= self._lo[0] + self._n * self._cell[0] + 1e-12)
            & (q.imag <= self._lo[1] + self._n * self._cell[1] + 1e-12)
        )
        cand_q = np.flatnonzero(inside)
        cell = self._cells(q.imag[cand_q], 1) * self._n + self._cells(q.real[cand_q], 0)
        start, stop = self._cell_ptr[cell], self._cell_ptr[cell + 1]
        cnt = stop - start
        qidx = np.repeat(cand_q, cnt)
        offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        tris = self._cell_tris[np.repeat(start, cnt) + offs]
        if len(qidx):
            qi, ti, lam, score = self._best(qidx, tris, q)
            ok = score >= -self.tol
            found[qi[ok]] = ti[ok]
            bary[qi[ok]] = lam[ok]
        miss = np.flatnonzero(found < 0)
        for i in miss:
            lam = self.barycentric(np.arange(len(self.triangles)), np.full(len(self.triangles), q[i]))
            score = lam.min(axis=1)
            t = int(np.argmax(score))
            if score[t] >= -self.tol:
                found[i] = t
                bary[i] = lam[t]
        return found, bary


def write_mesh(mesh: DiskMesh, path) -> None:
    nv, nt, nb = mesh.n_vertices, mesh.n_triangles, len(mesh.boundary_ids)
    lines = [f"diskmesh v1 {nv} {nt} {nb}"]
    lines += [f"{v.real:.17g} {v.imag:.17g}" for v in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [str(b) for b in mesh.boundary_ids]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path, refinement_level: int = -1) -> DiskMesh:
    with open(path) as fh:
        lines = fh.read().split("\n")
    head = lines[0].split()
    if len(head) != 5 or head[:2] != ["diskmesh", "v1"]:
        raise FormatError(f"bad mesh header: {lines[0]!r}")
    nv, nt, nb = map(int, head[2:])
    body = lines[1:]
    verts = np.array([complex(*map(float, s.split())) for s in body[:nv]])
    tris = np.array([list(map(int, s.split())) for s in body[nv : nv + nt]], dtype=int)
    bids = np.array([int(s) for s in body[nv + nt : nv + nt + nb]], dtype=int)
    if len(verts) != nv or len(tris) != nt or len(bids) != nb:
        raise FormatError("mesh file truncated")
    if refinement_level < 0:
        refinement_level = int(round(np.log2(nb / 6))) if nb >= 6 else 0
    return DiskMesh(verts, tris, bids, refinement_level)


def write_map(hmap: DiscreteMap, path) -> None:
    lines = [f"diskmap v1 {len(hmap.values)}"]
    lines += [f"{v.real:.17g} {v.imag:.17g}" for v in hmap.values]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_map(path, mesh_ref: str = "") -> DiscreteMap:
    with open(path) as fh:
        lines = fh.read().split("\n")
    head = lines[0].split()
    if len(head) != 3 or head[:2] != ["diskmap", "v1"]:
        raise FormatError(f"bad map header: {lines[0]!r}")
    nv = int(head[2])
    vals = [complex(*map(float, s.split())) for s in lines[1 : nv + 1] if s.strip()]
    if len(vals) != nv:
        raise FormatError("map file truncated")
    return DiscreteMap(np.array(vals), mesh_ref)
